import math
from fractions import Fraction

import numpy as np
import pytest

import scripts.numerics as numerics
from scripts.errors import DomainError, RankDeficient, Singular


def test_rank_and_condition_number():
    assert numerics.rank(np.eye(3)) == 3
    assert numerics.rank([[1, 2], [2, 4]]) == 1
    assert numerics.rank(np.zeros((2, 2))) == 0
    assert numerics.condition_number(np.diag([2.0, 1.0])) == pytest.approx(2.0)
    assert numerics.condition_number([[1, 0], [0, 0]]) == math.inf


def test_left_null_vector_annihilates_columns():
    stream = numerics.RandomStream(11)
    m = stream.complex_normal((7, 6))
    omega = numerics.left_null_vector(m)
    assert np.linalg.norm(omega) == pytest.approx(1.0)
    assert np.max(np.abs(omega @ m)) < 1e-10
    first = omega[np.argmax(np.abs(omega) > 1e-12)]
    assert first.imag == pytest.approx(0.0, abs=1e-12)
    assert first.real > 0


def test_left_null_vector_rejects_bad_shapes():
    with pytest.raises(DomainError):
        numerics.left_null_vector(np.ones((3, 3)))
    with pytest.raises(RankDeficient):
        numerics.left_null_vector(np.ones((3, 2)))


def test_solve_linear_recovers_solution_and_flags_singular():
    stream = numerics.RandomStream(5)
    a = stream.complex_normal((4, 4))
    x = stream.complex_normal(4)
    b = a @ x
    solved = numerics.solve_linear(a, b)
    assert np.max(np.abs(solved - x)) < 1e-9
    assert numerics.residual(a, solved, b) < 1e-9
    with pytest.raises(Singular):
        numerics.solve_linear([[1, 1], [1, 1]], [1, 2])
    with pytest.raises(DomainError):
        numerics.solve_linear(np.ones((2, 3)), [1, 2])


def test_solve_linear_tall_systems():
    stream = numerics.RandomStream(6)
    a = stream.complex_normal((9, 6))
    x = stream.complex_normal(6)
    solved = numerics.solve_linear(a, a @ x)
    assert np.max(np.abs(solved - x)) < 1e-9
    # more rows do not help when they repeat a direction
    deficient = np.vstack([a[:, :5], a[:, :5]]) @ np.ones((5, 6))
    with pytest.raises(Singular):
        numerics.solve_linear(deficient, deficient @ x)
    inconsistent = a @ x
    inconsistent[0] += 1.0
    with pytest.raises(Singular):
        numerics.solve_linear(a, inconsistent)


def test_gamma_helpers():
    assert numerics.gamma_fn(5) == pytest.approx(24.0)
    assert numerics.log_gamma(10) == pytest.approx(math.log(362880))
    with pytest.raises(DomainError):
        numerics.gamma_fn(0)


def test_xx_inverse():
    assert numerics.xx_inverse(1) == 1.0
    assert numerics.xx_inverse(4) == pytest.approx(2.0)
    assert numerics.xx_inverse(27) == pytest.approx(3.0)
    root = numerics.xx_inverse(10000)
    assert root ** root == pytest.approx(10000, rel=1e-9)
    with pytest.raises(DomainError):
        numerics.xx_inverse(0.5)


def test_fraction_helpers():
    assert numerics.fraction_text(Fraction(30, 22)) == "15/11"
    assert numerics.fraction_text(3) == "3/1"
    assert numerics.lcm_of_denominators([Fraction(1, 6), Fraction(3, 4), 2]) == 12


def test_random_stream_is_reproducible():
    first = numerics.RandomStream(7, 2).complex_normal(5)
    second = numerics.RandomStream(7, 2).complex_normal(5)
    other = numerics.RandomStream(7, 3).complex_normal(5)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, other)
    assert numerics.RandomStream(7).spawn(4).stream_id == 4
    with pytest.raises(DomainError):
        numerics.RandomStream(-1)
