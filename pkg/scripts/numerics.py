"""Numeric kernels shared by the simulator and the accountant.

Complex matrices are plain ``numpy`` arrays (``complex128``); exact rationals are
``fractions.Fraction``. Everything here is a pure function except
:class:`RandomStream`, which owns one generator per ``(seed, stream_id)``.
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import linalg, optimize, special

try:  # pragma: no cover - allows running as script and as package
    from errors import DomainError, RankDeficient, Singular
except ImportError:  # pragma: no cover
    from .errors import DomainError, RankDeficient, Singular

LOGGER = logging.getLogger(__name__)

try:
    RANK_TOL = float(os.environ.get("DOF_RANK_TOL", "1e-9"))
except ValueError:
    RANK_TOL = 1e-9
try:
    SOLVE_TOL = float(os.environ.get("DOF_SOLVE_TOL", "1e-8"))
except ValueError:
    SOLVE_TOL = 1e-8
try:
    COND_LIMIT = float(os.environ.get("DOF_COND_LIMIT", "1e9"))
except ValueError:
    COND_LIMIT = 1e9

RationalLike = Union[int, Fraction]


def as_complex_matrix(values, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Return a finite 2-D complex array, optionally checking its shape."""

    matrix = np.atleast_2d(np.asarray(values, dtype=np.complex128))
    if matrix.ndim != 2:
        raise DomainError(f"expected a matrix, got {matrix.ndim} dimensions")
    if rows is not None and matrix.shape[0] != rows:
        raise DomainError(f"expected {rows} rows, got {matrix.shape[0]}")
    if cols is not None and matrix.shape[1] != cols:
        raise DomainError(f"expected {cols} columns, got {matrix.shape[1]}")
    if not np.all(np.isfinite(matrix)):
        raise DomainError("matrix has non-finite entries")
    return matrix


def rank(m, tol: float = RANK_TOL) -> int:
    """Numerical rank: singular values above ``tol`` times the largest one."""

    if tol < 0:
        raise DomainError("rank tolerance must be nonnegative")
    matrix = np.asarray(m, dtype=np.complex128)
    if matrix.size == 0:
        return 0
    singular_values = linalg.svdvals(matrix)
    largest = singular_values[0]
    if largest == 0:
        return 0
    return int(np.count_nonzero(singular_values > tol * largest))


def condition_number(m) -> float:
    """2-norm condition number; ``inf`` for a singular matrix."""

    matrix = np.asarray(m, dtype=np.complex128)
    if matrix.size == 0:
        return 1.0
    singular_values = linalg.svdvals(matrix)
    if singular_values[-1] == 0:
        return math.inf
    return float(singular_values[0] / singular_values[-1])


def left_null_vector(m) -> np.ndarray:
    """Unit left null vector of an (r+1)×r matrix of full column rank.

    The vector is canonicalized so that its first nonzero entry is real and
    positive; transcripts are then reproducible per seed.
    """

    matrix = as_complex_matrix(m)
    rows, cols = matrix.shape
    if rows != cols + 1:
        raise DomainError(f"left_null_vector needs rows = cols + 1, got {rows}x{cols}")
    if rank(matrix) < cols:
        raise RankDeficient(f"{rows}x{cols} matrix has column rank below {cols}")
    # plain transpose: we want omega^T m = 0, not omega^H m = 0
    basis = linalg.null_space(matrix.T)
    if basis.shape[1] != 1:
        raise RankDeficient(f"left null space has dimension {basis.shape[1]}")
    omega = basis[:, 0]
    omega = omega / np.linalg.norm(omega)
    magnitudes = np.abs(omega)
    leading = int(np.argmax(magnitudes > 1e-12 * magnitudes.max()))
    phase = omega[leading] / magnitudes[leading]
    return omega / phase


def solve_linear(a, b, tol: float = SOLVE_TOL) -> np.ndarray:
    """Solve a full-column-rank system, checking the residual bound.

    A tall system must be consistent: the least-squares solution has to meet
    every equation within ``tol``.
    """

    matrix = as_complex_matrix(a)
    rhs = np.asarray(b, dtype=np.complex128)
    rows, cols = matrix.shape
    if rows < cols:
        raise DomainError(f"solve_linear needs at least as many equations as unknowns, got {rows}x{cols}")
    if rank(matrix) < cols:
        raise Singular(f"{rows}x{cols} system is rank deficient")
    if rows == cols:
        x = linalg.solve(matrix, rhs)
    else:
        x = linalg.lstsq(matrix, rhs)[0]
    scale = 1.0 + (float(np.max(np.abs(rhs))) if rhs.size else 0.0)
    worst = float(np.max(np.abs(matrix @ x - rhs))) if rhs.size else 0.0
    if worst > tol * scale:
        raise Singular(f"residual {worst:.3e} exceeds {tol:.1e}")
    return x


def residual(a, x, b) -> float:
    """Max-abs residual of ``a·x − b``."""

    return float(np.max(np.abs(np.asarray(a) @ np.asarray(x) - np.asarray(b))))


def gamma_fn(x: float) -> float:
    """Gamma function on the positive reals."""

    if x <= 0:
        raise DomainError(f"gamma_fn is defined for x > 0, got {x}")
    return float(special.gamma(x))


def log_gamma(x: float) -> float:
    if x <= 0:
        raise DomainError(f"log_gamma is defined for x > 0, got {x}")
    return float(special.gammaln(x))


def xx_inverse(k: float) -> float:
    """Inverse of f(x) = x^x on [1, ∞)."""

    if k < 1:
        raise DomainError(f"xx_inverse needs k >= 1, got {k}")
    if k == 1:
        return 1.0
    target = math.log(k)
    # (1 + a) ln(1 + a) >= a brackets the root for a = ln k
    upper = 1.0 + target
    return float(
        optimize.brentq(lambda x: x * math.log(x) - target, 1.0, upper, xtol=1e-14)
    )


def fraction_text(value: RationalLike) -> str:
    """Serialize an exact rational as ``"num/den"``."""

    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def lcm_of_denominators(values: Sequence[RationalLike]) -> int:
    result = 1
    for value in values:
        result = math.lcm(result, Fraction(value).denominator)
    return result


@dataclass
class RandomStream:
    """Seeded source of continuous complex draws.

    Identical ``(seed, stream_id)`` pairs reproduce identical draw sequences.
    """

    seed: int
    stream_id: int = 0
    _rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.seed < 0 or self.stream_id < 0:
            raise DomainError("seed and stream_id must be nonnegative")
        sequence = np.random.SeedSequence((int(self.seed), int(self.stream_id)))
        self._rng = np.random.default_rng(sequence)

    def complex_normal(self, shape: Union[int, Tuple[int, ...]]) -> np.ndarray:
        """Independent standard-normal real and imaginary parts."""

        real = self._rng.standard_normal(shape)
        imag = self._rng.standard_normal(shape)
        return real + 1j * imag

    def spawn(self, stream_id: int) -> "RandomStream":
        return RandomStream(self.seed, stream_id)
