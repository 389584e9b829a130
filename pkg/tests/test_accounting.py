from fractions import Fraction

import pytest

import scripts.accounting as accounting
from scripts.errors import DomainError


def test_scheme_params_domain():
    params = accounting.SchemeParams.from_q(2, 3)
    assert params.scheduled == 3
    assert params.alpha == Fraction(1, 2)
    assert params.batch_size == 18
    with pytest.raises(DomainError):
        accounting.SchemeParams(2, 2)
    with pytest.raises(DomainError):
        accounting.SchemeParams(4, 5)
    with pytest.raises(DomainError):
        accounting.SchemeParams.from_q(3, 3)


def test_three_user_duration_table():
    profile = accounting.durations(accounting.SchemeParams(3, 3), 270)
    assert profile.n_values == [270, 162, 90]
    assert [profile.entry(1, hop) for hop in (1, 2, 3)] == [105, 45, 54]
    assert [profile.entry(2, hop) for hop in (1, 2, 3)] == [54, 63, 54]
    assert [profile.entry(3, hop) for hop in (1, 2, 3)] == [0, 30, 90]
    assert profile.totals == [159, 138, 198]
    assert profile.max_total == 198
    assert profile.spread == 495
    assert profile.is_integral()
    frame = profile.as_frame()
    assert list(frame["exact"]) == ["159/1", "138/1", "198/1"]


def test_normalized_totals_for_three_users():
    totals = accounting.hop_totals(accounting.SchemeParams(3, 3))
    assert totals == [Fraction(53, 90), Fraction(23, 45), Fraction(11, 15)]
    assert accounting.minimal_n1(3, 3) == 90


@pytest.mark.parametrize("users,scheduled", [(4, 3), (5, 4), (7, 3), (12, 6)])
def test_hop_totals_match_full_table(users, scheduled):
    params = accounting.SchemeParams(users, scheduled)
    assert accounting.hop_totals(params) == accounting.durations(params).totals
    assert accounting.n_sequence(params) == accounting.n_sequence_product(params)


def test_lambda_and_n_sequence():
    assert accounting.lambda_klj(3, 3, 1) == Fraction(3, 5)
    assert accounting.lambda_klj(3, 3, 2) == Fraction(5, 9)
    with pytest.raises(DomainError):
        accounting.lambda_klj(3, 3, 3)


def test_t1_t2_closed_forms():
    assert accounting.t1_exact(2, 3) == Fraction(11, 15)
    assert accounting.t2(2, 3) == Fraction(53, 90)
    assert accounting.t2_alpha(Fraction(1, 2), 3) == Fraction(53, 90)
    for users in (5, 10, 25):
        for q in range(2, users):
            exact = accounting.t1_exact(q, users)
            assert exact == accounting.hop_totals(accounting.SchemeParams.from_q(q, users))[-1]
            assert accounting.t1_gamma(q, users) == pytest.approx(float(exact), rel=1e-9)
            assert accounting.t2_alpha(Fraction(1, q), users) == accounting.t2(q, users)
    with pytest.raises(DomainError):
        accounting.t1_exact(1, 3)


@pytest.mark.parametrize(
    "users,dof,upper",
    [
        (3, Fraction(15, 11), Fraction(18, 11)),
        (5, Fraction(315, 193), Fraction(300, 137)),
        (10, Fraction(92378, 43191), Fraction(25200, 7381)),
        (20, Fraction(156, 59), Fraction(62078016, 11167027)),
    ],
)
def test_dof_report_reference_values(users, dof, upper):
    report = accounting.dof_report(users)
    assert report.dof_actual == dof
    assert report.misobc_upper == upper
    assert report.dof_actual < report.misobc_upper
    assert report.dof_relaxed <= report.dof_actual
    assert report.dof_relaxed_best >= report.dof_relaxed


def test_dof_report_three_users():
    report = accounting.dof_report(3)
    assert report.q_star == 2
    assert report.t1 == Fraction(11, 15)
    assert report.t2 == Fraction(53, 90)
    assert report.dof_relaxed == Fraction(90, 119)
    assert report.max_hop_total == Fraction(11, 15)
    with pytest.raises(DomainError):
        accounting.dof_report(2)


def test_hop_bounds():
    verdict = accounting.verify_hop_bounds(3, 3)
    assert verdict["appendixB_ok"]
    assert verdict["remark5_ok"]
    assert verdict["max_hop_index"] == 3
    for users in range(3, 16):
        for scheduled in range(3, users + 1):
            assert accounting.verify_hop_bounds(users, scheduled)["appendixB_ok"]


def test_scaling_curve_is_monotone():
    df = accounting.scaling_curve([10, 100, 1000])
    assert list(df["K"]) == [10, 100, 1000]
    assert list(df["ratio"]) == sorted(df["ratio"])
    assert df["dof"].is_monotonic_increasing
    assert df.loc[2, "dof_exact"] == ""
    with pytest.raises(DomainError):
        accounting.scaling_curve([2])


def test_two_hop_optimum():
    star = accounting.beta_star()
    assert star == Fraction(1, 4)
    result = accounting.two_hop_3user(star)
    assert result.dof == Fraction(16, 11)
    assert result.t1 == result.t2 == Fraction(11, 16)
    assert accounting.two_hop_3user(Fraction(0)).dof == Fraction(36, 25)
    assert accounting.two_hop_phase1_durations(36) == (14, 9)
    with pytest.raises(DomainError):
        accounting.two_hop_3user(Fraction(3, 2))


def test_order2_efficiency():
    assert accounting.eta2(*accounting.x3_order2_counts()) == Fraction(2, 3)
    assert accounting.eta2(*accounting.two_hop_order2_counts()) == 1
    with pytest.raises(DomainError):
        accounting.eta2(1, 3)
    with pytest.raises(DomainError):
        accounting.eta2(0, 0)


def test_m_hop_extension():
    extension = accounting.m_hop_extension(3, 9)
    assert extension.dof == Fraction(15, 11)
    assert extension.extra_hops == 3
    assert extension.af_hop_total == Fraction(29, 45)
    assert extension.af_hop_total <= extension.max_hop_total
    with pytest.raises(DomainError):
        accounting.m_hop_extension(3, 5)
