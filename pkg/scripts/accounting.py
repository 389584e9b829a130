"""Exact DoF accounting for the multi-phase delayed-CSI scheme.

All durations and symbol counts are ``Fraction`` values normalized by the number
of information symbols ``N1`` unless an explicit ``n1`` is passed. Floating point
only appears in the gamma-function cross-check and in ``scaling_curve``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Tuple

import pandas as pd

try:  # pragma: no cover - allows running as script and as package
    from errors import DomainError
    from numerics import lcm_of_denominators, log_gamma, xx_inverse
except ImportError:  # pragma: no cover
    from .errors import DomainError
    from .numerics import lcm_of_denominators, log_gamma, xx_inverse

LOGGER = logging.getLogger(__name__)

# slots per order-2 symbol of the external sub-schemes used by the 2-hop schemes
X_CHANNEL_SLOTS_PER_SYMBOL = Fraction(8, 9)
MISO_BC_SLOTS_PER_SYMBOL = Fraction(5, 6)


@dataclass(frozen=True)
class SchemeParams:
    """Users ``K`` and scheduled transmitters ``L`` of the scheme."""

    users: int
    scheduled: int

    def __post_init__(self) -> None:
        if self.users < 3:
            raise DomainError(f"K must be at least 3, got {self.users}")
        if not 3 <= self.scheduled <= self.users:
            raise DomainError(f"L must satisfy 3 <= L <= K={self.users}, got {self.scheduled}")

    @classmethod
    def from_q(cls, q: int, users: int) -> "SchemeParams":
        if not 2 <= q <= users - 1:
            raise DomainError(f"q must satisfy 2 <= q <= K-1={users - 1}, got {q}")
        return cls(users, q + 1)

    @property
    def q(self) -> int:
        return self.scheduled - 1

    @property
    def alpha(self) -> Fraction:
        return Fraction(1, self.q)

    @property
    def batch_size(self) -> int:
        """Symbols per PSIN batch, ``K·L·(L−1)``."""

        return self.users * self.scheduled * (self.scheduled - 1)


@dataclass
class DurationProfile:
    """Normalized hop durations ``T_m^(k)`` and symbol counts ``N_m``."""

    params: SchemeParams
    n1: Fraction
    n_values: List[Fraction]
    matrix: List[List[Fraction]]
    totals: List[Fraction] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.totals:
            hops = self.params.users
            self.totals = [sum((row[k] for row in self.matrix), Fraction(0)) for k in range(hops)]

    def entry(self, phase: int, hop: int) -> Fraction:
        return self.matrix[phase - 1][hop - 1]

    def hop_total(self, hop: int) -> Fraction:
        return self.totals[hop - 1]

    @property
    def max_total(self) -> Fraction:
        return max(self.totals)

    @property
    def spread(self) -> Fraction:
        """Σ_k T^(k): time the round occupies if hops are not interleaved."""

        return sum(self.totals, Fraction(0))

    def is_integral(self) -> bool:
        return all(value.denominator == 1 for row in self.matrix for value in row)

    def as_frame(self) -> pd.DataFrame:
        rows = []
        for k, total in enumerate(self.totals, start=1):
            rows.append(
                {
                    "k": k,
                    "exact": f"{total.numerator}/{total.denominator}",
                    "decimal": float(total),
                }
            )
        return pd.DataFrame(rows)


@dataclass
class DofReport:
    """Theorem-level algebra for one ``K``."""

    users: int
    q_star: int
    t1: Fraction
    t2: Fraction
    dof_relaxed: Fraction
    dof_actual: Fraction
    misobc_upper: Fraction
    t1_float_gamma: float
    q_relaxed: int
    dof_relaxed_best: Fraction
    max_hop_total: Fraction
    spread: Fraction


def lambda_klj(users: int, scheduled: int, j: int) -> Fraction:
    """Ratio ``N_{j+1}/N_j`` of consecutive symbol counts."""

    if not 1 <= j <= users - 1:
        raise DomainError(f"j must satisfy 1 <= j <= K-1={users - 1}, got {j}")
    q = scheduled - 1
    return Fraction((users - j) * (q * (j + 1) - 1), (j + 1) * (q * (users - j) + 1))


def n_sequence(params: SchemeParams, n1: Fraction = Fraction(1)) -> List[Fraction]:
    """``N_1..N_K`` by the step recursion ``N_{m+1} = N_m·Λ(m)``."""

    values = [Fraction(n1)]
    for m in range(1, params.users):
        values.append(values[-1] * lambda_klj(params.users, params.scheduled, m))
    return values


def n_sequence_product(params: SchemeParams, n1: Fraction = Fraction(1)) -> List[Fraction]:
    """``N_1..N_K`` from the closed product form, accumulated as raw integers."""

    users, q = params.users, params.q
    values = [Fraction(n1)]
    numerator, denominator = 1, 1
    for m in range(2, users + 1):
        j = m - 1
        numerator *= (users - j) * (q * (j + 1) - 1)
        denominator *= (j + 1) * (q * (users - j) + 1)
        values.append(Fraction(n1) * Fraction(numerator, denominator))
    return values


def _entry(params: SchemeParams, n_values: List[Fraction], phase: int, hop: int) -> Fraction:
    users, scheduled, q = params.users, params.scheduled, params.q
    n_m = n_values[phase - 1]
    if hop <= phase - 2:
        return Fraction(0)
    if phase == users:
        if hop == users - 1:
            return n_m / users
        if hop == users:
            return n_m
        return Fraction(0)
    if hop == phase - 1:
        return n_m / users
    if hop == phase:
        return n_m * (users * q + 1) / (users * scheduled * q)
    if hop == users:
        return n_m / ((users - phase) * q + 1)
    return n_m / (users * q)


def durations(params: SchemeParams, n1: Fraction = Fraction(1)) -> DurationProfile:
    """Full ``T_m^(k)`` table: PSIN, offloading, AF, generation and final delivery."""

    n_values = n_sequence(params, n1)
    hops = params.users
    matrix = [
        [_entry(params, n_values, phase, hop) for hop in range(1, hops + 1)]
        for phase in range(1, hops + 1)
    ]
    return DurationProfile(params, Fraction(n1), n_values, matrix)


def hop_totals(params: SchemeParams, n1: Fraction = Fraction(1)) -> List[Fraction]:
    """``T^(1)..T^(K)`` in O(K) using a prefix sum of the AF contributions."""

    users, scheduled, q = params.users, params.scheduled, params.q
    n_values = n_sequence(params, n1)
    psin = Fraction(users * q + 1, users * scheduled * q)
    totals: List[Fraction] = []
    prefix = Fraction(0)
    for hop in range(1, users):
        totals.append(n_values[hop - 1] * psin + prefix / (users * q) + n_values[hop] / users)
        prefix += n_values[hop - 1]
    last = sum((n_values[m - 1] / ((users - m) * q + 1) for m in range(1, users)), Fraction(0))
    totals.append(last + n_values[users - 1])
    return totals


def minimal_n1(users: int, scheduled: int) -> int:
    """Smallest ``N1`` giving whole slots everywhere and whole PSIN batches."""

    params = SchemeParams(users, scheduled)
    profile = durations(params)
    values = [value for row in profile.matrix for value in row]
    values.extend(n / params.batch_size for n in profile.n_values[:-1])
    values.append(profile.n_values[-1])
    return lcm_of_denominators(values)


def _check_q(q: int, users: int) -> None:
    if not 2 <= q <= users - 1:
        raise DomainError(f"q must satisfy 2 <= q <= K-1={users - 1}, got {q}")


def t1_exact(q: int, users: int) -> Fraction:
    """Exact hop-K total ``T̄^(K)``.

    Evaluated from the last phase backwards so each step multiplies and adds a
    small rational to the accumulator; this keeps K = 10^4 tractable.
    """

    _check_q(q, users)
    scheduled = q + 1
    accumulator = Fraction(1)  # final delivery, relative to N_K
    for m in range(users - 1, 0, -1):
        accumulator = Fraction(1, (users - m) * q + 1) + lambda_klj(users, scheduled, m) * accumulator
    return accumulator


def t1_gamma(q: int, users: int) -> float:
    """Gamma closed form of ``T̄^(K)``, evaluated through log-gamma."""

    _check_q(q, users)
    alpha = 1.0 / q
    ratio = math.exp(log_gamma(alpha) + log_gamma(users) - log_gamma(users + alpha))
    return (ratio - 1.0 / users) / (q - 1)


def t2(q: int, users: int) -> Fraction:
    """Exact hop-1 total ``T̄^(1)``."""

    _check_q(q, users)
    return Fraction(users * q + 1, q * (q + 1) * users) + Fraction(
        (2 * q - 1) * (users - 1), 2 * users * ((users - 1) * q + 1)
    )


def t2_alpha(alpha: Fraction, users: int) -> Fraction:
    """Hop-1 total written in ``α = 1/(L−1)``."""

    alpha = Fraction(alpha)
    return alpha * (users + alpha) / ((1 + alpha) * users) + (2 - alpha) * (users - 1) / (
        2 * users * (users + alpha - 1)
    )


def misobc_upper(users: int) -> Fraction:
    """``K / H_K``, the MISO broadcast-channel bound."""

    harmonic = sum((Fraction(1, k) for k in range(1, users + 1)), Fraction(0))
    return users / harmonic


def dof_report(users: int) -> DofReport:
    """Search ``q`` in ``[2, K−1]`` for the best ``1/max(t1, t2)``; ties keep the smallest q."""

    if users < 3:
        raise DomainError(f"K must be at least 3, got {users}")
    best: Optional[Tuple[int, Fraction, Fraction, Fraction]] = None
    best_relaxed: Optional[Tuple[int, Fraction]] = None
    for q in range(2, users):
        first, second = t1_exact(q, users), t2(q, users)
        actual = 1 / max(first, second)
        relaxed = 1 / (first + second)
        if best is None or actual > best[3]:
            best = (q, first, second, actual)
        if best_relaxed is None or relaxed > best_relaxed[1]:
            best_relaxed = (q, relaxed)
    q_star, first, second, actual = best
    totals = hop_totals(SchemeParams.from_q(q_star, users))
    report = DofReport(
        users=users,
        q_star=q_star,
        t1=first,
        t2=second,
        dof_relaxed=1 / (first + second),
        dof_actual=actual,
        misobc_upper=misobc_upper(users),
        t1_float_gamma=t1_gamma(q_star, users),
        q_relaxed=best_relaxed[0],
        dof_relaxed_best=best_relaxed[1],
        max_hop_total=max(totals),
        spread=sum(totals, Fraction(0)),
    )
    LOGGER.debug("K=%d q*=%d dof=%s", users, q_star, report.dof_actual)
    return report


def verify_hop_bounds(users: int, scheduled: int) -> Dict[str, object]:
    """Interior-hop bounds: the proven sum bound and the observed max bound."""

    totals = hop_totals(SchemeParams(users, scheduled))
    first, last = totals[0], totals[-1]
    interior = totals[1:-1]
    peak = max(totals)
    return {
        "appendixB_ok": all(total <= first + last for total in interior),
        "remark5_ok": all(total <= max(first, last) for total in interior),
        "max_hop_index": totals.index(peak) + 1,
        "totals": totals,
    }


def scaling_curve(k_values: Iterable[int]) -> pd.DataFrame:
    """DoF against ``f^{-1}(K)`` with ``q`` set to the rounded inverse of ``x^x``."""

    rows = []
    for users in k_values:
        if users < 3:
            raise DomainError(f"K must be at least 3, got {users}")
        f_inv = xx_inverse(users)
        q = min(max(round(f_inv), 2), users - 1)
        dof = 1 / max(t1_exact(q, users), t2(q, users))
        rows.append(
            {
                "K": users,
                "f_inv": f_inv,
                "q": q,
                "dof": float(dof),
                "dof_exact": f"{dof.numerator}/{dof.denominator}" if users <= 100 else "",
                "ratio": float(dof) / f_inv,
            }
        )
    return pd.DataFrame(rows)


@dataclass(frozen=True)
class TwoHopResult:
    t1: Fraction
    t2: Fraction
    dof: Fraction


def two_hop_phase1_durations(n1: Fraction = Fraction(1)) -> Tuple[Fraction, Fraction]:
    """Hop-1 nulling and hop-2 relay-pair time of phase 1 in the 2-hop scheme."""

    n1 = Fraction(n1)
    return Fraction(7, 18) * n1, n1 / 4


def two_hop_3user(beta: Fraction, n1: Fraction = Fraction(1)) -> TwoHopResult:
    """Hop totals of the 3-user 2-hop scheme with a fraction ``beta`` sent over relay pairs."""

    beta = Fraction(beta)
    if not 0 <= beta <= 1:
        raise DomainError(f"beta must lie in [0, 1], got {beta}")
    n1 = Fraction(n1)
    order2 = n1 / 2
    psin, generation = two_hop_phase1_durations(n1)
    # relay-pair share rides the X-channel scheme in hop 1; the rest is offloaded two per slot
    hop1 = psin + X_CHANNEL_SLOTS_PER_SYMBOL * beta * order2 + (1 - beta) * order2 / 2
    hop2 = generation + MISO_BC_SLOTS_PER_SYMBOL * beta * order2 + X_CHANNEL_SLOTS_PER_SYMBOL * (1 - beta) * order2
    return TwoHopResult(hop1, hop2, n1 / max(hop1, hop2))


def beta_star() -> Fraction:
    """Fraction equalizing the two hop totals (both are affine in beta)."""

    at_zero = two_hop_3user(Fraction(0))
    at_one = two_hop_3user(Fraction(1))
    slope = (at_one.t1 - at_zero.t1) - (at_one.t2 - at_zero.t2)
    return (at_zero.t2 - at_zero.t1) / slope


def eta2(n2: Fraction, n_useful: Fraction) -> Fraction:
    """Order-2 efficiency ``N_I / (2 N_2)``."""

    n2, n_useful = Fraction(n2), Fraction(n_useful)
    if n2 <= 0:
        raise DomainError("N2 must be positive")
    if not 0 <= n_useful <= 2 * n2:
        raise DomainError(f"N_I must lie in [0, 2·N2], got {n_useful}")
    return n_useful / (2 * n2)


def x3_order2_counts(n1: Fraction = Fraction(1)) -> Tuple[Fraction, Fraction]:
    """``(N2, N_I)`` of the 3-user 3-hop scheme: direct symbols help once, pairs twice."""

    n1 = Fraction(n1)
    direct, paired = 2 * n1 / 5, n1 / 5
    return direct + paired, direct + 2 * paired


def two_hop_order2_counts(n1: Fraction = Fraction(1)) -> Tuple[Fraction, Fraction]:
    n1 = Fraction(n1)
    return n1 / 2, n1


@dataclass(frozen=True)
class MHopExtension:
    dof: Fraction
    extra_hops: int
    af_hop_total: Fraction
    max_hop_total: Fraction


def m_hop_extension(users: int, hops: int) -> MHopExtension:
    """DoF of the ``M``-hop network when hops beyond ``2K`` only amplify and forward."""

    if hops < 2 * users:
        raise DomainError(f"M must be at least 2K={2 * users}, got {hops}")
    report = dof_report(users)
    params = SchemeParams.from_q(report.q_star, users)
    af_total = sum(n_sequence(params), Fraction(0)) / users
    peak = max(hop_totals(params))
    if af_total > peak:
        raise DomainError(f"AF extension hop total {af_total} exceeds max hop total {peak}")
    return MHopExtension(report.dof_actual, hops - 2 * users, af_total, peak)
