from __future__ import annotations

from typing import List, Tuple

try:  # pragma: no cover - allows running as script and as package
    from errors import DomainError
except ImportError:  # pragma: no cover
    from ..errors import DomainError

from .models import InterleaverPlan

VARIANTS = ("x3", "general-K", "two-hop")


def sub_blocks(users: int, variant: str) -> List[Tuple[int, int]]:
    """(phase, hop) sub-blocks of one round in transmission order."""

    if variant == "two-hop":
        return [(1, 1), (1, 2), (2, 1), (2, 2)]
    if variant == "x3" and users != 3:
        raise DomainError(f"the x3 plan is for 3 users, got {users}")
    if variant not in VARIANTS:
        raise DomainError(f"unknown interleaver variant {variant!r}")
    order = [(1, hop) for hop in range(1, users + 1)]
    for phase in range(2, users + 1):
        order.extend((phase, hop) for hop in range(phase - 1, users + 1))
    return order


def build_interleaver(users: int, rounds: int, variant: str = "general-K") -> InterleaverPlan:
    """Pipeline ``rounds`` rounds: sub-block ``i`` of round ``b`` runs in block ``b + i``."""

    if rounds < 1:
        raise DomainError(f"need at least one round, got {rounds}")
    order = sub_blocks(users, variant)
    assignment = {
        (phase, hop, round_index): round_index + position
        for round_index in range(1, rounds + 1)
        for position, (phase, hop) in enumerate(order)
    }
    return InterleaverPlan(users, rounds, variant, assignment, rounds + len(order) - 1)
