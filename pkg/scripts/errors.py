from __future__ import annotations

from typing import Optional


class DofError(Exception):
    """Base class for every failure raised by the toolkit."""


class RankDeficient(DofError):
    """A matrix lost rank it should have almost surely (degenerate draw)."""


class Singular(DofError):
    """A square system could not be solved to the residual bound."""


class DomainError(DofError, ValueError):
    """An argument lies outside the domain of an operation."""


class CausalityViolation(DofError):
    """A node tried to use knowledge it cannot have under delayed CSI."""

    def __init__(self, node: str, atom: str, at_slot: int) -> None:
        super().__init__(f"{node} cannot use {atom} at slot {at_slot}")
        self.node = node
        self.atom = atom
        self.at_slot = at_slot


class DecodeFailure(DofError):
    """A destination could not recover its symbols within tolerance."""

    def __init__(self, destination: Optional[str], error: float, detail: str = "") -> None:
        message = f"decode failed at {destination or 'unknown destination'} (error={error:.3e})"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)
        self.destination = destination
        self.error = error


class GroupingError(DofError):
    """Remaining PLC records cannot be partitioned into complete groups."""
