"""Delayed-CSI knowledge ledger.

Every quantity a node computes is preceded by an :func:`assert_knowledge` call
listing what the computation reads. The rule is the one-slot-delay model: the
network state of slot ``t`` is known everywhere from slot ``t + 1`` on, a node
knows its own data, what it sent and what it heard, and nothing else.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, List, Optional

try:  # pragma: no cover - allows running as script and as package
    from errors import CausalityViolation, DomainError
except ImportError:  # pragma: no cover
    from ..errors import CausalityViolation, DomainError

from .models import NetworkShape, NodeId

LOGGER = logging.getLogger(__name__)

ATOM_KINDS = ("own-message", "own-tx", "own-rx", "global-csi")


@dataclass(frozen=True)
class KnowledgeAtom:
    """One piece of knowledge a computation depends on."""

    kind: str
    slot: Optional[int] = None
    item: Optional[str] = None
    owner: Optional[NodeId] = None

    def __post_init__(self) -> None:
        if self.kind not in ATOM_KINDS:
            raise DomainError(f"unknown knowledge atom kind {self.kind!r}")
        if self.kind == "own-message" and self.item is None:
            raise DomainError("own-message atoms need an item")
        if self.kind != "own-message" and self.slot is None:
            raise DomainError(f"{self.kind} atoms need a slot")

    def describe(self) -> str:
        target = self.item if self.kind == "own-message" else f"slot {self.slot}"
        if self.owner is not None:
            return f"{self.kind}({target} of {self.owner})"
        return f"{self.kind}({target})"


def own_message(item: str, owner: Optional[NodeId] = None) -> KnowledgeAtom:
    return KnowledgeAtom("own-message", item=item, owner=owner)


def own_tx(slot: int, owner: Optional[NodeId] = None) -> KnowledgeAtom:
    return KnowledgeAtom("own-tx", slot=slot, owner=owner)


def own_rx(slot: int, owner: Optional[NodeId] = None) -> KnowledgeAtom:
    return KnowledgeAtom("own-rx", slot=slot, owner=owner)


def global_csi(slot: int) -> KnowledgeAtom:
    return KnowledgeAtom("global-csi", slot=slot)


def csi_through(slots: Iterable[int]) -> List[KnowledgeAtom]:
    """CSI of a set of slots, expressed by its latest slot."""

    slots = list(slots)
    return [global_csi(max(slots))] if slots else []


class KnowledgeLedger:
    """Per-node record of holdings, transmissions and receptions."""

    def __init__(self, shape: NetworkShape) -> None:
        self.shape = shape
        self._holdings: dict[NodeId, set[str]] = defaultdict(set)
        self._tx: dict[NodeId, set[int]] = defaultdict(set)
        self._rx: dict[NodeId, set[int]] = defaultdict(set)
        self.audit: list[dict] = []
        self.checks = 0
        self.violations = 0

    def give(self, node: NodeId, items: Iterable[str]) -> None:
        self._holdings[node].update(items)

    def record_tx(self, node: NodeId, slot: int) -> None:
        self._tx[node].add(slot)

    def record_rx(self, node: NodeId, slot: int) -> None:
        self._rx[node].add(slot)

    def holds(self, node: NodeId, item: str) -> bool:
        return item in self._holdings.get(node, ())

    def legal(self, node: NodeId, atom: KnowledgeAtom, at_slot: int) -> bool:
        if atom.owner is not None and atom.owner != node:
            return False
        if atom.kind == "own-message":
            return self.holds(node, atom.item)
        if atom.slot > at_slot - 1:
            return False
        if atom.kind == "global-csi":
            return True
        log = self._tx if atom.kind == "own-tx" else self._rx
        return atom.slot in log.get(node, ())

    def label(self, node: NodeId) -> str:
        return node.label(self.shape.layers)


def assert_knowledge(
    ledger: KnowledgeLedger,
    node: NodeId,
    needs: Iterable[KnowledgeAtom],
    at_slot: int,
    purpose: str = "",
) -> bool:
    """Check that ``node`` may use every atom in ``needs`` at slot ``at_slot``."""

    needs = list(needs)
    ledger.checks += 1
    for atom in needs:
        if not ledger.legal(node, atom, at_slot):
            ledger.violations += 1
            ledger.audit.append(
                {
                    "node": ledger.label(node),
                    "at_slot": at_slot,
                    "purpose": purpose,
                    "ok": False,
                    "atom": atom.describe(),
                }
            )
            LOGGER.debug("causality violation: %s %s at %d", ledger.label(node), atom.describe(), at_slot)
            raise CausalityViolation(ledger.label(node), atom.describe(), at_slot)
    ledger.audit.append(
        {"node": ledger.label(node), "at_slot": at_slot, "purpose": purpose, "ok": True, "atoms": len(needs)}
    )
    return True
