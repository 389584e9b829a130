from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np

try:  # pragma: no cover - allows running as script and as package
    from errors import DomainError
    from network import KnowledgeAtom, NetworkShape, NodeId
    from numerics import fraction_text
except ImportError:  # pragma: no cover
    from ..errors import DomainError
    from ..network import KnowledgeAtom, NetworkShape, NodeId
    from ..numerics import fraction_text

PROVENANCES = ("original", "offloaded", "regenerated-PLC", "paired-side-info")


@dataclass
class OrderSymbol:
    """Container for a value useful to ``order`` destinations, held at one node."""

    symbol_id: str
    order: int
    dest_set: FrozenSet[int]
    holder: NodeId
    value: complex
    provenance: str = "original"
    needs: Tuple[KnowledgeAtom, ...] = ()
    slot: int = 0
    source: int = 0
    components: Tuple[str, ...] = ()
    weights: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.dest_set = frozenset(self.dest_set)
        if self.provenance not in PROVENANCES:
            raise DomainError(f"unknown provenance {self.provenance!r}")
        if self.order < 1 or len(self.dest_set) != self.order:
            raise DomainError(f"order-{self.order} symbol needs {self.order} destinations, got {sorted(self.dest_set)}")


@dataclass
class PsinBatch:
    """Container for one partial-scheduling/interference-nulling batch.

    ``symbols[ℓ]`` and ``precoders[ℓ]`` are indexed by the scheduled transmitter of
    layer ``hop``; ``dest_sets`` overrides ``dest_set`` per transmitter when every
    destination is scheduled at once.
    """

    users: int
    scheduled: int
    order: int
    dest_set: FrozenSet[int]
    transmitters: Tuple[int, ...]
    symbols: Dict[int, np.ndarray]
    precoders: Dict[int, np.ndarray]
    hop: int
    first_slot: int
    symbol_ids: Dict[int, Tuple[str, ...]] = field(default_factory=dict)
    dest_sets: Dict[int, FrozenSet[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        width = self.block_length
        if len(self.transmitters) != self.scheduled or len(set(self.transmitters)) != self.scheduled:
            raise DomainError(f"need {self.scheduled} distinct transmitters, got {self.transmitters}")
        for index in self.transmitters:
            if not 1 <= index <= self.users:
                raise DomainError(f"transmitter {index} outside 1..{self.users}")
            vector = np.asarray(self.symbols.get(index), dtype=np.complex128)
            if vector.shape != (width,):
                raise DomainError(f"transmitter {index} needs {width} symbols, got shape {vector.shape}")
            self.symbols[index] = vector
            precoder = np.asarray(self.precoders.get(index), dtype=np.complex128)
            if precoder.shape != (width + 1, width):
                raise DomainError(f"precoder of transmitter {index} must be {width + 1}x{width}")
            self.precoders[index] = precoder

    @property
    def block_length(self) -> int:
        return self.users * (self.scheduled - 1)

    @property
    def size(self) -> int:
        return self.users * self.scheduled * (self.scheduled - 1)

    @property
    def slot_range(self) -> range:
        return range(self.first_slot, self.first_slot + self.block_length + 1)

    def dest_of(self, transmitter: int) -> FrozenSet[int]:
        return self.dest_sets.get(transmitter, self.dest_set)


@dataclass
class PartialLinearCombination:
    """Residual contribution of ``source`` after nulling ``nulled`` at ``receiver``."""

    receiver: int
    nulled: int
    source: int
    dest_set: FrozenSet[int]
    coeff_row: np.ndarray
    value: complex


@dataclass
class NulledCombination:
    receiver: int
    nulled: int
    omega: np.ndarray
    value: complex
    parts: Dict[int, PartialLinearCombination]


@dataclass
class PsinResult:
    batch: PsinBatch
    transmitted: np.ndarray
    received: np.ndarray
    combos: Dict[Tuple[int, int], NulledCombination]

    @property
    def slots(self) -> List[int]:
        return list(self.batch.slot_range)


@dataclass
class OffloadResult:
    slot: int
    parents: List[Optional[OrderSymbol]]
    children: List[OrderSymbol]
    mixing: np.ndarray
    transmitted: np.ndarray
    received: np.ndarray


@dataclass
class RemainingPlc:
    """Side information of one hop-K slot that no single destination can use yet."""

    record_id: str
    generator: NodeId
    source: int
    available_at: int
    desired_by: FrozenSet[int]
    value: complex
    slot: int
    needs: Tuple[KnowledgeAtom, ...] = ()

    @property
    def group_key(self) -> FrozenSet[int]:
        return frozenset(self.desired_by | {self.available_at})


@dataclass
class HopObservation:
    """One hop-K slot of a generation step: what arrived and how it splits by source."""

    slot: int
    nulled: int
    received: np.ndarray
    pieces: Dict[int, np.ndarray]
    generators: Dict[int, NodeId]
    needs: Dict[int, Tuple[KnowledgeAtom, ...]]
    tag: str


@dataclass
class GenerationResult:
    direct: List[OrderSymbol]
    remaining: List[RemainingPlc]
    received: Dict[int, List[Tuple[int, complex]]]


@dataclass
class DeliveryResult:
    slots: List[int]
    symbols: List[OrderSymbol]
    delivered: Dict[int, np.ndarray]
    received: np.ndarray


@dataclass
class InterleaverPlan:
    """Container for the block assignment of every (phase, hop, round) sub-block."""

    users: int
    rounds: int
    variant: str
    assignment: Dict[Tuple[int, int, int], int]
    block_count: int

    def blocks(self) -> Dict[int, List[Tuple[int, int, int]]]:
        by_block: Dict[int, List[Tuple[int, int, int]]] = defaultdict(list)
        for key, block in sorted(self.assignment.items(), key=lambda item: (item[1], item[0])):
            by_block[block].append(key)
        return dict(by_block)

    def collisions(self) -> List[Tuple[int, Tuple[int, int]]]:
        """(block, (phase, hop)) pairs that occur more than once in one block."""

        found = []
        for block, keys in self.blocks().items():
            counts = Counter((phase, hop) for phase, hop, _ in keys)
            found.extend((block, key) for key, count in sorted(counts.items()) if count > 1)
        return found

    def hop_load(self, block: int, durations: Dict[Tuple[int, int], Fraction]) -> Dict[int, Fraction]:
        """Per-hop busy time of one block given T_m^(k) keyed by (phase, hop)."""

        load: Dict[int, Fraction] = defaultdict(Fraction)
        for phase, hop, _ in self.blocks().get(block, []):
            load[hop] += Fraction(durations.get((phase, hop), 0))
        return dict(load)


@dataclass
class DecodeResult:
    destination: str
    symbols: int
    max_error: float
    max_residual: float
    max_condition: float
    block_ranks: List[int] = field(default_factory=list)
    # (rank, unknowns) of every assembled hop-3 system
    system_ranks: List[Tuple[int, int]] = field(default_factory=list)
    reference: float = 1.0

    def ok(self, tol: float) -> bool:
        return self.max_error <= tol * max(1.0, self.reference)

    @property
    def systems_full_rank(self) -> bool:
        return all(found == unknowns for found, unknowns in self.system_ranks)

    def as_dict(self) -> dict:
        return {
            "destination": self.destination,
            "symbols": self.symbols,
            "max_error": self.max_error,
            "max_residual": self.max_residual,
            "max_condition": self.max_condition,
            "min_block_rank": min(self.block_ranks) if self.block_ranks else None,
            "blocks": len(self.block_ranks),
            "systems": len(self.system_ranks),
            "systems_full_rank": self.systems_full_rank,
        }


def _pair(value: complex) -> List[float]:
    return [float(np.real(value)), float(np.imag(value))]


@dataclass
class Transcript:
    """Everything one simulated run produced, in slot order."""

    variant: str
    seed: int
    stream_id: int
    shape: NetworkShape
    n1: int
    slot_counts: Dict[Tuple[int, int], int]
    n_measured: List[int]
    decode: Dict[str, DecodeResult]
    order2_once: int = 0
    order2_twice: int = 0
    slot_log: List[dict] = field(default_factory=list)
    causality_checks: int = 0
    causality_violations: int = 0
    audit: List[dict] = field(default_factory=list)
    conditions: List[float] = field(default_factory=list)

    def hop_totals(self) -> List[int]:
        totals = [0] * self.shape.hops
        for (_, hop), count in self.slot_counts.items():
            totals[hop - 1] += count
        return totals

    def measured_dof(self) -> Fraction:
        return Fraction(self.n1, max(self.hop_totals()))

    def measured_eta2(self) -> Fraction:
        order2 = self.order2_once + self.order2_twice
        if order2 == 0:
            raise DomainError("transcript has no order-2 symbols")
        return Fraction(self.order2_once + 2 * self.order2_twice, 2 * order2)

    @property
    def max_error(self) -> float:
        return max((result.max_error for result in self.decode.values()), default=0.0)

    @property
    def max_residual(self) -> float:
        return max((result.max_residual for result in self.decode.values()), default=0.0)

    @property
    def max_condition(self) -> float:
        return max(self.conditions, default=1.0)

    def decoded_ok(self, tol: float) -> bool:
        return all(result.ok(tol) for result in self.decode.values())

    def summary_rows(self) -> List[dict]:
        return [
            {"phase": phase, "hop": hop, "slots": count}
            for (phase, hop), count in sorted(self.slot_counts.items())
        ]

    def to_json_dict(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.seed,
            "stream_id": self.stream_id,
            "users": self.shape.users,
            "hops": self.shape.hops,
            "n1": self.n1,
            "slot_counts": self.summary_rows(),
            "hop_totals": self.hop_totals(),
            "measured_dof": fraction_text(self.measured_dof()),
            "n_measured": list(self.n_measured),
            "decode": {key: result.as_dict() for key, result in sorted(self.decode.items())},
            "causality": {"checks": self.causality_checks, "violations": self.causality_violations},
            "max_condition": self.max_condition,
            "slots": [
                {
                    "slot": entry["slot"],
                    "phase": entry["phase"],
                    "hop": entry["hop"],
                    "tx": [_pair(value) for value in entry["tx"]],
                    "rx": [_pair(value) for value in entry["rx"]],
                }
                for entry in self.slot_log
            ],
            "audit": list(self.audit),
        }
