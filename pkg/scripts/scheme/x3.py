"""Three-phase scheme on the 3-user 3-hop X network and the 6-hop cascade.

Phase 1 sends order-1 symbols through hop-1 nulling, forwards the nulled
combinations over hop 2 and creates order-2 symbols in hop 3 (two plain slots
plus one summation slot per destination, nulled index and pair of batches).
Phase 2 offloads the order-2 symbols to the first relay layer and repeats the
construction one hop later, creating order-3 symbols in three repetitions per
nulled index. Phase 3 offloads those to the last relay layer and delivers them
one per slot.

A destination only ever receives ``direct + remaining`` sums, so it tells the
two parts apart through the spectators' split pieces, and each slot yields one
such constraint per spectator. The hop-3 layouts are the smallest ones that
collect enough of them: three slots per pair of phase-1 batches and three per
phase-2 batch, per nulled index. The measured slot counts therefore exceed the
closed-form accounting; :func:`accounting_gap` reports both side by side.

Every destination then peels the chain backwards with small linear solves.
"""
from __future__ import annotations

import logging
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

try:  # pragma: no cover - allows running as script and as package
    from accounting import SchemeParams, durations
    from errors import DecodeFailure, DomainError, GroupingError, RankDeficient, Singular
    from network import (
        ChannelTensor,
        KnowledgeLedger,
        NetworkShape,
        NodeId,
        assert_knowledge,
        csi_through,
        draw_channels,
        own_message,
        own_rx,
    )
    from numerics import RandomStream, condition_number, rank, residual, solve_linear
except ImportError:  # pragma: no cover
    from ..accounting import SchemeParams, durations
    from ..errors import DecodeFailure, DomainError, GroupingError, RankDeficient, Singular
    from ..network import (
        ChannelTensor,
        KnowledgeLedger,
        NetworkShape,
        NodeId,
        assert_knowledge,
        csi_through,
        draw_channels,
        own_message,
        own_rx,
    )
    from ..numerics import RandomStream, condition_number, rank, residual, solve_linear

from .blocks import af_hop, final_delivery, generate_higher_order, group_remaining, offload, psin_hop1_3user
from .models import (
    DecodeResult,
    DeliveryResult,
    GenerationResult,
    HopObservation,
    OffloadResult,
    OrderSymbol,
    PsinResult,
    RemainingPlc,
    Transcript,
)

LOGGER = logging.getLogger(__name__)

USERS = 3
BLOCK = 6
GROUP = 2
PHASE2_REPEATS = 3
PAIRS = ((1, 2), (1, 3), (2, 3))
# four phase-1 batches per destination: whole pairs, whole phase-2 batches,
# whole order-3 triples and balanced phase-3 offloads
SIMULATION_GRANULARITY = 216
DECODE_TOL = 1e-8

try:
    MAX_REDRAWS = int(os.environ.get("DOF_MAX_REDRAWS", "5"))
except ValueError:
    MAX_REDRAWS = 5


def roles(nulled: int) -> Tuple[int, int]:
    """(direct, remaining) transmitters of a slot that nulls ``nulled``."""

    return nulled % USERS + 1, (nulled + 1) % USERS + 1


def round_n1(n1: int) -> int:
    """Next multiple of the simulation granularity."""

    if n1 <= 0:
        raise DomainError(f"N1 must be positive, got {n1}")
    return -(-n1 // SIMULATION_GRANULARITY) * SIMULATION_GRANULARITY


def _check_n1(n1: int) -> None:
    if n1 <= 0 or n1 % SIMULATION_GRANULARITY:
        raise DomainError(f"N1 must be a positive multiple of {SIMULATION_GRANULARITY}, got {n1}")


def construction_counts(n1: int) -> Tuple[Dict[Tuple[int, int], int], List[int]]:
    """Slots per (phase, hop) and ``[N1, N2, N3]`` of the simulated construction."""

    _check_n1(n1)
    batches1 = n1 // (USERS * BLOCK)
    slots13 = batches1 // GROUP * USERS * (GROUP + 1)
    # every phase-1 hop-3 slot leaves a direct symbol and a remaining PLC per spectator; PLCs pair up
    direct2 = (USERS - 1) * slots13
    n2 = direct2 + direct2 // 2
    batches2 = n2 // (USERS * BLOCK)
    slots23 = batches2 * USERS * PHASE2_REPEATS
    # one spectator per phase-2 slot; remaining PLCs combine three into two
    n3 = slots23 + slots23 * (USERS - 1) // USERS
    counts = {
        (1, 1): (BLOCK + 1) * batches1,
        (1, 2): USERS * batches1,
        (1, 3): slots13,
        (2, 1): n2 // USERS,
        (2, 2): (BLOCK + 1) * batches2,
        (2, 3): slots23,
        (3, 2): n3 // USERS,
        (3, 3): n3,
    }
    return counts, [n1, n2, n3]


def _plc_values(psin: PsinResult, nulled: int, source: int) -> np.ndarray:
    return np.array([psin.combos[(i, nulled)].parts[source].value for i in range(1, USERS + 1)])


class SlotClock:
    """Hands out consecutive slots and counts them per (phase, hop)."""

    def __init__(self, first_slot: int = 1, hop_offset: int = 0) -> None:
        self.next_slot = first_slot
        self.hop_offset = hop_offset
        self.counts: Dict[Tuple[int, int], int] = defaultdict(int)

    def reserve(self, phase: int, hop: int, count: int = 1) -> int:
        first = self.next_slot
        self.next_slot += count
        self.counts[(phase, hop + self.hop_offset)] += count
        return first


@dataclass
class _Phase1Batch:
    dest: int
    offset: int
    symbols: Dict[int, np.ndarray]
    ids: Dict[int, Tuple[str, ...]]
    psin: PsinResult
    af_slots: Dict[int, int] = field(default_factory=dict)
    af_received: Dict[int, np.ndarray] = field(default_factory=dict)


@dataclass
class _Group:
    dest: int
    batches: List[_Phase1Batch]
    slots: Dict[int, List[Tuple[int, Tuple[int, ...]]]] = field(default_factory=dict)


@dataclass
class _Phase2Batch:
    pair: Tuple[int, int]
    members: Dict[int, List[OrderSymbol]]
    psin: PsinResult
    slots: Dict[int, List[int]] = field(default_factory=dict)

    @property
    def spectator(self) -> int:
        return (set(range(1, USERS + 1)) - set(self.pair)).pop()


@dataclass
class _DecodeStats:
    conditions: List[float] = field(default_factory=list)
    residual: float = 0.0
    ranks: List[int] = field(default_factory=list)
    systems: List[Tuple[int, int]] = field(default_factory=list)


class X3Run:
    """One pass of the three phases over hops ``offset+1..offset+3``.

    ``messages[(source, dest)]`` holds the symbols source ``source`` has for
    destination ``dest``; every stream must have the same length, a multiple
    of 12.
    """

    def __init__(
        self,
        ch: ChannelTensor,
        ledger: KnowledgeLedger,
        messages: Dict[Tuple[int, int], np.ndarray],
        clock: SlotClock,
        stream: RandomStream,
        hop_offset: int = 0,
        tag: str = "",
    ) -> None:
        lengths = {len(values) for values in messages.values()}
        if len(messages) != USERS * USERS or len(lengths) != 1:
            raise DomainError("every source needs an equally long stream for every destination")
        self.length = lengths.pop()
        if self.length == 0 or self.length % (BLOCK * GROUP):
            raise DomainError(f"stream length must be a positive multiple of {BLOCK * GROUP}, got {self.length}")
        self.ch = ch
        self.ledger = ledger
        self.messages = {key: np.asarray(values, dtype=np.complex128) for key, values in messages.items()}
        self.clock = clock
        self.stream = stream
        self.hop_offset = hop_offset
        self.tag = tag
        self.received: Dict[int, np.ndarray] = {}
        self.slot_log: List[dict] = []
        self.phase1: List[_Phase1Batch] = []
        self.groups: List[_Group] = []
        self.direct2: Dict[Tuple[int, int], OrderSymbol] = {}
        self.side2: Dict[Tuple[int, int], RemainingPlc] = {}
        self.paired2: List[OrderSymbol] = []
        self.offloads2: List[OffloadResult] = []
        self.batches2: List[_Phase2Batch] = []
        self.direct3: Dict[Tuple[int, int], OrderSymbol] = {}
        self.side3: Dict[Tuple[int, int], RemainingPlc] = {}
        self.triples: List[List[OrderSymbol]] = []
        self.offloads3: List[OffloadResult] = []
        self.delivery: Optional[DeliveryResult] = None
        for (source, dest), values in self.messages.items():
            ledger.give(self._node(1, source), [self._message_id(source, dest, p) for p in range(self.length)])

    def _hop(self, hop: int) -> int:
        return self.hop_offset + hop

    def _node(self, layer: int, index: int) -> NodeId:
        return NodeId(self.hop_offset + layer, index)

    def _message_id(self, source: int, dest: int, position: int) -> str:
        return f"{self.tag}u{source}>{dest}#{position}"

    def _log(self, phase: int, hop: int, slot: int, x, y) -> None:
        self.slot_log.append(
            {"slot": slot, "phase": phase, "hop": self._hop(hop), "tx": list(np.asarray(x)), "rx": list(np.asarray(y))}
        )

    def _log_psin(self, phase: int, hop: int, psin: PsinResult) -> None:
        for column, slot in enumerate(psin.slots):
            self._log(phase, hop, slot, psin.transmitted[:, column], psin.received[:, column])

    @property
    def order2_count(self) -> int:
        return len(self.direct2) + len(self.paired2)

    @property
    def order3_count(self) -> int:
        return len(self.direct3) + sum(len(group) for group in self.triples)

    def execute(self) -> None:
        self._phase1_psin()
        self._phase1_forward()
        self._phase1_generate()
        self._phase2_offload()
        self._phase2_psin()
        self._phase2_generate()
        self._phase3_offload()
        self._phase3_deliver()
        LOGGER.info(
            "%sthree phases done: %d order-2, %d order-3 symbols, slots up to %d",
            self.tag,
            self.order2_count,
            self.order3_count,
            self.clock.next_slot - 1,
        )

    def _phase1_psin(self) -> None:
        for dest in range(1, USERS + 1):
            for offset in range(0, self.length, BLOCK):
                symbols = {s: self.messages[(s, dest)][offset : offset + BLOCK] for s in range(1, USERS + 1)}
                ids = {
                    s: tuple(self._message_id(s, dest, offset + p) for p in range(BLOCK)) for s in range(1, USERS + 1)
                }
                first = self.clock.reserve(1, 1, BLOCK + 1)
                psin = psin_hop1_3user(self.ch, self._hop(1), first, symbols, {dest}, self.ledger, ids)
                self._log_psin(1, 1, psin)
                self.phase1.append(_Phase1Batch(dest, offset, symbols, ids, psin))

    def _phase1_forward(self) -> None:
        for batch in self.phase1:
            slots = batch.psin.slots
            needs = {i: [own_rx(s) for s in slots] + csi_through(slots) for i in range(1, USERS + 1)}
            for nulled in range(1, USERS + 1):
                slot = self.clock.reserve(1, 2)
                values = [batch.psin.combos[(i, nulled)].value for i in range(1, USERS + 1)]
                y = af_hop(self.ch, self._hop(2), values, slot, self.ledger, needs)
                self._log(1, 2, slot, values, y)
                batch.af_slots[nulled] = slot
                batch.af_received[nulled] = y

    def _phase1_generate(self) -> None:
        for dest in range(1, USERS + 1):
            batches = [batch for batch in self.phase1 if batch.dest == dest]
            for start in range(0, len(batches), GROUP):
                group = _Group(dest, batches[start : start + GROUP])
                self.groups.append(group)
                for nulled in range(1, USERS + 1):
                    observations = self._phase1_slots(group, nulled)
                    generation = generate_higher_order(observations, 1, {dest}, USERS, USERS, self.ledger)
                    self._file(generation, {dest}, self.direct2, self.side2)

    def _phase1_slots(self, group: _Group, nulled: int) -> List[HopObservation]:
        layouts = [(s,) for s in range(GROUP)] + [tuple(range(GROUP))]
        group.slots[nulled] = []
        observations = []
        for members in layouts:
            batches = [group.batches[s] for s in members]
            slot = self.clock.reserve(1, 3)
            x = sum(batch.af_received[nulled] for batch in batches)
            relay_needs = {i: [own_rx(batch.af_slots[nulled]) for batch in batches] for i in range(1, USERS + 1)}
            y = af_hop(self.ch, self._hop(3), x, slot, self.ledger, relay_needs)
            self._log(1, 3, slot, x, y)
            self.received[slot] = y
            last = self.ch.matrix(self._hop(3), slot)
            used = [t for batch in batches for t in batch.psin.slots] + [b.af_slots[nulled] for b in batches] + [slot]
            pieces, needs = {}, {}
            for source in roles(nulled):
                forwarded = sum(
                    self.ch.matrix(self._hop(2), batch.af_slots[nulled]) @ _plc_values(batch.psin, nulled, source)
                    for batch in batches
                )
                pieces[source] = last @ forwarded
                atoms = [own_message(item) for batch in batches for item in batch.ids[source]]
                needs[source] = tuple(atoms + csi_through(used))
            observations.append(
                HopObservation(
                    slot=slot,
                    nulled=nulled,
                    received=y,
                    pieces=pieces,
                    generators={source: self._node(1, source) for source in pieces},
                    needs=needs,
                    tag=f"{self.tag}p1.{slot}",
                )
            )
            group.slots[nulled].append((slot, members))
        return observations

    @staticmethod
    def _file(
        generation: GenerationResult,
        dest_set,
        direct: Dict[Tuple[int, int], OrderSymbol],
        side: Dict[Tuple[int, int], RemainingPlc],
    ) -> None:
        for symbol in generation.direct:
            spectator = next(iter(symbol.dest_set - frozenset(dest_set)))
            direct[(symbol.slot, spectator)] = symbol
        for record in generation.remaining:
            side[(record.slot, record.available_at)] = record

    def _offload_pools(
        self, pools: Dict[Tuple[int, int], List[OrderSymbol]], keys: Sequence[int], phase: int, hop: int
    ) -> List[OffloadResult]:
        results = []
        for key in keys:
            lists = [pools.get((index, key), []) for index in range(1, USERS + 1)]
            counts = {len(items) for items in lists}
            if len(counts) != 1:
                raise GroupingError(f"unbalanced offload pools for {key}: {[len(items) for items in lists]}")
            for position in range(counts.pop()):
                slot = self.clock.reserve(phase, hop)
                result = offload(self.ch, self._hop(hop), [items[position] for items in lists], slot, self.ledger, self.tag)
                self._log(phase, hop, slot, result.transmitted, result.received)
                results.append(result)
        return results

    def _phase2_offload(self) -> None:
        self.paired2 = group_remaining(list(self.side2.values()), 1, ledger=self.ledger, tag=f"{self.tag}pair:")
        pools: Dict[Tuple[int, Tuple[int, ...]], List[OrderSymbol]] = defaultdict(list)
        for key in sorted(self.direct2):
            symbol = self.direct2[key]
            pools[(symbol.holder.index, tuple(sorted(symbol.dest_set)))].append(symbol)
        for symbol in self.paired2:
            pools[(symbol.holder.index, tuple(sorted(symbol.dest_set)))].append(symbol)
        self.offloads2 = self._offload_pools(pools, PAIRS, 2, 1)

    def _phase2_psin(self) -> None:
        for pair in PAIRS:
            results = [r for r in self.offloads2 if tuple(sorted(r.children[0].dest_set)) == pair]
            if len(results) % BLOCK:
                raise GroupingError(f"{len(results)} offload slots for {pair} do not fill whole batches")
            for start in range(0, len(results), BLOCK):
                members = {
                    i: [result.children[i - 1] for result in results[start : start + BLOCK]]
                    for i in range(1, USERS + 1)
                }
                symbols = {i: np.array([m.value for m in members[i]]) for i in members}
                ids = {i: tuple(m.symbol_id for m in members[i]) for i in members}
                first = self.clock.reserve(2, 2, BLOCK + 1)
                psin = psin_hop1_3user(self.ch, self._hop(2), first, symbols, pair, self.ledger, ids)
                self._log_psin(2, 2, psin)
                self.batches2.append(_Phase2Batch(pair, members, psin))

    def _phase2_generate(self) -> None:
        for batch in self.batches2:
            slots = batch.psin.slots
            relay_needs = {i: [own_rx(s) for s in slots] + csi_through(slots) for i in range(1, USERS + 1)}
            for nulled in range(1, USERS + 1):
                values = [batch.psin.combos[(i, nulled)].value for i in range(1, USERS + 1)]
                observations = []
                batch.slots[nulled] = []
                for _ in range(PHASE2_REPEATS):
                    slot = self.clock.reserve(2, 3)
                    y = af_hop(self.ch, self._hop(3), values, slot, self.ledger, relay_needs)
                    self._log(2, 3, slot, values, y)
                    self.received[slot] = y
                    last = self.ch.matrix(self._hop(3), slot)
                    pieces = {source: last @ _plc_values(batch.psin, nulled, source) for source in roles(nulled)}
                    needs = {
                        source: tuple(
                            [own_message(m.symbol_id) for m in batch.members[source]] + csi_through(slots + [slot])
                        )
                        for source in pieces
                    }
                    observations.append(
                        HopObservation(
                            slot=slot,
                            nulled=nulled,
                            received=y,
                            pieces=pieces,
                            generators={source: self._node(2, source) for source in pieces},
                            needs=needs,
                            tag=f"{self.tag}p2.{slot}",
                        )
                    )
                    batch.slots[nulled].append(slot)
                generation = generate_higher_order(observations, 2, batch.pair, USERS, USERS, self.ledger)
                self._file(generation, batch.pair, self.direct3, self.side3)

    def _phase3_offload(self) -> None:
        combined = group_remaining(list(self.side3.values()), 2, self.stream, self.ledger, tag=f"{self.tag}triple:")
        grouped: Dict[Tuple[str, ...], List[OrderSymbol]] = defaultdict(list)
        for symbol in combined:
            grouped[symbol.components].append(symbol)
        self.triples = list(grouped.values())
        everyone = tuple(range(1, USERS + 1))
        pools: Dict[Tuple[int, Tuple[int, ...]], List[OrderSymbol]] = defaultdict(list)
        for key in sorted(self.direct3):
            symbol = self.direct3[key]
            pools[(symbol.holder.index, everyone)].append(symbol)
        for symbol in combined:
            pools[(symbol.holder.index, everyone)].append(symbol)
        self.offloads3 = self._offload_pools(pools, [everyone], 3, 2)

    def _phase3_deliver(self) -> None:
        symbols = [child for result in self.offloads3 for child in result.children]
        first = self.clock.reserve(3, 3, len(symbols))
        slots = list(range(first, first + len(symbols)))
        self.delivery = final_delivery(self.ch, self._hop(3), symbols, slots, self.ledger)
        for position, (symbol, slot) in enumerate(zip(symbols, slots)):
            x = np.zeros(USERS, dtype=np.complex128)
            x[symbol.holder.index - 1] = symbol.value
            self._log(3, 3, slot, x, self.delivery.received[position])
            self.received[slot] = self.delivery.received[position]

    # decoding

    def _solve(self, matrix, rhs, stats: _DecodeStats) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=np.complex128)
        rhs = np.asarray(rhs, dtype=np.complex128)
        stats.conditions.append(condition_number(matrix))
        values = solve_linear(matrix, rhs)
        stats.residual = max(stats.residual, residual(matrix, values, rhs))
        return values

    def _invert_offload(self, result: OffloadResult, known: Dict[str, complex], stats: _DecodeStats) -> None:
        parents = [parent for parent in result.parents if parent is not None]
        mixed = [known[child.symbol_id] for child in result.children]
        values = self._solve(result.mixing[: len(parents)], mixed[: len(parents)], stats)
        for parent, value in zip(parents, values):
            known[parent.symbol_id] = value

    def _ungroup(
        self, group: Sequence[OrderSymbol], known: Dict[str, complex], side: Dict[str, complex], stats: _DecodeStats
    ) -> None:
        components = group[0].components
        weights = np.array([symbol.weights for symbol in group])
        held = [index for index, record_id in enumerate(components) if record_id in side]
        missing = [index for index, record_id in enumerate(components) if record_id not in side]
        if len(missing) != len(group):
            raise DomainError(f"cannot ungroup {group[0].symbol_id}: {len(held)} of {len(components)} parts known")
        rhs = np.array([known[symbol.symbol_id] for symbol in group])
        if held:
            rhs = rhs - weights[:, held] @ np.array([side[components[index]] for index in held])
        values = self._solve(weights[:, missing], rhs, stats)
        for index, value in zip(missing, values):
            side[components[index]] = value

    def _plc_system(self, psin: PsinResult, source: int, plc: Dict[Tuple[int, int], complex]):
        keys = [(relay, nulled) for nulled in range(1, USERS + 1) if nulled != source for relay in range(1, USERS + 1)]
        matrix = np.array([psin.combos[key].parts[source].coeff_row for key in keys])
        return matrix, np.array([plc[key] for key in keys])

    def phase2_system(self, j: int, batch: _Phase2Batch, nulled: int) -> Tuple[np.ndarray, List[Tuple[str, object]]]:
        """Equations ``j`` holds on one phase-2 batch for one nulled index.

        Unknowns are the direct then the remaining part at the three relays;
        ``keys`` name where each right-hand side comes from.
        """

        spectator = batch.spectator
        zero = np.zeros(USERS)
        rows, keys = [], []
        for slot in batch.slots[nulled]:
            matrix = self.ch.matrix(self._hop(3), slot)
            own, other = matrix[j - 1], matrix[spectator - 1]
            rows.extend([np.concatenate([own, own]), np.concatenate([other, zero]), np.concatenate([zero, other])])
            keys.extend(
                [
                    ("rx", slot),
                    ("known", self.direct3[(slot, spectator)].symbol_id),
                    ("side", self.side3[(slot, spectator)].record_id),
                ]
            )
        return np.array(rows, dtype=np.complex128), keys

    def group_system(self, j: int, group: _Group, nulled: int) -> Tuple[np.ndarray, List[Tuple[str, object]]]:
        """Equations ``j`` holds on a phase-1 group for one nulled index.

        Batch ``s`` owns columns ``6s..6s+5``: its direct then remaining part as
        forwarded to the last relay layer.
        """

        size = 2 * USERS * len(group.batches)
        rows, keys = [], []
        for slot, members in group.slots[nulled]:
            matrix = self.ch.matrix(self._hop(3), slot)
            row = np.zeros(size, dtype=np.complex128)
            for s in members:
                row[2 * USERS * s : 2 * USERS * (s + 1)] = np.tile(matrix[j - 1], 2)
            rows.append(row)
            keys.append(("rx", slot))
            for k in range(1, USERS + 1):
                if k == j:
                    continue
                for part, key in (
                    (0, ("known", self.direct2[(slot, k)].symbol_id)),
                    (1, ("side", self.side2[(slot, k)].record_id)),
                ):
                    row = np.zeros(size, dtype=np.complex128)
                    for s in members:
                        start = 2 * USERS * s + part * USERS
                        row[start : start + USERS] = matrix[k - 1]
                    rows.append(row)
                    keys.append(key)
        return np.array(rows), keys

    def _solve_system(self, j: int, system, known, side, stats: _DecodeStats) -> np.ndarray:
        matrix, keys = system
        stats.systems.append((rank(matrix), matrix.shape[1]))
        rhs = []
        for kind, ref in keys:
            if kind == "rx":
                rhs.append(self.received[ref][j - 1])
            else:
                rhs.append(known[ref] if kind == "known" else side[ref])
        return self._solve(matrix, rhs, stats)

    def _decode_phase2_batch(self, j: int, batch: _Phase2Batch, known, side, stats: _DecodeStats) -> None:
        plc: Dict[int, Dict[Tuple[int, int], complex]] = defaultdict(dict)
        for nulled in range(1, USERS + 1):
            direct, remaining = roles(nulled)
            values = self._solve_system(j, self.phase2_system(j, batch, nulled), known, side, stats)
            for relay in range(1, USERS + 1):
                plc[direct][(relay, nulled)] = values[relay - 1]
                plc[remaining][(relay, nulled)] = values[USERS + relay - 1]
        for source in range(1, USERS + 1):
            matrix, rhs = self._plc_system(batch.psin, source, plc[source])
            for symbol, value in zip(batch.members[source], self._solve(matrix, rhs, stats)):
                known[symbol.symbol_id] = value

    def _decode_group(self, j: int, group: _Group, known, side, decoded, stats: _DecodeStats) -> None:
        plc: List[Dict[int, Dict[Tuple[int, int], complex]]] = [defaultdict(dict) for _ in group.batches]
        for nulled in range(1, USERS + 1):
            direct, remaining = roles(nulled)
            values = self._solve_system(j, self.group_system(j, group, nulled), known, side, stats)
            for s, batch in enumerate(group.batches):
                forward = self.ch.matrix(self._hop(2), batch.af_slots[nulled])
                for part, source in enumerate((direct, remaining)):
                    start = 2 * USERS * s + part * USERS
                    at_relays = self._solve(forward, values[start : start + USERS], stats)
                    for relay in range(1, USERS + 1):
                        plc[s][source][(relay, nulled)] = at_relays[relay - 1]
        for s, batch in enumerate(group.batches):
            for source in range(1, USERS + 1):
                matrix, rhs = self._plc_system(batch.psin, source, plc[s][source])
                stats.ranks.append(rank(matrix))
                decoded[source][batch.offset : batch.offset + BLOCK] = self._solve(matrix, rhs, stats)

    def decode(self, j: int) -> Tuple[Dict[int, np.ndarray], DecodeResult]:
        """Recover every symbol meant for destination ``j`` from its own receptions."""

        if self.delivery is None:
            raise DomainError("decode needs a completed run")
        node = self._node(4, j)
        last = self.clock.next_slot
        if self.ledger is not None:
            needs = [own_rx(slot) for slot in sorted(self.received)] + csi_through(range(1, last))
            assert_knowledge(self.ledger, node, needs, last, "decode")
        stats = _DecodeStats()
        known: Dict[str, complex] = {}
        side: Dict[str, complex] = {}
        own = lambda slot: self.received[slot][j - 1]  # noqa: E731

        for position, symbol in enumerate(self.delivery.symbols):
            known[symbol.symbol_id] = self.delivery.delivered[j][position]
        for result in self.offloads3:
            self._invert_offload(result, known, stats)
        for (slot, spectator), symbol in self.direct3.items():
            if spectator == j:
                side[self.side3[(slot, spectator)].record_id] = own(slot) - known[symbol.symbol_id]
        for group in self.triples:
            self._ungroup(group, known, side, stats)
        for batch in self.batches2:
            if j in batch.pair:
                self._decode_phase2_batch(j, batch, known, side, stats)
        for result in self.offloads2:
            if j in result.children[0].dest_set:
                self._invert_offload(result, known, stats)
        for (slot, spectator), symbol in self.direct2.items():
            if spectator == j:
                side[self.side2[(slot, spectator)].record_id] = own(slot) - known[symbol.symbol_id]
        for symbol in self.paired2:
            if j in symbol.dest_set:
                self._ungroup([symbol], known, side, stats)

        decoded = {s: np.zeros(self.length, dtype=np.complex128) for s in range(1, USERS + 1)}
        for group in self.groups:
            if group.dest == j:
                self._decode_group(j, group, known, side, decoded, stats)

        truth = np.concatenate([self.messages[(s, j)] for s in range(1, USERS + 1)])
        estimate = np.concatenate([decoded[s] for s in range(1, USERS + 1)])
        result = DecodeResult(
            destination=self.ledger.label(node),
            symbols=int(truth.size),
            max_error=float(np.max(np.abs(estimate - truth))),
            max_residual=stats.residual,
            max_condition=max(stats.conditions, default=1.0),
            block_ranks=stats.ranks,
            system_ranks=stats.systems,
            reference=float(np.max(np.abs(truth))),
        )
        LOGGER.debug("%s decoded with error %.2e, cond %.2e", result.destination, result.max_error, result.max_condition)
        return decoded, result

    def decode_all(self) -> Tuple[Dict[Tuple[int, int], np.ndarray], Dict[str, DecodeResult]]:
        decoded: Dict[Tuple[int, int], np.ndarray] = {}
        results: Dict[str, DecodeResult] = {}
        for j in range(1, USERS + 1):
            values, result = self.decode(j)
            results[result.destination] = result
            for source, stream in values.items():
                decoded[(source, j)] = stream
        return decoded, results


def _with_redraws(run: Callable[[RandomStream], Transcript], seed: int, max_redraws: int) -> Transcript:
    failure: Optional[Exception] = None
    for attempt in range(max_redraws):
        try:
            return run(RandomStream(seed, attempt))
        except (RankDeficient, Singular) as exc:
            LOGGER.warning("seed %d stream %d: degenerate draw (%s), redrawing", seed, attempt, exc)
            failure = exc
    raise DecodeFailure(None, math.inf, f"no usable draw in {max_redraws} attempts: {failure}")


def _round_slots(n1: int) -> int:
    return sum(construction_counts(n1)[0].values())


def _check_decoded(transcript: Transcript, tol: float) -> None:
    for label, result in sorted(transcript.decode.items()):
        if not result.ok(tol):
            raise DecodeFailure(label, result.max_error, f"seed {transcript.seed}")


def _transcript(
    variant: str,
    seed: int,
    stream: RandomStream,
    shape: NetworkShape,
    n1: int,
    clocks: Sequence[SlotClock],
    runs: Sequence[X3Run],
    decode: Dict[str, DecodeResult],
    ledger: KnowledgeLedger,
) -> Transcript:
    counts: Dict[Tuple[int, int], int] = {}
    for clock in clocks:
        counts.update(clock.counts)
    first = runs[0]
    conditions = [result.max_condition for result in decode.values()]
    return Transcript(
        variant=variant,
        seed=seed,
        stream_id=stream.stream_id,
        shape=shape,
        n1=n1,
        slot_counts=counts,
        n_measured=[n1, first.order2_count, first.order3_count],
        decode=decode,
        order2_once=len(first.direct2),
        order2_twice=len(first.paired2),
        slot_log=sorted((entry for run in runs for entry in run.slot_log), key=lambda entry: entry["slot"]),
        causality_checks=ledger.checks,
        causality_violations=ledger.violations,
        audit=list(ledger.audit),
        conditions=conditions,
    )


def build_x3(n1: int, stream: RandomStream) -> X3Run:
    """Draw channels and messages from ``stream`` and run the three phases, without decoding."""

    _check_n1(n1)
    shape = NetworkShape(USERS, 3)
    ch = draw_channels(shape, _round_slots(n1), stream)
    info = stream.complex_normal((USERS, USERS, n1 // (USERS * USERS)))
    messages = {(s, d): info[s - 1, d - 1] for s in range(1, USERS + 1) for d in range(1, USERS + 1)}
    run = X3Run(ch, KnowledgeLedger(shape), messages, SlotClock(), stream)
    run.execute()
    return run


def _run_x3_once(n1: int, seed: int, stream: RandomStream, tol: float) -> Transcript:
    run = build_x3(n1, stream)
    _, results = run.decode_all()
    transcript = _transcript("x3", seed, stream, run.ch.shape, n1, [run.clock], [run], results, run.ledger)
    _check_decoded(transcript, tol)
    return transcript


def run_x3(n1: int, seed: int = 0, tol: float = DECODE_TOL, max_redraws: int = MAX_REDRAWS) -> Transcript:
    """Simulate the 3-user 3-hop X network end to end for ``n1`` information symbols."""

    _check_n1(n1)
    return _with_redraws(lambda stream: _run_x3_once(n1, seed, stream, tol), seed, max_redraws)


def _run_ic6_once(n1: int, seed: int, stream: RandomStream, tol: float) -> Transcript:
    shape = NetworkShape(USERS, 6)
    per_stage = _round_slots(n1)
    ch = draw_channels(shape, 2 * per_stage, stream)
    # info[j-1, k-1]: k-th stream of source j, all meant for destination j
    info = stream.complex_normal((USERS, USERS, n1 // (USERS * USERS)))
    ledger = KnowledgeLedger(shape)
    clock1 = SlotClock()
    stage1 = X3Run(
        ch,
        ledger,
        {(j, k): info[j - 1, k - 1] for j in range(1, USERS + 1) for k in range(1, USERS + 1)},
        clock1,
        stream,
        tag="s1:",
    )
    stage1.execute()
    relayed, results1 = stage1.decode_all()
    clock2 = SlotClock(first_slot=clock1.next_slot, hop_offset=3)
    stage2 = X3Run(
        ch,
        ledger,
        {(k, j): relayed[(j, k)] for j in range(1, USERS + 1) for k in range(1, USERS + 1)},
        clock2,
        stream,
        hop_offset=3,
        tag="s2:",
    )
    stage2.execute()
    delivered, results2 = stage2.decode_all()

    decode: Dict[str, DecodeResult] = dict(results1)
    for j in range(1, USERS + 1):
        truth = np.concatenate([info[j - 1, k - 1] for k in range(1, USERS + 1)])
        estimate = np.concatenate([delivered[(k, j)] for k in range(1, USERS + 1)])
        label = ledger.label(NodeId(shape.layers, j))
        stage = results2[label]
        decode[label] = DecodeResult(
            destination=label,
            symbols=int(truth.size),
            max_error=float(np.max(np.abs(estimate - truth))),
            max_residual=stage.max_residual,
            max_condition=stage.max_condition,
            block_ranks=stage.block_ranks,
            system_ranks=stage.system_ranks,
            reference=float(np.max(np.abs(truth))),
        )
    transcript = _transcript("ic6", seed, stream, shape, n1, [clock1, clock2], [stage1, stage2], decode, ledger)
    _check_decoded(transcript, tol)
    return transcript


def run_ic6(n1: int, seed: int = 0, tol: float = DECODE_TOL, max_redraws: int = MAX_REDRAWS) -> Transcript:
    """Cascade two 3-hop X networks into a 3-user 6-hop interference network.

    Stage 1 carries ``u^[j]_k`` from source ``j`` to the middle node ``k``;
    stage 2 carries it from there to destination ``j``.
    """

    _check_n1(n1)
    return _with_redraws(lambda stream: _run_ic6_once(n1, seed, stream, tol), seed, max_redraws)


def concordance(transcript: Transcript) -> List[str]:
    """Differences between measured counts and those of the simulated construction, empty if none."""

    counts, n_values = construction_counts(transcript.n1)
    problems = []
    stages = transcript.shape.hops // USERS
    for stage in range(stages):
        for phase in range(1, USERS + 1):
            for hop in range(1, USERS + 1):
                expected = counts.get((phase, hop), 0)
                measured = transcript.slot_counts.get((phase, hop + stage * USERS), 0)
                if measured != expected:
                    problems.append(f"T_{phase}^({hop + stage * USERS}): measured {measured}, expected {expected}")
    for m, (measured, expected) in enumerate(zip(transcript.n_measured, n_values), start=1):
        if measured != expected:
            problems.append(f"N_{m}: measured {measured}, expected {expected}")
    return problems


def accounting_gap(transcript: Transcript) -> Dict[str, object]:
    """Measured hop totals and DoF next to the closed-form accounting for the same N1."""

    profile = durations(SchemeParams(USERS, USERS), transcript.n1)
    stages = transcript.shape.hops // USERS
    accounted = [profile.hop_total(hop) for _ in range(stages) for hop in range(1, USERS + 1)]
    return {
        "measured_hop_totals": transcript.hop_totals(),
        "accounting_hop_totals": accounted,
        "measured_dof": transcript.measured_dof(),
        "accounting_dof": Fraction(transcript.n1) / profile.max_total,
        "measured_n": list(transcript.n_measured),
        "accounting_n": list(profile.n_values),
    }
