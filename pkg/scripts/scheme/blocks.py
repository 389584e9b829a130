"""Building blocks of the multi-phase scheme for general ``(K, L)``.

Each block takes explicit slots and an optional :class:`KnowledgeLedger`; when a
ledger is passed every computation is preceded by a knowledge assertion and
every transmission and reception is recorded.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

try:  # pragma: no cover - allows running as script and as package
    from errors import DomainError, GroupingError, RankDeficient
    from network import (
        ChannelTensor,
        KnowledgeLedger,
        NodeId,
        assert_knowledge,
        csi_through,
        own_message,
        own_rx,
        propagate,
    )
    from numerics import COND_LIMIT, SOLVE_TOL, RandomStream, condition_number, left_null_vector, rank
except ImportError:  # pragma: no cover
    from ..errors import DomainError, GroupingError, RankDeficient
    from ..network import (
        ChannelTensor,
        KnowledgeLedger,
        NodeId,
        assert_knowledge,
        csi_through,
        own_message,
        own_rx,
        propagate,
    )
    from ..numerics import COND_LIMIT, SOLVE_TOL, RandomStream, condition_number, left_null_vector, rank

from .models import (
    DeliveryResult,
    GenerationResult,
    HopObservation,
    NulledCombination,
    OffloadResult,
    OrderSymbol,
    PartialLinearCombination,
    PsinBatch,
    PsinResult,
    RemainingPlc,
)

LOGGER = logging.getLogger(__name__)

NullVectorFn = Callable[[np.ndarray], np.ndarray]


def cyclic_after(nulled: int, users: int) -> List[int]:
    """Transmitter indices in cyclic order starting right after ``nulled``."""

    return [(nulled + step - 1) % users + 1 for step in range(1, users)]


def sum_precoder(width: int) -> np.ndarray:
    """``[I; 1ᵀ]``: send each symbol once, then their sum."""

    return np.vstack([np.eye(width, dtype=np.complex128), np.ones((1, width), dtype=np.complex128)])


def random_batch(
    users: int,
    scheduled: int,
    order: int,
    dest_set: Iterable[int],
    transmitters: Sequence[int],
    symbols: Dict[int, np.ndarray],
    hop: int,
    first_slot: int,
    stream: RandomStream,
    symbol_ids: Optional[Dict[int, Tuple[str, ...]]] = None,
) -> PsinBatch:
    """PSIN batch with public random precoders, drawn in transmitter order."""

    width = users * (scheduled - 1)
    precoders = {index: stream.complex_normal((width + 1, width)) for index in sorted(transmitters)}
    return PsinBatch(
        users=users,
        scheduled=scheduled,
        order=order,
        dest_set=frozenset(dest_set),
        transmitters=tuple(transmitters),
        symbols=dict(symbols),
        precoders=precoders,
        hop=hop,
        first_slot=first_slot,
        symbol_ids=dict(symbol_ids or {}),
    )


def rotated_transmitters(users: int, scheduled: int, batch_index: int) -> Tuple[int, ...]:
    """Round-robin choice of the ``L`` scheduled transmitters for a batch."""

    start = (batch_index * scheduled) % users
    return tuple(sorted((start + offset) % users + 1 for offset in range(scheduled)))


def psin_run(
    ch: ChannelTensor,
    batch: PsinBatch,
    ledger: Optional[KnowledgeLedger] = None,
    null_vector: NullVectorFn = left_null_vector,
) -> PsinResult:
    """Transmit a PSIN batch and null each scheduled transmitter at every receiver."""

    users = ch.shape.users
    if batch.users != users:
        raise DomainError(f"batch is for {batch.users} users, channel has {users}")
    slots = list(batch.slot_range)
    if slots[-1] > ch.slots:
        raise IndexError(f"batch needs slots up to {slots[-1]}, channel has {ch.slots}")
    layer = batch.hop
    if ledger is not None:
        for index in batch.transmitters:
            ids = batch.symbol_ids.get(index, ())
            assert_knowledge(
                ledger, NodeId(layer, index), [own_message(item) for item in ids], slots[0], "psin transmit"
            )

    transmitted = np.zeros((users, len(slots)), dtype=np.complex128)
    received = np.zeros((users, len(slots)), dtype=np.complex128)
    for column, slot in enumerate(slots):
        for index in batch.transmitters:
            transmitted[index - 1, column] = batch.precoders[index][column] @ batch.symbols[index]
        received[:, column] = propagate(ch, batch.hop, slot, transmitted[:, column])
        if ledger is not None:
            for index in batch.transmitters:
                ledger.record_tx(NodeId(layer, index), slot)
            for receiver in range(1, users + 1):
                ledger.record_rx(NodeId(layer + 1, receiver), slot)

    combos: Dict[Tuple[int, int], NulledCombination] = {}
    for receiver in range(1, users + 1):
        if ledger is not None:
            needs = [own_rx(slot) for slot in slots] + csi_through(slots)
            assert_knowledge(ledger, NodeId(layer + 1, receiver), needs, slots[-1] + 1, "psin nulling")
        gains = np.array([ch.matrix(batch.hop, slot)[receiver - 1] for slot in slots])
        for nulled in batch.transmitters:
            effective = gains[:, nulled - 1][:, None] * batch.precoders[nulled]
            cond = condition_number(effective)
            if cond > COND_LIMIT:
                LOGGER.warning("near-singular nulling at receiver %d (cond=%.2e)", receiver, cond)
            omega = null_vector(effective)
            parts = {}
            for source in batch.transmitters:
                if source == nulled:
                    continue
                row = (omega * gains[:, source - 1]) @ batch.precoders[source]
                parts[source] = PartialLinearCombination(
                    receiver=receiver,
                    nulled=nulled,
                    source=source,
                    dest_set=batch.dest_of(source),
                    coeff_row=row,
                    value=complex(row @ batch.symbols[source]),
                )
            combos[(receiver, nulled)] = NulledCombination(
                receiver, nulled, omega, complex(omega @ received[receiver - 1]), parts
            )
    return PsinResult(batch, transmitted, received, combos)


def sum_precoder_null_vector(effective: np.ndarray) -> np.ndarray:
    """Closed-form null vector of ``diag(h)·[I; 1ᵀ]``: ``(−1/h(1..r), 1/h(r+1))``."""

    width = effective.shape[1]
    diagonal = np.diag(effective[:width, :width])
    if np.any(diagonal == 0) or effective[width, 0] == 0:
        raise RankDeficient("zero channel gain in a summation batch")
    return np.concatenate([-1.0 / diagonal, [1.0 / effective[width, 0]]])


def psin_hop1_3user(
    ch: ChannelTensor,
    hop: int,
    first_slot: int,
    symbols: Dict[int, np.ndarray],
    dest_set: Optional[Iterable[int]] = None,
    ledger: Optional[KnowledgeLedger] = None,
    symbol_ids: Optional[Dict[int, Tuple[str, ...]]] = None,
) -> PsinResult:
    """Six slots of plain symbols plus one slot of their sum, three transmitters.

    With ``dest_set=None`` every destination is scheduled: transmitter ``k``
    carries the symbols of destination ``k``.
    """

    if ch.shape.users != 3:
        raise DomainError("psin_hop1_3user needs a 3-user network")
    for index in (1, 2, 3):
        if np.asarray(symbols.get(index)).shape != (6,):
            raise DomainError(f"transmitter {index} needs exactly 6 symbols")
    precoder = sum_precoder(6)
    dest_sets = {} if dest_set is not None else {index: frozenset({index}) for index in (1, 2, 3)}
    batch = PsinBatch(
        users=3,
        scheduled=3,
        order=1,
        dest_set=frozenset(dest_set) if dest_set is not None else frozenset({1, 2, 3}),
        transmitters=(1, 2, 3),
        symbols=dict(symbols),
        precoders={index: precoder for index in (1, 2, 3)},
        hop=hop,
        first_slot=first_slot,
        symbol_ids=dict(symbol_ids or {}),
        dest_sets=dest_sets,
    )
    result = psin_run(ch, batch, ledger, null_vector=sum_precoder_null_vector)
    for source in (1, 2, 3):
        rows = [
            result.combos[(receiver, nulled)].parts[source].coeff_row
            for nulled in (1, 2, 3)
            if nulled != source
            for receiver in (1, 2, 3)
        ]
        if rank(np.array(rows)) < 6:
            raise RankDeficient(f"coefficient matrix of transmitter {source} is rank deficient")
    return result


def plc_matrix(result: PsinResult, source: int) -> np.ndarray:
    """Stacked coefficient rows of ``source`` over every receiver and nulled index."""

    rows = [
        combo.parts[source].coeff_row
        for (receiver, nulled), combo in sorted(result.combos.items())
        if nulled != source
    ]
    return np.array(rows)


def offload(
    ch: ChannelTensor,
    hop: int,
    symbols: Sequence[Optional[OrderSymbol]],
    slot: int,
    ledger: Optional[KnowledgeLedger] = None,
    tag: str = "",
) -> OffloadResult:
    """Move one order-m symbol per transmitter of layer ``hop`` to layer ``hop + 1``.

    ``None`` entries stay silent; the received mixtures become new symbols with
    the same destination set.
    """

    users = ch.shape.users
    if len(symbols) != users:
        raise DomainError(f"offload needs one entry per transmitter ({users}), got {len(symbols)}")
    active = [index for index, symbol in enumerate(symbols, start=1) if symbol is not None]
    if not active:
        raise DomainError("offload needs at least one symbol")
    first = symbols[active[0] - 1]
    for index in active:
        symbol = symbols[index - 1]
        if symbol.dest_set != first.dest_set or symbol.order != first.order:
            raise DomainError("offloaded symbols must share order and destination set")
        if symbol.holder != NodeId(hop, index):
            raise DomainError(f"{symbol.symbol_id} is held by {symbol.holder}, not by transmitter {index}")
        if ledger is not None:
            assert_knowledge(ledger, symbol.holder, symbol.needs, slot, "offload")

    x = np.zeros(users, dtype=np.complex128)
    for index in active:
        x[index - 1] = symbols[index - 1].value
    y = propagate(ch, hop, slot, x)
    mixing = ch.matrix(hop, slot)[:, [index - 1 for index in active]]
    if rank(mixing) < len(active):
        raise RankDeficient(f"offload mixing matrix at slot {slot} is rank deficient")

    children = []
    for receiver in range(1, users + 1):
        holder = NodeId(hop + 1, receiver)
        child = OrderSymbol(
            symbol_id=f"{tag}o{slot}.{receiver}",
            order=first.order,
            dest_set=first.dest_set,
            holder=holder,
            value=complex(y[receiver - 1]),
            provenance="offloaded",
            needs=(own_rx(slot),),
            slot=slot,
            source=receiver,
        )
        children.append(child)
        if ledger is not None:
            ledger.record_rx(holder, slot)
            ledger.give(holder, [child.symbol_id])
    if ledger is not None:
        for index in active:
            ledger.record_tx(NodeId(hop, index), slot)
    return OffloadResult(slot, list(symbols), children, mixing, x, y)


def af_hop(
    ch: ChannelTensor,
    hop: int,
    values: Sequence[complex],
    slot: int,
    ledger: Optional[KnowledgeLedger] = None,
    needs: Optional[Dict[int, Sequence]] = None,
) -> np.ndarray:
    """Relays of layer ``hop`` forward their combinations in one slot."""

    users = ch.shape.users
    x = np.asarray(values, dtype=np.complex128)
    if x.shape != (users,):
        raise DomainError(f"af_hop needs {users} values, got shape {x.shape}")
    if ledger is not None:
        for relay, atoms in sorted((needs or {}).items()):
            assert_knowledge(ledger, NodeId(hop, relay), atoms, slot, "forward")
        for relay in range(1, users + 1):
            ledger.record_tx(NodeId(hop, relay), slot)
            ledger.record_rx(NodeId(hop + 1, relay), slot)
    return propagate(ch, hop, slot, x)


def effective_row(ch: ChannelTensor, chain: Sequence[Tuple[int, int]], receiver: int) -> np.ndarray:
    """``h_iᵀ H_{n−1} ··· H_1`` over ``chain = [(hop, slot), ...]`` in transmission order."""

    if not chain:
        raise DomainError("effective_row needs at least one hop")
    last_hop, last_slot = chain[-1]
    row = np.array(ch.matrix(last_hop, last_slot)[receiver - 1])
    for hop, slot in reversed(chain[:-1]):
        row = row @ ch.matrix(hop, slot)
    return row


def generate_higher_order(
    observations: Sequence[HopObservation],
    order: int,
    dest_set: Iterable[int],
    users: int,
    scheduled: int,
    ledger: Optional[KnowledgeLedger] = None,
    tol: float = SOLVE_TOL,
) -> GenerationResult:
    """Split hop-K receptions into new order-(m+1) symbols and remaining PLCs.

    For every non-scheduled destination ``k`` a slot nulling ``ℓ`` carries the
    pieces of the other scheduled transmitters; all but the last one in cyclic
    order after ``ℓ`` become order-(m+1) symbols for ``I_m ∪ {k}``, the last one
    is what ``k`` sees after removing them.
    """

    dest_set = frozenset(dest_set)
    if len(dest_set) != order:
        raise DomainError(f"order-{order} generation needs {order} destinations")
    direct: List[OrderSymbol] = []
    remaining: List[RemainingPlc] = []
    received: Dict[int, List[Tuple[int, complex]]] = defaultdict(list)
    for obs in observations:
        total = sum(obs.pieces.values())
        scale = 1.0 + float(np.max(np.abs(obs.received)))
        if float(np.max(np.abs(total - obs.received))) > tol * scale:
            raise DomainError(f"pieces of slot {obs.slot} do not add up to the reception")
        for destination in sorted(dest_set):
            received[destination].append((obs.slot, complex(obs.received[destination - 1])))
        ordered = [source for source in cyclic_after(obs.nulled, users) if source in obs.pieces]
        if len(ordered) != scheduled - 1:
            raise DomainError(f"slot {obs.slot} carries {len(ordered)} pieces, expected {scheduled - 1}")
        direct_sources, last = ordered[:-1], ordered[-1]
        at_slot = obs.slot + 1
        for spectator in range(1, users + 1):
            if spectator in dest_set:
                continue
            for source in direct_sources:
                generator = obs.generators[source]
                symbol_id = f"{obs.tag}:{source}>{spectator}"
                if ledger is not None:
                    assert_knowledge(ledger, generator, obs.needs[source], at_slot, "regenerate symbol")
                    ledger.give(generator, [symbol_id])
                direct.append(
                    OrderSymbol(
                        symbol_id=symbol_id,
                        order=order + 1,
                        dest_set=dest_set | {spectator},
                        holder=generator,
                        value=complex(obs.pieces[source][spectator - 1]),
                        provenance="regenerated-PLC",
                        needs=tuple(obs.needs[source]),
                        slot=obs.slot,
                        source=source,
                    )
                )
            if ledger is not None:
                assert_knowledge(ledger, obs.generators[last], obs.needs[last], at_slot, "regenerate side info")
            value = obs.received[spectator - 1] - sum(obs.pieces[source][spectator - 1] for source in direct_sources)
            remaining.append(
                RemainingPlc(
                    record_id=f"{obs.tag}:{last}~{spectator}",
                    generator=obs.generators[last],
                    source=last,
                    available_at=spectator,
                    desired_by=dest_set,
                    value=complex(value),
                    slot=obs.slot,
                    needs=tuple(obs.needs[last]),
                )
            )
    LOGGER.debug("order-%d generation: %d direct, %d remaining", order + 1, len(direct), len(remaining))
    return GenerationResult(direct, remaining, dict(received))


def group_remaining(
    records: Sequence[RemainingPlc],
    order: int,
    stream: Optional[RandomStream] = None,
    ledger: Optional[KnowledgeLedger] = None,
    tag: str = "g",
) -> List[OrderSymbol]:
    """Turn every ``m+1`` matching remaining PLCs into ``m`` order-(m+1) symbols.

    Records match when they share the generating node and the destination set
    ``desired_by ∪ {available_at}``, one per member of that set. Order 1 uses the
    plain sum; higher orders use public random combinations from ``stream``.
    """

    if order >= 2 and stream is None:
        raise DomainError("grouping beyond pairs needs a public random stream")
    pools: Dict[Tuple[NodeId, Tuple[int, ...]], Dict[int, List[RemainingPlc]]] = defaultdict(lambda: defaultdict(list))
    for record in records:
        key = record.group_key
        if len(key) != order + 1:
            raise GroupingError(f"{record.record_id} spans {len(key)} destinations, expected {order + 1}")
        pools[(record.generator, tuple(sorted(key)))][record.available_at].append(record)

    symbols: List[OrderSymbol] = []
    for (generator, key), by_member in sorted(pools.items()):
        if set(by_member) != set(key):
            raise GroupingError(f"{generator} lacks records available at {sorted(set(key) - set(by_member))}")
        counts = {member: len(items) for member, items in by_member.items()}
        if len(set(counts.values())) != 1:
            raise GroupingError(f"unbalanced remaining PLCs for {generator} over {key}: {counts}")
        for index in range(counts[key[0]]):
            members = [by_member[member][index] for member in key]
            values = np.array([member.value for member in members])
            if order == 1:
                weights = np.ones((1, 2), dtype=np.complex128)
            else:
                weights = stream.complex_normal((order, order + 1))
            needs = tuple(atom for member in members for atom in member.needs)
            at_slot = max(member.slot for member in members) + 1
            if ledger is not None:
                assert_knowledge(ledger, generator, needs, at_slot, "group side info")
            for row_index, row in enumerate(weights):
                symbol_id = f"{tag}{members[0].record_id}*{row_index}"
                if ledger is not None:
                    ledger.give(generator, [symbol_id])
                symbols.append(
                    OrderSymbol(
                        symbol_id=symbol_id,
                        order=order + 1,
                        dest_set=frozenset(key),
                        holder=generator,
                        value=complex(row @ values),
                        provenance="paired-side-info",
                        needs=needs,
                        slot=at_slot - 1,
                        source=members[0].source,
                        components=tuple(member.record_id for member in members),
                        weights=row,
                    )
                )
    return symbols


def final_delivery(
    ch: ChannelTensor,
    hop: int,
    symbols: Sequence[OrderSymbol],
    slots: Sequence[int],
    ledger: Optional[KnowledgeLedger] = None,
) -> DeliveryResult:
    """Time-division delivery of order-K symbols, one per slot."""

    users = ch.shape.users
    if len(slots) != len(symbols):
        raise DomainError(f"{len(symbols)} symbols need as many slots, got {len(slots)}")
    received = np.zeros((len(symbols), users), dtype=np.complex128)
    delivered: Dict[int, np.ndarray] = {i: np.zeros(len(symbols), dtype=np.complex128) for i in range(1, users + 1)}
    for position, (symbol, slot) in enumerate(zip(symbols, slots)):
        transmitter = symbol.holder.index
        if symbol.holder.layer != hop:
            raise DomainError(f"{symbol.symbol_id} is held at layer {symbol.holder.layer}, not {hop}")
        if ledger is not None:
            assert_knowledge(ledger, symbol.holder, symbol.needs, slot, "final delivery")
            ledger.record_tx(symbol.holder, slot)
        x = np.zeros(users, dtype=np.complex128)
        x[transmitter - 1] = symbol.value
        y = propagate(ch, hop, slot, x)
        received[position] = y
        for receiver in range(1, users + 1):
            if ledger is not None:
                ledger.record_rx(NodeId(hop + 1, receiver), slot)
            delivered[receiver][position] = y[receiver - 1] / ch.coefficient(hop, slot, receiver, transmitter)
    return DeliveryResult(list(slots), list(symbols), delivered, received)


@dataclass
class BatchChainResult:
    """One general-K batch carried from its PSIN hop to the destinations."""

    users: int
    scheduled: int
    order: int
    psin: PsinResult
    chains: Dict[int, List[Tuple[int, int]]]
    observations: List[HopObservation]
    generation: GenerationResult
    slots_used: int
    direct_per_slot: int = field(init=False)
    remaining_per_slot: int = field(init=False)

    def __post_init__(self) -> None:
        slots = max(len(self.observations), 1)
        self.direct_per_slot = len(self.generation.direct) // slots
        self.remaining_per_slot = len(self.generation.remaining) // slots

    def implied_ratio(self) -> Fraction:
        """``N_{m+1}/N_m`` implied by the per-slot yield and the repetition factor."""

        m = self.order
        repeated = (self.users - m) * (self.scheduled - 1) + 1
        return (self.direct_per_slot + self.remaining_per_slot * Fraction(m, m + 1)) / repeated


def run_batch_chain(
    ch: ChannelTensor,
    order: int,
    dest_set: Iterable[int],
    scheduled: int,
    stream: RandomStream,
    first_slot: int = 1,
    batch_index: int = 0,
    ledger: Optional[KnowledgeLedger] = None,
) -> BatchChainResult:
    """PSIN on hop ``m``, AF on hops ``m+1..K−1``, one hop-K slot per nulled index."""

    users = ch.shape.users
    hops = ch.shape.hops
    dest_set = frozenset(dest_set)
    if hops != users:
        raise DomainError(f"the batch chain runs on a {users}-hop network, got {hops} hops")
    if not 1 <= order <= users - 1:
        raise DomainError(f"order must lie in 1..{users - 1}, got {order}")
    transmitters = rotated_transmitters(users, scheduled, batch_index)
    width = users * (scheduled - 1)
    symbols = {index: stream.complex_normal(width) for index in transmitters}
    ids = {index: tuple(f"b{batch_index}:{index}#{p}" for p in range(width)) for index in transmitters}
    if ledger is not None:
        for index in transmitters:
            ledger.give(NodeId(order, index), ids[index])
    batch = random_batch(users, scheduled, order, dest_set, transmitters, symbols, order, first_slot, stream, ids)
    psin = psin_run(ch, batch, ledger)
    slot = first_slot + batch.block_length + 1
    psin_slots = psin.slots

    chains: Dict[int, List[Tuple[int, int]]] = {}
    observations: List[HopObservation] = []
    for nulled in transmitters:
        values = np.array([psin.combos[(i, nulled)].value for i in range(1, users + 1)])
        pieces = {
            source: np.array([psin.combos[(i, nulled)].parts[source].value for i in range(1, users + 1)])
            for source in transmitters
            if source != nulled
        }
        chain: List[Tuple[int, int]] = []
        relay_needs = {i: [own_rx(t) for t in psin_slots] + csi_through(psin_slots) for i in range(1, users + 1)}
        for hop in range(order + 1, users + 1):
            received = af_hop(ch, hop, values, slot, ledger, relay_needs)
            matrix = ch.matrix(hop, slot)
            pieces = {source: matrix @ vector for source, vector in pieces.items()}
            chain.append((hop, slot))
            relay_needs = {i: [own_rx(slot)] for i in range(1, users + 1)}
            values = received
            slot += 1
        chains[nulled] = chain
        used = psin_slots + [s for _, s in chain]
        observations.append(
            HopObservation(
                slot=chain[-1][1],
                nulled=nulled,
                received=values,
                pieces=pieces,
                generators={source: NodeId(order, source) for source in pieces},
                needs={
                    source: tuple([own_message(item) for item in ids[source]] + csi_through(used))
                    for source in pieces
                },
                tag=f"b{batch_index}:n{nulled}",
            )
        )
    generation = generate_higher_order(observations, order, dest_set, users, scheduled, ledger)
    return BatchChainResult(
        users, scheduled, order, psin, chains, observations, generation, slot - first_slot
    )
