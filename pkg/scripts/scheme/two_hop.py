"""Phase 1 of the 3-user 2-hop interference network.

Hop 1 schedules all three destinations at once (transmitter ``k`` carries the
symbols of destination ``k``). In hop 2 two relays talk per slot, each forwarding
a combination that nulls the same source ``ℓ``; both remaining destinations
then learn one order-2 symbol each, and each of those is useful to both.

Delivery of the order-2 symbols is a separate sub-scheme; decoding here takes
them as given.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

try:  # pragma: no cover - allows running as script and as package
    from accounting import two_hop_order2_counts, two_hop_phase1_durations
    from errors import DecodeFailure, DomainError
    from network import KnowledgeLedger, NetworkShape, NodeId, assert_knowledge, csi_through, draw_channels, own_message, own_rx
    from numerics import RandomStream, condition_number, residual, solve_linear
except ImportError:  # pragma: no cover
    from ..accounting import two_hop_order2_counts, two_hop_phase1_durations
    from ..errors import DecodeFailure, DomainError
    from ..network import KnowledgeLedger, NetworkShape, NodeId, assert_knowledge, csi_through, draw_channels, own_message, own_rx
    from ..numerics import RandomStream, condition_number, residual, solve_linear

from .blocks import af_hop, psin_hop1_3user
from .models import DecodeResult, OrderSymbol, PsinResult, Transcript
from .x3 import DECODE_TOL, MAX_REDRAWS, _with_redraws, roles

LOGGER = logging.getLogger(__name__)

USERS = 3
BLOCK = 6
TWO_HOP_GRANULARITY = 36
# (batch, relay) pairs talking together in the three hop-2 slots of one nulled index
RELAY_PAIRS = (((0, 1), (0, 2)), ((0, 3), (1, 1)), ((1, 2), (1, 3)))


@dataclass
class _PairSlot:
    slot: int
    nulled: int
    first_batch: int
    active: Tuple[Tuple[int, int], Tuple[int, int]]
    symbols: Dict[Tuple[int, int], OrderSymbol]


def _hop2_slot(
    ch, ledger: KnowledgeLedger, batches: List[PsinResult], ids, pair_index: int, nulled: int, active, slot: int
) -> Tuple[_PairSlot, np.ndarray, np.ndarray]:
    x = np.zeros(USERS, dtype=np.complex128)
    needs = {}
    for position, relay in active:
        psin = batches[position]
        x[relay - 1] = psin.combos[(relay, nulled)].value
        needs[relay] = [own_rx(t) for t in psin.slots] + csi_through(psin.slots)
    y = af_hop(ch, 2, x, slot, ledger, needs)
    matrix = ch.matrix(2, slot)
    a, b = roles(nulled)
    slots = sorted({t for position, _ in active for t in batches[position].slots} | {slot})
    symbols: Dict[Tuple[int, int], OrderSymbol] = {}
    for source, listener in ((b, a), (a, b)):
        # what ``listener`` hears from ``source`` after nulling ``nulled``
        value = sum(
            matrix[listener - 1, relay - 1] * batches[position].combos[(relay, nulled)].parts[source].value
            for position, relay in active
        )
        generator = NodeId(1, source)
        atoms = [own_message(item) for position, _ in active for item in ids[position][source]]
        symbol_needs = tuple(atoms + csi_through(slots))
        symbol_id = f"p{pair_index}:{slot}:{source}|{listener}"
        if ledger is not None:
            assert_knowledge(ledger, generator, symbol_needs, slot + 1, "regenerate order-2 symbol")
            ledger.give(generator, [symbol_id])
        symbols[(source, listener)] = OrderSymbol(
            symbol_id=symbol_id,
            order=2,
            dest_set=frozenset({a, b}),
            holder=generator,
            value=complex(value),
            provenance="regenerated-PLC",
            needs=symbol_needs,
            slot=slot,
            source=source,
        )
    return _PairSlot(slot, nulled, 2 * pair_index, tuple(active), symbols), x, y


def _decode(ch, j: int, psins: List[PsinResult], slots: List[_PairSlot], received, truth) -> Tuple[np.ndarray, DecodeResult]:
    conditions, worst = [], 0.0
    plc: Dict[Tuple[int, int, int], complex] = {}
    for entry in slots:
        if entry.nulled == j:
            continue
        a, b = roles(entry.nulled)
        other = b if j == a else a
        matrix = ch.matrix(2, entry.slot)
        relays = [relay for _, relay in entry.active]
        rows = np.array([matrix[j - 1, [r - 1 for r in relays]], matrix[other - 1, [r - 1 for r in relays]]])
        rhs = np.array(
            [
                received[entry.slot][j - 1] - entry.symbols[(other, j)].value,
                entry.symbols[(j, other)].value,
            ]
        )
        conditions.append(condition_number(rows))
        values = solve_linear(rows, rhs)
        worst = max(worst, residual(rows, values, rhs))
        for (position, relay), value in zip(entry.active, values):
            plc[(entry.first_batch + position, relay, entry.nulled)] = value
    decoded = np.zeros(len(psins) * BLOCK, dtype=np.complex128)
    for index, psin in enumerate(psins):
        keys = [(relay, nulled) for nulled in range(1, USERS + 1) if nulled != j for relay in range(1, USERS + 1)]
        matrix = np.array([psin.combos[key].parts[j].coeff_row for key in keys])
        rhs = np.array([plc[(index, relay, nulled)] for relay, nulled in keys])
        conditions.append(condition_number(matrix))
        values = solve_linear(matrix, rhs)
        worst = max(worst, residual(matrix, values, rhs))
        decoded[index * BLOCK : (index + 1) * BLOCK] = values
    result = DecodeResult(
        destination=f"D{j}",
        symbols=int(truth.size),
        max_error=float(np.max(np.abs(decoded - truth))),
        max_residual=worst,
        max_condition=max(conditions, default=1.0),
        reference=float(np.max(np.abs(truth))),
    )
    return decoded, result


def _run_once(n1: int, seed: int, stream: RandomStream, tol: float) -> Transcript:
    shape = NetworkShape(USERS, 2)
    batches = n1 // (USERS * BLOCK)
    hop1_slots = batches * (BLOCK + 1)
    hop2_slots = n1 // 4
    ch = draw_channels(shape, hop1_slots + hop2_slots, stream)
    info = stream.complex_normal((USERS, n1 // USERS))
    ledger = KnowledgeLedger(shape)
    slot_log: List[dict] = []

    psins: List[PsinResult] = []
    ids: List[Dict[int, Tuple[str, ...]]] = []
    slot = 1
    for index in range(batches):
        symbols = {k: info[k - 1, index * BLOCK : (index + 1) * BLOCK] for k in range(1, USERS + 1)}
        names = {k: tuple(f"u{k}#{index * BLOCK + p}" for p in range(BLOCK)) for k in range(1, USERS + 1)}
        for k in range(1, USERS + 1):
            ledger.give(NodeId(1, k), names[k])
        psin = psin_hop1_3user(ch, 1, slot, symbols, None, ledger, names)
        for column, t in enumerate(psin.slots):
            slot_log.append({"slot": t, "phase": 1, "hop": 1, "tx": list(psin.transmitted[:, column]), "rx": list(psin.received[:, column])})
        psins.append(psin)
        ids.append(names)
        slot += BLOCK + 1

    pair_slots: List[_PairSlot] = []
    received: Dict[int, np.ndarray] = {}
    for pair_index in range(batches // 2):
        window = psins[2 * pair_index : 2 * pair_index + 2]
        names = ids[2 * pair_index : 2 * pair_index + 2]
        for nulled in range(1, USERS + 1):
            for active in RELAY_PAIRS:
                entry, x, y = _hop2_slot(ch, ledger, window, names, pair_index, nulled, active, slot)
                pair_slots.append(entry)
                received[slot] = y
                slot_log.append({"slot": slot, "phase": 1, "hop": 2, "tx": list(x), "rx": list(y)})
                slot += 1

    decode: Dict[str, DecodeResult] = {}
    for j in range(1, USERS + 1):
        needs = [own_rx(t) for t in sorted(received)] + csi_through(range(1, slot))
        assert_knowledge(ledger, NodeId(3, j), needs, slot, "decode")
        _, result = _decode(ch, j, psins, pair_slots, received, info[j - 1])
        decode[result.destination] = result
        if not result.ok(tol):
            raise DecodeFailure(result.destination, result.max_error, f"seed {seed}")

    order2 = sum(len(entry.symbols) for entry in pair_slots)
    return Transcript(
        variant="two-hop-phase1",
        seed=seed,
        stream_id=stream.stream_id,
        shape=shape,
        n1=n1,
        slot_counts=dict(Counter((entry["phase"], entry["hop"]) for entry in slot_log)),
        n_measured=[n1, order2],
        decode=decode,
        order2_twice=order2,
        slot_log=slot_log,
        causality_checks=ledger.checks,
        causality_violations=ledger.violations,
        audit=list(ledger.audit),
        conditions=[result.max_condition for result in decode.values()],
    )


def run_two_hop_phase1(n1: int, seed: int = 0, tol: float = DECODE_TOL, max_redraws: int = MAX_REDRAWS) -> Transcript:
    """Simulate phase 1 of the 2-hop scheme for ``n1`` symbols (a multiple of 36)."""

    if n1 <= 0 or n1 % TWO_HOP_GRANULARITY:
        raise DomainError(f"N1 must be a positive multiple of {TWO_HOP_GRANULARITY}, got {n1}")
    return _with_redraws(lambda stream: _run_once(n1, seed, stream, tol), seed, max_redraws)


def two_hop_concordance(transcript: Transcript) -> List[str]:
    """Differences between a phase-1 transcript and the exact 2-hop accounting."""

    hop1, hop2 = two_hop_phase1_durations(transcript.n1)
    order2, _ = two_hop_order2_counts(transcript.n1)
    problems = []
    for key, expected in (((1, 1), hop1), ((1, 2), hop2)):
        measured = transcript.slot_counts.get(key, 0)
        if measured != expected:
            problems.append(f"T_{key[0]}^({key[1]}): measured {measured}, expected {expected}")
    if transcript.n_measured[1] != order2:
        problems.append(f"N_2: measured {transcript.n_measured[1]}, expected {order2}")
    return problems
