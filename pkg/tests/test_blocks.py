import numpy as np
import pytest

import scripts.scheme.blocks as blocks
from scripts.accounting import lambda_klj
from scripts.errors import DomainError, GroupingError
from scripts.network import KnowledgeLedger, NetworkShape, NodeId, draw_channels
from scripts.numerics import RandomStream, rank
from scripts.scheme.models import OrderSymbol, RemainingPlc


def test_cyclic_order_and_rotation():
    assert blocks.cyclic_after(2, 3) == [3, 1]
    assert blocks.cyclic_after(4, 5) == [5, 1, 2, 3]
    assert blocks.rotated_transmitters(4, 3, 0) == (1, 2, 3)
    assert blocks.rotated_transmitters(4, 3, 1) == (1, 2, 4)
    precoder = blocks.sum_precoder(2)
    assert precoder.shape == (3, 2)
    assert np.array_equal(precoder[2], [1, 1])


def test_psin_hop1_nulls_and_keeps_full_rank():
    stream = RandomStream(2)
    ch = draw_channels(NetworkShape(3, 3), 7, stream)
    symbols = {k: stream.complex_normal(6) for k in (1, 2, 3)}
    result = blocks.psin_hop1_3user(ch, 1, 1, symbols)
    assert result.slots == list(range(1, 8))
    for (receiver, nulled), combo in result.combos.items():
        assert nulled not in combo.parts
        assert combo.value == pytest.approx(sum(part.value for part in combo.parts.values()))
        omega_row = combo.omega * np.array([ch.matrix(1, t)[receiver - 1, nulled - 1] for t in result.slots])
        assert np.max(np.abs(omega_row @ result.batch.precoders[nulled])) < 1e-9
    for source in (1, 2, 3):
        matrix = blocks.plc_matrix(result, source)
        assert matrix.shape == (6, 6)
        assert rank(matrix) == 6
        assert np.allclose(matrix @ symbols[source], [p.value for p in _parts(result, source)])
    assert result.batch.dest_of(2) == frozenset({2})


def _parts(result, source):
    return [
        combo.parts[source] for (_, nulled), combo in sorted(result.combos.items()) if nulled != source
    ]


def test_psin_run_general_k_with_ledger():
    stream = RandomStream(4)
    shape = NetworkShape(4, 1)
    ch = draw_channels(shape, 9, stream)
    ledger = KnowledgeLedger(shape)
    symbols = {k: stream.complex_normal(8) for k in (1, 2, 4)}
    ids = {k: tuple(f"u{k}#{p}" for p in range(8)) for k in symbols}
    for k, names in ids.items():
        ledger.give(NodeId(1, k), names)
    batch = blocks.random_batch(4, 3, 1, {3}, (1, 2, 4), symbols, 1, 1, stream, ids)
    result = blocks.psin_run(ch, batch, ledger)
    assert len(result.combos) == 12
    assert ledger.violations == 0
    for source in (1, 2, 4):
        assert rank(blocks.plc_matrix(result, source)) == 8


def test_psin_batch_validation():
    stream = RandomStream(0)
    with pytest.raises(DomainError):
        blocks.random_batch(3, 3, 1, {1}, (1, 2), {1: np.zeros(6), 2: np.zeros(6)}, 1, 1, stream)
    with pytest.raises(DomainError):
        blocks.random_batch(3, 3, 1, {1}, (1, 2, 3), {k: np.zeros(5) for k in (1, 2, 3)}, 1, 1, stream)


def _symbol(name, holder, value, dest=(1, 2)):
    return OrderSymbol(name, len(dest), frozenset(dest), holder, value)


def test_offload_moves_symbols_one_layer():
    stream = RandomStream(6)
    shape = NetworkShape(3, 3)
    ch = draw_channels(shape, 2, stream)
    ledger = KnowledgeLedger(shape)
    parents = [_symbol("a", NodeId(1, 1), 1 + 1j), _symbol("b", NodeId(1, 2), 2 - 1j), None]
    result = blocks.offload(ch, 1, parents, 1, ledger, tag="t")
    assert [child.holder for child in result.children] == [NodeId(2, k) for k in (1, 2, 3)]
    assert all(child.provenance == "offloaded" and child.dest_set == {1, 2} for child in result.children)
    expected = ch.matrix(1, 1)[:, :2] @ np.array([1 + 1j, 2 - 1j])
    assert np.allclose([child.value for child in result.children], expected)
    assert result.mixing.shape == (3, 2)
    assert ledger.holds(NodeId(2, 3), "to1.3")
    with pytest.raises(DomainError):
        blocks.offload(ch, 1, [None, _symbol("c", NodeId(1, 1), 1), None], 2)
    with pytest.raises(DomainError):
        blocks.offload(ch, 1, [_symbol("d", NodeId(1, 1), 1), _symbol("e", NodeId(1, 2), 1, (1, 3)), None], 2)


def test_af_hop_and_effective_row():
    stream = RandomStream(8)
    ch = draw_channels(NetworkShape(3, 3), 3, stream)
    x = stream.complex_normal(3)
    first = blocks.af_hop(ch, 1, x, 1)
    second = blocks.af_hop(ch, 2, first, 2)
    row = blocks.effective_row(ch, [(1, 1), (2, 2)], 3)
    assert row @ x == pytest.approx(second[2])
    with pytest.raises(DomainError):
        blocks.effective_row(ch, [], 1)
    with pytest.raises(DomainError):
        blocks.af_hop(ch, 1, [1, 2], 1)


def _record(name, available_at, desired_by, value, generator=NodeId(1, 1)):
    return RemainingPlc(name, generator, 1, available_at, frozenset(desired_by), value, slot=4)


def test_group_remaining_pairs_and_triples():
    pairs = blocks.group_remaining([_record("r1", 2, {1}, 1.0), _record("r2", 1, {2}, 2j)], 1)
    assert len(pairs) == 1
    assert pairs[0].value == 1 + 2j
    assert pairs[0].dest_set == {1, 2}
    assert pairs[0].provenance == "paired-side-info"
    assert pairs[0].components == ("r2", "r1")

    records = [_record(f"s{k}", k, {1, 2, 3} - {k}, complex(k)) for k in (1, 2, 3)]
    triples = blocks.group_remaining(records, 2, RandomStream(1))
    assert len(triples) == 2
    for symbol in triples:
        assert symbol.order == 3
        assert symbol.value == pytest.approx(symbol.weights @ np.array([1, 2, 3]))


def test_group_remaining_rejects_unbalanced_pools():
    with pytest.raises(GroupingError):
        blocks.group_remaining([_record("r1", 2, {1}, 1.0)], 1)
    with pytest.raises(GroupingError):
        blocks.group_remaining([_record("r1", 2, {1}, 1.0), _record("r2", 1, {2}, 1.0), _record("r3", 2, {1}, 1.0)], 1)
    with pytest.raises(GroupingError):
        blocks.group_remaining([_record("r1", 2, {1, 3}, 1.0)], 1)
    with pytest.raises(DomainError):
        blocks.group_remaining([], 2)


def test_final_delivery_divides_out_the_channel():
    stream = RandomStream(9)
    ch = draw_channels(NetworkShape(3, 3), 3, stream)
    symbols = [
        _symbol("x", NodeId(3, 1), 1 - 1j, (1, 2, 3)),
        _symbol("y", NodeId(3, 3), 0.5j, (1, 2, 3)),
    ]
    result = blocks.final_delivery(ch, 3, symbols, [2, 3])
    for receiver in (1, 2, 3):
        assert np.allclose(result.delivered[receiver], [1 - 1j, 0.5j])
    with pytest.raises(DomainError):
        blocks.final_delivery(ch, 3, symbols, [2])
    with pytest.raises(DomainError):
        blocks.final_delivery(ch, 2, symbols, [2, 3])


@pytest.mark.parametrize(
    "users,scheduled,order,dest_set",
    [(3, 3, 1, {1}), (3, 3, 2, {1, 2}), (4, 3, 1, {2}), (4, 3, 2, {1, 3}), (4, 4, 3, {1, 2, 4}), (5, 3, 2, {2, 5})],
)
def test_batch_chain_yield_matches_step_ratio(users, scheduled, order, dest_set):
    stream = RandomStream(12)
    shape = NetworkShape(users, users)
    ch = draw_channels(shape, 60, stream)
    ledger = KnowledgeLedger(shape)
    chain = blocks.run_batch_chain(ch, order, dest_set, scheduled, stream, ledger=ledger)
    spectators = users - order
    assert len(chain.observations) == scheduled
    assert chain.direct_per_slot == spectators * (scheduled - 2)
    assert chain.remaining_per_slot == spectators
    assert chain.implied_ratio() == lambda_klj(users, scheduled, order)
    assert chain.slots_used == users * (scheduled - 1) + 1 + scheduled * (users - order)
    assert all(symbol.dest_set == frozenset(dest_set) | {symbol_spectator(symbol)} for symbol in chain.generation.direct)
    assert ledger.violations == 0
    assert ledger.checks > 0


def symbol_spectator(symbol):
    return int(symbol.symbol_id.rsplit(">", 1)[1])


def test_batch_chain_direct_symbols_are_what_spectators_hear():
    stream = RandomStream(21)
    ch = draw_channels(NetworkShape(3, 3), 20, stream)
    chain = blocks.run_batch_chain(ch, 1, {1}, 3, stream)
    for obs in chain.observations:
        for spectator in (2, 3):
            direct = [s for s in chain.generation.direct if s.slot == obs.slot and symbol_spectator(s) == spectator]
            side = [r for r in chain.generation.remaining if r.slot == obs.slot and r.available_at == spectator]
            assert len(direct) == 1 and len(side) == 1
            assert direct[0].value + side[0].value == pytest.approx(obs.received[spectator - 1])


def test_batch_chain_domain():
    stream = RandomStream(0)
    ch = draw_channels(NetworkShape(3, 2), 10, stream)
    with pytest.raises(DomainError):
        blocks.run_batch_chain(ch, 1, {1}, 3, stream)
