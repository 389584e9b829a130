import numpy as np
import pytest

from scripts.errors import CausalityViolation, DomainError
from scripts.network import (
    KnowledgeAtom,
    KnowledgeLedger,
    NetworkShape,
    NodeId,
    assert_knowledge,
    csi_through,
    draw_channels,
    global_csi,
    own_message,
    own_rx,
    own_tx,
    propagate,
)
from scripts.numerics import RandomStream


def test_shape_and_labels():
    shape = NetworkShape(3, 3)
    assert shape.layers == 4
    assert shape.node(1, 2).label(shape.layers) == "S2"
    assert shape.node(3, 1).label(shape.layers) == "V3_1"
    assert shape.node(4, 3).label(shape.layers) == "D3"
    with pytest.raises(DomainError):
        shape.node(5, 1)
    with pytest.raises(DomainError):
        NetworkShape(2, 3)


def test_channels_are_reproducible_and_propagate():
    shape = NetworkShape(3, 2)
    ch = draw_channels(shape, 4, RandomStream(1))
    again = draw_channels(shape, 4, RandomStream(1))
    assert ch.slots == 4
    assert np.array_equal(ch.entries, again.entries)
    assert ch.coefficient(2, 3, 1, 2) == ch.matrix(2, 3)[0, 1]
    x = np.array([1, 0, 0], dtype=complex)
    assert np.allclose(propagate(ch, 1, 1, x), ch.matrix(1, 1)[:, 0])
    with pytest.raises(IndexError):
        ch.matrix(3, 1)
    with pytest.raises(ValueError):
        ch.entries[0, 0, 0, 0] = 0


def test_ledger_enforces_one_slot_delay():
    ledger = KnowledgeLedger(NetworkShape(3, 3))
    relay = NodeId(2, 1)
    ledger.record_rx(relay, 4)
    assert ledger.legal(relay, own_rx(4), 5)
    assert not ledger.legal(relay, own_rx(4), 4)
    assert not ledger.legal(relay, own_rx(3), 5)
    assert ledger.legal(relay, global_csi(4), 5)
    assert not ledger.legal(relay, global_csi(5), 5)
    assert not ledger.legal(relay, own_tx(2), 5)


def test_ledger_message_ownership():
    ledger = KnowledgeLedger(NetworkShape(3, 3))
    source = NodeId(1, 1)
    ledger.give(source, ["u1#0"])
    assert ledger.legal(source, own_message("u1#0"), 1)
    assert not ledger.legal(NodeId(1, 2), own_message("u1#0"), 1)
    assert not ledger.legal(NodeId(1, 2), own_message("u1#0", owner=source), 1)


def test_assert_knowledge_counts_and_raises():
    ledger = KnowledgeLedger(NetworkShape(3, 3))
    node = NodeId(2, 2)
    ledger.record_rx(node, 1)
    assert assert_knowledge(ledger, node, [own_rx(1)] + csi_through([1]), 2, "ok")
    with pytest.raises(CausalityViolation) as excinfo:
        assert_knowledge(ledger, node, csi_through([1, 2]), 2, "too early")
    assert excinfo.value.at_slot == 2
    assert ledger.checks == 2
    assert ledger.violations == 1
    assert [entry["ok"] for entry in ledger.audit] == [True, False]


def test_knowledge_atom_validation():
    with pytest.raises(DomainError):
        KnowledgeAtom("gossip", slot=1)
    with pytest.raises(DomainError):
        KnowledgeAtom("own-message")
    with pytest.raises(DomainError):
        KnowledgeAtom("own-rx")
    assert csi_through([]) == []
