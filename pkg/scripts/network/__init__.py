"""Layered network model: shapes, channel draws, propagation and the CSI ledger."""

from .channels import draw_channels, propagate
from .ledger import (
    KnowledgeAtom,
    KnowledgeLedger,
    assert_knowledge,
    csi_through,
    global_csi,
    own_message,
    own_rx,
    own_tx,
)
from .models import ChannelTensor, NetworkShape, NodeId

__all__ = [
    "ChannelTensor",
    "KnowledgeAtom",
    "KnowledgeLedger",
    "NetworkShape",
    "NodeId",
    "assert_knowledge",
    "csi_through",
    "draw_channels",
    "global_csi",
    "own_message",
    "own_rx",
    "own_tx",
    "propagate",
]
