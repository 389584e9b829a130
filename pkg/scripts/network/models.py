from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:  # pragma: no cover - allows running as script and as package
    from errors import DomainError
except ImportError:  # pragma: no cover
    from ..errors import DomainError


@dataclass(frozen=True)
class NetworkShape:
    """Users per layer and number of hops of a layered network."""

    users: int
    hops: int

    def __post_init__(self) -> None:
        if self.users < 3:
            raise DomainError(f"need at least 3 users, got {self.users}")
        if self.hops < 1:
            raise DomainError(f"need at least 1 hop, got {self.hops}")

    @property
    def layers(self) -> int:
        return self.hops + 1

    def node(self, layer: int, index: int) -> "NodeId":
        node = NodeId(layer, index)
        if not 1 <= layer <= self.layers or not 1 <= index <= self.users:
            raise DomainError(f"{node.label()} is outside a {self.users}-user {self.hops}-hop network")
        return node


@dataclass(frozen=True, order=True)
class NodeId:
    """Node ``index`` of ``layer``; layer 1 holds the sources."""

    layer: int
    index: int

    def label(self, last_layer: int | None = None) -> str:
        if self.layer == 1:
            return f"S{self.index}"
        if last_layer is not None and self.layer == last_layer:
            return f"D{self.index}"
        return f"V{self.layer}_{self.index}"

    def __str__(self) -> str:
        return self.label()


@dataclass(frozen=True)
class ChannelTensor:
    """Channel coefficients ``h^(n)_{ij}(t)`` for every hop and slot.

    ``entries`` has shape ``(slots, hops, users, users)``: slot ``t`` holds the
    network state H(t), row ``i`` is the receiver and column ``j`` the transmitter.
    Hops and slots are 1-based in the accessors.
    """

    shape: NetworkShape
    entries: np.ndarray

    def __post_init__(self) -> None:
        expected = (self.shape.hops, self.shape.users, self.shape.users)
        if self.entries.ndim != 4 or self.entries.shape[1:] != expected:
            raise DomainError(f"channel entries must have shape (slots, {expected}), got {self.entries.shape}")
        self.entries.setflags(write=False)

    @property
    def slots(self) -> int:
        return int(self.entries.shape[0])

    def _check(self, hop: int, slot: int) -> None:
        if not 1 <= hop <= self.shape.hops:
            raise IndexError(f"hop {hop} outside 1..{self.shape.hops}")
        if not 1 <= slot <= self.slots:
            raise IndexError(f"slot {slot} outside 1..{self.slots}")

    def matrix(self, hop: int, slot: int) -> np.ndarray:
        """K×K matrix of hop ``hop`` at slot ``slot``."""

        self._check(hop, slot)
        return self.entries[slot - 1, hop - 1]

    def coefficient(self, hop: int, slot: int, receiver: int, transmitter: int) -> complex:
        self._check(hop, slot)
        return complex(self.entries[slot - 1, hop - 1, receiver - 1, transmitter - 1])
