from __future__ import annotations

import logging

import numpy as np

try:  # pragma: no cover - allows running as script and as package
    from errors import DomainError
    from numerics import RandomStream
except ImportError:  # pragma: no cover
    from ..errors import DomainError
    from ..numerics import RandomStream

from .models import ChannelTensor, NetworkShape

LOGGER = logging.getLogger(__name__)


def draw_channels(shape: NetworkShape, slots: int, stream: RandomStream) -> ChannelTensor:
    """I.i.d. complex normal coefficients for every hop and slot; zeros are redrawn."""

    if slots < 1:
        raise DomainError(f"need at least one slot, got {slots}")
    entries = stream.complex_normal((slots, shape.hops, shape.users, shape.users))
    zeros = entries == 0
    while np.any(zeros):
        LOGGER.debug("redrawing %d zero channel coefficients", int(zeros.sum()))
        entries[zeros] = stream.complex_normal(int(zeros.sum()))
        zeros = entries == 0
    return ChannelTensor(shape, entries)


def propagate(ch: ChannelTensor, hop: int, slot: int, x) -> np.ndarray:
    """Noise-free reception ``y_i = Σ_j h_ij(t) x_j`` of one hop at one slot."""

    signal = np.asarray(x, dtype=np.complex128)
    if signal.shape != (ch.shape.users,):
        raise DomainError(f"transmit vector must have length {ch.shape.users}, got {signal.shape}")
    return ch.matrix(hop, slot) @ signal
