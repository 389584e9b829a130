"""Constructive transmission scheme: building blocks, full 3-user runs and the interleaver."""

from .blocks import (
    af_hop,
    effective_row,
    final_delivery,
    generate_higher_order,
    group_remaining,
    offload,
    plc_matrix,
    psin_hop1_3user,
    psin_run,
    random_batch,
    run_batch_chain,
)
from .interleaver import build_interleaver
from .models import (
    DecodeResult,
    InterleaverPlan,
    NulledCombination,
    OrderSymbol,
    PartialLinearCombination,
    PsinBatch,
    RemainingPlc,
    Transcript,
)
from .two_hop import run_two_hop_phase1, two_hop_concordance
from .x3 import SIMULATION_GRANULARITY, accounting_gap, concordance, construction_counts, round_n1, run_ic6, run_x3

__all__ = [
    "DecodeResult",
    "InterleaverPlan",
    "NulledCombination",
    "OrderSymbol",
    "PartialLinearCombination",
    "PsinBatch",
    "RemainingPlc",
    "SIMULATION_GRANULARITY",
    "Transcript",
    "accounting_gap",
    "af_hop",
    "build_interleaver",
    "concordance",
    "construction_counts",
    "effective_row",
    "final_delivery",
    "generate_higher_order",
    "group_remaining",
    "offload",
    "plc_matrix",
    "psin_hop1_3user",
    "psin_run",
    "random_batch",
    "round_n1",
    "run_batch_chain",
    "run_ic6",
    "run_two_hop_phase1",
    "run_x3",
    "two_hop_concordance",
]
