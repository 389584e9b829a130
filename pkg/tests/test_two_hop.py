from fractions import Fraction

import pytest

from scripts.errors import DomainError
from scripts.scheme import run_two_hop_phase1, two_hop_concordance


def test_phase1_counts(two_hop_transcript):
    assert two_hop_transcript.slot_counts == {(1, 1): 14, (1, 2): 9}
    assert two_hop_transcript.n_measured == [36, 18]
    assert two_hop_concordance(two_hop_transcript) == []


def test_every_order2_symbol_is_useful_twice(two_hop_transcript):
    assert two_hop_transcript.order2_once == 0
    assert two_hop_transcript.measured_eta2() == Fraction(1)


def test_phase1_decodes_with_order2_side_information(two_hop_transcript):
    assert sorted(two_hop_transcript.decode) == ["D1", "D2", "D3"]
    assert two_hop_transcript.decoded_ok(1e-8)
    assert two_hop_transcript.causality_violations == 0


def test_phase1_domain():
    with pytest.raises(DomainError):
        run_two_hop_phase1(30)


def test_larger_run_scales_counts():
    transcript = run_two_hop_phase1(72, seed=1)
    assert transcript.slot_counts == {(1, 1): 28, (1, 2): 18}
    assert two_hop_concordance(transcript) == []
