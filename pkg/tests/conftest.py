import pathlib
import sys

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))


@pytest.fixture(scope="session")
def x3_transcript():
    from scripts.scheme import run_x3

    return run_x3(216, seed=3)


@pytest.fixture(scope="session")
def x3_run():
    from scripts.numerics import RandomStream
    from scripts.scheme.x3 import build_x3

    return build_x3(216, RandomStream(3))


@pytest.fixture(scope="session")
def two_hop_transcript():
    from scripts.scheme import run_two_hop_phase1

    return run_two_hop_phase1(36, seed=3)
