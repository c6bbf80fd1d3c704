import numpy as np
import pytest

from safeset.core import Dim, MarkovSystem, OssSpec


def line_space(lo=0.0, hi=10.0, failure=None):
    return OssSpec((Dim("s", lo, hi),), failure or (lambda s: False), "line")


def step_system(lo=0.0, hi=10.0, fail_at=None):
    """s' = s + u on [lo, hi]; failure at s >= fail_at when given."""
    failure = None if fail_at is None else (lambda s: s[0] >= fail_at)
    return MarkovSystem("step", line_space(lo, hi, failure), lambda s, u, rng: s + u[:1])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
