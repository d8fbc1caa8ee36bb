import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from fbipg import assemble_problem  # noqa: E402
from fbipg.harness import compute_oracle, gen_least_squares, least_squares_spec  # noqa: E402


@pytest.fixture(scope="session")
def small_ls():
    """N=8, n=12 consistent least-squares instance with its oracle."""
    A, b, x = gen_least_squares(8, 12, 7, True, 3)
    p = assemble_problem(least_squares_spec(A, b))
    return p, compute_oracle(p)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
