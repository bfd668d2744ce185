"""numba and numpy kernels must agree; the env flag must select numpy."""
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_measure, random_tree
from twdlasso import _accel, _kernels
from twdlasso.tree import SubtreeMassAccumulator

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def test_twd_kernels_agree():
    rng = np.random.default_rng(0)
    for _ in range(20):
        t = random_tree(rng, max_leaves=50)
        acc = SubtreeMassAccumulator(t.n_nodes)
        mu = random_measure(rng, t.n_points, 7)
        nu = random_measure(rng, t.n_points, 4)
        nodes = t.node_of_point[np.concatenate([mu.indices, nu.indices])]
        mass = np.concatenate([mu.masses, -nu.masses])
        a = _kernels.twd_nb(t.parent, t.weight, nodes, mass, acc.buf, acc.mark, acc.touched)
        b = _kernels.twd_np(t.ancestors, t.weight, nodes, mass)
        assert a == pytest.approx(b, rel=1e-13, abs=1e-15)
        # scratch is left clean for the next query
        assert not acc.buf.any() and not acc.mark.any()


def test_ancestor_table(fig1_tree):
    np.testing.assert_array_equal(
        fig1_tree.ancestors,
        [[0, -1, -1], [0, 1, -1], [0, 2, -1], [0, 1, 3], [0, 1, 4]],
    )


@pytest.mark.parametrize("value, expected", [("1", "numpy"), ("0", "numba"), ("", "numba")])
def test_env_flag(value, expected):
    env = dict(os.environ, TWDLASSO_DISABLE_NUMBA=value)
    out = subprocess.run(
        [sys.executable, "-c", "import twdlasso; print(twdlasso.backend_name())"],
        env=env, capture_output=True, text=True, check=True,
    ).stdout.strip()
    assert out == expected
