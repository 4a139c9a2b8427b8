import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import strategies as st

from zealotvm.network import Network, NodeRole


def make_network(roles, edges, n=None):
    """Build a network from ``[(dst, src, weight), ...]``."""
    roles = np.asarray(roles, dtype=np.int8)
    n = roles.size if n is None else n
    if edges:
        dst, src, w = zip(*edges)
    else:
        dst, src, w = (), (), ()
    return Network(roles, sp.csr_array((w, (dst, src)), shape=(n, n)))


def random_network(rng, n, z0, z1, density):
    """Valid network where every free node hears at least one zealot path.

    Each free node gets at least one in-edge; the first free node is wired to
    a zealot, and each other one with probability 1/2, so the opinion system
    is nonsingular while the instances stay varied.
    """
    roles = np.zeros(n, dtype=np.int8)
    perm = rng.permutation(n)
    roles[perm[:z0]] = NodeRole.ZEALOT0
    roles[perm[z0:z0 + z1]] = NodeRole.ZEALOT1
    free = np.flatnonzero(roles == NodeRole.FREE)
    zealots = np.flatnonzero(roles != NodeRole.FREE)
    w = np.where(rng.random((n, n)) < density, rng.exponential(1.0, (n, n)) + 1e-3, 0.0)
    np.fill_diagonal(w, 0.0)
    w[zealots] = 0.0
    for k, i in enumerate(free):
        if w[i].sum() == 0:
            w[i, rng.choice(np.delete(np.arange(n), i))] = rng.uniform(0.1, 2.0)
        if k == 0 or rng.random() < 0.5:
            w[i, rng.choice(zealots)] += rng.uniform(0.1, 2.0)
    return Network(roles, sp.csr_array(w))


def random_counts(rng, n, require_both_camps=False):
    """Zealot counts leaving at least one free node and at least one zealot."""
    low = 1 if require_both_camps else 0
    z0 = int(rng.integers(low, n - 1 - low + 1))
    z1_low = 1 if require_both_camps or z0 == 0 else 0
    z1 = int(rng.integers(z1_low, n - 1 - z0 + 1))
    return z0, z1


@st.composite
def random_networks(draw, max_nodes=9, require_both_camps=False):
    n = draw(st.integers(3 if require_both_camps else 2, max_nodes))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    z0, z1 = random_counts(rng, n, require_both_camps)
    return random_network(rng, n, z0, z1, draw(st.floats(0.2, 1.0)))


@pytest.fixture(scope="session")
def er_validation_net():
    from zealotvm.network import generate_erdos_renyi
    return generate_erdos_renyi(100, 0.1, 23, 18, "uniform", seed=7)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
