"""Directed weighted influence networks with zealots.

``weights[i, j]`` is the weight of the directed edge ``j -> i``, i.e. how much
node ``j`` influences node ``i``. Zealots never receive influence, so every
nonzero entry sits in a row belonging to a free node.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np
import scipy.sparse as sp

__all__ = [
    "NodeRole",
    "Network",
    "ValidationReport",
    "ZealotInfluence",
    "InvalidNetworkError",
    "NetworkFormatError",
    "WEIGHT_LAWS",
    "validate",
    "zealot_influence",
    "generate_erdos_renyi",
    "generate_barabasi_albert",
    "generate_complete",
    "load_network",
    "save_network",
]


class NodeRole(enum.IntEnum):
    FREE = 0
    ZEALOT0 = 1
    ZEALOT1 = 2

    @property
    def label(self) -> str:
        return _ROLE_LABELS[self]


_ROLE_LABELS = {NodeRole.FREE: "free", NodeRole.ZEALOT0: "z0", NodeRole.ZEALOT1: "z1"}
_LABEL_ROLES = {v: k for k, v in _ROLE_LABELS.items()}

WEIGHT_LAWS = ("uniform", "exponential", "constant")


class InvalidNetworkError(ValueError):
    """Raised when a network violates the structural invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid network: " + "; ".join(self.violations))


class NetworkFormatError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True, eq=False)
class Network:
    """Influence graph plus node roles.

    Parameters
    ----------
    roles : array of NodeRole values, one per node.
    weights : sparse ``(n, n)`` matrix, ``weights[i, j] = w_ij``.
    """

    roles: np.ndarray
    weights: sp.csr_array
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        roles = np.asarray(self.roles, dtype=np.int8)
        roles.setflags(write=False)
        w = sp.csr_array(self.weights, dtype=float)
        if w.shape != (roles.size, roles.size):
            raise ValueError(f"weights shape {w.shape} does not match {roles.size} nodes")
        w.eliminate_zeros()
        w.sort_indices()
        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return int(self.roles.size)

    @property
    def free(self) -> np.ndarray:
        """Indices of free nodes, in increasing order."""
        return np.flatnonzero(self.roles == NodeRole.FREE)

    @property
    def zealots0(self) -> np.ndarray:
        return np.flatnonzero(self.roles == NodeRole.ZEALOT0)

    @property
    def zealots1(self) -> np.ndarray:
        return np.flatnonzero(self.roles == NodeRole.ZEALOT1)

    @property
    def in_degree(self) -> np.ndarray:
        """``d_i``, total influence received by every node."""
        return np.asarray(self.weights.sum(axis=1)).ravel()

    @property
    def num_edges(self) -> int:
        return int(self.weights.nnz)

    def edges(self):
        """Return ``(dst, src, weight)`` arrays over all edges, row-major."""
        coo = self.weights.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]

    def free_block(self) -> sp.csr_array:
        """Weights among free nodes, indexed by position in :attr:`free`."""
        f = self.free
        return sp.csr_array(self.weights[f][:, f])

    def with_weights(self, weights) -> "Network":
        return Network(self.roles.copy(), weights)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        if self.n != other.n or not np.array_equal(self.roles, other.roles):
            return False
        diff = (self.weights - other.weights).tocsr()
        diff.eliminate_zeros()
        return diff.nnz == 0

    __hash__ = None


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def raise_if_invalid(self):
        if self.violations:
            raise InvalidNetworkError(self.violations)


@dataclass(frozen=True)
class ZealotInfluence:
    """Per-free-node influence from each zealot camp (aligned with ``net.free``)."""

    z0: np.ndarray
    z1: np.ndarray


def validate(net: Network) -> ValidationReport:
    report = ValidationReport()
    roles = net.roles
    bad_roles = ~np.isin(roles, [r.value for r in NodeRole])
    for i in np.flatnonzero(bad_roles):
        report.violations.append(f"node {i}: unknown role {roles[i]}")

    coo = net.weights.tocoo()
    if np.any(~np.isfinite(coo.data)):
        report.violations.append("non-finite weight")
    for i, j in zip(coo.row[coo.data < 0], coo.col[coo.data < 0]):
        report.violations.append(f"negative weight on edge {j}->{i}")
    for i in np.unique(coo.row[coo.row == coo.col]):
        report.violations.append(f"self-loop at node {i}")
    into_zealots = np.unique(coo.row[roles[coo.row] != NodeRole.FREE])
    for i in into_zealots:
        report.violations.append(f"zealot receives influence: node {i}")

    d = net.in_degree
    for i in net.free[d[net.free] <= 0]:
        report.violations.append(f"isolated free node {i} (in-degree 0)")
    return report


def zealot_influence(net: Network) -> ZealotInfluence:
    validate(net).raise_if_invalid()
    w = net.weights[net.free]
    z0 = np.asarray(w[:, net.zealots0].sum(axis=1)).ravel()
    z1 = np.asarray(w[:, net.zealots1].sum(axis=1)).ravel()
    return ZealotInfluence(z0=z0, z1=z1)


# ---------------------------------------------------------------- generators

def _check_counts(n, z0_count, z1_count):
    if n < 1:
        raise ValueError(f"need at least one node, got n={n}")
    if z0_count < 0 or z1_count < 0 or z0_count + z1_count > n:
        raise ValueError(f"inconsistent zealot counts z0={z0_count}, z1={z1_count} for n={n}")


def _assign_roles(rng, n, z0_count, z1_count):
    roles = np.full(n, NodeRole.FREE, dtype=np.int8)
    picked = rng.choice(n, size=z0_count + z1_count, replace=False)
    roles[picked[:z0_count]] = NodeRole.ZEALOT0
    roles[picked[z0_count:]] = NodeRole.ZEALOT1
    return roles


def _draw_weights(rng, law, size):
    if law == "uniform":
        # (0, 1]: a zero draw would silently delete the edge
        return 1.0 - rng.random(size)
    if law == "exponential":
        w = rng.exponential(1.0, size)
        return np.where(w > 0, w, np.finfo(float).tiny)
    if law == "constant":
        return np.ones(size)
    raise ValueError(f"unknown weight law {law!r}; expected one of {WEIGHT_LAWS}")


def generate_erdos_renyi(n, density, z0_count, z1_count, weight_law="uniform", seed=None) -> Network:
    """Directed G(n, p) on the admissible pairs (free destination, no self-loop).

    A free node left with no in-edge has its row redrawn, so the result is
    always a valid network (conditioning on in-degree >= 1).
    """
    _check_counts(n, z0_count, z1_count)
    if not 0 < density <= 1:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    if n - z0_count - z1_count > 0 and n < 2:
        raise ValueError("a free node needs at least one other node to listen to")
    rng = np.random.default_rng(seed)
    roles = _assign_roles(rng, n, z0_count, z1_count)

    mask = rng.random((n, n)) < density
    np.fill_diagonal(mask, False)
    mask[roles != NodeRole.FREE] = False
    for i in np.flatnonzero(roles == NodeRole.FREE):
        while not mask[i].any():
            row = rng.random(n) < density
            row[i] = False
            mask[i] = row
    rows, cols = np.nonzero(mask)
    w = _draw_weights(rng, weight_law, rows.size)
    return Network(roles, sp.csr_array((w, (rows, cols)), shape=(n, n)))


def generate_barabasi_albert(n, m, z0_count, z1_count, weight_law="exponential", seed=None) -> Network:
    """Preferential attachment skeleton grown from a complete core of m + 1 nodes.

    Every undirected link becomes two directed edges with independent
    weights; edges pointing into zealots are dropped. ``m=5`` gives density
    close to 0.1 at ``n=100``.
    """
    _check_counts(n, z0_count, z1_count)
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    skeleton_seed = int(rng.integers(2**31 - 1))
    g = nx.barabasi_albert_graph(n, m, seed=skeleton_seed, initial_graph=nx.complete_graph(m + 1))
    roles = _assign_roles(rng, n, z0_count, z1_count)

    und = np.array(sorted(g.edges()), dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([und[:, 0], und[:, 1]])
    cols = np.concatenate([und[:, 1], und[:, 0]])
    w = _draw_weights(rng, weight_law, rows.size)
    keep = roles[rows] == NodeRole.FREE
    return Network(roles, sp.csr_array((w[keep], (rows[keep], cols[keep])), shape=(n, n)))


def generate_complete(n, z0_count, z1_count) -> Network:
    """Complete unweighted graph: ``w_ij = 1`` whenever i is free and i != j.

    Zealots occupy the first ``z0_count`` then the next ``z1_count`` indices.
    """
    _check_counts(n, z0_count, z1_count)
    roles = np.full(n, NodeRole.FREE, dtype=np.int8)
    roles[:z0_count] = NodeRole.ZEALOT0
    roles[z0_count:z0_count + z1_count] = NodeRole.ZEALOT1
    dense = np.ones((n, n))
    np.fill_diagonal(dense, 0.0)
    dense[roles != NodeRole.FREE] = 0.0
    return Network(roles, sp.csr_array(dense))


# ------------------------------------------------------------------------ IO

def save_network(net: Network, path, header_lines=()):
    """Write the line-oriented text format (``nodes``, ``node``, ``edge`` records)."""
    lines = [f"# {h}" for h in header_lines]
    lines.append(f"nodes {net.n}")
    lines.extend(f"node {i} {NodeRole(r).label}" for i, r in enumerate(net.roles))
    dst, src, w = net.edges()
    lines.extend(f"edge {i} {j} {x!r}" for i, j, x in zip(dst.tolist(), src.tolist(), w.tolist()))
    Path(path).write_text("\n".join(lines) + "\n")


def load_network(path) -> Network:
    n = None
    roles = None
    rows, cols, vals = [], [], []
    seen = set()
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            kind = parts[0]
            try:
                if kind == "nodes":
                    if n is not None:
                        raise NetworkFormatError("duplicate 'nodes' header", lineno)
                    n = int(parts[1])
                    if n < 0 or len(parts) != 2:
                        raise NetworkFormatError("malformed 'nodes' header", lineno)
                    roles = np.full(n, -1, dtype=np.int8)
                    continue
                if n is None:
                    raise NetworkFormatError("'nodes N' header must come first", lineno)
                if kind == "node":
                    if len(parts) != 3:
                        raise NetworkFormatError("expected 'node <id> <role>'", lineno)
                    i = _node_id(parts[1], n, lineno)
                    if parts[2] not in _LABEL_ROLES:
                        raise NetworkFormatError(f"unknown role {parts[2]!r}", lineno)
                    roles[i] = _LABEL_ROLES[parts[2]]
                elif kind == "edge":
                    if len(parts) != 4:
                        raise NetworkFormatError("expected 'edge <dst> <src> <weight>'", lineno)
                    i = _node_id(parts[1], n, lineno)
                    j = _node_id(parts[2], n, lineno)
                    w = float(parts[3])
                    if i == j:
                        raise NetworkFormatError(f"self-loop at node {i}", lineno)
                    if not np.isfinite(w) or w < 0:
                        raise NetworkFormatError(f"invalid weight {parts[3]!r}", lineno)
                    if (i, j) in seen:
                        raise NetworkFormatError(f"duplicate edge {j}->{i}", lineno)
                    seen.add((i, j))
                    rows.append(i)
                    cols.append(j)
                    vals.append(w)
                else:
                    raise NetworkFormatError(f"unknown record {kind!r}", lineno)
            except (IndexError, ValueError) as exc:
                if isinstance(exc, NetworkFormatError):
                    raise
                raise NetworkFormatError(str(exc), lineno) from exc
    if n is None:
        raise NetworkFormatError("missing 'nodes N' header")
    missing = np.flatnonzero(roles < 0)
    if missing.size:
        raise NetworkFormatError(f"no role given for node(s) {missing[:10].tolist()}")
    net = Network(roles, sp.csr_array((vals, (rows, cols)), shape=(n, n)))
    validate(net).raise_if_invalid()
    return net


def _node_id(token, n, lineno):
    i = int(token)
    if not 0 <= i < n:
        raise NetworkFormatError(f"node id {i} out of range [0, {n})", lineno)
    return i
