"""Stationary opinions and pairwise disagreement probabilities.

Opinions solve ``[L + diag(z0 + z1)] x = z1`` over the free nodes, where ``L``
is the Laplacian of the free subgraph. Disagreement probabilities ``q`` use a
mean-field linear system coupling every unordered pair of free nodes; pairs
involving a zealot have closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from .network import Network, NodeRole, validate, zealot_influence

__all__ = [
    "SingularSystemError",
    "OpinionEquilibrium",
    "ActivationEquilibrium",
    "solve_opinions",
    "solve_activation",
    "opinion_residual",
    "activation_system",
    "activation_residual",
    "transition_rates",
    "sigma_from_mean",
    "sigma_complete",
    "rho_complete",
    "q_free_complete",
    "format_equilibrium_tables",
]

DIRECT_SOLVE_MAX_UNKNOWNS = 300 * 299 // 2
DEFAULT_TOL = 1e-10


class SingularSystemError(ArithmeticError):
    """A linear system had no unique solution."""

    def __init__(self, message, nodes=()):
        self.nodes = list(nodes)
        super().__init__(message)


@dataclass(frozen=True)
class OpinionEquilibrium:
    free: np.ndarray       # node ids, aligned with x_f
    x_f: np.ndarray
    x_bar_f: float
    x_bar: float
    sigma: float
    x_all: np.ndarray      # per node; zealots carry their fixed opinion


@dataclass(frozen=True)
class ActivationEquilibrium:
    """Equilibrium disagreement probabilities.

    ``q`` is a dense symmetric ``(n, n)`` matrix; zealot-zealot entries are NaN
    (never counted) and the diagonal is 0.
    ``rho`` and ``rho_w`` average over the counted edge set (edges with at
    least one free endpoint). ``rho_ordered_pairs`` divides the expected
    number of active links by ``n (n - 1)`` instead, the normalization of the
    complete-graph closed form.
    """

    q: np.ndarray
    rho: float
    rho_w: float
    n_active: float
    n_counted: int
    rho_ordered_pairs: float

    def pair(self, i, j) -> float:
        return float(self.q[i, j])


# ------------------------------------------------------------------ opinions

def _opinion_matrix(net: Network, infl):
    w_ff = net.free_block()
    degree_ff = np.asarray(w_ff.sum(axis=1)).ravel()
    return sp.csc_array(sp.diags_array(degree_ff + infl.z0 + infl.z1) - w_ff)


def _unreached_free_nodes(net: Network, infl) -> np.ndarray:
    """Free nodes that no zealot can influence, even through other free nodes."""
    w_ff = net.free_block()
    f = w_ff.shape[0]
    seeds = np.flatnonzero(infl.z0 + infl.z1 > 0)
    if seeds.size == 0:
        return net.free.copy()
    # w_ij > 0 means influence flows j -> i; a virtual source (index f) feeds every seed
    flow = sp.block_array([[sp.csr_array(w_ff.T), None],
                           [sp.csr_array((np.ones(seeds.size), (np.zeros(seeds.size, int), seeds)),
                                         shape=(1, f)), sp.csr_array((1, 1))]]).tocsr()
    order = csgraph.breadth_first_order(flow, f, directed=True, return_predecessors=False)
    reached = np.zeros(f + 1, dtype=bool)
    reached[order] = True
    return net.free[~reached[:f]]


def solve_opinions(net: Network) -> OpinionEquilibrium:
    """Mean opinion of every free node at equilibrium."""
    validate(net).raise_if_invalid()
    free = net.free
    infl = zealot_influence(net)
    z1_count = net.zealots1.size
    if free.size == 0:
        x_f = np.empty(0)
        x_bar_f = float("nan")
    else:
        stuck = _unreached_free_nodes(net, infl)
        if stuck.size:
            raise SingularSystemError(
                f"free component with no zealot influence: nodes {stuck[:20].tolist()}", stuck)
        x_f = spla.spsolve(_opinion_matrix(net, infl), infl.z1)
        x_f = np.atleast_1d(np.asarray(x_f, dtype=float))
        if not np.all(np.isfinite(x_f)):
            raise SingularSystemError("opinion system could not be factorized")
        x_bar_f = float(x_f.mean())
    x_bar = (free.size * (x_bar_f if free.size else 0.0) + z1_count) / net.n
    x_all = np.zeros(net.n)
    x_all[net.zealots1] = 1.0
    x_all[free] = x_f
    return OpinionEquilibrium(free=free, x_f=x_f, x_bar_f=x_bar_f, x_bar=float(x_bar),
                              sigma=sigma_from_mean(x_bar), x_all=x_all)


def opinion_residual(net: Network, eq: OpinionEquilibrium) -> np.ndarray:
    """``x_i - (sum_j w_ij x_j + z1_i) / d_i`` for every free node."""
    infl = zealot_influence(net)
    w_ff = net.free_block()
    d = net.in_degree[eq.free]
    return eq.x_f - (w_ff @ eq.x_f + infl.z1) / d


def sigma_from_mean(x_bar: float) -> float:
    return float(4.0 * x_bar * (1.0 - x_bar))


# ---------------------------------------------------------------- activation

def _pair_index(f: int) -> np.ndarray:
    """``idx[a, b]`` = unknown number of the unordered free pair {a, b}; -1 on the diagonal."""
    idx = np.full((f, f), -1, dtype=np.int64)
    iu, ju = np.triu_indices(f, k=1)
    idx[iu, ju] = np.arange(iu.size)
    idx[ju, iu] = idx[iu, ju]
    return idx


def activation_system(net: Network, eq: OpinionEquilibrium, degree_normalized: bool = True):
    """Assemble the mean-field system for free-free pairs.

    Row for pair {i, j}::

        q_ij (d_i + d_j) - sum_{k free, k != i, j} (w_ik q_jk + w_jk q_ik)
            = (z0_j - z1_j) x_i + (z0_i - z1_i) x_j + z1_i + z1_j

    With ``degree_normalized`` (the default) every row of the influence matrix
    is first divided by its in-degree, so ``d_i = 1`` above. The dynamics only
    see ``w_ij / d_i``, and in this form each q_ij is exactly the stationary
    probability of the two-state disagreement chain built from
    :func:`transition_rates`. Both forms coincide when all free in-degrees are
    equal (complete graphs in particular).

    Returns ``(A, b, pairs)`` with ``pairs`` the ``(m, 2)`` local free indices
    of each unknown.
    """
    free = net.free
    f = free.size
    infl = zealot_influence(net)
    d = net.in_degree[free]
    w_ff = net.free_block()
    z0, z1 = infl.z0, infl.z1
    if degree_normalized:
        w_ff = sp.csr_array(sp.diags_array(1.0 / d) @ w_ff)
        z0, z1 = z0 / d, z1 / d
        d = np.ones(f)
    x = eq.x_f
    iu, ju = np.triu_indices(f, k=1)
    m = iu.size
    idx = _pair_index(f)

    coo = w_ff.tocoo()
    a_src, k_src, w_src = coo.row, coo.col, coo.data
    # every edge k -> a contributes -w_ak * q_{j,k} to row {a, j} for j != a, k
    js = np.broadcast_to(np.arange(f), (a_src.size, f))
    keep = (js != a_src[:, None]) & (js != k_src[:, None])
    rows = idx[a_src[:, None], js][keep]
    cols = idx[js, k_src[:, None]][keep]
    vals = np.broadcast_to(-w_src[:, None], js.shape)[keep]

    rows = np.concatenate([np.arange(m), rows])
    cols = np.concatenate([np.arange(m), cols])
    vals = np.concatenate([d[iu] + d[ju], vals])
    A = sp.csc_array((vals, (rows, cols)), shape=(m, m))

    zt = z0 - z1
    b = zt[ju] * x[iu] + zt[iu] * x[ju] + z1[iu] + z1[ju]
    return A, b, np.column_stack([iu, ju])


def solve_activation(net: Network, eq: OpinionEquilibrium, tol: float = DEFAULT_TOL,
                     degree_normalized: bool = True) -> ActivationEquilibrium:
    """Disagreement probabilities for every pair with a free member, and the densities.

    Free-free pairs are unknowns of :func:`activation_system` whether or not
    they share an edge; a free node i paired with a zealot gets ``x_i``
    (opinion-0 zealot) or ``1 - x_i`` (opinion-1 zealot).
    """
    if not np.array_equal(eq.free, net.free):
        raise ValueError("opinion equilibrium was computed on a different network")
    validate(net).raise_if_invalid()
    n = net.n
    free = net.free
    q = np.full((n, n), np.nan)
    np.fill_diagonal(q, 0.0)

    if free.size >= 2:
        A, b, pairs = activation_system(net, eq, degree_normalized)
        sol = _solve_sparse(A, b, tol)
        gi, gj = free[pairs[:, 0]], free[pairs[:, 1]]
        q[gi, gj] = sol
        q[gj, gi] = sol

    x = eq.x_f
    for z, flip in ((net.zealots0, False), (net.zealots1, True)):
        if z.size and free.size:
            vals = (1.0 - x) if flip else x
            q[np.ix_(free, z)] = vals[:, None]
            q[np.ix_(z, free)] = vals[None, :]

    dst, src, w = net.edges()
    q_edges = q[dst, src]
    n_counted = int(dst.size)
    n_active = float(q_edges.sum())
    rho = n_active / n_counted if n_counted else 0.0
    rho_w = float((w * q_edges).sum() / w.sum()) if n_counted else 0.0
    return ActivationEquilibrium(q=q, rho=rho, rho_w=rho_w, n_active=n_active, n_counted=n_counted,
                                 rho_ordered_pairs=n_active / (n * (n - 1)) if n > 1 else 0.0)


def activation_residual(net: Network, eq: OpinionEquilibrium, act: ActivationEquilibrium,
                        degree_normalized: bool = True) -> np.ndarray:
    A, b, pairs = activation_system(net, eq, degree_normalized)
    free = net.free
    sol = act.q[free[pairs[:, 0]], free[pairs[:, 1]]]
    return A @ sol - b


def _solve_sparse(A, b, tol):
    if A.shape[0] <= DIRECT_SOLVE_MAX_UNKNOWNS:
        sol = spla.spsolve(A, b)
    else:
        # diagonally dominant system: Jacobi-preconditioned BiCGSTAB
        diag = A.diagonal()
        precond = spla.LinearOperator(A.shape, matvec=lambda v: v / diag)
        sol, info = spla.bicgstab(A, b, rtol=tol, atol=0.0, M=precond, maxiter=10_000)
        if info != 0:
            raise SingularSystemError(f"iterative activation solve did not converge (info={info})")
    sol = np.atleast_1d(np.asarray(sol, dtype=float))
    if not np.all(np.isfinite(sol)):
        raise SingularSystemError("singular activation system")
    return sol


# ----------------------------------------------------------------- diagnostics

def transition_rates(net: Network, eq: OpinionEquilibrium, act: ActivationEquilibrium, i: int, j: int):
    """Mean-field rates at which node i aligns with / departs from node j.

    Returns ``(lam, mu)``. Both are per unit time for i's unit-rate clock, so
    ``lam + mu == 1`` for a free i. When j is a zealot the direct-copy term is
    already part of i's zealot influence and is not added twice.
    """
    if net.roles[i] != NodeRole.FREE:
        raise ValueError(f"node {i} is a zealot and never updates")
    if i == j:
        raise ValueError("rates are defined for distinct nodes")
    w_row = net.weights[[i]].toarray().ravel()
    free = net.free
    others = free[(free != i) & (free != j)]
    infl = zealot_influence(net)
    pos = np.searchsorted(free, i)
    z0_i, z1_i = infl.z0[pos], infl.z1[pos]
    x_j = eq.x_all[j]
    q_jk = act.q[j, others]
    w_ik = w_row[others]
    direct = w_row[j] if net.roles[j] == NodeRole.FREE else 0.0
    d_i = w_row.sum()
    lam = (direct + (w_ik * (1.0 - q_jk)).sum() + z1_i * x_j + z0_i * (1.0 - x_j)) / d_i
    mu = ((w_ik * q_jk).sum() + z1_i * (1.0 - x_j) + z0_i * x_j) / d_i
    return float(lam), float(mu)


# ---------------------------------------------------------- complete graphs

def sigma_complete(z0, z1):
    """Opinion diversity ``4 z0 z1 / (z0 + z1)^2`` on a complete unweighted graph."""
    z0 = np.asarray(z0, dtype=float)
    z1 = np.asarray(z1, dtype=float)
    if np.any(z0 < 0) or np.any(z1 < 0):
        raise ValueError("zealot counts must be nonnegative")
    if np.any(z0 + z1 <= 0):
        raise ValueError("sigma is undefined without zealots")
    out = 4.0 * z0 * z1 / (z0 + z1) ** 2
    return float(out) if out.ndim == 0 else out


def q_free_complete(z0, z1):
    """Disagreement probability between two free nodes of a complete graph."""
    z0 = np.asarray(z0, dtype=float)
    z1 = np.asarray(z1, dtype=float)
    z = z0 + z1
    out = 2.0 * z0 * z1 / (z * (z + 1.0))
    return float(out) if out.ndim == 0 else out


def rho_complete(n, z0, z1):
    """Active-link density on a complete unweighted graph.

    Expected number of active links divided by ``n (n - 1)``.
    """
    n = np.asarray(n, dtype=float)
    z0 = np.asarray(z0, dtype=float)
    z1 = np.asarray(z1, dtype=float)
    z = z0 + z1
    if np.any(n < 2):
        raise ValueError("need n >= 2")
    if np.any(z0 < 0) or np.any(z1 < 0) or np.any(z <= 0):
        raise ValueError("need nonnegative zealot counts with z0 + z1 >= 1")
    if np.any(z > n * (1 + 1e-12)):
        raise ValueError("more zealots than nodes")
    free = np.maximum(n - z, 0.0)
    out = 2.0 * z0 * z1 * free / ((n - 1.0) * z * (z + 1.0))
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------------- export

def format_equilibrium_tables(net: Network, eq: OpinionEquilibrium, act: ActivationEquilibrium | None = None,
                              sep: str = "\t"):
    """Return ``(summary, nodes, pairs)`` delimited text tables."""
    summary = [sep.join(["x_bar", "x_bar_f", "sigma", "rho", "rho_w", "rho_ordered_pairs"])]
    vals = [eq.x_bar, eq.x_bar_f, eq.sigma]
    vals += [act.rho, act.rho_w, act.rho_ordered_pairs] if act else [float("nan")] * 3
    summary.append(sep.join(repr(float(v)) for v in vals))

    nodes = [sep.join(["node", "x_f"])]
    nodes += [f"{i}{sep}{x!r}" for i, x in zip(eq.free.tolist(), eq.x_f.tolist())]

    pairs = [sep.join(["i", "j", "q_ij"])]
    if act is not None:
        dst, src, _ = net.edges()
        pairs += [f"{i}{sep}{j}{sep}{act.q[i, j]!r}" for i, j in zip(dst.tolist(), src.tolist())]
    return "\n".join(summary) + "\n", "\n".join(nodes) + "\n", "\n".join(pairs) + "\n"
