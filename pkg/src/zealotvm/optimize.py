"""Zealot placement under a backfire effect.

Creating ``z1`` opinion-1 zealots radicalises ``alpha * z1`` free users into
opinion-0 zealots, so the post-intervention counts are
``(z0 + alpha * z1, z1)`` and feasibility requires
``z0 + (1 + alpha) z1 <= n``.

Complete-graph problems have closed forms (target opinion, diversity) or a
short list of stationary points (active-link density). On general networks
the diversity problem is solved by projected gradient descent on the
squared distance of the mean opinion to 1/2, with adjoint gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.polynomial import Polynomial

from .equilibrium import SingularSystemError, rho_complete, sigma_complete
from .network import Network, NodeRole, validate, zealot_influence

__all__ = [
    "BackfireSpec",
    "OptimizationResult",
    "DiversityResult",
    "ConvergenceError",
    "mean_opinion_backfire",
    "sigma_backfire",
    "rho_backfire",
    "solve_p1_target",
    "solve_p2_diversity_complete",
    "solve_p3_active_complete",
    "p3_stationary_points",
    "evaluate_complete",
    "solve_p_diversity_general",
    "format_results",
]


class ConvergenceError(RuntimeError):
    def __init__(self, message, gap=None, result=None):
        self.gap = gap
        self.result = result
        super().__init__(message)


@dataclass(frozen=True)
class BackfireSpec:
    z0: float
    alpha: float
    n: float

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"backfire intensity alpha must lie in [0, 1), got {self.alpha}")
        if self.z0 < 0 or self.z0 > self.n:
            raise ValueError(f"need 0 <= z0 <= n, got z0={self.z0}, n={self.n}")

    @property
    def z1_max(self) -> float:
        return (self.n - self.z0) / (1.0 + self.alpha)

    def post_intervention(self, z1: float) -> tuple[float, float]:
        return self.z0 + self.alpha * z1, z1


@dataclass(frozen=True)
class OptimizationResult:
    problem: str
    spec: BackfireSpec
    z1_star: float
    z1_star_rounded: int
    objective_at_star: float
    objective_at_rounded: float
    post_intervention: tuple[float, float]

    @property
    def z1_max(self) -> float:
        return self.spec.z1_max


# --------------------------------------------------------------- objectives

def mean_opinion_backfire(z1, z0, alpha):
    """Mean equilibrium opinion ``z1 / (z0 + (1 + alpha) z1)`` after intervention."""
    z1 = np.asarray(z1, dtype=float)
    s = z0 + (1.0 + alpha) * z1
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(s > 0, z1 / np.where(s > 0, s, 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


def sigma_backfire(z1, z0, alpha):
    """Diversity ``4 (z0 + alpha z1) z1 / (z0 + (1 + alpha) z1)^2``; 0 when there are no zealots."""
    z1 = np.asarray(z1, dtype=float)
    s = z0 + (1.0 + alpha) * z1
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(s > 0, 4.0 * (z0 + alpha * z1) * z1 / np.where(s > 0, s, 1.0) ** 2, 0.0)
    return float(out) if out.ndim == 0 else out


def rho_backfire(z1, z0, alpha):
    """Active-link objective ``2 (z0 + alpha z1) z1 / (s (s + 1))`` with ``s = z0 + (1 + alpha) z1``."""
    z1 = np.asarray(z1, dtype=float)
    s = z0 + (1.0 + alpha) * z1
    out = 2.0 * (z0 + alpha * z1) * z1 / (s * (s + 1.0) + (s == 0))
    return float(out) if out.ndim == 0 else out


def _rounded(spec, z1_star, objective, maximize=True):
    lo = math.floor(z1_star)
    hi = math.ceil(z1_star)
    if hi > spec.z1_max:
        hi = lo
    candidates = sorted({lo, hi})
    values = [objective(c) for c in candidates]
    pick = int(np.argmax(values) if maximize else np.argmin(values))
    return candidates[pick], float(values[pick])


def _result(problem, spec, z1_star, objective, maximize=True):
    z1_star = float(min(max(z1_star, 0.0), spec.z1_max))
    rounded, obj_rounded = _rounded(spec, z1_star, objective, maximize)
    return OptimizationResult(problem=problem, spec=spec, z1_star=z1_star, z1_star_rounded=int(rounded),
                              objective_at_star=float(objective(z1_star)), objective_at_rounded=obj_rounded,
                              post_intervention=spec.post_intervention(z1_star))


# ----------------------------------------------------------- complete graphs

def solve_p1_target(spec: BackfireSpec, lam: float) -> OptimizationResult:
    """Bring the mean opinion as close as possible to ``lam`` (minimises the squared gap)."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"target must lie in [0, 1], got {lam}")
    d = 1 - lam - spec.alpha * lam
    if spec.z0 == 0:
        # mean opinion is 0 at z1 = 0 and 1/(1+alpha) for every z1 > 0
        z1_star = spec.z1_max if (1.0 / (1.0 + spec.alpha) - lam) ** 2 <= lam ** 2 else 0.0
    elif d > 0:
        z1_star = min(spec.z1_max, lam * spec.z0 / d)
    else:
        z1_star = spec.z1_max

    def objective(z1):
        return (mean_opinion_backfire(z1, spec.z0, spec.alpha) - lam) ** 2

    return _result("p1", spec, z1_star, objective, maximize=False)


def solve_p2_diversity_complete(spec: BackfireSpec) -> OptimizationResult:
    # z0 = 0: diversity is flat for z1 > 0, so take the saturated count rather than the formula's 0
    z1_star = min(spec.z1_max, spec.z0 / (1.0 - spec.alpha)) if spec.z0 > 0 else spec.z1_max
    return _result("p2", spec, z1_star, lambda z1: sigma_backfire(z1, spec.z0, spec.alpha))


def p3_stationary_points(z0: float, alpha: float) -> np.ndarray:
    """Positive real zeros of the derivative of :func:`rho_backfire`.

    With ``f = 2 (z0 + alpha z1) z1`` and ``g = s (s + 1)``, the numerator
    ``f' g - f g'`` of the derivative has vanishing cubic term; halved, it is
    ``c2 z1^2 + c1 z1 + c0`` with the coefficients below. Roots come from the
    quadratic formula and get one Newton polish.
    """
    c2 = (1.0 + alpha) * (alpha * (z0 + 1.0) - z0)
    c1 = 2.0 * alpha * z0 * (z0 + 1.0)
    c0 = z0 * z0 * (z0 + 1.0)
    num = Polynomial([c0, c1, c2])
    if c2 != 0.0:
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0:
            return np.empty(0)
        # stable pairing avoids cancellation in -c1 + sqrt(disc)
        qq = -0.5 * (c1 + math.copysign(math.sqrt(disc), c1))
        roots = [qq / c2] + ([c0 / qq] if qq != 0 else [])
    elif c1 != 0.0:
        roots = [-c0 / c1]
    else:
        roots = []
    dnum = num.deriv()
    polished = np.array([r - num(r) / dnum(r) if dnum(r) != 0 else r for r in roots], dtype=float)
    return np.sort(polished[polished > 0])


def solve_p3_active_complete(spec: BackfireSpec) -> OptimizationResult:
    """Maximise the active-link objective over ``[0, z1_max]``.

    Candidates are ``z1_max`` and the interior stationary points; 0 is never
    optimal since the objective is positive for every ``z1 > 0``.
    """
    def objective(z1):
        return rho_backfire(z1, spec.z0, spec.alpha)

    if spec.z1_max <= 0:
        return _result("p3", spec, 0.0, objective)
    roots = p3_stationary_points(spec.z0, spec.alpha)
    candidates = np.concatenate([roots[roots < spec.z1_max], [spec.z1_max]])
    values = objective(candidates)
    return _result("p3", spec, float(candidates[int(np.argmax(values))]), objective)


def evaluate_complete(result: OptimizationResult, n: float | None = None) -> dict:
    """Diversity and active-link density of a complete graph at the post-intervention counts."""
    z0_post, z1 = result.post_intervention
    n = result.spec.n if n is None else n
    if z0_post + z1 <= 0:
        return {"sigma": 0.0, "rho": 0.0}
    z0_post = min(z0_post, n - z1)
    return {"sigma": sigma_complete(z0_post, z1), "rho": rho_complete(n, z0_post, z1)}


# --------------------------------------------------------- general networks

@dataclass(frozen=True)
class DiversityResult:
    z1: np.ndarray          # total opinion-1 influence per free node (aligned with net.free)
    x_bar: float
    gap: float
    iterations: int
    network: Network        # input network with the support's weights rewritten


def _support_mask(net: Network, support):
    support = np.unique(np.asarray(support, dtype=np.int64))
    if support.size == 0:
        raise ValueError("z1 support is empty")
    if np.any(net.roles[support] != NodeRole.ZEALOT1):
        raise ValueError("z1 support must consist of opinion-1 zealots")
    w_fs = net.weights[net.free][:, support]
    reach = np.asarray((w_fs > 0).sum(axis=1)).ravel() > 0
    return support, sp.csr_array(w_fs), reach


def _mean_opinion_and_grad(w_ff, base_d, z0, z1, n, n_z1):
    """``x_bar`` and its gradient with respect to z1 (adjoint of the opinion system)."""
    A = sp.csc_array(sp.diags_array(base_d + z0 + z1) - w_ff)
    lu = spla.splu(A)
    x = lu.solve(z1)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("opinion system is singular at this iterate")
    y = lu.solve(np.ones(z1.size), trans="T")
    x_bar = (x.sum() + n_z1) / n
    grad = y * (1.0 - x) / n
    return x_bar, grad, x


def solve_p_diversity_general(net: Network, z1_support, tolerance: float = 1e-6,
                              max_iter: int = 500) -> DiversityResult:
    """Choose opinion-1 influence so the mean equilibrium opinion reaches 1/2.

    Decision variables are the per-free-node influences exerted by the
    support zealots, restricted to free nodes they already reach.
    Influence from opinion-1 zealots outside the support stays fixed.
    """
    validate(net).raise_if_invalid()
    support, w_fs, reach = _support_mask(net, z1_support)
    if not reach.any():
        raise ValueError("infeasible support: no free node receives influence from it")
    infl = zealot_influence(net)
    if not np.any(infl.z0 > 0):
        raise ValueError("degenerate input: opinion-0 zealots exert no influence, "
                         "so any positive z1 drives the mean opinion above 1/2")
    w_ff = net.free_block()
    base_d = np.asarray(w_ff.sum(axis=1)).ravel()
    fixed = infl.z1 - np.asarray(w_fs.sum(axis=1)).ravel()
    fixed = np.maximum(fixed, 0.0)
    n, n_z1 = net.n, net.zealots1.size
    target = 0.5

    scale = float(np.mean(infl.z0[infl.z0 > 0]))
    v = np.where(reach, scale, 0.0)
    x_bar, grad, _ = _mean_opinion_and_grad(w_ff, base_d, infl.z0, fixed + v, n, n_z1)
    it = 0
    while abs(x_bar - target) >= tolerance and it < max_iter:
        it += 1
        g = np.where(reach, grad, 0.0)
        gap = x_bar - target
        # objective (x_bar - 1/2)^2: step sized so the linearised gap closes, then backtrack
        direction = -gap * g
        norm2 = float(g @ g)
        if norm2 == 0.0:
            break
        step = 1.0 / norm2
        accepted = False
        for _ in range(60):
            trial = np.maximum(v + step * direction, 0.0)
            try:
                xt, gt, _ = _mean_opinion_and_grad(w_ff, base_d, infl.z0, fixed + trial, n, n_z1)
            except (SingularSystemError, RuntimeError):
                step *= 0.5
                continue
            if (xt - target) ** 2 < gap ** 2:
                v, x_bar, grad = trial, xt, gt
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    z1 = fixed + v
    result = DiversityResult(z1=z1, x_bar=float(x_bar), gap=float(abs(x_bar - target)), iterations=it,
                             network=_rewrite_support(net, support, w_fs, v))
    if result.gap >= tolerance:
        raise ConvergenceError(f"mean opinion stalled at {x_bar:.8f} (gap {result.gap:.2e}) "
                               f"after {it} iterations; 1/2 may be unreachable with this support",
                               gap=result.gap, result=result)
    return result


def _rewrite_support(net, support, w_fs, v):
    """Spread each free node's new support influence over its existing support edges, pro rata."""
    row_tot = np.asarray(w_fs.sum(axis=1)).ravel()
    share = sp.diags_array(np.divide(v, row_tot, out=np.zeros_like(v), where=row_tot > 0)) @ w_fs
    w = net.weights.tolil()
    free = net.free
    share = sp.csr_array(share).tocoo()
    for r, c, val in zip(share.row, share.col, share.data):
        w[free[r], support[c]] = val
    return net.with_weights(w.tocsr())


# ------------------------------------------------------------------- export

def format_results(results, sep: str = "\t") -> str:
    header = ["problem", "z0", "alpha", "n", "z1_star", "z1_star_rounded", "z1_max", "objective",
              "objective_rounded", "z0_post", "z1_post"]
    lines = [sep.join(header)]
    for r in results:
        row = [r.problem, r.spec.z0, r.spec.alpha, r.spec.n, r.z1_star, r.z1_star_rounded, r.z1_max,
               r.objective_at_star, r.objective_at_rounded, *r.post_intervention]
        lines.append(sep.join(v if isinstance(v, str) else repr(float(v)) if not isinstance(v, int) else str(v)
                              for v in row))
    return "\n".join(lines) + "\n"
