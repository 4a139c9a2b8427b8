"""Event-driven simulation of the voter model with zealots.

Every free node carries a unit-rate Poisson clock. Since all clocks share the
same rate, the superposed process is simulated directly: inter-event times are
Exponential(F) and the updating node is uniform over the F free nodes. The
updating node adopts opinion 1 with probability ``(sum_j w_ij x_j) / d_i``.

Random numbers come from :class:`numpy.random.Generator` in fixed-size blocks,
so a run is a pure function of the network, the config and the seed.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .network import Network, NodeRole, validate

__all__ = [
    "SimulationConfig",
    "SimulationTrace",
    "ReplicateSummary",
    "simulate",
    "replicate",
    "format_trace",
]

log = logging.getLogger(__name__)

_BLOCK = 1 << 18
_STATUS_BLOCK_DONE, _STATUS_HORIZON, _STATUS_BUFFER_FULL = 0, 1, 2


@dataclass(frozen=True)
class SimulationConfig:
    """Run parameters.

    ``initial_opinions`` is ``"uniform"`` (fair coin per free node),
    ``"zeros"``, ``"ones"``, or an explicit length-n 0/1 vector whose zealot
    entries are ignored.
    """

    horizon: float = 50_000.0
    burn_in: float = 10_000.0
    sample_every: int = 100
    seed: int = 0
    initial_opinions: object = "uniform"
    batches: int = 20

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not 0 <= self.burn_in < self.horizon:
            raise ValueError(f"need 0 <= burn_in < horizon, got burn_in={self.burn_in}, horizon={self.horizon}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ValueError(f"sample_every must be a positive integer, got {self.sample_every}")
        if self.batches < 2:
            raise ValueError("need at least two batches for batch-means error bars")


@dataclass
class SimulationTrace:
    """Samples taken every ``sample_every`` updates once ``burn_in`` has passed."""

    times: np.ndarray
    x_bar: np.ndarray
    rho: np.ndarray
    rho_w: np.ndarray
    node_mean: np.ndarray          # per-node opinion averaged over samples
    events: int
    final_time: float
    final_opinions: np.ndarray
    absorbed_time: float | None    # first time no counted edge is active
    summary: dict = field(default_factory=dict)
    stderr: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class ReplicateSummary:
    runs: int
    mean: dict
    stderr: dict
    per_run: list


# -------------------------------------------------------------------- kernel

@numba.njit(cache=True)
def _run_block(dts, picks, us, start, free, x, s, d,
               in_ptr, in_src, in_w, out_ptr, out_dst, out_w,
               state_f, state_i, horizon, burn_in, sample_every,
               buf_t, buf_x, buf_a, buf_aw, node_sum):
    """Advance the chain over one block of pre-drawn random numbers.

    ``state_f = [t, active_w, total_w, absorbed_time]`` and
    ``state_i = [events, active, x_sum, n_samples, n_edges]`` are updated in
    place. Returns ``(status, next_position_in_block)``.
    """
    t = state_f[0]
    aw = state_f[1]
    total_w = state_f[2]
    events = state_i[0]
    active = state_i[1]
    x_sum = state_i[2]
    ns = state_i[3]
    n_edges = state_i[4]
    n = x.size
    cap = buf_t.size
    status = 0
    pos = start
    while pos < dts.size:
        if ns >= cap:
            status = 2
            break
        t_next = t + dts[pos]
        if t_next > horizon:
            t = horizon
            status = 1
            break
        t = t_next
        i = free[picks[pos]]
        new = 1 if us[pos] * d[i] < s[i] else 0
        old = x[i]
        pos += 1
        if new != old:
            delta = new - old
            for e in range(in_ptr[i], in_ptr[i + 1]):
                if x[in_src[e]] == old:
                    active += 1
                    aw += in_w[e]
                else:
                    active -= 1
                    aw -= in_w[e]
            for e in range(out_ptr[i], out_ptr[i + 1]):
                k = out_dst[e]
                s[k] += delta * out_w[e]
                if x[k] == old:
                    active += 1
                    aw += out_w[e]
                else:
                    active -= 1
                    aw -= out_w[e]
            x[i] = new
            x_sum += delta
            if active == 0 and state_f[3] < 0:
                state_f[3] = t
        events += 1
        if events % sample_every == 0 and t >= burn_in:
            buf_t[ns] = t
            buf_x[ns] = x_sum / n
            if n_edges > 0:
                buf_a[ns] = active / n_edges
                buf_aw[ns] = max(aw, 0.0) / total_w
            ns += 1
            for k in range(n):
                node_sum[k] += x[k]
    state_f[0] = t
    state_f[1] = aw
    state_i[0] = events
    state_i[1] = active
    state_i[2] = x_sum
    state_i[3] = ns
    return status, pos


# ------------------------------------------------------------------- driver

def _initial_state(net: Network, rule, rng):
    n = net.n
    x = np.zeros(n, dtype=np.int64)
    free = net.free
    if isinstance(rule, str):
        if rule == "uniform":
            x[free] = rng.integers(0, 2, size=free.size)
        elif rule == "ones":
            x[free] = 1
        elif rule != "zeros":
            raise ValueError(f"unknown initial opinion rule {rule!r}")
    else:
        given = np.asarray(rule)
        if given.shape != (n,) or not np.isin(given, (0, 1)).all():
            raise ValueError("explicit initial opinions must be a length-n vector of 0/1")
        x[free] = given[free]
    x[net.roles == NodeRole.ZEALOT0] = 0
    x[net.roles == NodeRole.ZEALOT1] = 1
    return x


def _batch_stderr(values, batches):
    if values.size < batches:
        return float("nan")
    means = np.array([b.mean() for b in np.array_split(values, batches)])
    return float(means.std(ddof=1) / np.sqrt(batches))


def simulate(net: Network, cfg: SimulationConfig) -> SimulationTrace:
    validate(net).raise_if_invalid()
    free = net.free.astype(np.int64)
    if free.size == 0:
        raise ValueError("network has no free nodes; nothing to simulate")
    rng = np.random.default_rng(cfg.seed)
    x = _initial_state(net, cfg.initial_opinions, rng)

    w = net.weights
    d = net.in_degree
    s = w @ x.astype(float)
    wt = w.T.tocsr()
    wt.sort_indices()
    in_ptr, in_src, in_w = w.indptr.astype(np.int64), w.indices.astype(np.int64), w.data.astype(float)
    out_ptr, out_dst, out_w = wt.indptr.astype(np.int64), wt.indices.astype(np.int64), wt.data.astype(float)

    dst, src, wv = net.edges()
    act = x[dst] != x[src]
    n_edges = int(dst.size)
    total_w = float(wv.sum()) if n_edges else 1.0
    state_f = np.array([0.0, float(wv[act].sum()), total_w, -1.0])
    state_i = np.array([0, int(act.sum()), int(x.sum()), 0, n_edges], dtype=np.int64)
    if n_edges and state_i[1] == 0:
        state_f[3] = 0.0

    expected = (cfg.horizon - cfg.burn_in) * free.size / cfg.sample_every
    cap = int(expected * 1.1) + 64
    buf_t, buf_x, buf_a, buf_aw = (np.zeros(cap) for _ in range(4))
    node_sum = np.zeros(net.n)

    f = free.size
    while True:
        dts = rng.exponential(1.0 / f, _BLOCK)
        picks = rng.integers(0, f, _BLOCK)
        us = rng.random(_BLOCK)
        pos = 0
        while True:
            status, pos = _run_block(dts, picks, us, pos, free, x, s, d,
                                     in_ptr, in_src, in_w, out_ptr, out_dst, out_w,
                                     state_f, state_i, float(cfg.horizon), float(cfg.burn_in),
                                     int(cfg.sample_every), buf_t, buf_x, buf_a, buf_aw, node_sum)
            if status == _STATUS_BUFFER_FULL:
                cap *= 2
                buf_t, buf_x, buf_a, buf_aw = (np.resize(b, cap) for b in (buf_t, buf_x, buf_a, buf_aw))
                continue
            break
        if status == _STATUS_HORIZON:
            break

    ns = int(state_i[3])
    trace = SimulationTrace(
        times=buf_t[:ns].copy(), x_bar=buf_x[:ns].copy(), rho=buf_a[:ns].copy(), rho_w=buf_aw[:ns].copy(),
        node_mean=node_sum / ns if ns else np.full(net.n, np.nan),
        events=int(state_i[0]), final_time=float(state_f[0]), final_opinions=x,
        absorbed_time=None if state_f[3] < 0 else float(state_f[3]),
    )
    for name in ("x_bar", "rho", "rho_w"):
        vals = getattr(trace, name)
        trace.summary[name] = float(vals.mean()) if ns else float("nan")
        trace.stderr[name] = _batch_stderr(vals, cfg.batches)
    log.debug("simulated %d events, %d samples", trace.events, ns)
    return trace


def _run_seed(args):
    net, cfg = args
    return simulate(net, cfg)


def run_seed(cfg: SimulationConfig, run: int) -> int:
    """Seed of replica ``run``; replica 0 reuses ``cfg.seed`` itself."""
    if run == 0:
        return cfg.seed
    return int(np.random.SeedSequence([cfg.seed, run]).generate_state(1, np.uint64)[0] >> 1)


def replicate(net: Network, cfg: SimulationConfig, runs: int, workers: int = 1) -> ReplicateSummary:
    if runs < 1:
        raise ValueError("runs must be >= 1")
    cfgs = [SimulationConfig(cfg.horizon, cfg.burn_in, cfg.sample_every, run_seed(cfg, r),
                             cfg.initial_opinions, cfg.batches) for r in range(runs)]
    if workers > 1 and runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_run_seed, [(net, c) for c in cfgs]))
    else:
        traces = [simulate(net, c) for c in cfgs]
    per_run = [t.summary for t in traces]
    mean, stderr = {}, {}
    for name in ("x_bar", "rho", "rho_w"):
        vals = np.array([p[name] for p in per_run])
        mean[name] = float(vals.mean())
        stderr[name] = float(vals.std(ddof=1) / np.sqrt(runs)) if runs > 1 else traces[0].stderr[name]
    return ReplicateSummary(runs=runs, mean=mean, stderr=stderr, per_run=per_run)


def format_trace(trace: SimulationTrace, sep: str = "\t") -> str:
    lines = [sep.join(["time", "x_bar_emp", "rho_emp", "rho_w_emp"])]
    for row in zip(trace.times.tolist(), trace.x_bar.tolist(), trace.rho.tolist(), trace.rho_w.tolist()):
        lines.append(sep.join(repr(v) for v in row))
    return "\n".join(lines) + "\n"
