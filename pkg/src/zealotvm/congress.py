"""US House composition as a voter model with zealots on a complete graph.

Seats are users and the seat holder's party is the opinion. From per-congress
Democrat/Republican counts we compute the empirical diversity and active-link
density, fit the number of locked seats per party by exhaustive search, and
sweep the backfire intensity through the complete-graph optimizers.

Two input formats are understood:

* a member roster (Voteview-style delimited text) with columns ``congress``,
  ``chamber``, ``party_code`` and a member identifier (``icpsr``,
  ``bioguide_id`` or ``member_id``); party codes 100 and 200 are Democrat and
  Republican, all others are dropped;
* pre-aggregated counts with columns ``k``, ``D``, ``R`` and optionally ``N``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .equilibrium import rho_complete, sigma_complete
from .optimize import BackfireSpec, evaluate_complete, solve_p2_diversity_complete, solve_p3_active_complete

__all__ = [
    "CongressSeries",
    "ZealotEstimate",
    "SweepRow",
    "CongressDataError",
    "FIRST_CONGRESS",
    "LAST_CONGRESS",
    "parse_members",
    "load_counts",
    "load_series",
    "save_counts",
    "empirical_sigma",
    "empirical_rho",
    "estimate_zealots",
    "population_sensitivity",
    "alpha_sweep",
    "parse_alpha_grid",
    "format_estimate",
    "format_sweep",
]

FIRST_CONGRESS = 80
LAST_CONGRESS = 117
DEMOCRAT, REPUBLICAN = 100, 200
_ID_COLUMNS = ("icpsr", "bioguide_id", "member_id")


class CongressDataError(ValueError):
    pass


@dataclass(frozen=True)
class CongressSeries:
    congress: np.ndarray
    D: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name in ("congress", "D", "R"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        if not (self.congress.size == self.D.size == self.R.size):
            raise CongressDataError("congress, D and R must have equal length")
        if self.D.size == 0:
            raise CongressDataError("empty series")
        bad = np.flatnonzero((self.D < 1) | (self.R < 1))
        if bad.size:
            raise CongressDataError(f"congress {self.congress[bad[0]]} has a party with zero seats")

    @property
    def N(self) -> np.ndarray:
        return self.D + self.R

    @property
    def K(self) -> int:
        return int(self.D.size)

    @property
    def D_min(self) -> int:
        return int(self.D.min())

    @property
    def R_min(self) -> int:
        return int(self.R.min())

    def mean_population(self) -> int:
        return int(round(float(self.N.mean())))


@dataclass(frozen=True)
class ZealotEstimate:
    z_D: int
    z_R: int
    sigma_hat: float
    rho_hat: float
    sigma: float
    rho: float
    epsilon: float
    population: int


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    party: str          # party whose zealot count is optimised ("D" or "R")
    problem: str        # "p2" (diversity) or "p3" (active links)
    z_star: float
    z_star_rounded: int
    z_max: float
    z_hat: int          # fitted zealot count of the acted-upon party
    sigma_at_star: float
    rho_at_star: float
    sigma_at_rounded: float
    rho_at_rounded: float


# ---------------------------------------------------------------- ingestion

def _read_rows(path):
    with open(path, newline="") as fh:
        sample = fh.read(4096)
        fh.seek(0)
        try:
            dialect = csv.Sniffer().sniff(sample, delimiters=",\t;")
        except csv.Error:
            dialect = csv.excel
        reader = csv.DictReader((line for line in fh if not line.startswith("#")), dialect=dialect)
        if reader.fieldnames is None:
            raise CongressDataError(f"{path}: no header row")
        fields = [f.strip() for f in reader.fieldnames]
        reader.fieldnames = fields
        return fields, list(reader)


def parse_members(path, first=FIRST_CONGRESS, last=LAST_CONGRESS) -> CongressSeries:
    """Count distinct House members per congress and party from a roster file."""
    fields, rows = _read_rows(path)
    missing = [c for c in ("congress", "chamber", "party_code") if c not in fields]
    id_col = next((c for c in _ID_COLUMNS if c in fields), None)
    if id_col is None:
        missing.append("/".join(_ID_COLUMNS))
    if missing:
        raise CongressDataError(f"{path}: missing column(s) {', '.join(missing)}")

    members = {}
    any_house = False
    for lineno, row in enumerate(rows, start=2):
        if row["chamber"].strip().lower() != "house":
            continue
        any_house = True
        try:
            congress = int(row["congress"])
            party = int(float(row["party_code"]))
        except ValueError as exc:
            raise CongressDataError(f"{path}: record {lineno}: {exc}") from exc
        if not first <= congress <= last or party not in (DEMOCRAT, REPUBLICAN):
            continue
        members.setdefault((congress, party), set()).add(row[id_col].strip())
    if not any_house:
        raise CongressDataError(f"{path}: no House records")

    congresses = np.arange(first, last + 1)
    D = np.array([len(members.get((c, DEMOCRAT), ())) for c in congresses])
    R = np.array([len(members.get((c, REPUBLICAN), ())) for c in congresses])
    empty = congresses[(D == 0) & (R == 0)]
    if empty.size:
        raise CongressDataError(f"{path}: no Democrat or Republican House members for congress {empty[0]}")
    return CongressSeries(congresses, D, R)


def load_counts(path) -> CongressSeries:
    """Read pre-aggregated ``k, D, R[, N]`` counts."""
    fields, rows = _read_rows(path)
    missing = [c for c in ("k", "D", "R") if c not in fields]
    if missing:
        raise CongressDataError(f"{path}: missing column(s) {', '.join(missing)}")
    k, D, R = [], [], []
    for lineno, row in enumerate(rows, start=2):
        try:
            k.append(int(row["k"]))
            D.append(int(row["D"]))
            R.append(int(row["R"]))
            if row.get("N") not in (None, "") and int(row["N"]) != D[-1] + R[-1]:
                raise CongressDataError(f"{path}: record {lineno}: N != D + R")
        except ValueError as exc:
            if isinstance(exc, CongressDataError):
                raise
            raise CongressDataError(f"{path}: record {lineno}: {exc}") from exc
    return CongressSeries(np.array(k), np.array(D), np.array(R))


def load_series(path) -> CongressSeries:
    """Dispatch on the header: roster files carry ``chamber``, counts files ``D``/``R``."""
    fields, _ = _read_rows(path)
    if "chamber" in fields:
        return parse_members(path)
    return load_counts(path)


def save_counts(series: CongressSeries, path, header_lines=()):
    lines = [f"# {h}" for h in header_lines] + ["k,D,R,N"]
    lines += [f"{k},{d},{r},{d + r}" for k, d, r in zip(series.congress.tolist(), series.D.tolist(),
                                                       series.R.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------- estimators

def empirical_sigma(series: CongressSeries) -> float:
    D = series.D.astype(float)
    R = series.R.astype(float)
    return float(4.0 * np.mean(D * R / (D + R) ** 2))


def empirical_rho(series: CongressSeries, z_D, z_R):
    """Average share of active links given the zealot counts (broadcasts over arrays).

    Per congress the numerator ``2 D R - D z_R - R z_D`` counts free-free,
    free-Democrat/zealot-Republican and free-Republican/zealot-Democrat pairs
    with opposite parties; the denominator ``N (N - 1)`` counts ordered pairs.
    """
    z_D = np.asarray(z_D, dtype=float)
    z_R = np.asarray(z_R, dtype=float)
    if np.any(z_D > series.D_min) or np.any(z_R > series.R_min):
        raise ValueError(f"zealot counts exceed the smallest party size ({series.D_min}, {series.R_min})")
    if np.any(z_D < 0) or np.any(z_R < 0):
        raise ValueError("zealot counts must be nonnegative")
    D = series.D.astype(float)
    R = series.R.astype(float)
    N = D + R
    denom = N * (N - 1.0)
    # mean over congresses of (2DR - D z_R - R z_D) / denom, expanded so it broadcasts
    out = (np.mean(2.0 * D * R / denom) - z_R * np.mean(D / denom) - z_D * np.mean(R / denom))
    return float(out) if out.ndim == 0 else out


def estimate_zealots(series: CongressSeries, population: int | None = None) -> ZealotEstimate:
    """Exhaustive search of ``{1..D_min} x {1..R_min}`` for the best-fitting zealot counts.

    Ties go to the lexicographically smallest ``(z_D, z_R)``.
    """
    n = series.mean_population() if population is None else int(population)
    zd = np.arange(1, series.D_min + 1, dtype=float)[:, None]
    zr = np.arange(1, series.R_min + 1, dtype=float)[None, :]
    s_hat = empirical_sigma(series)
    r_hat = empirical_rho(series, zd, zr)
    zd_b, zr_b = np.broadcast_arrays(zd, zr)
    fits = zd_b + zr_b <= n
    sig = sigma_complete(zd_b, zr_b)
    rho = np.where(fits, rho_complete(n, np.where(fits, zd_b, 0.5), np.where(fits, zr_b, 0.5)), np.nan)
    eps = 0.5 * (np.abs(s_hat - sig) + np.abs(r_hat - rho))
    eps = np.where(fits, eps, np.inf)
    flat = int(np.argmin(eps))
    i, j = np.unravel_index(flat, eps.shape)
    return ZealotEstimate(z_D=int(i + 1), z_R=int(j + 1), sigma_hat=s_hat, rho_hat=float(r_hat[i, j]),
                          sigma=float(sig[i, j]), rho=float(rho[i, j]), epsilon=float(eps[i, j]),
                          population=n)


def population_sensitivity(series: CongressSeries, populations=None) -> list[ZealotEstimate]:
    """Re-run the estimate for each population size (default: every observed N_k)."""
    if populations is None:
        populations = np.unique(series.N)
    return [estimate_zealots(series, int(n)) for n in populations]


# --------------------------------------------------------------------- sweep

def alpha_sweep(series: CongressSeries, estimate: ZealotEstimate, alphas, population: int | None = None
                ) -> list[SweepRow]:
    """Solve the diversity and active-link problems for each alpha and each acted-upon party.

    The acted-upon party plays opinion 1 (the decision variable); the other
    party keeps its fitted zealot count as opinion 0. Metrics are evaluated
    at the post-intervention counts on a complete graph of ``population``
    seats (default: the estimate's population).
    """
    n = estimate.population if population is None else int(population)
    rows = []
    for alpha in alphas:
        for party, z_other, z_hat in (("D", estimate.z_R, estimate.z_D), ("R", estimate.z_D, estimate.z_R)):
            spec = BackfireSpec(z0=float(z_other), alpha=float(alpha), n=float(n))
            for solver in (solve_p2_diversity_complete, solve_p3_active_complete):
                res = solver(spec)
                at_star = evaluate_complete(res, n)
                z0r, z1r = spec.post_intervention(res.z1_star_rounded)
                at_rounded = _complete_metrics(n, z0r, z1r)
                rows.append(SweepRow(alpha=float(alpha), party=party, problem=res.problem, z_star=res.z1_star,
                                     z_star_rounded=res.z1_star_rounded, z_max=spec.z1_max, z_hat=z_hat,
                                     sigma_at_star=at_star["sigma"], rho_at_star=at_star["rho"],
                                     sigma_at_rounded=at_rounded["sigma"], rho_at_rounded=at_rounded["rho"]))
    return rows


def _complete_metrics(n, z0, z1):
    if z0 + z1 <= 0:
        return {"sigma": 0.0, "rho": 0.0}
    z0 = min(z0, n - z1)
    return {"sigma": sigma_complete(z0, z1), "rho": rho_complete(n, z0, z1)}


def parse_alpha_grid(text: str) -> np.ndarray:
    """``"start:stop:step"`` (stop inclusive when hit exactly) or a comma list."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(t) for t in text.split(":"))
        if step <= 0:
            raise ValueError("alpha step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        grid = start + step * np.arange(count)
    else:
        grid = np.array([float(t) for t in text.split(",") if t.strip()])
    grid = np.round(grid, 12)
    if grid.size == 0 or np.any(grid < 0) or np.any(grid >= 1):
        raise ValueError(f"alpha grid must be nonempty within [0, 1): {text!r}")
    return grid


# ------------------------------------------------------------------- export

def format_estimate(est: ZealotEstimate, series: CongressSeries, sep: str = "\t") -> str:
    header = ["z_D", "z_R", "sigma_hat", "rho_hat", "sigma", "rho", "epsilon", "population", "K", "D_min", "R_min"]
    vals = [est.z_D, est.z_R, est.sigma_hat, est.rho_hat, est.sigma, est.rho, est.epsilon, est.population,
            series.K, series.D_min, series.R_min]
    return sep.join(header) + "\n" + sep.join(str(v) if isinstance(v, int) else repr(v) for v in vals) + "\n"


def format_sweep(rows, sep: str = "\t") -> str:
    header = ["alpha", "party", "problem", "z_star", "z_star_rounded", "z_max", "z_hat",
              "sigma_at_star", "rho_at_star", "sigma_at_rounded", "rho_at_rounded"]
    lines = [sep.join(header)]
    for r in rows:
        vals = [r.alpha, r.party, r.problem, r.z_star, r.z_star_rounded, r.z_max, r.z_hat,
                r.sigma_at_star, r.rho_at_star, r.sigma_at_rounded, r.rho_at_rounded]
        lines.append(sep.join(v if isinstance(v, str) else str(v) if isinstance(v, int) else repr(float(v))
                              for v in vals))
    return "\n".join(lines) + "\n"
