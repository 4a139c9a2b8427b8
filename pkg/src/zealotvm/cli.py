"""Command-line front end: ``zealotvm {generate,equilibrium,simulate,optimize,congress}``.

Every run writes delimited tables (tab-separated, header row, ``#`` manifest
comment block) plus ``manifest.json`` into ``--out-dir``. Options may also come
from a JSON config file (``--config``); explicit flags win over the file, the
file wins over defaults. A previous ``manifest.json`` is accepted as config.

Exit status: 0 success, 2 usage error, 3 input error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import congress as cg
from .equilibrium import SingularSystemError, format_equilibrium_tables, solve_activation, solve_opinions
from .network import (InvalidNetworkError, NetworkFormatError, generate_barabasi_albert, generate_complete,
                      generate_erdos_renyi, load_network, save_network, WEIGHT_LAWS)
from .optimize import (BackfireSpec, ConvergenceError, format_results, solve_p1_target,
                       solve_p2_diversity_complete, solve_p3_active_complete, solve_p_diversity_general)
from .simulate import SimulationConfig, format_trace, replicate, simulate

log = logging.getLogger("zealotvm")

EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers

def _alpha(text):
    a = float(text)
    if not 0.0 <= a < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in [0, 1), got {text}")
    return a


def _fraction(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def _int_list(text):
    return [int(t) for t in str(text).replace(" ", "").split(",") if t]


class Run:
    """Collects parameters and outputs of one invocation and writes the manifest."""

    def __init__(self, args, command):
        self.command = command
        self.out_dir = Path(args.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        skip = {"func", "config", "verbose"}
        self.params = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
        self.outputs = []

    def header(self):
        lines = [f"zealotvm {__version__}", f"command: {self.command}"]
        # out_dir stays out so a replay into another directory is byte-identical
        lines += [f"{k}: {json.dumps(v)}" for k, v in self.params.items() if k not in ("out_dir", "command")]
        return lines

    def write_table(self, name, text):
        path = self.out_dir / name
        path.write_text("".join(f"# {h}\n" for h in self.header()) + text)
        self.outputs.append(str(path))
        return path

    def register(self, path):
        self.outputs.append(str(path))

    def finish(self):
        manifest = {"tool": "zealotvm", "version": __version__, "command": self.command,
                    "params": self.params, "outputs": self.outputs}
        (self.out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))


# ----------------------------------------------------------------- commands

def cmd_generate(args):
    _require(args, "n")
    if args.topology == "er":
        _require(args, "density")
        net = generate_erdos_renyi(args.n, args.density, args.z0, args.z1, args.weights, args.seed)
    elif args.topology == "ba":
        _require(args, "m")
        net = generate_barabasi_albert(args.n, args.m, args.z0, args.z1, args.weights, args.seed)
    else:
        net = generate_complete(args.n, args.z0, args.z1)
    run = Run(args, f"generate {args.topology}")
    path = Path(args.output) if args.output else run.out_dir / "network.txt"
    save_network(net, path, header_lines=run.header())
    run.register(path)
    run.finish()
    print(f"{net.n} nodes, {net.free.size} free, {net.num_edges} edges -> {path}")


def cmd_equilibrium(args):
    _require(args, "network")
    net = load_network(args.network)
    eq = solve_opinions(net)
    act = solve_activation(net, eq, tol=args.tolerance, degree_normalized=not args.as_printed)
    summary, nodes, pairs = format_equilibrium_tables(net, eq, act)
    run = Run(args, "equilibrium")
    run.write_table("summary.tsv", summary)
    run.write_table("nodes.tsv", nodes)
    run.write_table("pairs.tsv", pairs)
    run.finish()
    sys.stdout.write(summary)


def cmd_simulate(args):
    _require(args, "network")
    if args.horizon <= args.burn_in:
        raise UsageError(f"--horizon ({args.horizon}) must exceed --burn-in ({args.burn_in})")
    if args.runs < 1:
        raise UsageError("--runs must be >= 1")
    net = load_network(args.network)
    cfg = SimulationConfig(horizon=args.horizon, burn_in=args.burn_in, sample_every=args.sample_every,
                           seed=args.seed, initial_opinions=args.initial)
    eq = solve_opinions(net)
    act = solve_activation(net, eq, tol=args.tolerance)
    run = Run(args, "simulate")
    trace = simulate(net, cfg)
    run.write_table("trace.tsv", format_trace(trace))
    if args.runs > 1:
        rep = replicate(net, cfg, args.runs, workers=args.threads)
        mean, err = rep.mean, rep.stderr
    else:
        mean, err = trace.summary, trace.stderr
    theory = {"x_bar": eq.x_bar, "rho": act.rho, "rho_w": act.rho_w}
    lines = ["quantity\tempirical\tstderr\ttheory\tabs_error"]
    for q in ("x_bar", "rho", "rho_w"):
        lines.append(f"{q}\t{mean[q]!r}\t{err[q]!r}\t{theory[q]!r}\t{abs(mean[q] - theory[q])!r}")
    text = "\n".join(lines) + "\n"
    run.write_table("summary.tsv", text)
    run.finish()
    sys.stdout.write(f"runs={args.runs} events(run 0)={trace.events} samples(run 0)={trace.n_samples}\n" + text)


def cmd_optimize(args):
    run = Run(args, f"optimize {args.problem}")
    if args.problem == "p":
        _require(args, "network", "support")
        net = load_network(args.network)
        res = solve_p_diversity_general(net, _int_list(args.support), tolerance=args.tolerance)
        free = net.free
        text = "node\tz1\n" + "".join(f"{i}\t{v!r}\n" for i, v in zip(free.tolist(), res.z1.tolist()))
        run.write_table("z1.tsv", text)
        path = run.out_dir / "network_optimized.txt"
        save_network(res.network, path, header_lines=run.header())
        run.register(path)
        summary = f"x_bar\tgap\titerations\n{res.x_bar!r}\t{res.gap!r}\t{res.iterations}\n"
        run.write_table("summary.tsv", summary)
        run.finish()
        sys.stdout.write(summary)
        return
    _require(args, "n", "z0", "alpha")
    spec = BackfireSpec(z0=args.z0, alpha=args.alpha, n=args.n)
    if args.problem == "p1":
        _require(args, "lam")
        res = solve_p1_target(spec, args.lam)
    elif args.problem == "p2":
        res = solve_p2_diversity_complete(spec)
    else:
        res = solve_p3_active_complete(spec)
    text = format_results([res])
    run.write_table("result.tsv", text)
    run.finish()
    sys.stdout.write(text)


def cmd_congress(args):
    _require(args, "data")
    series = cg.load_series(args.data)
    est = cg.estimate_zealots(series, args.population)
    run = Run(args, f"congress {args.action}")
    counts = run.out_dir / "counts.csv"
    cg.save_counts(series, counts, header_lines=run.header())
    run.register(counts)
    est_text = cg.format_estimate(est, series)
    run.write_table("estimate.tsv", est_text)
    sens = cg.population_sensitivity(series)
    sens_lines = ["population\tz_D\tz_R\tepsilon"] + [f"{e.population}\t{e.z_D}\t{e.z_R}\t{e.epsilon!r}"
                                                       for e in sens]
    run.write_table("population_sensitivity.tsv", "\n".join(sens_lines) + "\n")
    out = est_text
    if args.action == "sweep":
        try:
            alphas = cg.parse_alpha_grid(args.alphas)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        rows = cg.alpha_sweep(series, est, alphas)
        run.write_table("sweep.tsv", cg.format_sweep(rows))
        out += f"sweep: {len(rows)} rows -> {run.out_dir / 'sweep.tsv'}\n"
    run.finish()
    sys.stdout.write(out)


# ------------------------------------------------------------------- parser

def _common():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    g.add_argument("--out-dir", default=".", help="directory for tables and manifest.json")
    g.add_argument("--tolerance", type=float, default=1e-10, help="solver tolerance")
    g.add_argument("--threads", type=int, default=1, help="worker processes for replicated runs")
    g.add_argument("--config", help="JSON file of option defaults (a manifest.json also works)")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser():
    parser = argparse.ArgumentParser(prog="zealotvm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"zealotvm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    leaves = []

    gen = sub.add_parser("generate", help="write a random or complete network file")
    gen_sub = gen.add_subparsers(dest="topology", required=True)
    for topo, helptext in (("er", "directed Erdos-Renyi"), ("ba", "Barabasi-Albert, both directions"),
                           ("complete", "complete unweighted")):
        p = gen_sub.add_parser(topo, help=helptext, parents=[_common()])
        p.add_argument("--n", type=int)
        p.add_argument("--z0", type=_nonneg_int, default=0)
        p.add_argument("--z1", type=_nonneg_int, default=0)
        if topo == "er":
            p.add_argument("--density", type=float)
        if topo == "ba":
            p.add_argument("--m", type=int, default=5)
        if topo != "complete":
            p.add_argument("--weights", choices=WEIGHT_LAWS, default="uniform" if topo == "er" else "exponential")
        p.add_argument("--output", help="network file (default OUT_DIR/network.txt)")
        p.set_defaults(func=cmd_generate)
        leaves.append(p)

    p = sub.add_parser("equilibrium", help="solve opinions and active-link densities", parents=[_common()])
    p.add_argument("network", nargs="?")
    p.add_argument("--as-printed", action="store_true",
                   help="solve the pair system without per-node degree normalisation")
    p.set_defaults(func=cmd_equilibrium)
    leaves.append(p)

    p = sub.add_parser("simulate", help="Monte Carlo run(s) with theory overlay", parents=[_common()])
    p.add_argument("network", nargs="?")
    p.add_argument("--horizon", type=float, default=50_000.0)
    p.add_argument("--burn-in", type=float, default=10_000.0)
    p.add_argument("--sample-every", type=int, default=100)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--initial", choices=("uniform", "zeros", "ones"), default="uniform")
    p.set_defaults(func=cmd_simulate)
    leaves.append(p)

    opt = sub.add_parser("optimize", help="zealot placement problems")
    opt_sub = opt.add_subparsers(dest="problem", required=True)
    for prob, helptext in (("p1", "complete graph, target mean opinion"), ("p2", "complete graph, diversity"),
                           ("p3", "complete graph, active links")):
        p = opt_sub.add_parser(prob, help=helptext, parents=[_common()])
        p.add_argument("--n", type=float)
        p.add_argument("--z0", type=float)
        p.add_argument("--alpha", type=_alpha, default=None)
        if prob == "p1":
            p.add_argument("--lambda", dest="lam", type=_fraction)
        p.set_defaults(func=cmd_optimize)
        leaves.append(p)
    p = opt_sub.add_parser("p", help="general network, diversity via projected gradient", parents=[_common()])
    p.add_argument("network", nargs="?")
    p.add_argument("--support", help="comma-separated opinion-1 zealot ids whose influence is optimised")
    p.set_defaults(func=cmd_optimize, tolerance=1e-6)
    leaves.append(p)

    con = sub.add_parser("congress", help="US House zealot estimate and backfire sweep")
    con_sub = con.add_subparsers(dest="action", required=True)
    for action in ("estimate", "sweep"):
        p = con_sub.add_parser(action, parents=[_common()])
        p.add_argument("data", nargs="?", help="member roster or k,D,R[,N] counts file")
        p.add_argument("--population", type=int, help="N used in the closed forms (default: rounded mean N_k)")
        if action == "sweep":
            p.add_argument("--alphas", default="0:0.95:0.05", help="start:stop:step or comma list")
        p.set_defaults(func=cmd_congress)
        leaves.append(p)
    return parser, leaves


def _load_config(path):
    data = json.loads(Path(path).read_text())
    if "params" in data and isinstance(data["params"], dict):
        data = data["params"]
    return {k.replace("-", "_"): v for k, v in data.items()}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, leaves = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            config = _load_config(known.config)
        except (OSError, ValueError) as exc:
            print(f"zealotvm: cannot read config: {exc}", file=sys.stderr)
            return EXIT_INPUT
        for leaf in leaves:
            accepted = {a.dest for a in leaf._actions}
            leaf.set_defaults(**{k: v for k, v in config.items() if k in accepted})
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"zealotvm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SingularSystemError, ConvergenceError, np.linalg.LinAlgError) as exc:
        print(f"zealotvm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, NetworkFormatError, InvalidNetworkError, cg.CongressDataError, ValueError) as exc:
        print(f"zealotvm: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
