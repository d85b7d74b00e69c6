"""Command-line entry point: ``merwlab <subcommand> [options]``.

Exit codes: 0 success, 2 invalid input or configuration, 3 a statistical
check failed (its report is still written).  Errors go to stderr as one JSON
line.  ``--config file.json`` overrides flags; unknown keys are rejected.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import diffusion, exclusion, graph, halfline, simulate, variational
from . import io as mio
from .defaults import DEFAULTS, step_budget
from .errors import MerwError

EXIT_OK, EXIT_INVALID, EXIT_STATS = 0, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _num(x) -> float:
    """JSON-friendly number (exact rationals become floats)."""
    return float(x)


class Context:
    def __init__(self, args):
        self.args = args
        self.out = Path(args.out) if args.out else None
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    @property
    def budget(self) -> int:
        return int(self.args.budget) if self.args.budget is not None else step_budget()

    def emit(self, result: dict, name: str = "result.json") -> None:
        print(json.dumps(result, sort_keys=True))
        if self.out:
            meta = dict(result, defaults=DEFAULTS, command=self.args.command)
            (self.out / name).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")

    def path(self, name: str) -> Path | None:
        return self.out / name if self.out else None

    def dry(self, required: int) -> bool:
        if not self.args.dry_run:
            return False
        print(json.dumps({"dry_run": True, "required_steps": int(required), "budget": self.budget,
                          "within_budget": required <= self.budget}, sort_keys=True))
        return True


def _model(a) -> halfline.HalfLineModel:
    if a.gamma is not None:
        return halfline.build_model(a.gamma)
    if a.lam is not None and a.n is not None:
        return halfline.build_model(lambda_scaling=a.lam, n_scale=a.n)
    raise UsageError("give --gamma, or --lam with --n")


# --- subcommands --------------------------------------------------------------


def cmd_spectral(ctx: Context) -> int:
    a = ctx.args
    if a.graph:
        g = mio.read_graph(a.graph)
        if ctx.dry(0):
            return EXIT_OK
        eig = graph.power_iterate(g, tol=a.tol)
        ctx.emit({"rho": eig.rho, "residual": eig.residual, "iterations": eig.iterations})
        if ctx.out:
            ctx.path("eigenpair.json").write_text(mio.eigenpair_to_json(eig, g) + "\n")
        return EXIT_OK
    m = _model(a)
    if ctx.dry(0):
        return EXIT_OK
    ctx.emit({"rho": _num(m.rho), "regime": m.regime.value})
    return EXIT_OK


def cmd_kernel(ctx: Context) -> int:
    a = ctx.args
    if a.graph:
        g = mio.read_graph(a.graph)
        if ctx.dry(0):
            return EXIT_OK
        k = graph.grw_kernel(g) if a.kind == "grw" else graph.merw_kernel(g, graph.power_iterate(g))
        text = mio.kernel_to_json(k)
        print(text)
        if ctx.out:
            ctx.path("kernel.json").write_text(text + "\n")
        return EXIT_OK
    m = _model(a)
    if a.site is None or a.site < 0:
        raise UsageError("--n must be a non-negative site")
    if ctx.dry(0):
        return EXIT_OK
    low = halfline.lower_probability(m, a.site)
    key = "stay" if a.site == 0 else "down"
    ctx.emit({"up": _num(1 - low), key: _num(low)})
    return EXIT_OK


def cmd_simulate(ctx: Context) -> int:
    a = ctx.args
    m = _model(a)
    spec = simulate.SimulationSpec(m, a.start, a.steps, a.replicas, a.seed, a.record,
                                   a.threshold, a.scale, ctx.budget, a.workers)
    if ctx.dry(spec.required_steps):
        return EXIT_OK
    ens = simulate.run(spec)
    if ctx.out:
        ens.to_csv(ctx.path("ensemble.csv"))
    ctx.emit(ens.summary(), "summary.json")
    return EXIT_OK


def _reference(m: halfline.HalfLineModel, x0: float, t: float, a):
    if m.regime is halfline.Regime.SUBCRITICAL:
        return diffusion.bessel3_law(x0, t)
    if m.regime is halfline.Regime.CRITICAL:
        return diffusion.folded_normal_law(x0, t)
    lam = m.lambda_scaling or (float(m.gamma) - 1) * math.sqrt(a.n)
    if x0 == 0 and t >= a.stationary_time:
        return diffusion.exponential_law(2 * lam)
    return diffusion.reflected_drifted_euler(lam, x0, t, a.dt, a.reference_replicas, a.seed + 1,
                                             workers=a.workers)


def cmd_scaling_test(ctx: Context) -> int:
    a = ctx.args
    if a.n is None:
        raise UsageError("--n is required")
    m = _model(a)
    steps = int(math.floor(a.n * a.t))
    if ctx.dry(steps * a.replicas):
        return EXIT_OK
    spec = simulate.SimulationSpec(m, a.start, steps, a.replicas, a.seed, "endpoint", None, a.n,
                                   ctx.budget, a.workers)
    marg = simulate.scaled_marginal(spec, a.t)
    ref = _reference(m, a.start / math.sqrt(a.n), a.t, a)
    rep = diffusion.ks_test(marg.ecdf, ref, alpha=a.alpha)
    out = json.loads(rep.to_json())
    out.update(regime=m.regime.value, gamma=_num(m.gamma), n=a.n, t=a.t, seed=a.seed)
    if a.tolerance is not None:
        out["tolerance"] = a.tolerance
        out["pass"] = bool(rep.passed and rep.ks_statistic < a.tolerance)
    if ctx.out:
        np.savetxt(ctx.path("marginal.csv"), np.column_stack([marg.edges, marg.mass]), delimiter=",",
                   header="left_edge,mass", comments="", fmt="%.17g")
    ctx.emit(out, "gof.json")
    return EXIT_OK if out["pass"] else EXIT_STATS


def cmd_occupation(ctx: Context) -> int:
    a = ctx.args
    if a.n is None or a.lam is None:
        raise UsageError("--n and --lam are required")
    steps = int(math.floor(a.n * a.u))
    if ctx.dry(steps * a.replicas * (1 if a.gamma is None else 2)):
        return EXIT_OK
    rep = simulate.occupation_check(a.n, a.u, a.v, a.eta, a.lam, a.replicas, a.seed, a.gamma,
                                    ctx.budget, a.workers)
    ctx.emit(json.loads(rep.to_json()), "occupation.json")
    return EXIT_OK if rep.passed else EXIT_STATS


def cmd_conditioned(ctx: Context) -> int:
    a = ctx.args
    rate = (a.x + 1) * math.sqrt(2 / (math.pi * a.horizon))
    if ctx.dry(int(a.replicas * a.horizon + a.replicas / rate * 4 * math.sqrt(a.horizon))):
        return EXIT_OK
    s = simulate.conditioned_srw_sample(a.x, a.horizon, a.k, a.replicas, a.seed, workers=a.workers)
    merw = halfline.merw_path_law(halfline.build_model(0), a.x, a.k)
    tv = simulate.tv_distance(s.law(), merw)
    out = {
        "x": a.x, "horizon": a.horizon, "k": a.k, "accepted": s.accepted, "attempts": s.attempts,
        "acceptance_rate": s.acceptance_rate,
        "acceptance_asymptotic": halfline.hitting_tail_asymptotic(a.x, a.horizon),
        "acceptance_exact": float(halfline.hitting_tail_reflection(a.x, a.horizon)),
        "tv_to_merw": tv, "tolerance": a.tolerance, "pass": tv < a.tolerance, "seed": a.seed,
    }
    if ctx.out:
        rows = sorted(s.law().items())
        ctx.path("prefix_law.csv").write_text(
            "path,empirical,merw\n"
            + "".join(f"{' '.join(map(str, p))},{q!r},{float(merw.get(p, 0))!r}\n" for p, q in rows)
        )
    ctx.emit(out, "conditioned.json")
    return EXIT_OK if out["pass"] else EXIT_STATS


def cmd_variational(ctx: Context) -> int:
    a = ctx.args
    if ctx.dry(0):
        return EXIT_OK
    if a.problem == "dirichlet":
        r = variational.minimize_dirichlet(a.L, a.mesh)
        out = {"problem": "dirichlet", "h": r.h, "exact": (math.pi / a.L) ** 2, "L": a.L, "mesh": a.mesh}
    else:
        lam = a.lam if a.lam is not None else 1.0
        r = variational.minimize_mean_constrained(lam, a.L, a.mesh, a.origin_value)
        out = json.loads(r.to_json())
        out.update(problem="mean", exponential_h=lam * lam,
                   exponential_distance=variational.relative_l2(
                       r.profile, lambda x: math.sqrt(2 * lam) * np.exp(-lam * x)))
    if ctx.out:
        r.profile.to_csv(ctx.path("profile.csv"))
    ctx.emit(out, "variational.json")
    return EXIT_OK


def cmd_exclusion(ctx: Context) -> int:
    a = ctx.args
    if ctx.dry(a.steps * a.replicas):
        return EXIT_OK
    res = exclusion.eigen_residual(a.gmax, a.asymmetric)
    ens = exclusion.simulate_pair(exclusion.PairState(0, a.gap), a.steps, a.replicas, a.seed,
                                  a.asymmetric, budget=ctx.budget)
    out = {"rho": exclusion.spectral_radius(a.asymmetric), "eigen_residual_max": int(np.abs(res).max()),
           "gmax": a.gmax, "seed": a.seed, "mean_final_gap": float(ens.gaps.mean())}
    if not a.asymmetric:
        fit = exclusion.drift_regression(ens, 5, 50)
        out.update(drift_slope=fit.slope, drift_visits=fit.visits)
        out["pass"] = fit.relative_error < 0.1 and out["eigen_residual_max"] == 0
    else:
        out["pass"] = out["eigen_residual_max"] == 0
    if ctx.out:
        ens.to_csv(ctx.path("pairs.csv"))
        ctx.path("kernel.json").write_text(exclusion.kernel_table_json(min(a.gmax, 50), a.asymmetric) + "\n")
    ctx.emit(out, "exclusion.json")
    return EXIT_OK if out["pass"] else EXIT_STATS


def cmd_entropy(ctx: Context) -> int:
    a = ctx.args
    if a.graph:
        g = mio.read_graph(a.graph)
        if ctx.dry(0):
            return EXIT_OK
        eig = graph.power_iterate(g)
        k = graph.merw_kernel(g, eig) if a.kind == "merw" else graph.grw_kernel(g).with_invariant_measure()
        ctx.emit({"kind": a.kind, "entropy_rate": graph.entropy_rate(k),
                  "weighted_entropy_rate": graph.weighted_entropy_rate(k, g), "ln_rho": math.log(eig.rho)})
        return EXIT_OK
    m = _model(a)
    if ctx.dry(a.steps * a.replicas):
        return EXIT_OK
    spec = simulate.SimulationSpec(m, a.start, a.steps, a.replicas, a.seed, "full_path",
                                   budget=ctx.budget, workers=a.workers)
    ens = simulate.run(spec)
    ctx.emit({"gamma": _num(m.gamma), "ln_rho": math.log(float(m.rho)),
              "pathwise_rate": simulate.empirical_entropy_rate(ens),
              "pathwise_rate_relative_to_weights": simulate.empirical_entropy_rate(ens, relative_to_weights=True),
              "steps": a.steps, "seed": a.seed})
    return EXIT_OK


def cmd_graph(ctx: Context) -> int:
    a = ctx.args
    if a.graph:
        g = mio.read_graph(a.graph)
    elif a.builder:
        name, _, size = a.builder.partition(":")
        builders = {"path": graph.path_graph, "cycle": graph.cycle_graph, "z": graph.z_with_loops}
        if name not in builders or not size.isdigit():
            raise UsageError("--builder must be path:N, cycle:N or z:N")
        g = builders[name](int(size))
    else:
        raise UsageError("give --graph FILE or --builder NAME:N")
    if ctx.dry(0):
        return EXIT_OK
    ctx.emit({"vertex_count": g.vertex_count, "edge_count": len(g.edges), "directed": g.directed,
              "irreducible": g.is_irreducible(), "max_out_weight": float(g.out_weight().max())})
    if ctx.out:
        ctx.path("graph.json").write_text(mio.graph_to_json(g) + "\n")
    return EXIT_OK


COMMANDS = {
    "spectral": cmd_spectral,
    "kernel": cmd_kernel,
    "simulate": cmd_simulate,
    "scaling-test": cmd_scaling_test,
    "occupation": cmd_occupation,
    "conditioned": cmd_conditioned,
    "variational": cmd_variational,
    "exclusion": cmd_exclusion,
    "entropy": cmd_entropy,
    "graph": cmd_graph,
}


def _gamma(text: str):
    """Keep rationals exact: '1/2' and '0.25' become Fractions."""
    from fractions import Fraction

    try:
        return Fraction(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="merwlab", description="Maximum entropy random walk laboratory")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON file whose keys override flags")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="directory for CSV/JSON artifacts")
        sp.add_argument("--dry-run", action="store_true")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--budget", type=float, default=None, help="total step budget")
        return sp

    def model(sp):
        sp.add_argument("--gamma", type=_gamma)
        sp.add_argument("--lam", type=float, help="supercritical scaling gamma = 1 + lam/sqrt(n)")
        sp.add_argument("--n", type=int, help="scale n")

    sp = common(sub.add_parser("spectral", help="spectral radius and regime"))
    model(sp)
    sp.add_argument("--graph")
    sp.add_argument("--tol", type=float, default=DEFAULTS["eigen_tol"])

    sp = common(sub.add_parser("kernel", help="kernel row of the half-line model or a graph kernel"))
    sp.add_argument("--gamma", type=_gamma)
    sp.add_argument("--lam", type=float)
    sp.add_argument("--n", dest="site", type=int, help="site of the half-line")
    sp.add_argument("--n-scale", dest="n", type=int)
    sp.add_argument("--graph")
    sp.add_argument("--kind", choices=["merw", "grw"], default="merw")

    sp = common(sub.add_parser("simulate", help="simulate half-line MERW paths"))
    model(sp)
    sp.add_argument("--start", type=int, default=0)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--replicas", type=int, default=1)
    sp.add_argument("--record", choices=["endpoint", "full_path", "occupation"], default="endpoint")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--scale", type=int)

    sp = common(sub.add_parser("scaling-test", help="KS test of a rescaled marginal"))
    model(sp)
    sp.add_argument("--start", type=int, default=0)
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--replicas", type=int, default=10**5)
    sp.add_argument("--alpha", type=float, default=DEFAULTS["ks_alpha"])
    sp.add_argument("--tolerance", type=float, help="extra bound on the KS statistic")
    sp.add_argument("--stationary-time", type=float, default=20.0)
    sp.add_argument("--dt", type=float, default=1e-3)
    sp.add_argument("--reference-replicas", type=int, default=10**5)

    sp = common(sub.add_parser("occupation", help="occupation bound check"))
    sp.add_argument("--n", type=int)
    sp.add_argument("--u", type=float, default=1.0)
    sp.add_argument("--v", type=float, default=1.0)
    sp.add_argument("--eta", type=float, default=0.25)
    sp.add_argument("--lam", type=float, default=1.0)
    sp.add_argument("--gamma", type=float, help="optional gamma <= 1 run coupled to the bound chain")
    sp.add_argument("--replicas", type=int, default=10**4)

    sp = common(sub.add_parser("conditioned", help="rejection-sampled conditioned walk"))
    sp.add_argument("--x", type=int, default=1)
    sp.add_argument("--horizon", type=int, default=10**4)
    sp.add_argument("--k", type=int, default=3)
    sp.add_argument("--replicas", type=int, default=10**5)
    sp.add_argument("--tolerance", type=float, default=0.02)

    sp = common(sub.add_parser("variational", help="entropy-rate minimizers"))
    sp.add_argument("--problem", choices=["dirichlet", "mean"], default="dirichlet")
    sp.add_argument("--L", type=float, default=math.pi)
    sp.add_argument("--mesh", type=int, default=1024)
    sp.add_argument("--lam", type=float)
    sp.add_argument("--origin-value", type=float)

    sp = common(sub.add_parser("exclusion", help="two-particle exclusion MERW"))
    sp.add_argument("--gap", type=int, default=1)
    sp.add_argument("--steps", type=int, default=10**4)
    sp.add_argument("--replicas", type=int, default=10**3)
    sp.add_argument("--gmax", type=int, default=10**6)
    sp.add_argument("--asymmetric", action="store_true")

    sp = common(sub.add_parser("entropy", help="entropy rates"))
    model(sp)
    sp.add_argument("--graph")
    sp.add_argument("--kind", choices=["merw", "grw"], default="merw")
    sp.add_argument("--start", type=int, default=0)
    sp.add_argument("--steps", type=int, default=10**5)
    sp.add_argument("--replicas", type=int, default=1)

    sp = common(sub.add_parser("graph", help="inspect or convert a graph"))
    sp.add_argument("--graph")
    sp.add_argument("--builder", help="path:N, cycle:N or z:N")
    return p


def _apply_config(args) -> None:
    if not args.config:
        return
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    allowed = set(vars(args)) - {"config", "command"}
    unknown = sorted(k for k in (key.replace("-", "_") for key in cfg) if k not in allowed)
    if unknown:
        raise UsageError(f"unknown config fields: {unknown}")
    for key, val in cfg.items():
        k = key.replace("-", "_")
        if k == "gamma" and val is not None:
            val = _gamma(str(val))
        setattr(args, k, val)


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stdout)
        return _fail("UsageError", "no subcommand given", EXIT_INVALID)
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("no subcommand given")
        _apply_config(args)
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        if not 0 <= args.seed < 2**64:
            raise UsageError("--seed must be a 64-bit unsigned integer")
        return COMMANDS[args.command](Context(args))
    except UsageError as exc:
        return _fail("UsageError", str(exc), EXIT_INVALID)
    except (MerwError, ValueError, argparse.ArgumentTypeError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_INVALID)


if __name__ == "__main__":
    sys.exit(main())
