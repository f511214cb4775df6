"""Command-line experiments.

Every artifact starts with ``#`` comment lines carrying the canonical
configuration, so re-running with the same flags reproduces the body byte
for byte.  Exit status: 0 ok, 1 bad configuration, 2 runtime failure.

``SSOS_THREADS`` sets how many instances ``snl bench`` processes at once.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .basis import ClusterStructure, cluster_basis, lasserre_basis
from .errors import InfeasibleAssemblyError, SsosError
from .extract import convergence_csv, convergence_study, mahalanobis, robust_sigma
from .mcpo import mcpo_run
from .noise import NoiseDistribution
from .poly import Polynomial
from .problems import P_STAR, c_star, simple_quadratic
from .sdp import import_sdpa
from .snl import SnlInstance, SnlProblemType, build_potential, generate_instance, solve_instance
from .solver import SolverOptions, kkt_residuals, solve

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
THREADS_ENV = "SSOS_THREADS"


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    """A command name plus its settings, with a canonical ``key = json`` text form."""

    command: str
    settings: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [f"command = {json.dumps(self.command)}"]
        for k in sorted(self.settings):
            lines.append(f"{k} = {json.dumps(self.settings[k], sort_keys=True)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        vals = {}
        for ln in text.splitlines():
            ln = ln.strip().lstrip("#").strip()
            if not ln:
                continue
            key, sep, raw = ln.partition(" = ")
            if not sep:
                raise ConfigError(f"malformed config line {ln!r}")
            vals[key] = json.loads(raw)
        if "command" not in vals:
            raise ConfigError("config has no command")
        cmd = vals.pop("command")
        return cls(cmd, vals)

    def header(self) -> str:
        return "".join(f"# {ln}\n" for ln in self.to_text().splitlines())


def parse_degrees(text: str) -> list:
    """``2..5`` or ``2,3,5``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            out = list(range(int(lo), int(hi) + 1))
        else:
            out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad degree list {text!r}") from exc
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("degrees must be positive integers")
    return out


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be positive")
    return n


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


def _g(v: float) -> str:
    return format(float(v), ".10g")


PLOT_TEMPLATE = """\
# plots {csv} (generated helper; needs matplotlib)
import csv
import matplotlib.pyplot as plt

rows = [r for r in csv.reader(line for line in open({csv!r}) if not line.startswith("#"))]
head, body = rows[0], rows[1:]
x = [float(r[head.index({x!r})]) for r in body]
y = [abs(float(r[head.index({y!r})])) for r in body]
plt.semilogy(x, y, "o-")
plt.xlabel({x!r})
plt.ylabel({y!r})
plt.savefig({png!r}, dpi=150)
"""


def plot_script(csv_path: str, x: str, y: str) -> str:
    png = str(Path(csv_path).with_suffix(".png"))
    return PLOT_TEMPLATE.format(csv=csv_path, x=x, y=y, png=png)


# -- commands ----------------------------------------------------------------


def _solver_opts(args) -> SolverOptions:
    return SolverOptions(tol_gap=args.tol, tol_feas=args.tol, max_iter=args.max_iter)


def cmd_convergence(args, cfg: ExperimentConfig) -> int:
    if args.poly:
        if args.p_star is None:
            raise ConfigError("--p-star is required with --poly")
        f = Polynomial.from_text(Path(args.poly).read_text())
        dist = NoiseDistribution.parse(args.noise, f.n_w)
        ref = dict(p_star=args.p_star)
    else:
        f = simple_quadratic()
        dist = NoiseDistribution.parse(args.noise, 1)
        # closed form under uniform noise, quadrature of c*(w) otherwise
        ref = dict(p_star=P_STAR) if dist.kind == "uniform" else dict(c_star=c_star)
    rows = convergence_study(f, dist, args.degrees, opts=_solver_opts(args), with_dual=False, **ref)
    _emit(cfg.header() + convergence_csv(rows), args.out)
    if args.plot_script:
        if not args.out:
            raise ConfigError("--plot-script needs --out")
        Path(args.plot_script).write_text(plot_script(args.out, "s", "gap"))
    return EXIT_OK


def cmd_basis_dump(args, cfg: ExperimentConfig) -> int:
    if args.kind == "lasserre":
        basis = lasserre_basis(args.n, args.d, args.s)
    else:
        basis = cluster_basis(args.n, args.d, ClusterStructure.single(args.n, args.d), args.b, args.t, args.s)
    _emit(basis.dump(), args.out)
    return EXIT_OK


def cmd_solve_sdpa(args, cfg: ExperimentConfig) -> int:
    prob = import_sdpa(Path(args.file).read_text())
    sol = solve(prob, _solver_opts(args))
    pr, dr, gp = kkt_residuals(prob, sol)
    body = _csv(
        [[sol.status, _g(sol.objective_primal), _g(sol.objective_dual), sol.iterations, _g(pr), _g(dr), _g(gp)]],
        ["status", "primal_objective", "dual_objective", "iterations", "primal_residual", "dual_residual", "gap"],
    )
    _emit(cfg.header() + body, args.out)
    return EXIT_OK if sol.optimal else EXIT_RUNTIME


def _ptype(args, seed: int) -> SnlProblemType:
    return SnlProblemType(
        ell=args.l,
        N=args.N,
        K=args.K,
        r=args.r,
        eps=args.eps,
        anchor_mode=args.anchors,
        n_hard=args.n_hard,
        n_clusters=args.n_clusters,
        n_noise=args.d,
        seed=seed,
    )


def cmd_snl_gen(args, cfg: ExperimentConfig) -> int:
    inst = generate_instance(_ptype(args, args.seed))
    # JSON has no comments, so the config travels as an extra top-level key
    doc = json.loads(inst.to_json())
    doc["config"] = cfg.to_text()
    _emit(json.dumps(doc, indent=1, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_snl_solve(args, cfg: ExperimentConfig) -> int:
    inst = SnlInstance.from_json(Path(args.instance).read_text())
    res = solve_instance(inst, args.basis, _solver_opts(args))
    truth = inst.truth_vector()
    rows = [[i, _g(truth[i]), _g(res.means[i]), _g(res.variances[i])] for i in range(inst.n_x)]
    body = _csv(rows, ["variable", "truth", "mean", "variance"])
    body += f"# status = {res.status}\n# delta_m = {_g(res.delta_m)}\n# basis_size = {res.basis_size}\n"
    _emit(cfg.header() + body, args.out)
    return EXIT_OK if res.status in ("optimal", "near_optimal") else EXIT_RUNTIME


def _bench_one(args, i: int):
    seed = args.seed + i
    try:
        inst = generate_instance(_ptype(args, seed))
    except SsosError as exc:
        return [i, seed, f"generation-failed: {exc}", "nan", "nan", 0, "nan"]
    res = solve_instance(inst, args.basis, _solver_opts(args))
    f = build_potential(inst)
    try:
        mc = mcpo_run(f, inst.noise_distribution(), args.T, seed=seed, fixed=dict(inst.hard))
        dm_mc = mahalanobis(inst.truth_vector(), mc.mu, mc.variances)
    except SsosError:
        dm_mc = float("nan")
    return [i, seed, res.status, _g(res.delta_m), _g(dm_mc), res.basis_size, _g(res.dropped_mass)]


def cmd_snl_bench(args, cfg: ExperimentConfig) -> int:
    if args.L < 1:
        raise ConfigError("--L must be at least 1")
    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(lambda i: _bench_one(args, i), range(args.L)))
    else:
        rows = [_bench_one(args, i) for i in range(args.L)]
    header = ["instance", "seed", "status", "delta_m_ssos", "delta_m_mcpo", "basis_size", "dropped_mass"]
    per = _csv(rows, header)
    summary = []
    for name, col in (("S-SOS", 3), ("MCPO", 4)):
        vals = np.array([float(r[col]) for r in rows])
        vals = vals[np.isfinite(vals)]
        if len(vals):
            summary.append([name, _g(np.median(vals)), _g(robust_sigma(vals)), len(vals)])
        else:
            summary.append([name, "nan", "nan", 0])
    summ = _csv(summary, ["method", "median_delta_m", "sigma34", "n_ok"])
    if args.out:
        Path(args.out).write_text(cfg.header() + per)
        spath = Path(args.out).with_name(Path(args.out).stem + "_summary.csv")
        spath.write_text(cfg.header() + summ)
        sys.stdout.write(summ)
    else:
        sys.stdout.write(cfg.header() + per + "\n" + summ)
    return EXIT_OK


def cmd_mcpo(args, cfg: ExperimentConfig) -> int:
    fixed = None
    if args.instance:
        inst = SnlInstance.from_json(Path(args.instance).read_text())
        f, dist, fixed = build_potential(inst), inst.noise_distribution(), dict(inst.hard)
    elif args.poly:
        f = Polynomial.from_text(Path(args.poly).read_text())
        dist = NoiseDistribution.parse(args.noise, f.n_w)
    else:
        f = simple_quadratic()
        dist = NoiseDistribution.parse(args.noise, 1)
    res = mcpo_run(f, dist, args.T, seed=args.seed, fixed=fixed)
    tail = f"# I_hat = {_g(res.I_hat)}\n# std_error = {_g(res.std_error())}\n# divergent = {res.n_divergent}\n"
    _emit(cfg.header() + res.to_csv() + tail, args.out)
    return EXIT_OK


# -- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _add_solver(p):
    p.add_argument("--tol", type=float, default=1e-8, help="relative gap and feasibility tolerance")
    p.add_argument("--max-iter", type=int, default=200)


def _add_snl(p):
    p.add_argument("--l", type=int, default=1, help="spatial dimension")
    p.add_argument("--N", type=int, default=5, help="number of sensors")
    p.add_argument("--K", type=int, default=None, help="number of anchors (default l+1)")
    p.add_argument("--r", type=float, default=1.5, help="sensing radius")
    p.add_argument("--eps", type=float, default=0.1, help="noise scale")
    p.add_argument("--d", type=int, default=None, help="noise variables (one cluster only)")
    p.add_argument("--n-clusters", type=int, default=1)
    p.add_argument("--anchors", choices=["soft", "hard"], default="soft")
    p.add_argument("--n-hard", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ssos", description="Stochastic sum-of-squares experiments")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name in ("convergence", "simple-quadratic"):
        p = sub.add_parser(name, help="gap p* - p*_2s across hierarchy levels")
        p.add_argument("--degrees", type=parse_degrees, default=[2, 3, 4, 5])
        p.add_argument("--noise", default="uniform", help="uniform | gaussian:SIGMA")
        p.add_argument("--poly", help="polynomial text file (default: the simple quadratic)")
        p.add_argument("--p-star", type=float, default=None, help="reference optimum for --poly")
        p.add_argument("--plot-script", help="also write a matplotlib script plotting the gap")
        p.add_argument("--out")
        _add_solver(p)
        p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("basis-dump", help="print basis multi-indices, one per line")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=0)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--kind", choices=["lasserre", "cluster"], default="lasserre")
    p.add_argument("--b", type=int, default=2, help="body order (cluster kind)")
    p.add_argument("--t", type=int, default=2, help="per-variable degree (cluster kind)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_basis_dump)

    p = sub.add_parser("solve-sdpa", help="solve an SDPA sparse file")
    p.add_argument("file")
    p.add_argument("--out")
    _add_solver(p)
    p.set_defaults(func=cmd_solve_sdpa)

    gen_help, solve_help, bench_help = (
        "sample an SNL instance as JSON",
        "S-SOS on a saved SNL instance",
        "S-SOS vs MCPO over L instances",
    )
    snl = sub.add_parser("snl", help="sensor network localization")
    snl_sub = snl.add_subparsers(dest="snl_command", required=True, parser_class=_Parser)
    for parent, prefix in ((snl_sub, ""), (sub, "snl-")):
        p = parent.add_parser(prefix + "gen", help=gen_help)
        _add_snl(p)
        p.add_argument("--out")
        p.set_defaults(func=cmd_snl_gen, command="snl-gen")

        p = parent.add_parser(prefix + "solve", help=solve_help)
        p.add_argument("--instance", required=True)
        p.add_argument("--basis", choices=["full", "cluster"], default="full")
        p.add_argument("--out")
        _add_solver(p)
        p.set_defaults(func=cmd_snl_solve, command="snl-solve")

        p = parent.add_parser(prefix + "bench", help=bench_help)
        _add_snl(p)
        p.add_argument("--L", type=int, default=5, help="number of instances")
        p.add_argument("--T", type=int, default=50, help="MCPO samples per instance")
        p.add_argument("--basis", choices=["full", "cluster"], default="full")
        p.add_argument("--out")
        _add_solver(p)
        p.set_defaults(func=cmd_snl_bench, command="snl-bench")

    p = sub.add_parser("mcpo", help="Monte Carlo point optimization baseline")
    p.add_argument("--T", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", default="uniform")
    p.add_argument("--poly", help="polynomial text file (default: the simple quadratic)")
    p.add_argument("--instance", help="SNL instance JSON instead of a polynomial")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mcpo)
    return ap


_NOT_CONFIG = {"func", "out", "plot_script", "snl_command"}


def config_from_args(args) -> ExperimentConfig:
    settings = {k: v for k, v in vars(args).items() if k not in _NOT_CONFIG and k != "command"}
    return ExperimentConfig(args.command, settings)


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError, InfeasibleAssemblyError) as exc:
        # bad parameter values and unreadable files are configuration problems
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SsosError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
