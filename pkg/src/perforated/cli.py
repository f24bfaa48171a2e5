"""Command-line entry point: ``perforated <command> [options]``.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
Every run writes JSON (and CSV where tabular) into ``--out``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import DomainError, NumericalError, PerforatedError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _eps_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty eps list")
    return vals


def _positive(kind):
    def conv(text):
        val = kind(text)
        if not val > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return val
    return conv


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="perforated", description="Perforated-domain eigenvalues, capacities and noise stabilization.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, resolution=64):
        sp.add_argument("--domain", required=True, help="domain JSON file")
        sp.add_argument("--resolution", type=_positive(float), default=resolution,
                        help="lattice points per unit length (default: %(default)s)")
        sp.add_argument("--out", default=".", help="output directory (default: %(default)s)")

    sp = sub.add_parser("eigen", help="first Dirichlet eigenpair")
    common(sp)
    sp.add_argument("--tol", type=_positive(float), default=1e-10, help="eigen residual tolerance (default: %(default)s)")
    sp.add_argument("--extrapolate", action="store_true", help="also Richardson-extrapolate with 2x resolution")

    sp = sub.add_parser("capacity", help="capacity of the union of the holes")
    common(sp)
    sp.add_argument("--min-hole-ratio", type=float, default=4.0, help="require h < eps / ratio (default: %(default)s)")

    sp = sub.add_parser("asymptotics", help="eigenvalue shift versus the capacity expansion")
    common(sp, resolution=None)
    sp.add_argument("--eps", type=_eps_list, required=True, help="comma-separated, strictly decreasing hole sizes")
    sp.add_argument("--capacity-mode", choices=("computed", "lemma1"), default="computed",
                    help="computed capacities or small-ball leading terms (default: %(default)s)")

    sp = sub.add_parser("threshold", help="stabilization margin, decay bound and critical hole size")
    common(sp)
    sp.add_argument("--beta", type=_positive(float), required=True)
    sp.add_argument("--noise", default="zero", help="zero | rational | linear:alpha=A (default: %(default)s)")

    sp = sub.add_parser("simulate", help="Monte Carlo ensemble of the stochastic equation")
    common(sp)
    sp.add_argument("--beta", type=_positive(float), required=True)
    sp.add_argument("--noise", default="zero", help="zero | rational | linear:alpha=A (default: %(default)s)")
    sp.add_argument("--dt", type=_positive(float), default=0.005, help="(default: %(default)s)")
    sp.add_argument("--T", type=_positive(float), default=10.0, help="horizon (default: %(default)s)")
    sp.add_argument("--burn-in", type=float, default=None, help="exponent window start (default: T/5)")
    sp.add_argument("--paths", type=_positive(int), default=16, help="(default: %(default)s)")
    sp.add_argument("--seed", type=int, default=0, help="master seed (default: %(default)s)")
    sp.add_argument("--workers", type=_positive(int), default=1, help="worker processes (default: %(default)s)")
    sp.add_argument("--scheme", choices=("split", "semi_implicit"), default="split", help="(default: %(default)s)")
    sp.add_argument("--u0", choices=("random", "phi1"), default="random", help="initial data (default: %(default)s)")
    sp.add_argument("--u0-norm", type=_positive(float), default=1e-3, help="L2 norm of u0 (default: %(default)s)")
    sp.add_argument("--record-every", type=_positive(int), default=10, help="steps between CSV rows (default: %(default)s)")
    sp.add_argument("--min-hole-ratio", type=float, default=2.0, help="require h < eps / ratio (default: %(default)s)")
    sp.add_argument("--no-paths", action="store_true", help="skip per-path CSV files")
    return p


def _write_json(out: Path, name: str, data: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
    return path


def _load_domain(path):
    from .domain import DomainSpec

    if not Path(path).is_file():
        raise UsageError(f"domain file not found: {path}")
    try:
        return DomainSpec.load(path)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"malformed domain file {path}: {exc}")


def _noise(text):
    from .noise import NoiseModel

    try:
        return NoiseModel.parse(text)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"bad --noise {text!r}: {exc}")


def cmd_eigen(args) -> str:
    from .domain import build_grid
    from .eigen import first_eigenpair, richardson
    from .operator import assemble

    spec = _load_domain(args.domain)
    grid = build_grid(spec, args.resolution)
    res = first_eigenpair(assemble(grid), tol=args.tol)
    data = {
        "lambda1": res.lambda1,
        "residual": res.residual,
        "iterations": res.iterations,
        "resolution": args.resolution,
        "h": grid.h,
        "unknowns": grid.n_active,
        "domain": spec.to_dict(),
    }
    if args.extrapolate:
        fine = first_eigenpair(assemble(build_grid(spec, 2 * args.resolution)), tol=args.tol)
        order = 2 if spec.outer.kind == "box" and not spec.holes else 1
        data["lambda1_fine"] = fine.lambda1
        data["lambda1_extrapolated"] = richardson(res.lambda1, fine.lambda1, order)
        data["richardson_order"] = order
    _write_json(Path(args.out), "eigen.json", data)
    return f"lambda1 = {data.get('lambda1_extrapolated', res.lambda1):.10g}"


def cmd_capacity(args) -> str:
    from .capacity import ball_capacity_asymptotic, capacity

    spec = _load_domain(args.domain)
    if not spec.holes:
        raise UsageError("capacity needs a domain with at least one hole")
    res = capacity(spec, args.resolution, min_hole_ratio=args.min_hole_ratio)
    data = {
        "capacity": res.value,
        "clamped_nodes": res.clamped,
        "iterations": res.iterations,
        "residual": res.residual,
        "resolution": args.resolution,
        "leading_term": sum(ball_capacity_asymptotic(h.eps, spec.dimension) for h in spec.holes),
        "domain": spec.to_dict(),
    }
    _write_json(Path(args.out), "capacity.json", data)
    return f"capacity = {res.value:.10g}"


def cmd_asymptotics(args) -> str:
    from .asymptotics import remainder_study, write_csv

    spec = _load_domain(args.domain)
    if not spec.holes:
        raise UsageError("asymptotics needs a domain with holes (their centres are used)")
    schedule = (lambda eps: args.resolution) if args.resolution else None
    try:
        reports = remainder_study(spec, args.eps, schedule, args.capacity_mode)
    except ValueError as exc:
        if isinstance(exc, PerforatedError):
            raise
        raise UsageError(str(exc))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(reports, out / "expansion.csv")
    ratios = [r.remainder_ratio for r in reports]
    data = {
        "rows": [dict(r.row(), phi1_sq=r.phi1_sq, capacities=r.capacities, resolutions=list(r.resolutions)) for r in reports],
        "remainder_ratio_decreasing": all(b < a for a, b in zip(ratios, ratios[1:])),
        "monotone": all(r.lambda_perforated >= r.lambda_base for r in reports),
        "capacity_mode": args.capacity_mode,
    }
    _write_json(out, "summary.json", data)
    return "remainder ratios " + ", ".join(f"{x:.4g}" for x in ratios)


def cmd_threshold(args) -> str:
    from .stability import threshold

    spec = _load_domain(args.domain)
    rep = threshold(spec, args.beta, _noise(args.noise), args.resolution)
    data = dict(rep.to_dict(), beta=args.beta, noise=args.noise)
    _write_json(Path(args.out), "summary.json", data)
    eps0 = "n/a" if rep.epsilon0 is None else f"{rep.epsilon0:.6g}"
    return f"{rep.verdict}: margin = {rep.margin:.6g}, decay bound = {rep.predicted_exponent:.6g}, eps0 = {eps0}"


def cmd_simulate(args) -> str:
    from .domain import build_grid
    from .operator import assemble
    from .spde import SpdeConfig, ensemble

    spec = _load_domain(args.domain)
    try:
        cfg = SpdeConfig(beta=args.beta, noise=_noise(args.noise), dt=args.dt, T=args.T, burn_in=args.burn_in,
                         u0=args.u0, u0_norm=args.u0_norm, paths=args.paths, seed=args.seed, scheme=args.scheme,
                         record_every=args.record_every)
    except ValueError as exc:
        raise UsageError(str(exc))
    grid = build_grid(spec, args.resolution, args.min_hole_ratio)
    summary = ensemble(grid, assemble(grid), cfg, workers=args.workers)
    summary.write(args.out, cfg, per_path=not args.no_paths)
    return (f"median lyapunov_hat = {summary.median_lyapunov:.6g} (decay bound {summary.decay_bound:.6g}), "
            f"decayed fraction = {summary.decayed_fraction:.3g}")


COMMANDS = {
    "eigen": (cmd_eigen, "eigen"),
    "capacity": (cmd_capacity, "capacity"),
    "asymptotics": (cmd_asymptotics, "asymptotics"),
    "threshold": (cmd_threshold, "stability"),
    "simulate": (cmd_simulate, "spde"),
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    fn, module = COMMANDS[args.command]
    try:
        print(fn(args))
    except UsageError as exc:
        print(f"usage error [{module}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"input error [domain]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        where = exc.module if exc.module != "numerics" else module
        print(f"numerical failure [{where}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PerforatedError as exc:
        print(f"usage error [{exc.module}]: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def main() -> None:
    sys.exit(run())
