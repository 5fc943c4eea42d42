"""Command-line surface.

Subcommands: ``lyapunov``, ``solve-are``, ``policy-grad``, ``bench``,
``compare``, ``verify-encoding``, ``scaling``.

Exit codes: 0 success, 2 validation error, 3 numerical failure, 4
budget/iteration exhaustion.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import bench
from .encoding import verify_lyapunov_encoding
from .errors import (
    BudgetError,
    ConvergenceError,
    DimensionError,
    RadiusError,
    StabilityError,
    StepSizeError,
    ValidationError,
    VerificationError,
)
from .lqr import are_residual, newton_kleinman

CONFIG_KEYS = {"family", "g", "n", "estimator", "theta", "sigma", "target_eps", "max_iters", "seed"}

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_BUDGET = 4


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValidationError("config file must hold a JSON object")
    unknown = set(raw) - CONFIG_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)} (allowed: {sorted(CONFIG_KEYS)})")
    return raw


def _build_spec(args) -> bench.BenchmarkSpec:
    cfg = _load_config(args.config)
    merged = {
        "family": args.family if args.family is not None else cfg.get("family", "mass_spring"),
        "g": args.g if args.g is not None else cfg.get("g"),
        "n": args.n if args.n is not None else cfg.get("n"),
        "seed": args.seed if args.seed is not None else cfg.get("seed", 0),
        "estimator": args.estimator if args.estimator is not None else cfg.get("estimator", "robust"),
        "theta": args.theta if args.theta is not None else cfg.get("theta", 0.1),
        "sigma": args.sigma if args.sigma is not None else cfg.get("sigma"),
        "target_eps": cfg.get("target_eps"),
        "max_iters": args.max_iters if args.max_iters is not None else cfg.get("max_iters", 2000),
    }
    if merged["family"] == "mass_spring" and merged["g"] is None:
        merged["g"] = 4
    if merged["family"] == "random_hurwitz" and merged["n"] is None:
        merged["n"] = 8
    merged["estimator"] = merged["estimator"].replace("-", "_")
    return bench.BenchmarkSpec(**merged)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file (unknown keys rejected)")
    sub.add_argument("--seed", type=int, default=None, help="random seed")
    sub.add_argument("--out", default="results", help="output directory")
    sub.add_argument(
        "--estimator", choices=["exact", "robust", "two-point", "two_point"], default=None
    )
    sub.add_argument("--theta", type=float, default=None, help="robustness parameter")
    sub.add_argument("--sigma", type=float, default=None, help="fixed step size (default: auto)")
    sub.add_argument("--eps", type=float, default=None, help="accuracy target of the subcommand")
    sub.add_argument("--max-iters", type=int, default=None, dest="max_iters")
    sub.add_argument("--family", choices=list(bench.FAMILIES), default=None)
    sub.add_argument("--g", type=int, default=None, help="mass-spring size")
    sub.add_argument("--n", type=int, default=None, help="random-plant dimension")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lqrkit",
        description="Policy-gradient LQR synthesis with certified Lyapunov quadrature",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("lyapunov", "solve the benchmark closed-loop Gramian both ways and report residuals"),
        ("solve-are", "solve the Riccati equation by gain iteration"),
        ("policy-grad", "run one policy-gradient descent and write its trace"),
        ("bench", "run the named benchmark end to end and persist the record"),
        ("compare", "robust estimator vs two-point baseline on one benchmark"),
        ("verify-encoding", "verify the encoded-Gramian pipeline over an accuracy ladder"),
        ("scaling", "relative errors of both estimators across mass-spring sizes"),
    ):
        sub = subs.add_parser(name, help=text)
        _add_common(sub)
        if name == "scaling":
            sub.add_argument("--g-list", default="1,2,3,4", dest="g_list", help="comma-separated sizes")
            sub.add_argument("--budget", type=int, default=300, help="iteration budget per run")
    return parser


def _cmd_lyapunov(args) -> int:
    spec = _build_spec(args)
    report = bench.lyapunov_report(spec, eps=args.eps if args.eps else 1e-6)
    for key, value in report.items():
        print(f"{key}: {value}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"lyapunov_{spec.family}.json").write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def _cmd_solve_are(args) -> int:
    spec = _build_spec(args)
    prob = bench.build_problem(spec)
    tol = args.eps if args.eps else 1e-11
    P, K = newton_kleinman(prob, tol=tol)
    residual = are_residual(prob, P)
    print(f"family: {spec.family}  dim: {prob.n}  residual: {residual:.3e}")
    print("K* =")
    print(np.array2string(np.asarray(K.K), precision=10))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {"family": spec.family, "residual": residual, "K_star": np.asarray(K.K).tolist(), "tol": tol}
    (out / f"are_{spec.family}.json").write_text(json.dumps(payload, indent=2) + "\n")
    return EXIT_OK


def _cmd_run(args) -> int:
    spec = _build_spec(args)
    record = bench.run_experiment(spec, Path(args.out))
    for key, value in record.summary.items():
        print(f"{key}: {value}")
    print(f"files: {args.out}/{spec.family}_{spec.estimator}_seed{spec.seed}.{{csv,json}}")
    if record.summary["termination"] == "max_iters":
        print("iteration budget exhausted before reaching the target", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def _cmd_compare(args) -> int:
    spec = _build_spec(args)
    payload = bench.compare_estimators(spec, Path(args.out))
    print(
        f"robust: {payload['robust']['iterations']} iters "
        f"(final gap {payload['robust']['final_f_gap']:.3e})"
    )
    print(
        f"two_point: {payload['two_point']['iterations']} iters "
        f"(final gap {payload['two_point']['final_f_gap']:.3e})"
    )
    for thr, crossing in payload["threshold_crossings"].items():
        print(f"gap <= {float(thr):.0e}: robust @ {crossing['robust']}, two_point @ {crossing['two_point']}")
    return EXIT_OK


def _cmd_verify_encoding(args) -> int:
    spec = _build_spec(args)
    prob = bench.build_problem(spec)
    if prob.n > 16:
        raise ValidationError(f"verification is desk-scale only (n <= 16), got n = {prob.n}")
    from .lqr import initial_gain

    K0 = initial_gain(prob)
    ladder = [args.eps] if args.eps else [1e-2, 1e-3, 1e-4]
    reports = []
    for eps in ladder:
        report = verify_lyapunov_encoding(K0.closed_loop, np.asarray(prob.Sigma0), eps)
        reports.append(report)
        print(
            f"eps={eps:.0e}: pass  error={report.error:.3e}  alpha={report.alpha:.3e}  "
            f"nodes={report.nodes}  modeled_queries={report.modeled_queries}"
        )
    if len(reports) >= 2:
        logs_q = np.log10([r.modeled_queries for r in reports])
        logs_e = np.log10([r.eps for r in reports])
        slope = float(np.polyfit(logs_e, logs_q, 1)[0])
        print(f"modeled-query slope vs eps: {slope:.3f} (prediction -0.5)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify_encoding.json").write_text(
        json.dumps([dataclasses.asdict(r) for r in reports], indent=2) + "\n"
    )
    return EXIT_OK


def _cmd_scaling(args) -> int:
    sizes = tuple(int(part) for part in args.g_list.split(","))
    out_path = Path(args.out) / "scaling.csv"
    rows = bench.scaling_experiment(
        sizes,
        out_path,
        iteration_budget=args.budget,
        seed=args.seed if args.seed is not None else 0,
        theta=args.theta if args.theta is not None else 0.1,
    )
    print(bench.SCALING_HEADER)
    for row in rows:
        print(
            f"{row['g']},{row['dim']},{row['estimator']},{row['iters']},"
            f"{row['evals']},{row['f_gap']:.6e},{row['rel_f_gap']:.6e}"
        )
    print(f"wrote {out_path}")
    return EXIT_OK


_COMMANDS = {
    "lyapunov": _cmd_lyapunov,
    "solve-are": _cmd_solve_are,
    "policy-grad": _cmd_run,
    "bench": _cmd_run,
    "compare": _cmd_compare,
    "verify-encoding": _cmd_verify_encoding,
    "scaling": _cmd_scaling,
}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, DimensionError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (StabilityError, ConvergenceError, VerificationError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (BudgetError, StepSizeError, RadiusError) as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
