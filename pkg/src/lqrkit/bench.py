"""Benchmark problems, experiment drivers, and result persistence.

Problem families:

* ``mass_spring``: chain of ``g`` unit masses with springs and dampers; the
  stiffness pattern has 2 on the diagonal and -1 on the first off-diagonals.
  State is positions stacked over velocities (``n = 2 g``), one actuator per
  mass, ``Q = I + 100 e1 e1'`` and ``R = I + 4 e2 e2'``.
* ``aircraft``: pitch-angle control with state (pitch, pitch rate) and
  elevator input, ``A = [[0, 1], [0, -0.5]]``, ``B = [0, 1]'``,
  ``Q = diag(10, 1)``, ``R = [0.1]``.
* ``scalar``: the 1-D problem ``a = -1, b = q = r = 1`` whose optimum is
  ``K* = sqrt(2) - 1``.
* ``random_hurwitz``: seeded stable plant with ``m = max(1, n // 2)`` inputs.

Experiment drivers emit one CSV row per iteration with the fixed header
``iter,f,f_gap,grad_norm,gain_err,evals`` (floats at 17 significant digits;
wall-clock timings live only in the JSON summary, so CSV bytes are
reproducible per seed) plus a JSON summary with the fitted rate and the
optimal-gain residual.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy

from .descent import IterationTrace, OptimizerConfig, fit_linear_rate, policy_gradient_descent
from .errors import StepSizeError, ValidationError
from .lqr import ProblemInstance, are_residual, gain, initial_gain, newton_kleinman, objective, problem
from .lyapunov import solve_lyapunov_direct, solve_lyapunov_quadrature

__all__ = [
    "BenchmarkSpec",
    "RunRecord",
    "FAMILIES",
    "CSV_HEADER",
    "make_mass_spring",
    "make_aircraft",
    "make_scalar",
    "make_random_hurwitz",
    "build_problem",
    "run_experiment",
    "compare_estimators",
    "scaling_experiment",
    "write_iteration_csv",
    "read_iteration_csv",
]

FAMILIES = ("mass_spring", "aircraft", "random_hurwitz", "scalar")

CSV_HEADER = "iter,f,f_gap,grad_norm,gain_err,evals"

SCALING_HEADER = "g,dim,estimator,iters,evals,f_gap,rel_f_gap"

#: Objective-gap threshold that counts as "converged" for benchmark runs.
CONVERGENCE_FGAP = 1e-6

#: Hard iteration cap for two-point baseline runs.
TWO_POINT_ITER_CAP = 100_000


@dataclass(frozen=True)
class BenchmarkSpec:
    """One benchmark configuration; hashable snapshot of all settings."""

    family: str
    g: int | None = None
    n: int | None = None
    seed: int = 0
    estimator: str = "robust"
    theta: float = 0.1
    sigma: float | None = None
    target_eps: float | None = None
    max_iters: int = 2000

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.family == "mass_spring" and (self.g is None or self.g < 1):
            raise ValidationError("mass_spring needs g >= 1")
        if self.family == "random_hurwitz" and (self.n is None or self.n < 2):
            raise ValidationError("random_hurwitz needs n >= 2")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def content_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class RunRecord:
    """Snapshot of one experiment: spec, trace summary, timings, versions."""

    spec: dict
    summary: dict
    wall_ms: float
    versions: dict
    config_hash: str


def make_mass_spring(g: int) -> ProblemInstance:
    """Mass-spring-damper chain with ``g`` masses (state dimension ``2 g``).

    For ``g = 1`` the input space is one-dimensional, so the rank-one control
    penalty bump (which targets the second actuator) is dropped.
    """
    if g < 1:
        raise ValidationError(f"g must be >= 1, got {g}")
    T = 2.0 * np.eye(g) - np.eye(g, k=1) - np.eye(g, k=-1)
    A = np.block([[np.zeros((g, g)), np.eye(g)], [-T, -T]])
    B = np.vstack([np.zeros((g, g)), np.eye(g)])
    Q = np.eye(2 * g)
    Q[0, 0] += 100.0
    R = np.eye(g)
    if g >= 2:
        R[1, 1] += 4.0
    return problem(A, B, Q, R)


def make_aircraft() -> ProblemInstance:
    """Pitch-angle control model (2 states, 1 input).

    The dynamics matrix is read untransposed as ``[[0, 1], [0, -0.5]]``: the
    transposed variant pairs with ``B = [0, 1]'`` to give a rank-one
    controllability matrix, which contradicts the model's premise.
    """
    A = np.array([[0.0, 1.0], [0.0, -0.5]])
    B = np.array([[0.0], [1.0]])
    return problem(A, B, np.diag([10.0, 1.0]), [[0.1]])


def make_scalar() -> ProblemInstance:
    """1-D problem with optimum ``K* = sqrt(2) - 1``."""
    return problem([[-1.0]], [[1.0]], [[1.0]], [[1.0]])


def make_random_hurwitz(n: int, seed: int = 0) -> ProblemInstance:
    """Seeded random stable plant with ``m = max(1, n // 2)`` inputs."""
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, n)) / math.sqrt(n)
    shift = float(np.max(np.linalg.eigvals(G).real)) + 0.5
    A = G - shift * np.eye(n)
    B = rng.standard_normal((n, max(1, n // 2)))
    return problem(A, B, np.eye(n), np.eye(max(1, n // 2)))


def build_problem(spec: BenchmarkSpec) -> ProblemInstance:
    if spec.family == "mass_spring":
        return make_mass_spring(spec.g)
    if spec.family == "aircraft":
        return make_aircraft()
    if spec.family == "scalar":
        return make_scalar()
    return make_random_hurwitz(spec.n, spec.seed)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_iteration_csv(path: Path, trace: IterationTrace) -> None:
    """Write the per-iteration CSV (fixed header, 17 significant digits)."""
    K_final = gain(trace.prob, trace.final_K)
    if not K_final.stabilizing:
        raise ValidationError("refusing to record a non-stabilizing final gain")
    lines = [CSV_HEADER]
    for i in range(len(trace)):
        lines.append(
            ",".join(
                (
                    str(int(trace.iterations[i])),
                    _fmt(trace.f[i]),
                    _fmt(trace.f_gap[i]),
                    _fmt(trace.grad_norm[i]),
                    _fmt(trace.gain_err[i]),
                    str(int(trace.evals[i])),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_iteration_csv(path: Path) -> dict[str, np.ndarray]:
    """Parse an iteration CSV back into column arrays."""
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0] != CSV_HEADER:
        raise ValidationError(f"unexpected CSV header in {path}: {text[0] if text else '<empty>'!r}")
    cols = {name: [] for name in CSV_HEADER.split(",")}
    for line in text[1:]:
        parts = line.split(",")
        if len(parts) != 6:
            raise ValidationError(f"malformed CSV row in {path}: {line!r}")
        for name, value in zip(cols, parts):
            cols[name].append(float(value))
    out = {name: np.asarray(vals) for name, vals in cols.items()}
    out["iter"] = out["iter"].astype(int)
    out["evals"] = out["evals"].astype(int)
    return out


def _derive_target_eps(prob: ProblemInstance, f0: float, fgap_target: float) -> float:
    """Gain-error radius certifying an objective gap below ``fgap_target``.

    Uses the gap identity ``f(K) - f* = trace((K - K*)' R (K - K*) X(K))``
    with the sublevel-set trace bound ``lambda_max(X) <= f0 / lambda_min(Q)``.
    """
    lmax_R = float(np.linalg.eigvalsh(prob.R)[-1])
    lmin_Q = float(np.linalg.eigvalsh(prob.Q)[0])
    return math.sqrt(fgap_target * lmin_Q / (lmax_R * f0))


def _optimizer_config(spec: BenchmarkSpec, prob: ProblemInstance, f0: float, max_iters=None) -> OptimizerConfig:
    target = spec.target_eps
    if target is None:
        target = _derive_target_eps(prob, f0, CONVERGENCE_FGAP)
    return OptimizerConfig(
        sigma=spec.sigma,
        theta=spec.theta,
        max_iters=max_iters if max_iters is not None else spec.max_iters,
        target_eps=target,
        estimator=spec.estimator,
        seed=spec.seed,
    )


def _run_with_retries(prob: ProblemInstance, K0, cfg: OptimizerConfig, retries: int = 3) -> IterationTrace:
    for _ in range(retries):
        try:
            return policy_gradient_descent(prob, K0, cfg)
        except StepSizeError as exc:
            if cfg.sigma is None:
                cfg = dataclasses.replace(cfg, sigma=exc.suggested_sigma)
            else:
                cfg = dataclasses.replace(cfg, sigma=cfg.sigma / 2.0)
    return policy_gradient_descent(prob, K0, cfg)


def _versions() -> dict:
    return {"lqrkit": "0.1.0", "numpy": np.__version__, "scipy": scipy.__version__}


def _summarize(trace: IterationTrace, prob: ProblemInstance) -> dict:
    try:
        rate, r_squared = fit_linear_rate(trace)
    except ValidationError:
        rate, r_squared = math.nan, math.nan
    Pstar, _ = newton_kleinman(prob, tol=1e-11)
    return {
        "termination": trace.termination,
        "iterations": int(len(trace)),
        "final_f": float(trace.f[-1]),
        "final_f_gap": float(trace.f_gap[-1]),
        "final_gain_err": float(trace.gain_err[-1]),
        "fitted_rate": rate,
        "r_squared": r_squared,
        "sigma": trace.sigma,
        "evaluations": int(trace.evals.sum()),
        "kstar_residual": are_residual(prob, Pstar),
    }


def run_experiment(spec: BenchmarkSpec, out_dir: Path) -> RunRecord:
    """Run one benchmark and persist ``<stem>.csv`` and ``<stem>.json``.

    The CSV bytes depend only on the spec and seed; wall-clock milliseconds
    appear only in the JSON summary.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prob = build_problem(spec)
    K0 = initial_gain(prob)
    f0 = objective(prob, K0)
    start = time.perf_counter()
    trace = _run_with_retries(prob, K0, _optimizer_config(spec, prob, f0))
    wall_ms = (time.perf_counter() - start) * 1e3

    stem = f"{spec.family}_{spec.estimator}_seed{spec.seed}"
    write_iteration_csv(out_dir / f"{stem}.csv", trace)
    record = RunRecord(
        spec=spec.to_dict(),
        summary=_summarize(trace, prob),
        wall_ms=wall_ms,
        versions=_versions(),
        config_hash=spec.content_hash(),
    )
    (out_dir / f"{stem}.json").write_text(_record_json(record))
    return record


def _record_json(record: RunRecord) -> str:
    payload = {
        "spec": record.spec,
        "summary": record.summary,
        "wall_ms": record.wall_ms,
        "versions": record.versions,
        "config_hash": record.config_hash,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def first_crossing(f_gap: np.ndarray, threshold: float) -> int | None:
    """First iteration index whose gap is at or below ``threshold``."""
    hits = np.nonzero(f_gap <= threshold)[0]
    return int(hits[0]) if hits.size else None


def compare_estimators(
    spec: BenchmarkSpec,
    out_dir: Path,
    baseline_factor: int = 10,
    thresholds: tuple[float, ...] = (1e-2, 1e-4, CONVERGENCE_FGAP),
) -> dict:
    """Run the robust estimator against the two-point baseline.

    The robust run goes first; the baseline then receives
    ``baseline_factor`` times the robust iteration count (capped) so the
    comparison record shows how far it gets on the same problem.  Writes both
    CSVs plus a combined JSON summary with per-threshold crossing iterations.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prob = build_problem(spec)
    K0 = initial_gain(prob)
    f0 = objective(prob, K0)

    start = time.perf_counter()
    robust_spec = dataclasses.replace(spec, estimator="robust")
    robust = _run_with_retries(prob, K0, _optimizer_config(robust_spec, prob, f0))
    budget = min(TWO_POINT_ITER_CAP, baseline_factor * max(1, len(robust)))
    tp_spec = dataclasses.replace(spec, estimator="two_point")
    two_point = _run_with_retries(prob, K0, _optimizer_config(tp_spec, prob, f0, max_iters=budget))
    wall_ms = (time.perf_counter() - start) * 1e3

    stem = f"{spec.family}_compare_seed{spec.seed}"
    write_iteration_csv(out_dir / f"{stem}_robust.csv", robust)
    write_iteration_csv(out_dir / f"{stem}_two_point.csv", two_point)
    crossings = {
        _fmt(thr): {
            "robust": first_crossing(robust.f_gap, thr),
            "two_point": first_crossing(two_point.f_gap, thr),
        }
        for thr in thresholds
    }
    payload = {
        "spec": spec.to_dict(),
        "robust": _summarize(robust, prob),
        "two_point": _summarize(two_point, prob),
        "threshold_crossings": crossings,
        "baseline_iteration_budget": budget,
        "wall_ms": wall_ms,
        "wall_ms_note": "relative cost of the two runs; absolute values are hardware-bound",
        "versions": _versions(),
        "config_hash": spec.content_hash(),
    }
    (out_dir / f"{stem}.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return payload


def scaling_experiment(
    g_list: tuple[int, ...],
    out_path: Path,
    iteration_budget: int = 300,
    seed: int = 0,
    theta: float = 0.1,
) -> list[dict]:
    """Relative objective errors of both estimators across system sizes.

    Every mass-spring size in ``g_list`` is run with the robust estimator and
    the two-point baseline for the same fixed iteration budget; rows of
    ``g,dim,estimator,iters,evals,f_gap,rel_f_gap`` are written to
    ``out_path``.
    """
    if any(g < 1 for g in g_list):
        raise ValidationError("scaling sizes must be >= 1")
    rows = []
    lines = [SCALING_HEADER]
    for g in g_list:
        prob = make_mass_spring(g)
        K0 = initial_gain(prob)
        f0 = objective(prob, K0)
        Pstar, _ = newton_kleinman(prob, tol=1e-11)
        f_star = float(np.trace(Pstar @ prob.Sigma0))
        for estimator in ("robust", "two_point"):
            cfg = OptimizerConfig(
                sigma=None,
                theta=theta,
                max_iters=iteration_budget,
                target_eps=1e-12,
                estimator=estimator,
                seed=seed,
            )
            trace = _run_with_retries(prob, K0, cfg)
            f_gap = float(trace.f[-1] - f_star)
            row = {
                "g": g,
                "dim": 2 * g,
                "estimator": estimator,
                "iters": int(len(trace)),
                "evals": int(trace.evals.sum()),
                "f_gap": f_gap,
                "rel_f_gap": f_gap / f_star,
            }
            rows.append(row)
            lines.append(
                f"{g},{2 * g},{estimator},{row['iters']},{row['evals']},"
                f"{_fmt(row['f_gap'])},{_fmt(row['rel_f_gap'])}"
            )
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    Path(out_path).write_text("\n".join(lines) + "\n")
    return rows


def lyapunov_report(spec: BenchmarkSpec, eps: float = 1e-6) -> dict:
    """Solve the benchmark's initial closed-loop Gramian both ways."""
    prob = build_problem(spec)
    K0 = initial_gain(prob)
    A_cl = K0.closed_loop
    direct = solve_lyapunov_direct(A_cl, prob.Sigma0)
    quad = solve_lyapunov_quadrature(A_cl, prob.Sigma0, eps)
    return {
        "family": spec.family,
        "dim": prob.n,
        "direct_residual": direct.residual_norm,
        "quadrature_residual": quad.residual_norm,
        "agreement": float(np.linalg.norm(quad.X - direct.X)),
        "eps": eps,
        "tau": quad.tau,
        "nodes": quad.nodes,
    }
