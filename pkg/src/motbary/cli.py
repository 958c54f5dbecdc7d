"""Command-line entry points.

Subcommands: ``barycenter`` (approximate plan + barycenter + report),
``mot`` (plan only), ``oracle`` (exact LP), ``gen`` (instance generators),
``grid`` (weight-grid interpolation) and ``check`` (invariant suite on a
plan file).  Exit codes: 0 success, 2 configuration error, 3 solver
failure, 4 oracle size guard exceeded.  Runs are deterministic given the
configuration and seed.
"""

from __future__ import annotations

import argparse
import itertools
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as mio
from .algorithms import (
    greedy_algorithm,
    randomized_greedy,
    randomized_reference,
    reference_algorithm,
    sparsity_bound,
)
from .analysis import make_report
from .estimators import ALGORITHMS
from .generators import (
    diagonal_plan,
    gen_greedy_worst_case,
    gen_nested_ellipses,
    gen_neither_better,
    gen_random_clouds,
    gen_reference_worst_case,
)
from .measures import SimplexWeights, pushforward_mean, validate_plan
from .oracle import DEFAULT_SIZE_GUARD, OracleSizeError, exact_mot_lp
from .solver import SolverConvergenceError
from .validation import check_measure_list, check_weights

__all__ = ["main", "RunConfig", "run_barycenter", "run_weight_grid"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_GUARD = 4

# Weight-grid vectors are clamped off the simplex boundary; the problem is
# only defined for strictly positive weights.
GRID_CLAMP = 1e-6


@dataclass
class RunConfig:
    """Configuration of one barycenter/MOT run."""

    algorithm: str
    inputs: list
    output_dir: Path
    lambda_spec: str = "uniform"
    seed: int | None = None
    input_format: str | None = None
    output_format: str = "json"
    report_path: Path | None = None
    size_guard: int = DEFAULT_SIZE_GUARD
    use_oracle_in_report: bool = False
    write_barycenter: bool = True
    grid_size: int = 0
    grid_mode: str = "reuse"
    extra: dict = field(default_factory=dict)


def _parse_lambda(spec: str, n: int) -> SimplexWeights:
    if spec == "uniform":
        return SimplexWeights.uniform(n)
    try:
        values = [float(x) for x in spec.split(",")]
    except ValueError:
        raise ValueError(f"cannot parse weights {spec!r}") from None
    return check_weights(values, n)


def _load_inputs(paths, fmt):
    measures = [mio.load_measure(p, fmt) for p in paths]
    return check_measure_list(measures)


def _run_algorithm(config: RunConfig, measures, weights):
    algo = config.algorithm
    if algo == "reference":
        return reference_algorithm(measures, weights)
    if algo == "greedy":
        return greedy_algorithm(measures, weights)
    if algo == "reference-random":
        return randomized_reference(measures, weights, config.seed)
    if algo == "greedy-random":
        return randomized_greedy(measures, config.seed, weights)
    if algo == "oracle":
        plan, _ = exact_mot_lp(measures, weights, config.size_guard)
        return plan
    raise ValueError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")


def run_barycenter(config: RunConfig) -> int:
    """Compute a plan (and barycenter), write artifacts, print a summary."""
    measures = _load_inputs(config.inputs, config.input_format)
    weights = _parse_lambda(config.lambda_spec, len(measures))
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    start = time.perf_counter()
    plan = _run_algorithm(config, measures, weights)
    elapsed = time.perf_counter() - start

    mio.save_plan(plan, out / "plan.json")
    if config.write_barycenter:
        bary = pushforward_mean(plan, weights)
        mio.save_measure(
            bary, out / f"barycenter.{config.output_format}", config.output_format
        )
    report = make_report(
        plan,
        measures,
        weights,
        use_oracle=config.use_oracle_in_report or config.algorithm == "oracle",
        size_guard=config.size_guard,
        algorithm=config.algorithm if config.algorithm in ("reference", "greedy") else None,
    )
    report_path = config.report_path or (out / "report.json")
    mio.save_report(report, report_path)
    print(
        f"phi={report.phi:.12g} ratio_vs_lb={report.ratio_vs_lb:.6g} "
        f"atoms={plan.n_atoms}/{sparsity_bound(measures)} time={elapsed:.3f}s"
    )
    if report.bound_violations:
        for v in report.bound_violations:
            print(f"BOUND VIOLATION: {v}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def grid_weight_vectors(n_measures: int, grid_size: int) -> list[np.ndarray]:
    """Weight vectors of a K x K interpolation grid.

    For four measures this bilinearly interpolates between the four unit
    vectors (corners of the grid).  For other counts a barycentric lattice
    over the simplex is used instead; this is an extension, the bilinear
    layout is only defined for four measures.  Boundary vectors are
    clamped to ``GRID_CLAMP`` per coordinate and renormalized.
    """
    if grid_size < 1:
        raise ValueError("grid size must be positive")
    vectors: list[np.ndarray] = []
    if n_measures == 4:
        ticks = (
            np.linspace(0.0, 1.0, grid_size) if grid_size > 1 else np.array([0.5])
        )
        for s in ticks:
            for t in ticks:
                lam = np.array(
                    [(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t]
                )
                vectors.append(lam)
    else:
        total = grid_size - 1
        if total == 0:
            vectors.append(np.full(n_measures, 1.0 / n_measures))
        else:
            for comp in itertools.product(range(total + 1), repeat=n_measures):
                if sum(comp) == total:
                    vectors.append(np.asarray(comp, dtype=float) / total)
    clamped = []
    for lam in vectors:
        lam = np.maximum(lam, GRID_CLAMP)
        clamped.append(lam / lam.sum())
    return clamped


def _weight_tag(lam: np.ndarray) -> str:
    return "-".join(f"{x:.6f}" for x in lam)


def run_weight_grid(config: RunConfig) -> int:
    """Barycenters for a grid of weight vectors, reusing or re-solving."""
    measures = _load_inputs(config.inputs, config.input_format)
    n = len(measures)
    vectors = grid_weight_vectors(n, config.grid_size)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    fmt = config.output_format

    if config.grid_mode == "reuse":
        plan = greedy_algorithm(measures, SimplexWeights.uniform(n))
        mio.save_plan(plan, out / "plan.json")

        def compute(lam):
            return pushforward_mean(plan, SimplexWeights(lam))

    elif config.grid_mode == "recompute":

        def compute(lam):
            w = SimplexWeights(lam)
            return pushforward_mean(greedy_algorithm(measures, w), w)

    else:
        raise ValueError(f"unknown grid mode {config.grid_mode!r}")

    with ThreadPoolExecutor(max_workers=4) as pool:
        barys = list(pool.map(compute, vectors))
    for lam, bary in zip(vectors, barys):
        mio.save_measure(bary, out / f"barycenter_{_weight_tag(lam)}.{fmt}", fmt)
    print(f"wrote {len(vectors)} barycenters to {out}")
    return EXIT_OK


def run_check(plan_path, measure_paths, fmt=None) -> int:
    """Validate a stored plan against its measures; also checks sparsity."""
    measures = _load_inputs(measure_paths, fmt)
    plan = mio.load_plan(plan_path, measures, validate=False)
    diag = validate_plan(plan)
    bound = sparsity_bound(measures)
    sparse_ok = plan.n_atoms <= bound
    print(
        f"feasible={diag.feasible} max_marginal_error={diag.max_marginal_error:.3e} "
        f"total_mass_error={diag.total_mass_error:.3e} "
        f"duplicates={diag.duplicate_tuples} atoms={plan.n_atoms}/{bound}"
    )
    return EXIT_OK if (diag.feasible and sparse_ok) else 1


def run_gen(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    fmt = args.format if args.format != "image" else "json"
    if args.family == "ellipses":
        measures = gen_nested_ellipses(args.n, args.resolution, args.seed)
        weights = None
    elif args.family == "clouds":
        measures = gen_random_clouds(args.n, args.atoms, args.dim, args.seed)
        weights = None
    elif args.family == "ref-worst":
        measures, weights, competitor = gen_reference_worst_case(
            args.n, args.atoms, args.eps
        )
        mio.save_plan(competitor, out / "competitor_plan.json")
    elif args.family == "greedy-worst":
        measures, weights = gen_greedy_worst_case(args.n, args.atoms)
        mio.save_plan(diagonal_plan(measures), out / "competitor_plan.json")
    elif args.family == "neither":
        ex = gen_neither_better()
        measures = list(ex.ordering_a)
        weights = ex.weights
        mio.save_plan(ex.optimal_plan(ex.ordering_a), out / "optimal_plan.json")
    else:
        raise ValueError(f"unknown family {args.family!r}")
    for i, mu in enumerate(measures):
        mio.save_measure(mu, out / f"measure_{i:03d}.{fmt}", fmt)
    if weights is not None:
        (out / "lambda.txt").write_text(
            ",".join(repr(float(x)) for x in weights.values) + "\n"
        )
    print(f"wrote {len(measures)} measures to {out}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motbary",
        description="Sparse multi-marginal transport plans and W2 barycenters",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, algo_default=None):
        p.add_argument("inputs", nargs="+", help="measure files")
        p.add_argument("-o", "--output-dir", required=True)
        if algo_default is not None:
            p.add_argument("--algo", default=algo_default, choices=ALGORITHMS)
        p.add_argument("--lambda", dest="lambda_spec", default="uniform")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--format", default=None, choices=["json", "csv", "image"])
        p.add_argument("--out-format", default="json", choices=["json", "csv"])
        p.add_argument("--report", default=None, help="report output path")
        p.add_argument("--oracle-guard", type=int, default=DEFAULT_SIZE_GUARD)
        p.add_argument(
            "--oracle",
            action="store_true",
            help="also solve the exact LP for the report ratios",
        )

    p_bary = sub.add_parser("barycenter", help="plan + barycenter + report")
    add_common(p_bary, algo_default="greedy")
    p_mot = sub.add_parser("mot", help="approximate plan only")
    add_common(p_mot, algo_default="greedy")
    p_oracle = sub.add_parser("oracle", help="exact plan by dense LP")
    add_common(p_oracle)

    p_grid = sub.add_parser("grid", help="barycenters over a weight grid")
    add_common(p_grid)
    p_grid.add_argument("--grid-size", type=int, required=True)
    p_grid.add_argument("--mode", default="reuse", choices=["reuse", "recompute"])

    p_gen = sub.add_parser("gen", help="write generated instances")
    p_gen.add_argument(
        "family",
        choices=["ellipses", "clouds", "ref-worst", "greedy-worst", "neither"],
    )
    p_gen.add_argument("-o", "--output-dir", required=True)
    p_gen.add_argument("--n", type=int, default=10, help="number of measures")
    p_gen.add_argument("--atoms", type=int, default=64, help="atoms per measure")
    p_gen.add_argument("--dim", type=int, default=2)
    p_gen.add_argument("--resolution", type=int, default=16)
    p_gen.add_argument("--eps", type=float, default=1e-4)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--format", default="json", choices=["json", "csv"])

    p_check = sub.add_parser("check", help="validate a plan file")
    p_check.add_argument("plan")
    p_check.add_argument("measures", nargs="+")
    p_check.add_argument("--format", default=None, choices=["json", "csv", "image"])
    return parser


def _config_from_args(args, command: str) -> RunConfig:
    return RunConfig(
        algorithm=getattr(args, "algo", "oracle"),
        inputs=list(args.inputs),
        output_dir=Path(args.output_dir),
        lambda_spec=args.lambda_spec,
        seed=args.seed,
        input_format=args.format,
        output_format=args.out_format,
        report_path=Path(args.report) if args.report else None,
        size_guard=args.oracle_guard,
        use_oracle_in_report=args.oracle,
        write_barycenter=command != "mot",
        grid_size=getattr(args, "grid_size", 0),
        grid_mode=getattr(args, "mode", "reuse"),
    )


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        if args.command in ("barycenter", "mot", "oracle"):
            return run_barycenter(_config_from_args(args, args.command))
        if args.command == "grid":
            return run_weight_grid(_config_from_args(args, "grid"))
        if args.command == "gen":
            return run_gen(args)
        if args.command == "check":
            return run_check(args.plan, args.measures, args.format)
        return EXIT_CONFIG
    except OracleSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except SolverConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError, KeyError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
