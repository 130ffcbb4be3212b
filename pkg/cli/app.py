"""
Command-line front end for robust fair k-center
solve / audit / sweep / uncertainty commands emitting versioned JSON (or CSV for sweeps).
"""

import json
import logging
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import typer
from pydantic import BaseModel
from rich.console import Console
from rich.table import Table

from core.audit import worst_case_violation
from core.centers import CenterPolicy, get_centers
from core.errors import (
    AuditStructureError,
    BoundCollapseError,
    InfeasibleInstanceError,
    InstanceError,
    NoiseSpecError,
    RobustFairError,
)
from core.instance import Instance, ProportionBounds, load_csv, load_groups
from core.lp import build_lp, solve_feasibility
from core.noise import ErrorModelSpec, NoiseParams, auto_bounds, derive, violation_bounds
from core.rounding import build_network
from core.solver import Solution, SolveOptions, robust_solve
from core.sweep import parse_cap_ratios, parse_grid, rows_to_frame, run_sweep
from core.uncertainty import count_two_color, enumerate_uncertainty_set

logger = logging.getLogger(__name__)
console = Console(stderr=True)

app = typer.Typer(help="Robust fair k-center clustering under group-label noise.", add_completion=False)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_USAGE = 64
EXIT_DANGLING = 65


# Result schemas
class BoundsModel(BaseModel):
    lower: List[float]
    upper: List[float]


class SolveResult(BaseModel):
    schema_version: int = SCHEMA_VERSION
    status: str
    radius: Optional[float] = None
    found_radius: Optional[float] = None
    centers: List[int] = []
    assignment: List[int] = []
    num_centers: int = 0
    # written out as 'lambda'
    lam: Optional[float] = None
    bound_2_over_m_out: Optional[float] = None
    bound_per_group: Optional[float] = None
    bounds: Optional[BoundsModel] = None
    noise: Dict[str, Any] = {}
    infeasible_groups: List[int] = []
    timings: Optional[Dict[str, float]] = None


class ClusterTermModel(BaseModel):
    center: int
    group: int
    size: int
    count: int
    lower: float
    upper: float


class AuditResult(BaseModel):
    schema_version: int = SCHEMA_VERSION
    lam: float
    realized_violation: float
    cap_loose: bool
    cost: float
    worst: Optional[List[Any]] = None
    bound_2_over_m_out: Optional[float] = None
    bound_per_group: Optional[float] = None
    per_cluster: List[ClusterTermModel]
    witness: List[int]
    noise: Dict[str, Any] = {}
    timings: Optional[Dict[str, float]] = None


class UncertaintyResult(BaseModel):
    schema_version: int = SCHEMA_VERSION
    mode: str
    count: int
    colorings: Optional[List[List[int]]] = None


def _dump(result: BaseModel) -> str:
    payload = result.model_dump(exclude_none=True)
    if 'lam' in payload:
        payload['lambda'] = payload.pop('lam')
    return json.dumps(payload, indent=2, sort_keys=True) + '\n'


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        typer.echo(text, nl=False)
    else:
        out.write_text(text, encoding='utf-8')
        console.print(f"[green]Wrote[/green] {out}")


def _usage(message: str) -> None:
    console.print(f"[bold red]Usage error:[/bold red] {message}")
    raise typer.Exit(code=EXIT_USAGE)


def _fail(message: str, code: int = EXIT_ERROR) -> None:
    console.print(f"[bold red]Error:[/bold red] {message}")
    raise typer.Exit(code=code)


def _split_features(features: Optional[str]) -> List[str]:
    if not features:
        _usage("--features is required (comma-separated column names)")
    columns = [c.strip() for c in features.split(',') if c.strip()]
    if not columns:
        _usage("--features names no columns")
    return columns


def _require(value, flag: str):
    if value is None:
        _usage(f"{flag} is required")
    return value


def _policy(name: str) -> CenterPolicy:
    try:
        return CenterPolicy(name)
    except ValueError:
        _usage(f"--policy must be lowest-id or random, got '{name}'")


def _spec(model: Optional[str], m: Optional[int], pairwise: Optional[str]) -> Optional[ErrorModelSpec]:
    """Error-model spec from flags; None means zero noise."""
    if model is None:
        if m is not None or pairwise is not None:
            _usage("--m/--M need --model bae|bpe|bape")
        return None
    matrix = None
    if pairwise is not None:
        try:
            matrix = json.loads(pairwise)
        except json.JSONDecodeError as e:
            _usage(f"--M is not valid JSON: {e}")
        if not isinstance(matrix, list) or not all(isinstance(row, list) for row in matrix):
            _usage("--M must be a JSON list of lists of integers")
    payload = {'variant': model, 'm': m, 'M': matrix}
    try:
        return ErrorModelSpec.from_json(json.dumps(payload))
    except NoiseSpecError as e:
        _usage(str(e))


def _noise(spec: Optional[ErrorModelSpec], group_sizes) -> NoiseParams:
    if spec is None:
        return NoiseParams.zero(group_sizes)
    return derive(spec, group_sizes)


def _resolve_bounds(inst: Instance, params: NoiseParams, bounds: Optional[str], slack: float) -> Instance:
    if bounds is None or bounds == "auto":
        return inst.with_bounds(auto_bounds(inst, params, slack))
    try:
        parsed = ProportionBounds.parse(bounds)
    except InstanceError as e:
        _usage(str(e))
    if parsed.group_count != inst.group_count:
        _usage(f"--bounds gives {parsed.group_count} groups, the input has {inst.group_count}")
    return inst.with_bounds(parsed)


def _load(input: Optional[Path], features: Optional[str], group: Optional[str], k: Optional[int],
          normalization: str) -> Instance:
    input = _require(input, "--input")
    columns = _split_features(features)
    group = _require(group, "--group")
    k = _require(k, "--k")
    if k < 1:
        _usage(f"--k must be a positive integer, got {k}")
    if normalization not in ("minmax", "none"):
        _usage(f"--normalization must be minmax or none, got '{normalization}'")
    return load_csv(input, columns, group, k, bounds="auto", normalization=normalization)


def _print_clusters(solution: Solution, inst: Instance) -> None:
    table = Table(title=f"{solution.num_centers} clusters, cost {solution.cost:.6g}")
    table.add_column("center", justify="right")
    table.add_column("size", justify="right")
    for h in range(inst.group_count):
        table.add_column(inst.groups.name(h), justify="right")
    labels = inst.groups.labels
    for center, members in solution.clusters().items():
        counts = [sum(1 for j in members if labels[j] == h) for h in range(inst.group_count)]
        table.add_row(str(center), str(len(members)), *[str(c) for c in counts])
    console.print(table)


@app.callback()
def main_callback(verbose: bool = typer.Option(False, "--verbose", "-v", help="Log pipeline progress")):
    """Robust fair k-center clustering."""
    if verbose:
        logging.getLogger().setLevel(logging.INFO)


@app.command()
def solve(
    input: Optional[Path] = typer.Option(None, "--input", help="Headed UTF-8 CSV file"),
    features: Optional[str] = typer.Option(None, "--features", help="Comma-separated feature columns"),
    group: Optional[str] = typer.Option(None, "--group", help="Group column"),
    k: Optional[int] = typer.Option(None, "--k", help="Maximum number of centers"),
    model: Optional[str] = typer.Option(None, "--model", help="bae | bpe | bape (omit for zero noise)"),
    m: Optional[int] = typer.Option(None, "--m", help="Aggregate error m"),
    pairwise: Optional[str] = typer.Option(None, "--M", help="Pairwise error matrix as JSON"),
    bounds: str = typer.Option("auto", "--bounds", help="auto | l1:u1,l2:u2,..."),
    slack: float = typer.Option(0.0, "--slack", help="Additive slack for auto bounds"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed for the random center policy"),
    policy: str = typer.Option("lowest-id", "--policy", help="lowest-id | random"),
    linear_scan: bool = typer.Option(False, "--linear-scan", help="Try every candidate radius in ascending order"),
    normalization: str = typer.Option("minmax", "--normalization", help="minmax | none"),
    out: Optional[Path] = typer.Option(None, "--out", help="Result JSON path (stdout if omitted)"),
    dump_lp: Optional[Path] = typer.Option(None, "--dump-lp", help="Write the final LP in CPLEX LP format"),
    dump_network: Optional[Path] = typer.Option(None, "--dump-network", help="Write the rounding network as DOT"),
    timings: bool = typer.Option(False, "--timings", help="Include wall-clock timings in the result"),
):
    """Compute a robust fair clustering."""
    if slack < 0:
        _usage(f"--slack must be nonnegative, got {slack}")
    center_policy = _policy(policy)
    spec = _spec(model, m, pairwise)
    clock: Dict[str, float] = {}
    try:
        started = time.perf_counter()
        inst = _load(input, features, group, k, normalization)
        params = _noise(spec, inst.group_sizes)
        summed, per_group = violation_bounds(params)
        try:
            inst = _resolve_bounds(inst, params, bounds, slack)
        except BoundCollapseError as e:
            result = SolveResult(
                status="infeasible",
                noise=params.to_dict(),
                infeasible_groups=[e.group],
                bound_2_over_m_out=summed,
                bound_per_group=per_group,
            )
            _emit(_dump(result), out)
            _fail(str(e), EXIT_INFEASIBLE)
        clock['load'] = time.perf_counter() - started

        bounds_model = BoundsModel(lower=list(inst.bounds.lower), upper=list(inst.bounds.upper))
        options = SolveOptions(policy=center_policy, seed=seed, linear_scan=linear_scan)
        started = time.perf_counter()
        try:
            solution = robust_solve(inst, params, options)
        except InfeasibleInstanceError as e:
            result = SolveResult(
                status="infeasible",
                bounds=bounds_model,
                noise=params.to_dict(),
                infeasible_groups=e.groups,
                bound_2_over_m_out=summed,
                bound_per_group=per_group,
            )
            _emit(_dump(result), out)
            _fail(str(e), EXIT_INFEASIBLE)
        clock['solve'] = time.perf_counter() - started

        started = time.perf_counter()
        report = worst_case_violation(solution, inst, params)
        clock['audit'] = time.perf_counter() - started

        if dump_lp is not None or dump_network is not None:
            centers = get_centers(inst, solution.found_radius, center_policy, seed)
            lp_model = build_lp(inst, params, centers, solution.found_radius)
            if dump_lp is not None:
                dump_lp.write_text(lp_model.to_lp_text(), encoding='utf-8')
            if dump_network is not None:
                frac = solution.fractional_trace or solve_feasibility(lp_model)
                dump_network.write_text(build_network(frac, inst).to_dot(), encoding='utf-8')

        result = SolveResult(
            status="solved",
            radius=solution.cost,
            found_radius=solution.found_radius,
            centers=list(solution.centers),
            assignment=list(solution.assignment),
            num_centers=solution.num_centers,
            lam=report.lam,
            bound_2_over_m_out=summed,
            bound_per_group=per_group,
            bounds=bounds_model,
            noise=params.to_dict(),
            timings=clock if timings else None,
        )
        _emit(_dump(result), out)
        _print_clusters(solution, inst)
    except typer.Exit:
        raise
    except RobustFairError as e:
        logger.error(f"Solve failed: {e}")
        _fail(str(e))


def _read_assignment(path: Path) -> Tuple[List[int], List[int], Optional[ProportionBounds]]:
    try:
        payload = json.loads(path.read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as e:
        _usage(f"cannot read assignment file {path}: {e}")
    if not isinstance(payload, dict) or 'assignment' not in payload:
        _usage(f"assignment file {path} has no 'assignment' list")
    try:
        assignment = [int(c) for c in payload['assignment']]
        centers = [int(c) for c in payload.get('centers') or sorted(set(assignment))]
        stored = payload.get('bounds')
        bounds = ProportionBounds(tuple(stored['lower']), tuple(stored['upper'])) if stored else None
    except (TypeError, ValueError, KeyError, InstanceError) as e:
        logger.error(f"Malformed assignment file {path}: {e}")
        _fail(f"assignment file {path} is malformed: {e}", EXIT_DANGLING)
    return assignment, centers, bounds


@app.command()
def audit(
    input: Optional[Path] = typer.Option(None, "--input", help="Headed UTF-8 CSV file"),
    features: Optional[str] = typer.Option(None, "--features", help="Comma-separated feature columns"),
    group: Optional[str] = typer.Option(None, "--group", help="Group column"),
    assignment: Optional[Path] = typer.Option(None, "--assignment", help="JSON with 'centers' and 'assignment'"),
    model: Optional[str] = typer.Option(None, "--model", help="bae | bpe | bape (omit for zero noise)"),
    m: Optional[int] = typer.Option(None, "--m", help="Aggregate error m"),
    pairwise: Optional[str] = typer.Option(None, "--M", help="Pairwise error matrix as JSON"),
    bounds: Optional[str] = typer.Option(None, "--bounds", help="auto | l1:u1,... (default: bounds stored in the file, else auto)"),
    slack: float = typer.Option(0.0, "--slack", help="Additive slack for auto bounds"),
    normalization: str = typer.Option("minmax", "--normalization", help="minmax | none"),
    out: Optional[Path] = typer.Option(None, "--out", help="Report JSON path (stdout if omitted)"),
    timings: bool = typer.Option(False, "--timings", help="Include wall-clock timings in the report"),
):
    """Audit a clustering's worst-case fairness violation."""
    assignment = _require(assignment, "--assignment")
    spec = _spec(model, m, pairwise)
    points, centers, stored = _read_assignment(assignment)
    clock: Dict[str, float] = {}
    try:
        started = time.perf_counter()
        inst = _load(input, features, group, 1, normalization)
        n = inst.n
        for point, center in enumerate(points):
            if not 0 <= center < n or center not in centers:
                _fail(f"point {point} references dangling center id {center}", EXIT_DANGLING)
        for center in centers:
            if not 0 <= center < n:
                _fail(f"dangling center id {center}", EXIT_DANGLING)
        if len(points) != n:
            _fail(f"assignment covers {len(points)} points but the input has {n}", EXIT_DANGLING)

        params = _noise(spec, inst.group_sizes)
        if bounds is None and stored is not None:
            inst = inst.with_bounds(stored)
        else:
            inst = _resolve_bounds(inst, params, bounds, slack)
        clock['load'] = time.perf_counter() - started

        clustering = Solution(centers=tuple(centers), assignment=tuple(points), found_radius=0.0, cost=0.0)
        started = time.perf_counter()
        report = worst_case_violation(clustering, inst, params)
        clock['audit'] = time.perf_counter() - started
    except typer.Exit:
        raise
    except AuditStructureError as e:
        _fail(str(e), EXIT_DANGLING)
    except RobustFairError as e:
        logger.error(f"Audit failed: {e}")
        _fail(str(e))

    summed, per_group = violation_bounds(params)
    data = report.to_dict()
    result = AuditResult(
        lam=report.lam,
        realized_violation=report.realized_violation,
        cap_loose=report.cap_loose,
        cost=report.cost,
        worst=data['worst'],
        bound_2_over_m_out=summed,
        bound_per_group=per_group,
        per_cluster=[ClusterTermModel(**term) for term in data['per_cluster']],
        witness=data['witness'],
        noise=params.to_dict(),
        timings=clock if timings else None,
    )
    _emit(_dump(result), out)
    console.print(f"lambda = {report.lam:.6g} (witness reaches {report.realized_violation:.6g})")


@app.command()
def sweep(
    input: Optional[Path] = typer.Option(None, "--input", help="Headed UTF-8 CSV file"),
    features: Optional[str] = typer.Option(None, "--features", help="Comma-separated feature columns"),
    group: Optional[str] = typer.Option(None, "--group", help="Group column"),
    k: Optional[int] = typer.Option(None, "--k", help="Maximum number of centers"),
    m_frac: Optional[str] = typer.Option(None, "--m-frac", help="Fraction grid start:stop:steps"),
    slack: float = typer.Option(0.0, "--slack", help="Additive slack for auto bounds"),
    subsample: Optional[int] = typer.Option(None, "--subsample", help="Run on a seeded subsample of this size"),
    subsample_seed: int = typer.Option(0, "--subsample-seed", help="Seed for --subsample"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed for the random center policy"),
    policy: str = typer.Option("lowest-id", "--policy", help="lowest-id | random"),
    workers: Optional[int] = typer.Option(None, "--workers", help="Parallel sweep rows"),
    cap_ratios: Optional[List[str]] = typer.Option(
        None, "--cap-ratios", help="Per-group inflow cap ratios r_1,r_2,...; repeat to compare settings"
    ),
    normalization: str = typer.Option("minmax", "--normalization", help="minmax | none"),
    out: Optional[Path] = typer.Option(None, "--out", help="Result CSV path (stdout if omitted)"),
):
    """Sweep m/n fractions for the robust and deterministic algorithms."""
    m_frac = _require(m_frac, "--m-frac")
    try:
        fractions = parse_grid(m_frac)
    except ValueError as e:
        _usage(str(e))
    if slack < 0:
        _usage(f"--slack must be nonnegative, got {slack}")
    if workers is not None and workers < 1:
        _usage(f"--workers must be positive, got {workers}")
    if subsample is not None and subsample < 1:
        _usage(f"--subsample must be positive, got {subsample}")
    ratio_sets = []
    for text in cap_ratios or []:
        try:
            ratio_sets.append(parse_cap_ratios(text))
        except ValueError as e:
            _usage(str(e))
    options = SolveOptions(policy=_policy(policy), seed=seed)
    try:
        inst = _load(input, features, group, k, normalization)
        if subsample is not None:
            inst = inst.subsample(subsample, subsample_seed)
        for ratios in ratio_sets:
            if len(ratios) != inst.group_count:
                _usage(f"--cap-ratios gives {len(ratios)} ratios, the input has {inst.group_count} groups")
        rows = run_sweep(
            inst, fractions, slack=slack, options=options, workers=workers, cap_ratios=ratio_sets or None
        )
    except typer.Exit:
        raise
    except RobustFairError as e:
        logger.error(f"Sweep failed: {e}")
        _fail(str(e))

    text = rows_to_frame(rows).to_csv(index=False)
    _emit(text, out)
    failed = sum(1 for row in rows if row.status != "ok")
    if failed:
        console.print(f"[yellow]{failed} of {len(rows)} sweep rows failed[/yellow]")


@app.command()
def uncertainty(
    input: Optional[Path] = typer.Option(None, "--input", help="Headed UTF-8 CSV file"),
    group: Optional[str] = typer.Option(None, "--group", help="Group column"),
    mode: str = typer.Option("count", "--mode", help="count (two-color closed form) | enumerate"),
    model: Optional[str] = typer.Option(None, "--model", help="bae | bpe | bape (enumerate mode)"),
    m: Optional[int] = typer.Option(None, "--m", help="Flips per color (count) or aggregate error m"),
    pairwise: Optional[str] = typer.Option(None, "--M", help="Pairwise error matrix as JSON"),
    limit: Optional[int] = typer.Option(None, "--limit", help="Enumeration output cap"),
    out: Optional[Path] = typer.Option(None, "--out", help="Result JSON path (stdout if omitted)"),
):
    """Count or enumerate the uncertainty set of a small input."""
    input = _require(input, "--input")
    group = _require(group, "--group")
    if mode not in ("count", "enumerate"):
        _usage(f"--mode must be count or enumerate, got '{mode}'")
    if mode == "count" and m is None:
        _usage("--mode count needs --m")
    spec = _spec(model, m, pairwise) if mode == "enumerate" else None
    try:
        groups = load_groups(input, group)
        if mode == "count":
            result = UncertaintyResult(mode=mode, count=count_two_color(groups.sizes, m))
        else:
            params = _noise(spec, groups.sizes)
            colorings = enumerate_uncertainty_set(groups, params, limit)
            result = UncertaintyResult(
                mode=mode, count=len(colorings), colorings=[list(c.labels) for c in colorings]
            )
    except RobustFairError as e:
        logger.error(f"Uncertainty command failed: {e}")
        _fail(str(e))
    _emit(_dump(result), out)
