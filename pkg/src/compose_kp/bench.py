"""Benchmark harness: run composers on tasks, score, compare.

A bench task pairs a task spec with the capability tags an episode
can demand and an episode count.  Scoring simulates episodes: each
episode draws one required capability uniformly at random, and it
succeeds if any selected, operable component holding that capability
passes its reliability draw (components are tried in id order until
one succeeds).  Success rates are exact fractions of the episode
count.

Rows are produced per (task, composer config) with the composer's
spend, selection size, trial count, and success rate; per task the
Pareto front over (success rate, budget spent) is reported, where a
row is on the front unless some other row is at least as successful
and at most as expensive with one of the two strict.  Ties stay on
the front.  Comparisons are exact, never floating point.

Wall-clock time is measured per row but kept out of the serialized
reports so that identical seeds produce byte-identical artifacts.
"""

from __future__ import annotations

import csv
import json
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .composers import (
    IDENTITY,
    OFFLINE_KNAPSACK,
    ONLINE_KNAPSACK,
    RETRIEVAL,
    CompositionResult,
    compose_identity,
    compose_offline,
    compose_online,
    compose_retrieval,
    pick_zcl_bounds,
)
from .inventory import Inventory, LatentProfile
from .rationals import rational_to_jsonable
from .sandbox import AuditLog, SimulatedJudge, SimulatedSandbox
from .seeding import derive_seed, derived_rng
from .similarity import build_index
from .skills import KeywordSkillGenerator, TaskSpec, generate_skills, task_from_jsonable


@dataclass(frozen=True)
class BenchTask:
    task: TaskSpec
    required_capabilities: tuple[str, ...]
    num_episodes: int

    def __post_init__(self) -> None:
        if not self.required_capabilities:
            raise ValueError(f"bench task {self.task.name!r} requires at least one capability")
        if self.num_episodes < 1:
            raise ValueError(f"num_episodes must be positive, got {self.num_episodes}")


@dataclass(frozen=True)
class ComposerConfig:
    name: str
    budget: Optional[Fraction] = None
    k: int = 10
    queries_per_skill: int = 2
    epsilon: Fraction = Fraction(1, 16)
    threshold_exponent: str = "fraction_used"

    def __post_init__(self) -> None:
        if self.name not in (IDENTITY, RETRIEVAL, OFFLINE_KNAPSACK, ONLINE_KNAPSACK):
            raise ValueError(f"unknown composer {self.name!r}")
        if self.name in (OFFLINE_KNAPSACK, ONLINE_KNAPSACK) and self.budget is None:
            raise ValueError(f"composer {self.name!r} requires a budget")

    @property
    def label(self) -> str:
        if self.budget is None:
            return self.name
        return f"{self.name}@{rational_to_jsonable(self.budget)}"


@dataclass
class BenchRow:
    task_name: str
    composer_name: str
    label: str
    budget_given: Optional[Fraction]
    success_rate: Fraction
    num_components: int
    budget_spent: Fraction
    trial_count: int
    wall_time: float
    on_front: bool = False
    error: Optional[str] = None


@dataclass(frozen=True)
class BenchReport:
    rows: tuple[BenchRow, ...]
    pareto_front: tuple[str, ...]
    seed: int


def synthesize_task(name: str, capabilities: Sequence[str], budget: Optional[Fraction] = None) -> TaskSpec:
    """A task description whose bullets name the given capabilities.

    Wording is chosen so the keyword decomposition recovers exactly
    these capabilities as skills.
    """
    if not capabilities:
        raise ValueError("synthesize_task needs at least one capability")
    bullets = tuple(
        f"The assistant must handle {tag.replace('_', ' ')} requests."
        for tag in capabilities
    )
    return TaskSpec(name=name, description=bullets, budget=budget)


def simulate_success(
    selected: Sequence[str],
    ground_truth: Mapping[str, LatentProfile],
    bench_task: BenchTask,
    seed: int,
) -> Fraction:
    """Exact success rate of a selection over seeded episodes."""
    for cid in selected:
        if cid not in ground_truth:
            raise ValueError(f"selected component {cid!r} has no ground truth")
    providers: dict[str, list[tuple[str, LatentProfile]]] = {}
    for tag in bench_task.required_capabilities:
        providers[tag] = [
            (cid, ground_truth[cid])
            for cid in sorted(set(selected))
            if ground_truth[cid].operable and tag in ground_truth[cid].capabilities
        ]
    rng = derived_rng("episodes", seed, bench_task.task.name)
    tags = bench_task.required_capabilities
    successes = 0
    for _ in range(bench_task.num_episodes):
        tag = tags[rng.randrange(len(tags))]
        for _cid, profile in providers[tag]:
            if rng.random() < profile.reliability:
                successes += 1
                break
    return Fraction(successes, bench_task.num_episodes)


def pareto_indices(points: Sequence[tuple[Fraction, Fraction]]) -> list[int]:
    """Indices of non-dominated (success, spent) points, ascending.

    Point j dominates i when success_j >= success_i and
    spent_j <= spent_i with at least one strict; exact ties dominate
    nothing, so duplicates are all kept on the front.
    """
    front = []
    for i, (success_i, spent_i) in enumerate(points):
        dominated = False
        for j, (success_j, spent_j) in enumerate(points):
            if i == j:
                continue
            if (
                success_j >= success_i
                and spent_j <= spent_i
                and (success_j > success_i or spent_j < spent_i)
            ):
                dominated = True
                break
        if not dominated:
            front.append(i)
    return front


def pareto_front(rows: Sequence[BenchRow]) -> list[str]:
    """Labels of non-dominated rows; error rows never make the front."""
    usable = [row for row in rows if row.error is None]
    points = [(row.success_rate, row.budget_spent) for row in usable]
    return [usable[i].label for i in pareto_indices(points)]


def _compose_for_config(
    config: ComposerConfig,
    inventory: Inventory,
    ground_truth: Mapping[str, LatentProfile],
    task: TaskSpec,
    index,
    capability_pool: Sequence[str],
    seed: int,
    audit: Optional[AuditLog],
) -> CompositionResult:
    if config.name == IDENTITY:
        return compose_identity(inventory)
    skills = generate_skills(
        task,
        config.queries_per_skill,
        KeywordSkillGenerator(capability_pool),
        seed=derive_seed("skills", seed, task.name),
    )
    if config.name == RETRIEVAL:
        return compose_retrieval(inventory, skills, index)
    if config.name == OFFLINE_KNAPSACK:
        assert config.budget is not None
        return compose_offline(inventory, skills, index, config.budget, k=config.k)
    assert config.budget is not None
    zcl = pick_zcl_bounds(inventory, config.queries_per_skill, epsilon=config.epsilon)
    return compose_online(
        inventory,
        skills,
        index,
        config.budget,
        config.k,
        zcl,
        SimulatedSandbox(ground_truth),
        SimulatedJudge(),
        derive_seed("compose", seed, task.name, config.label),
        threshold_exponent=config.threshold_exponent,
        audit=audit,
    )


def run_bench(
    inventory: Inventory,
    ground_truth: Mapping[str, LatentProfile],
    tasks: Sequence[BenchTask],
    configs: Sequence[ComposerConfig],
    seed: int,
    *,
    capability_pool: Sequence[str] | None = None,
    jobs: int = 1,
    audit: Optional[AuditLog] = None,
) -> BenchReport:
    """Run every (task, config) cell and assemble a report.

    Episode seeds are shared across configs of the same task so
    composers are compared on identical episode streams.  A failing
    cell becomes a row with its ``error`` set; other rows proceed.
    Rows keep (task, config) order regardless of ``jobs``.
    """
    if not tasks:
        raise ValueError("run_bench requires at least one task")
    if not configs:
        raise ValueError("run_bench requires at least one composer config")
    if jobs < 1:
        raise ValueError(f"jobs must be positive, got {jobs}")
    pool = tuple(capability_pool) if capability_pool is not None else _pool_from_truth(ground_truth)
    index = build_index(inventory)

    def cell(bench_task: BenchTask, config: ComposerConfig) -> BenchRow:
        start = time.perf_counter()
        try:
            result = _compose_for_config(
                config, inventory, ground_truth, bench_task.task, index, pool, seed, audit,
            )
            success = simulate_success(result.selected, ground_truth, bench_task, seed)
            return BenchRow(
                task_name=bench_task.task.name,
                composer_name=config.name,
                label=config.label,
                budget_given=result.budget_given,
                success_rate=success,
                num_components=len(result.selected),
                budget_spent=result.budget_spent,
                trial_count=len(result.trial_log),
                wall_time=time.perf_counter() - start,
            )
        except (ValueError, KeyError) as exc:
            return BenchRow(
                task_name=bench_task.task.name,
                composer_name=config.name,
                label=config.label,
                budget_given=config.budget,
                success_rate=Fraction(0),
                num_components=0,
                budget_spent=Fraction(0),
                trial_count=0,
                wall_time=time.perf_counter() - start,
                error=f"{type(exc).__name__}: {exc}",
            )

    cells = [(t, c) for t in tasks for c in configs]
    if jobs == 1:
        rows = [cell(t, c) for t, c in cells]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            rows = list(executor.map(lambda tc: cell(*tc), cells))

    front_labels: list[str] = []
    for bench_task in tasks:
        task_rows = [row for row in rows if row.task_name == bench_task.task.name]
        labels = set(pareto_front(task_rows))
        for row in task_rows:
            row.on_front = row.label in labels and row.error is None
        if len(tasks) == 1:
            front_labels.extend(sorted(labels))
        else:
            front_labels.extend(f"{bench_task.task.name}:{label}" for label in sorted(labels))
    return BenchReport(rows=tuple(rows), pareto_front=tuple(front_labels), seed=seed)


def _pool_from_truth(ground_truth: Mapping[str, LatentProfile]) -> tuple[str, ...]:
    tags: set[str] = set()
    for profile in ground_truth.values():
        tags.update(profile.capabilities)
    if not tags:
        raise ValueError("ground truth exposes no capabilities; supply a capability pool")
    return tuple(sorted(tags))


def row_to_jsonable(row: BenchRow, *, include_timing: bool = False) -> dict:
    data = {
        "task": row.task_name,
        "composer": row.composer_name,
        "label": row.label,
        "budget_given": None if row.budget_given is None else rational_to_jsonable(row.budget_given),
        "success_rate": rational_to_jsonable(row.success_rate),
        "success_rate_float": float(row.success_rate),
        "num_components": row.num_components,
        "budget_spent": rational_to_jsonable(row.budget_spent),
        "trial_count": row.trial_count,
        "on_pareto_front": row.on_front,
        "error": row.error,
    }
    if include_timing:
        data["wall_time"] = row.wall_time
    return data


def report_to_jsonable(report: BenchReport, *, include_timing: bool = False) -> dict:
    return {
        "seed": report.seed,
        "rows": [row_to_jsonable(r, include_timing=include_timing) for r in report.rows],
        "pareto_front": list(report.pareto_front),
    }


def write_report_json(report: BenchReport, path: str | Path, *, include_timing: bool = False) -> None:
    payload = json.dumps(report_to_jsonable(report, include_timing=include_timing),
                         indent=2, ensure_ascii=False) + "\n"
    Path(path).write_text(payload, encoding="utf-8")


_CSV_COLUMNS = (
    "task", "composer", "label", "budget_given", "success_rate",
    "num_components", "budget_spent", "trial_count", "on_pareto_front", "error",
)


def write_report_csv(report: BenchReport, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(_CSV_COLUMNS)
        for row in report.rows:
            writer.writerow([
                row.task_name,
                row.composer_name,
                row.label,
                "" if row.budget_given is None else str(row.budget_given),
                repr(float(row.success_rate)),
                row.num_components,
                str(row.budget_spent),
                row.trial_count,
                "yes" if row.on_front else "no",
                row.error or "",
            ])


def write_plot_data(report: BenchReport, path: str | Path) -> None:
    """(spent, success) pairs per row, for external plotting."""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(("task", "label", "budget_spent", "success_rate"))
        for row in report.rows:
            if row.error is not None:
                continue
            writer.writerow((
                row.task_name, row.label,
                repr(float(row.budget_spent)), repr(float(row.success_rate)),
            ))


@dataclass(frozen=True)
class AggregateRow:
    task_name: str
    composer_name: str
    label: str
    budget_given: Optional[Fraction]
    success_mean: float
    success_std: float
    spent_mean: float
    spent_std: float
    components_mean: float
    trials_mean: float
    num_seeds: int
    num_errors: int
    on_front: bool = False


def aggregate_reports(reports: Sequence[BenchReport]) -> list[AggregateRow]:
    """Mean and stddev across per-seed reports, keyed by (task, label)."""
    if not reports:
        raise ValueError("nothing to aggregate")
    grouped: dict[tuple[str, str], list[BenchRow]] = {}
    order: list[tuple[str, str]] = []
    for report in reports:
        for row in report.rows:
            key = (row.task_name, row.label)
            if key not in grouped:
                grouped[key] = []
                order.append(key)
            grouped[key].append(row)

    def spread(values: list[float]) -> float:
        return statistics.stdev(values) if len(values) >= 2 else 0.0

    aggregated: list[AggregateRow] = []
    for key in order:
        rows = grouped[key]
        usable = [r for r in rows if r.error is None]
        errors = len(rows) - len(usable)
        if not usable:
            sample = rows[0]
            aggregated.append(AggregateRow(
                task_name=sample.task_name, composer_name=sample.composer_name,
                label=sample.label, budget_given=sample.budget_given,
                success_mean=0.0, success_std=0.0, spent_mean=0.0, spent_std=0.0,
                components_mean=0.0, trials_mean=0.0,
                num_seeds=len(rows), num_errors=errors,
            ))
            continue
        success = [float(r.success_rate) for r in usable]
        spent = [float(r.budget_spent) for r in usable]
        aggregated.append(AggregateRow(
            task_name=usable[0].task_name,
            composer_name=usable[0].composer_name,
            label=usable[0].label,
            budget_given=usable[0].budget_given,
            success_mean=statistics.fmean(success),
            success_std=spread(success),
            spent_mean=statistics.fmean(spent),
            spent_std=spread(spent),
            components_mean=statistics.fmean([r.num_components for r in usable]),
            trials_mean=statistics.fmean([r.trial_count for r in usable]),
            num_seeds=len(rows),
            num_errors=errors,
        ))

    by_task: dict[str, list[int]] = {}
    for idx, agg in enumerate(aggregated):
        if agg.num_errors == agg.num_seeds:
            continue  # an all-error config never reaches the front
        by_task.setdefault(agg.task_name, []).append(idx)
    marked = list(aggregated)
    for indices in by_task.values():
        points = [
            (Fraction(repr(aggregated[i].success_mean)), Fraction(repr(aggregated[i].spent_mean)))
            for i in indices
        ]
        for local_rank in pareto_indices(points):
            i = indices[local_rank]
            marked[i] = replace(aggregated[i], on_front=True)
    return marked


def write_aggregate_csv(rows: Sequence[AggregateRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow((
            "task", "composer", "label", "budget_given",
            "success_mean", "success_std", "spent_mean", "spent_std",
            "components_mean", "trials_mean", "num_seeds", "num_errors",
            "on_pareto_front",
        ))
        for row in rows:
            writer.writerow((
                row.task_name, row.composer_name, row.label,
                "" if row.budget_given is None else str(row.budget_given),
                repr(row.success_mean), repr(row.success_std),
                repr(row.spent_mean), repr(row.spent_std),
                repr(row.components_mean), repr(row.trials_mean),
                row.num_seeds, row.num_errors,
                "yes" if row.on_front else "no",
            ))


def write_aggregate_json(rows: Sequence[AggregateRow], path: str | Path) -> None:
    payload = [
        {
            "task": row.task_name,
            "composer": row.composer_name,
            "label": row.label,
            "budget_given": None if row.budget_given is None else rational_to_jsonable(row.budget_given),
            "success_mean": row.success_mean,
            "success_std": row.success_std,
            "spent_mean": row.spent_mean,
            "spent_std": row.spent_std,
            "components_mean": row.components_mean,
            "trials_mean": row.trials_mean,
            "num_seeds": row.num_seeds,
            "num_errors": row.num_errors,
            "on_pareto_front": row.on_front,
        }
        for row in rows
    ]
    Path(path).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def load_bench_tasks(path: str | Path) -> list[BenchTask]:
    """Read bench tasks; accepts one object or ``{"tasks": [...]}``."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(raw, dict) and "tasks" in raw:
        entries = raw["tasks"]
    elif isinstance(raw, list):
        entries = raw
    else:
        entries = [raw]
    if not isinstance(entries, list) or not entries:
        raise ValueError(f"{path}: expected one bench task or a non-empty list under 'tasks'")
    tasks: list[BenchTask] = []
    for i, entry in enumerate(entries):
        where = f"tasks[{i}]"
        if not isinstance(entry, dict):
            raise ValueError(f"{where}: expected a JSON object")
        task = task_from_jsonable(entry.get("task"), where=f"{where}.task")
        caps = entry.get("required_capabilities")
        if not isinstance(caps, list) or not caps or not all(isinstance(c, str) for c in caps):
            raise ValueError(f"{where}.required_capabilities: expected a non-empty array of strings")
        episodes = entry.get("num_episodes")
        if not isinstance(episodes, int) or isinstance(episodes, bool) or episodes < 1:
            raise ValueError(f"{where}.num_episodes: expected a positive integer")
        tasks.append(BenchTask(task=task, required_capabilities=tuple(caps), num_episodes=episodes))
    return tasks
