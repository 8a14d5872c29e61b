"""Command-line entry points.

Exit codes: 0 success, 1 internal error, 2 infeasible composition
(skills left uncovered), 64 usage error.  Setting the environment
variable ``COMPOSE_KP_LOG`` to a file path appends one JSON line per
sandbox trial run by ``compose`` or ``bench``.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import bench as bench_mod
from . import composers as composers_mod
from .inventory import (
    ComponentKind,
    DEFAULT_CAPABILITY_POOL,
    SchemaError,
    generate_inventory,
    ground_truth_of,
    load_ground_truth,
    load_inventory,
    save_ground_truth,
    save_inventory,
)
from .rationals import to_rational
from .sandbox import AuditLog, SimulatedJudge, SimulatedSandbox
from .seeding import derive_seed
from .similarity import build_index
from .skills import KeywordSkillGenerator, SkillGenerationError, generate_skills, load_task

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: error: {message}")


def _rational(text: str) -> Fraction:
    try:
        return to_rational(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _tag_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> _Parser:
    parser = _Parser(prog="compose-kp", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    gen = sub.add_parser("gen-inventory", help="generate a synthetic component inventory",
                         prog="compose-kp gen-inventory")
    gen.add_argument("--size", type=int, required=True, help="total number of components")
    gen.add_argument("--distractors", type=int, default=0, help="how many are distractors")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--pool", type=_tag_list, default=None,
                     help="comma-separated capability tags (default: built-in pool)")
    gen.add_argument("--kind", choices=[k.value for k in ComponentKind], default=ComponentKind.TOOL.value)
    gen.add_argument("--uniform-cost", type=_rational, default=None,
                     help="price every component at this cost instead of drawing a tier")
    gen.add_argument("--distractor-targets", type=_tag_list, default=None,
                     help="comma-separated tags the distractors should shadow")
    gen.add_argument("--out", required=True, help="inventory JSON path")
    gen.add_argument("--truth-out", required=True, help="ground-truth sidecar JSON path")

    comp = sub.add_parser("compose", help="run one composer over an inventory",
                          prog="compose-kp compose")
    comp.add_argument("--inventory", required=True)
    comp.add_argument("--ground-truth", default=None,
                      help="latent-profile sidecar; required for the online composer")
    comp.add_argument("--task", default=None, help="task JSON; required except for identity")
    comp.add_argument("--composer", required=True, choices=list(composers_mod.COMPOSER_NAMES))
    comp.add_argument("--budget", type=_rational, default=None)
    comp.add_argument("--k", type=int, default=10, help="shortlist size per skill")
    comp.add_argument("--queries-per-skill", type=int, default=2)
    comp.add_argument("--epsilon", type=_rational, default=Fraction(1, 16),
                      help="ratio-bracket width: L = epsilon * U")
    comp.add_argument("--threshold-exponent",
                      choices=[composers_mod.THRESHOLD_FRACTION_USED,
                               composers_mod.THRESHOLD_REMAINING_BUDGET],
                      default=composers_mod.THRESHOLD_FRACTION_USED)
    comp.add_argument("--seed", type=int, required=True)
    comp.add_argument("--out", default=None, help="write the full composition result JSON here")

    ben = sub.add_parser("bench", help="run the composer benchmark matrix",
                         prog="compose-kp bench")
    ben.add_argument("--inventory", required=True)
    ben.add_argument("--ground-truth", required=True)
    ben.add_argument("--tasks", required=True, help="bench task JSON file")
    ben.add_argument("--composers", type=_tag_list,
                     default=list(composers_mod.COMPOSER_NAMES),
                     help="comma-separated composer names")
    ben.add_argument("--budgets", type=_tag_list, default=["10", "30"],
                     help="comma-separated budgets applied to each knapsack composer")
    ben.add_argument("--k", type=int, default=10)
    ben.add_argument("--queries-per-skill", type=int, default=2)
    ben.add_argument("--epsilon", type=_rational, default=Fraction(1, 16))
    ben.add_argument("--seed", type=int, required=True)
    ben.add_argument("--seeds", type=int, default=1,
                     help="number of consecutive seeds to run and aggregate")
    ben.add_argument("--jobs", type=int, default=1)
    ben.add_argument("--out-prefix", required=True,
                     help="writes <prefix>.json and <prefix>.csv (plus aggregates for --seeds > 1)")
    ben.add_argument("--plot-data", action="store_true",
                     help="also write <prefix>_plot.csv with (spent, success) pairs")
    return parser


def _audit_from_env() -> Optional[AuditLog]:
    path = os.environ.get("COMPOSE_KP_LOG")
    return AuditLog(path) if path else None


def _cmd_gen_inventory(args: argparse.Namespace, parser: _Parser) -> int:
    if args.size <= 0:
        parser.error("--size must be a positive integer")
    if args.distractors < 0:
        parser.error("--distractors must be non-negative")
    inventory = generate_inventory(
        args.size,
        args.distractors,
        args.pool,
        args.seed,
        cost_override=args.uniform_cost,
        kind=ComponentKind(args.kind),
        distractor_targets=args.distractor_targets,
    )
    save_inventory(inventory, args.out)
    save_ground_truth(ground_truth_of(inventory), args.truth_out)
    print(f"wrote {len(inventory)} components to {args.out} "
          f"({args.distractors} distractors; ground truth in {args.truth_out})")
    return EXIT_OK


def _cmd_compose(args: argparse.Namespace, parser: _Parser) -> int:
    inventory = load_inventory(args.inventory)
    name = args.composer
    needs_budget = name in (composers_mod.OFFLINE_KNAPSACK, composers_mod.ONLINE_KNAPSACK)
    needs_task = name != composers_mod.IDENTITY

    task = None
    if args.task is not None:
        task = load_task(args.task)
    elif needs_task:
        parser.error(f"--task is required for the {name} composer")

    budget = args.budget
    if budget is None and task is not None and task.budget is not None:
        budget = task.budget
    if needs_budget and budget is None:
        parser.error(f"--budget is required for the {name} composer")
    if name == composers_mod.IDENTITY and args.budget is not None:
        print("warning: identity composer ignores --budget", file=sys.stderr)

    if name == composers_mod.IDENTITY:
        result = composers_mod.compose_identity(inventory)
    else:
        assert task is not None
        pool = inventory.metadata.get("capability_pool")
        if not isinstance(pool, list) or not pool:
            pool = list(DEFAULT_CAPABILITY_POOL)
        skills = generate_skills(
            task,
            args.queries_per_skill,
            KeywordSkillGenerator(pool),
            seed=derive_seed("skills", args.seed, task.name),
        )
        index = build_index(inventory)
        if name == composers_mod.RETRIEVAL:
            result = composers_mod.compose_retrieval(inventory, skills, index)
        elif name == composers_mod.OFFLINE_KNAPSACK:
            result = composers_mod.compose_offline(inventory, skills, index, budget, k=args.k)
        else:
            if args.ground_truth is None:
                parser.error("--ground-truth is required for the online composer")
            truth = load_ground_truth(args.ground_truth)
            zcl = composers_mod.pick_zcl_bounds(inventory, args.queries_per_skill, epsilon=args.epsilon)
            result = composers_mod.compose_online(
                inventory, skills, index, budget, args.k, zcl,
                SimulatedSandbox(truth), SimulatedJudge(),
                derive_seed("compose", args.seed, task.name, name),
                threshold_exponent=args.threshold_exponent,
                audit=_audit_from_env(),
            )

    if args.out:
        Path(args.out).write_text(composers_mod.result_to_json(result), encoding="utf-8")

    counts: dict[str, int] = {}
    for decision in result.decisions:
        counts[decision.action.value] = counts.get(decision.action.value, 0) + 1
    print(f"composer: {result.composer_name}")
    print(f"selected ({len(result.selected)}): {' '.join(result.selected) or '-'}")
    print(f"budget spent: {result.budget_spent}"
          + (f" of {result.budget_given}" if result.budget_given is not None else ""))
    if counts:
        print("decisions: " + ", ".join(f"{key}={counts[key]}" for key in sorted(counts)))
    if result.trial_log:
        print(f"trials run: {len(result.trial_log)}")
    if result.uncovered_skills:
        print(f"uncovered skills: {', '.join(result.uncovered_skills)}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace, parser: _Parser) -> int:
    if not args.composers:
        parser.error("--composers must name at least one composer")
    for name in args.composers:
        if name not in composers_mod.COMPOSER_NAMES:
            parser.error(f"unknown composer {name!r}")
    if args.seeds < 1:
        parser.error("--seeds must be a positive integer")
    budgets = [to_rational(b) for b in args.budgets]
    if not budgets:
        parser.error("--budgets must name at least one budget")

    inventory = load_inventory(args.inventory)
    truth = load_ground_truth(args.ground_truth)
    tasks = bench_mod.load_bench_tasks(args.tasks)

    configs: list[bench_mod.ComposerConfig] = []
    for name in args.composers:
        if name in (composers_mod.OFFLINE_KNAPSACK, composers_mod.ONLINE_KNAPSACK):
            for budget in budgets:
                configs.append(bench_mod.ComposerConfig(
                    name=name, budget=budget, k=args.k,
                    queries_per_skill=args.queries_per_skill, epsilon=args.epsilon,
                ))
        else:
            configs.append(bench_mod.ComposerConfig(
                name=name, k=args.k, queries_per_skill=args.queries_per_skill,
                epsilon=args.epsilon,
            ))

    pool = inventory.metadata.get("capability_pool")
    pool_arg = tuple(pool) if isinstance(pool, list) and pool else None
    audit = _audit_from_env()

    reports = []
    for offset in range(args.seeds):
        reports.append(bench_mod.run_bench(
            inventory, truth, tasks, configs, args.seed + offset,
            capability_pool=pool_arg, jobs=args.jobs, audit=audit,
        ))

    prefix = Path(args.out_prefix)
    primary = reports[0]
    json_path = prefix.parent / f"{prefix.name}.json"
    csv_path = prefix.parent / f"{prefix.name}.csv"
    bench_mod.write_report_json(primary, json_path)
    bench_mod.write_report_csv(primary, csv_path)
    written = [str(json_path), str(csv_path)]
    if args.plot_data:
        plot_path = prefix.parent / f"{prefix.name}_plot.csv"
        bench_mod.write_plot_data(primary, plot_path)
        written.append(str(plot_path))
    if args.seeds > 1:
        aggregated = bench_mod.aggregate_reports(reports)
        agg_csv = prefix.parent / f"{prefix.name}_aggregate.csv"
        agg_json = prefix.parent / f"{prefix.name}_aggregate.json"
        bench_mod.write_aggregate_csv(aggregated, agg_csv)
        bench_mod.write_aggregate_json(aggregated, agg_json)
        written.extend([str(agg_csv), str(agg_json)])

    failures = [row for report in reports for row in report.rows if row.error is not None]
    total_rows = sum(len(report.rows) for report in reports)
    for row in failures:
        print(f"row failed: task={row.task_name} composer={row.label}: {row.error}", file=sys.stderr)
    print(f"ran {total_rows} rows over {args.seeds} seed(s); wrote " + ", ".join(written))
    print("pareto front (seed {}): {}".format(primary.seed, ", ".join(primary.pareto_front) or "-"))
    if failures and len(failures) == total_rows:
        return EXIT_ERROR
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.error("a command is required (gen-inventory, compose, bench)")
        if args.command == "gen-inventory":
            return _cmd_gen_inventory(args, parser)
        if args.command == "compose":
            return _cmd_compose(args, parser)
        return _cmd_bench(args, parser)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, SkillGenerationError) as exc:
        print(f"compose-kp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, KeyError, OSError) as exc:
        print(f"compose-kp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
