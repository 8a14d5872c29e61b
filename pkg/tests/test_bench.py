"""Benchmark harness: episode simulation, Pareto fronts, reports."""

import csv
import json
from fractions import Fraction
from pathlib import Path

import pytest

from compose_kp.bench import (
    AggregateRow,
    BenchReport,
    BenchRow,
    BenchTask,
    ComposerConfig,
    aggregate_reports,
    load_bench_tasks,
    pareto_front,
    pareto_indices,
    report_to_jsonable,
    run_bench,
    simulate_success,
    synthesize_task,
    write_aggregate_csv,
    write_aggregate_json,
    write_plot_data,
    write_report_csv,
    write_report_json,
)
from compose_kp.inventory import (
    DEFAULT_CAPABILITY_POOL,
    LatentProfile,
    generate_inventory,
    ground_truth_of,
)
from compose_kp.seeding import derived_rng
from compose_kp.skills import KeywordSkillGenerator, TaskSpec, generate_skills


def profile(caps, reliability=1, operable=True):
    return LatentProfile(capabilities=frozenset(caps),
                         reliability=Fraction(reliability), operable=operable)


def bench_task(name="t", caps=("tag_a",), episodes=50, bullets=None):
    task = TaskSpec(name=name, description=bullets or ("placeholder bullet",))
    return BenchTask(task=task, required_capabilities=tuple(caps), num_episodes=episodes)


class TestModels:
    def test_bench_task_validation(self):
        with pytest.raises(ValueError, match="at least one capability"):
            bench_task(caps=())
        with pytest.raises(ValueError, match="num_episodes"):
            bench_task(episodes=0)

    def test_config_validation(self):
        with pytest.raises(ValueError, match="unknown composer"):
            ComposerConfig(name="magic")
        with pytest.raises(ValueError, match="requires a budget"):
            ComposerConfig(name="offline-knapsack")
        with pytest.raises(ValueError, match="requires a budget"):
            ComposerConfig(name="online-knapsack")

    def test_labels(self):
        assert ComposerConfig(name="identity").label == "identity"
        assert ComposerConfig(name="offline-knapsack", budget=Fraction(10)).label == "offline-knapsack@10"
        assert ComposerConfig(name="online-knapsack", budget=Fraction(21, 2)).label == "online-knapsack@21/2"


class TestSynthesizeTask:
    def test_keyword_decomposition_recovers_capabilities(self):
        caps = ("flight_booking", "hotel_booking", "weather_forecast")
        task = synthesize_task("trip", caps)
        skills = generate_skills(task, 2, KeywordSkillGenerator(
            caps + ("car_rental", "web_search")))
        assert {s.name for s in skills} == set(caps)

    def test_needs_capabilities(self):
        with pytest.raises(ValueError, match="at least one capability"):
            synthesize_task("t", ())


class TestSimulateSuccess:
    TRUTH = {
        "a": profile(("tag_a",), Fraction(1, 2)),
        "b": profile(("tag_a", "tag_b")),
        "c": profile(("tag_b",), Fraction(3, 4)),
        "dead": profile(("tag_a",), Fraction(1), operable=False),
    }

    def test_full_cover_full_reliability_is_one(self):
        task = bench_task(caps=("tag_a", "tag_b"))
        assert simulate_success(["b"], self.TRUTH, task, seed=0) == 1

    def test_empty_selection_is_zero(self):
        task = bench_task(caps=("tag_a",))
        assert simulate_success([], self.TRUTH, task, seed=0) == 0

    def test_broken_component_never_provides(self):
        task = bench_task(caps=("tag_a",))
        assert simulate_success(["dead"], self.TRUTH, task, seed=0) == 0

    def test_unknown_id_raises(self):
        task = bench_task(caps=("tag_a",))
        with pytest.raises(ValueError, match="no ground truth"):
            simulate_success(["ghost"], self.TRUTH, task, seed=0)

    def test_exact_replay_of_episode_stream(self):
        task = bench_task(name="replay", caps=("tag_a", "tag_b"), episodes=120)
        selected = ["c", "a", "c"]  # order and duplicates must not matter
        for seed in range(5):
            rate = simulate_success(selected, self.TRUTH, task, seed)
            providers = {
                tag: [(cid, self.TRUTH[cid]) for cid in sorted(set(selected))
                      if self.TRUTH[cid].operable and tag in self.TRUTH[cid].capabilities]
                for tag in task.required_capabilities
            }
            rng = derived_rng("episodes", seed, task.task.name)
            hits = 0
            for _ in range(task.num_episodes):
                tag = task.required_capabilities[rng.randrange(2)]
                for _cid, prof in providers[tag]:
                    if rng.random() < prof.reliability:
                        hits += 1
                        break
            assert rate == Fraction(hits, task.num_episodes)

    def test_rate_concentrates_on_reliability(self):
        truth = {"p": profile(("tag_a",), Fraction(4, 5))}
        task = bench_task(name="conc", caps=("tag_a",), episodes=10000)
        rate = simulate_success(["p"], truth, task, seed=3)
        assert abs(rate - Fraction(4, 5)) <= Fraction(2, 100)

    def test_same_seed_same_rate(self):
        task = bench_task(caps=("tag_a", "tag_b"), episodes=200)
        first = simulate_success(["a", "c"], self.TRUTH, task, seed=9)
        second = simulate_success(["a", "c"], self.TRUTH, task, seed=9)
        assert first == second


class TestPareto:
    def test_single_point_is_front(self):
        assert pareto_indices([(Fraction(1, 2), Fraction(3))]) == [0]

    def test_dominated_point_drops(self):
        points = [(Fraction(1, 2), Fraction(3)), (Fraction(3, 4), Fraction(3))]
        assert pareto_indices(points) == [1]

    def test_cheaper_at_equal_success_dominates(self):
        points = [(Fraction(1, 2), Fraction(5)), (Fraction(1, 2), Fraction(3))]
        assert pareto_indices(points) == [1]

    def test_exact_ties_all_stay(self):
        points = [(Fraction(1, 2), Fraction(3))] * 3
        assert pareto_indices(points) == [0, 1, 2]

    def test_incomparable_points_all_stay(self):
        points = [(Fraction(1, 4), Fraction(1)), (Fraction(1, 2), Fraction(5)),
                  (Fraction(1), Fraction(9))]
        assert pareto_indices(points) == [0, 1, 2]

    def test_error_rows_never_reach_front(self):
        def row(label, succ, spent, error=None):
            return BenchRow(task_name="t", composer_name="identity", label=label,
                            budget_given=None, success_rate=Fraction(succ),
                            num_components=0, budget_spent=Fraction(spent),
                            trial_count=0, wall_time=0.0, error=error)

        rows = [row("ok", Fraction(1, 2), 3),
                row("boom", Fraction(1), 0, error="ValueError: x")]
        assert pareto_front(rows) == ["ok"]


CONFIGS = (
    ComposerConfig(name="identity"),
    ComposerConfig(name="retrieval"),
    ComposerConfig(name="offline-knapsack", budget=Fraction(10)),
    ComposerConfig(name="online-knapsack", budget=Fraction(10)),
)


@pytest.fixture(scope="module")
def small_bench():
    inventory = generate_inventory(30, 3, seed=5)
    truth = ground_truth_of(inventory)
    task = BenchTask(
        task=synthesize_task("pair", ("web_search", "fact_lookup")),
        required_capabilities=("web_search", "fact_lookup"),
        num_episodes=100,
    )
    report = run_bench(inventory, truth, (task,), CONFIGS, seed=2)
    return inventory, truth, task, report


class TestRunBench:
    def test_rows_follow_task_config_order(self, small_bench):
        _, _, _, report = small_bench
        assert [r.label for r in report.rows] == [c.label for c in CONFIGS]
        assert all(r.task_name == "pair" for r in report.rows)

    def test_rows_are_usable(self, small_bench):
        _, _, _, report = small_bench
        assert all(r.error is None for r in report.rows)
        for row in report.rows:
            assert 0 <= row.success_rate <= 1
            assert row.budget_spent >= 0
            assert row.num_components >= 0

    def test_identity_spends_most(self, small_bench):
        _, _, _, report = small_bench
        by_label = {r.label: r for r in report.rows}
        identity = by_label["identity"]
        assert identity.num_components == 30
        assert all(identity.budget_spent >= r.budget_spent for r in report.rows)

    def test_budgeted_rows_respect_budget(self, small_bench):
        _, _, _, report = small_bench
        for row in report.rows:
            if row.budget_given is not None:
                assert row.budget_spent <= row.budget_given

    def test_front_flags_match_front_list(self, small_bench):
        _, _, _, report = small_bench
        front = {r.label for r in report.rows if r.on_front}
        assert front == set(report.pareto_front)
        assert front == set(pareto_front(report.rows))

    def test_only_online_runs_trials(self, small_bench):
        _, _, _, report = small_bench
        for row in report.rows:
            if row.composer_name == "online-knapsack":
                assert row.trial_count > 0
            else:
                assert row.trial_count == 0

    def test_jobs_do_not_change_the_report(self, small_bench):
        inventory, truth, task, report = small_bench
        threaded = run_bench(inventory, truth, (task,), CONFIGS, seed=2, jobs=3)
        assert report_to_jsonable(threaded) == report_to_jsonable(report)

    def test_shared_episode_stream_pairs_configs(self, small_bench):
        inventory, truth, task, _ = small_bench
        twins = (ComposerConfig(name="offline-knapsack", budget=Fraction(10)),
                 ComposerConfig(name="offline-knapsack", budget=Fraction(21, 2)))
        report = run_bench(inventory, truth, (task,), twins, seed=4)
        first, second = report.rows
        if first.num_components == second.num_components:
            assert first.success_rate == second.success_rate

    def test_failing_cell_becomes_error_row(self, small_bench):
        inventory, truth, _, _ = small_bench
        vague = BenchTask(
            task=TaskSpec(name="vague", description=("Nothing relevant is mentioned.",)),
            required_capabilities=("web_search",),
            num_episodes=10,
        )
        report = run_bench(
            inventory, truth, (vague,),
            (ComposerConfig(name="identity"), ComposerConfig(name="retrieval")),
            seed=0)
        identity_row, retrieval_row = report.rows
        assert identity_row.error is None
        assert retrieval_row.error is not None
        assert "SkillGenerationError" in retrieval_row.error
        assert not retrieval_row.on_front
        assert report.pareto_front == ("identity",)

    def test_multiple_tasks_qualify_front_labels(self, small_bench):
        inventory, truth, task, _ = small_bench
        other = BenchTask(
            task=synthesize_task("solo", ("web_search",)),
            required_capabilities=("web_search",),
            num_episodes=50,
        )
        report = run_bench(inventory, truth, (task, other),
                           (ComposerConfig(name="retrieval"),), seed=1)
        assert [r.task_name for r in report.rows] == ["pair", "solo"]
        assert all(":" in label for label in report.pareto_front)
        assert {label.split(":", 1)[0] for label in report.pareto_front} == {"pair", "solo"}

    def test_validation(self, small_bench):
        inventory, truth, task, _ = small_bench
        with pytest.raises(ValueError, match="at least one task"):
            run_bench(inventory, truth, (), CONFIGS, seed=0)
        with pytest.raises(ValueError, match="at least one composer"):
            run_bench(inventory, truth, (task,), (), seed=0)
        with pytest.raises(ValueError, match="jobs"):
            run_bench(inventory, truth, (task,), CONFIGS, seed=0, jobs=0)


class TestReportWriters:
    def test_json_omits_wall_time_and_is_deterministic(self, small_bench, tmp_path):
        _, _, _, report = small_bench
        js = report_to_jsonable(report)
        assert all("wall_time" not in row for row in js["rows"])
        assert "wall_time" in report_to_jsonable(report, include_timing=True)["rows"][0]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        write_report_json(report, a)
        write_report_json(report, b)
        assert a.read_bytes() == b.read_bytes()
        parsed = json.loads(a.read_text(encoding="utf-8"))
        assert parsed["seed"] == 2
        assert len(parsed["rows"]) == len(CONFIGS)

    def test_csv_shape(self, small_bench, tmp_path):
        _, _, _, report = small_bench
        path = tmp_path / "report.csv"
        write_report_csv(report, path)
        with path.open(encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["task", "composer", "label", "budget_given", "success_rate",
                           "num_components", "budget_spent", "trial_count",
                           "on_pareto_front", "error"]
        assert len(rows) == 1 + len(CONFIGS)
        assert {row[8] for row in rows[1:]} <= {"yes", "no"}

    def test_plot_data_skips_error_rows(self, small_bench, tmp_path):
        _, _, _, report = small_bench
        rows = list(report.rows)
        rows.append(BenchRow(task_name="pair", composer_name="retrieval", label="boom",
                             budget_given=None, success_rate=Fraction(0),
                             num_components=0, budget_spent=Fraction(0),
                             trial_count=0, wall_time=0.0, error="ValueError: x"))
        broken_report = BenchReport(rows=tuple(rows), pareto_front=report.pareto_front, seed=2)
        path = tmp_path / "plot.csv"
        write_plot_data(broken_report, path)
        with path.open(encoding="utf-8", newline="") as handle:
            parsed = list(csv.reader(handle))
        assert parsed[0] == ["task", "label", "budget_spent", "success_rate"]
        assert len(parsed) == 1 + len(CONFIGS)
        assert all(row[1] != "boom" for row in parsed[1:])


def agg_row(label, succ, spent, task="t", error=None):
    return BenchRow(task_name=task, composer_name="identity", label=label,
                    budget_given=None, success_rate=Fraction(succ),
                    num_components=1, budget_spent=Fraction(spent),
                    trial_count=0, wall_time=0.1, error=error)


class TestAggregate:
    def make_reports(self):
        return [
            BenchReport(rows=(agg_row("a", Fraction(1, 2), 4),
                              agg_row("b", Fraction(3, 4), 8)), pareto_front=(), seed=0),
            BenchReport(rows=(agg_row("a", Fraction(1), 4),
                              agg_row("b", Fraction(1, 4), 8)), pareto_front=(), seed=1),
        ]

    def test_means_and_spread(self):
        agg = aggregate_reports(self.make_reports())
        by_label = {a.label: a for a in agg}
        assert by_label["a"].success_mean == pytest.approx(0.75)
        assert by_label["a"].success_std == pytest.approx(0.35355339059327373)
        assert by_label["a"].spent_mean == pytest.approx(4.0)
        assert by_label["a"].spent_std == 0.0
        assert by_label["a"].num_seeds == 2
        assert by_label["a"].num_errors == 0

    def test_front_on_mean_points(self):
        agg = aggregate_reports(self.make_reports())
        by_label = {a.label: a for a in agg}
        # a averages (0.75, 4) and b (0.5, 8): a dominates b
        assert by_label["a"].on_front
        assert not by_label["b"].on_front

    def test_single_report_has_zero_std(self):
        agg = aggregate_reports(self.make_reports()[:1])
        assert all(a.success_std == 0.0 and a.num_seeds == 1 for a in agg)

    def test_all_error_group_reports_zeros_off_front(self):
        reports = [BenchReport(rows=(agg_row("bad", Fraction(1), 0, error="ValueError: x"),
                                     agg_row("ok", Fraction(1, 2), 3)),
                   pareto_front=(), seed=0)]
        agg = aggregate_reports(reports)
        by_label = {a.label: a for a in agg}
        bad = by_label["bad"]
        assert (bad.success_mean, bad.spent_mean) == (0.0, 0.0)
        assert bad.num_errors == 1 and bad.num_seeds == 1
        assert not bad.on_front
        assert by_label["ok"].on_front

    def test_partial_errors_use_usable_rows_only(self):
        reports = [
            BenchReport(rows=(agg_row("a", Fraction(1, 2), 4),), pareto_front=(), seed=0),
            BenchReport(rows=(agg_row("a", Fraction(1), 0, error="ValueError: x"),),
                        pareto_front=(), seed=1),
        ]
        (agg,) = aggregate_reports(reports)
        assert agg.success_mean == pytest.approx(0.5)
        assert agg.num_seeds == 2 and agg.num_errors == 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="nothing to aggregate"):
            aggregate_reports([])

    def test_writers(self, tmp_path):
        agg = aggregate_reports(self.make_reports())
        csv_path, json_path = tmp_path / "agg.csv", tmp_path / "agg.json"
        write_aggregate_csv(agg, csv_path)
        write_aggregate_json(agg, json_path)
        with csv_path.open(encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
        assert len(rows) == 3
        assert rows[0][0] == "task"
        parsed = json.loads(json_path.read_text(encoding="utf-8"))
        assert [entry["label"] for entry in parsed] == ["a", "b"]
        assert parsed[0]["on_pareto_front"] is True


class TestLoadBenchTasks:
    def write(self, tmp_path, payload):
        path = tmp_path / "tasks.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        return path

    def entry(self, name="t1"):
        return {
            "task": {"name": name, "description": ["do a thing"], "budget": None},
            "required_capabilities": ["web_search"],
            "num_episodes": 40,
        }

    def test_wrapped_list(self, tmp_path):
        tasks = load_bench_tasks(self.write(
            tmp_path, {"tasks": [self.entry("t1"), self.entry("t2")]}))
        assert [t.task.name for t in tasks] == ["t1", "t2"]
        assert tasks[0].num_episodes == 40
        assert tasks[0].required_capabilities == ("web_search",)

    def test_bare_list_and_single_object(self, tmp_path):
        assert len(load_bench_tasks(self.write(tmp_path, [self.entry()]))) == 1
        assert len(load_bench_tasks(self.write(tmp_path, self.entry()))) == 1

    def test_error_paths_name_the_field(self, tmp_path):
        bad = self.entry()
        bad["num_episodes"] = 0
        with pytest.raises(ValueError, match=r"tasks\[0\].num_episodes"):
            load_bench_tasks(self.write(tmp_path, [bad]))
        bad = self.entry()
        bad["required_capabilities"] = []
        with pytest.raises(ValueError, match=r"tasks\[0\].required_capabilities"):
            load_bench_tasks(self.write(tmp_path, [bad]))
        bad = self.entry()
        del bad["task"]
        with pytest.raises(ValueError, match=r"tasks\[0\].task"):
            load_bench_tasks(self.write(tmp_path, [bad]))

    def test_empty_list_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="non-empty"):
            load_bench_tasks(self.write(tmp_path, {"tasks": []}))


class TestTaskFixtures:
    """Shipped task files must decompose to exactly their declared capabilities."""

    FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tasks"

    def fixture_paths(self):
        paths = sorted(self.FIXTURE_DIR.glob("*.json"))
        assert paths, "no task fixtures found"
        return paths

    def test_fixtures_load(self):
        for path in self.fixture_paths():
            (bench_task,) = load_bench_tasks(path)
            assert bench_task.task.budget is None
            assert bench_task.num_episodes >= 1

    def test_fixtures_decompose_exactly(self):
        generator = KeywordSkillGenerator(DEFAULT_CAPABILITY_POOL)
        for path in self.fixture_paths():
            (bench_task,) = load_bench_tasks(path)
            skills = generate_skills(bench_task.task, 2, generator)
            got = {skill.name for skill in skills}
            assert got == set(bench_task.required_capabilities), path.name
