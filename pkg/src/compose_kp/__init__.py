"""Budget-constrained composition of agentic components.

Given an inventory of tools or sub-agents with advertised
descriptions and costs, decompose a task into skills, and select a
subset of components to mount under an exact budget.  Four composers
are provided: take everything, retrieve per skill, solve the coverage
knapsack offline on similarity values, or test candidates in a
sandbox and accept them against a rising value-density threshold.
A benchmark harness scores the resulting selections on simulated
episodes and reports the Pareto front over success rate and spend.
"""

from .bench import (
    AggregateRow,
    BenchReport,
    BenchRow,
    BenchTask,
    ComposerConfig,
    aggregate_reports,
    load_bench_tasks,
    pareto_front,
    pareto_indices,
    run_bench,
    simulate_success,
    synthesize_task,
)
from .composers import (
    COMPOSER_NAMES,
    IDENTITY,
    OFFLINE_KNAPSACK,
    ONLINE_KNAPSACK,
    RETRIEVAL,
    THRESHOLD_FRACTION_USED,
    THRESHOLD_REMAINING_BUDGET,
    Action,
    CompositionResult,
    DecisionRecord,
    ZclParams,
    audit_composition,
    compose_identity,
    compose_offline,
    compose_online,
    compose_retrieval,
    estimate_value,
    pick_zcl_bounds,
    result_to_json,
    result_to_jsonable,
    skill_query_text,
    zcl_threshold,
)
from .inventory import (
    DEFAULT_CAPABILITY_POOL,
    Component,
    ComponentKind,
    Inventory,
    LatentProfile,
    PriceClass,
    SchemaError,
    attach_ground_truth,
    cost_of,
    generate_inventory,
    ground_truth_of,
    load_ground_truth,
    load_inventory,
    save_ground_truth,
    save_inventory,
)
from .mckp import (
    MckpInstance,
    MckpItem,
    MckpSolution,
    OracleSizeError,
    brute_force,
    solve_exact,
)
from .sandbox import (
    AuditLog,
    Blacklist,
    ExternalJudge,
    Judge,
    JudgeError,
    Judgement,
    Sandbox,
    SandboxError,
    SimulatedJudge,
    SimulatedSandbox,
    TrialRecord,
    run_trial,
    score_component,
    trial_seed,
)
from .similarity import SimIndex, SimilarityIndex, build_index, cosine, sim, tokenize, top_k
from .skills import (
    ExternalSkillGenerator,
    KeywordSkillGenerator,
    Skill,
    SkillGenerationError,
    SkillGenerator,
    TaskSpec,
    TestQuery,
    generate_skills,
    load_task,
    query_capability_tag,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
