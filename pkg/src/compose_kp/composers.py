"""Composition policies: pick components for a task under a budget.

Four composers share one result shape:

* identity: take the whole inventory, no filtering.
* retrieval: per skill, take the single most similar component.
* offline knapsack: treat per-skill retrieval shortlists as coverage
  groups and solve the knapsack exactly over similarity-sum values.
* online knapsack: walk each skill's shortlist, actually test
  candidates in the sandbox, estimate value from the helpful-query
  count, and accept the first candidate whose value-to-cost ratio
  clears a threshold that rises as the budget fills.

The online threshold is Psi(z) = (L/e) * (U e / L)^z where z is the
fraction of budget already committed and [L, U] brackets the
value-to-cost ratios worth considering.  Accepting only candidates
with ratio >= Psi(z) guarantees a competitive ratio of ln(U/L) + 1
against the offline optimum in the classic threshold analysis.  An
alternate mode exponentiates by the raw remaining budget instead;
it is kept selectable for comparison but starts the threshold
astronomically high, so it effectively rejects everything until the
budget is nearly spent.  It is not the default.

Budget arithmetic is exact; every decision the composers take is
recorded, and trial records from online testing ride along in the
result so audits can replay what happened.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

from .inventory import Inventory
from .mckp import MckpInstance, MckpItem, solve_exact
from .rationals import rational_to_jsonable
from .sandbox import AuditLog, Blacklist, Judge, Sandbox, TrialRecord, score_component, trial_to_jsonable
from .seeding import derive_seed
from .similarity import SimilarityIndex
from .skills import Skill, skill_to_jsonable

THRESHOLD_FRACTION_USED = "fraction_used"
THRESHOLD_REMAINING_BUDGET = "remaining_budget"

IDENTITY = "identity"
RETRIEVAL = "retrieval"
OFFLINE_KNAPSACK = "offline-knapsack"
ONLINE_KNAPSACK = "online-knapsack"

COMPOSER_NAMES = (IDENTITY, RETRIEVAL, OFFLINE_KNAPSACK, ONLINE_KNAPSACK)


class Action(str, Enum):
    ACCEPTED = "accepted"
    REJECTED_THRESHOLD = "rejected_threshold"
    REJECTED_BUDGET = "rejected_budget"
    REJECTED_BROKEN = "rejected_broken"
    SKIPPED_COVERED = "skipped_covered"
    SKIPPED_BLACKLISTED = "skipped_blacklisted"


@dataclass(frozen=True)
class ZclParams:
    """Ratio bracket for the online threshold; requires U > L > 0."""

    upper: Fraction
    lower: Fraction

    def __post_init__(self) -> None:
        if self.lower <= 0:
            raise ValueError(f"lower ratio bound must be positive, got {self.lower}")
        if self.upper <= self.lower:
            raise ValueError(
                f"upper ratio bound must exceed lower, got U={self.upper} L={self.lower}"
            )


@dataclass(frozen=True)
class DecisionRecord:
    skill_name: str
    candidate_id: str
    action: Action
    value: Optional[Fraction] = None
    ratio: Optional[Fraction] = None
    threshold: Optional[float] = None


@dataclass(frozen=True)
class CompositionResult:
    composer_name: str
    selected: tuple[str, ...]
    budget_given: Optional[Fraction]
    budget_spent: Fraction
    skills: tuple[Skill, ...] = ()
    decisions: tuple[DecisionRecord, ...] = ()
    trial_log: tuple[TrialRecord, ...] = ()
    uncovered_skills: tuple[str, ...] = ()


def result_to_jsonable(result: CompositionResult) -> dict:
    """Stable-field-order dict for JSON serialization.

    Budgets stay exact rationals; decision values and thresholds are
    reported as floats since they only explain the decision.
    """
    return {
        "composer_name": result.composer_name,
        "selected": list(result.selected),
        "budget_given": None if result.budget_given is None else rational_to_jsonable(result.budget_given),
        "budget_spent": rational_to_jsonable(result.budget_spent),
        "uncovered_skills": list(result.uncovered_skills),
        "skills": [skill_to_jsonable(s) for s in result.skills],
        "decisions": [
            {
                "skill_name": d.skill_name,
                "candidate_id": d.candidate_id,
                "action": d.action.value,
                "value": None if d.value is None else float(d.value),
                "ratio": None if d.ratio is None else float(d.ratio),
                "threshold": d.threshold,
            }
            for d in result.decisions
        ],
        "trial_log": [trial_to_jsonable(t) for t in result.trial_log],
    }


def result_to_json(result: CompositionResult) -> str:
    return json.dumps(result_to_jsonable(result), indent=2, ensure_ascii=False) + "\n"


def skill_query_text(skill: Skill) -> str:
    """The text a skill is matched against the inventory with."""
    return f"{skill.name}, {skill.description}"


def zcl_threshold(params: ZclParams, z: Fraction | float) -> float:
    """Threshold at fill fraction z in [0, 1]; exact at the endpoints."""
    if not (0 <= z <= 1):
        raise ValueError(f"fill fraction must lie in [0, 1], got {z}")
    lower = params.lower.numerator / params.lower.denominator
    upper = params.upper.numerator / params.upper.denominator
    if z == 0:
        return lower / math.e
    if z == 1:
        return upper
    return (lower / math.e) * (upper * math.e / lower) ** float(z)


def _threshold_raw_exponent(params: ZclParams, exponent: float) -> float:
    # alternate mode: exponent is the raw remaining budget, not a fraction
    lower = params.lower.numerator / params.lower.denominator
    upper = params.upper.numerator / params.upper.denominator
    return (lower / math.e) * (upper * math.e / lower) ** exponent


def estimate_value(score: int, num_queries: int, upper: Fraction) -> Fraction:
    """Map a helpful-query count to a value on the ratio scale.

    A full score is worth ``upper`` (the top of the ratio bracket
    times a unit cost); partial scores scale linearly.
    """
    if num_queries < 1:
        raise ValueError(f"num_queries must be at least 1, got {num_queries}")
    if not (0 <= score <= num_queries):
        raise ValueError(f"score {score} must lie in [0, {num_queries}]")
    return Fraction(score, num_queries) * upper


def pick_zcl_bounds(
    inventory: Inventory,
    num_queries: int,
    epsilon: Fraction = Fraction(1, 16),
) -> ZclParams:
    """Derive the ratio bracket from the inventory's cost range.

    A candidate's estimated value peaks at U = max cost (full score on
    the most expensive component yields ratio 1 at that cost, and up
    to U / c_min on the cheapest), so U anchors the top of the
    bracket and L = epsilon * U sets how speculative an acceptance
    may be.  Requires 0 < epsilon < 1 and a non-empty inventory.
    """
    if len(inventory) == 0:
        raise ValueError("cannot derive ratio bounds from an empty inventory")
    if num_queries < 1:
        raise ValueError(f"num_queries must be at least 1, got {num_queries}")
    if not (0 < epsilon < 1):
        raise ValueError(f"epsilon must lie strictly between 0 and 1, got {epsilon}")
    upper = max(comp.cost for comp in inventory)
    if upper <= 0:
        raise ValueError("inventory costs must be positive")
    return ZclParams(upper=upper, lower=epsilon * upper)


def compose_identity(inventory: Inventory) -> CompositionResult:
    """Select everything; the no-filtering baseline."""
    spent = sum((comp.cost for comp in inventory), Fraction(0))
    return CompositionResult(
        composer_name=IDENTITY,
        selected=inventory.ids(),
        budget_given=None,
        budget_spent=spent,
    )


def compose_retrieval(
    inventory: Inventory,
    skills: Sequence[Skill],
    index: SimilarityIndex,
) -> CompositionResult:
    """Per skill, pick the single most similar component; no budget."""
    if not skills:
        raise ValueError("retrieval composition requires at least one skill")
    selected: list[str] = []
    chosen: set[str] = set()
    decisions: list[DecisionRecord] = []
    uncovered: list[str] = []
    for skill in skills:
        hits = index.top_k(skill_query_text(skill), 1)
        if not hits:
            uncovered.append(skill.name)
            continue
        cid, score = hits[0]
        if cid in chosen:
            decisions.append(DecisionRecord(
                skill_name=skill.name, candidate_id=cid,
                action=Action.SKIPPED_COVERED, value=_float_fraction(score),
            ))
            continue
        chosen.add(cid)
        selected.append(cid)
        decisions.append(DecisionRecord(
            skill_name=skill.name, candidate_id=cid,
            action=Action.ACCEPTED, value=_float_fraction(score),
        ))
    spent = sum((inventory.component(cid).cost for cid in selected), Fraction(0))
    return CompositionResult(
        composer_name=RETRIEVAL,
        selected=tuple(selected),
        budget_given=None,
        budget_spent=spent,
        skills=tuple(skills),
        decisions=tuple(decisions),
        uncovered_skills=tuple(uncovered),
    )


def _float_fraction(x: float) -> Fraction:
    return Fraction(x) if x else Fraction(0)


def compose_offline(
    inventory: Inventory,
    skills: Sequence[Skill],
    index: SimilarityIndex,
    budget: Fraction,
    k: int = 10,
) -> CompositionResult:
    """Exact knapsack over per-skill shortlists as coverage groups.

    Candidate values are the summed similarity to every skill, so a
    component useful to several skills is worth more.  When full
    coverage does not fit the budget the best partial cover is
    returned and the uncovered skills are reported.
    """
    if not skills:
        raise ValueError("offline composition requires at least one skill")
    if budget < 0:
        raise ValueError(f"budget must be non-negative, got {budget}")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    candidate_order: list[str] = []
    seen: set[str] = set()
    groups: list[frozenset[str]] = []
    for skill in skills:
        hits = index.top_k(skill_query_text(skill), k)
        groups.append(frozenset(cid for cid, _ in hits))
        for cid, _ in hits:
            if cid not in seen:
                seen.add(cid)
                candidate_order.append(cid)

    query_texts = [skill_query_text(s) for s in skills]
    items = []
    for cid in candidate_order:
        value = sum((_float_fraction(index.sim(cid, q)) for q in query_texts), Fraction(0))
        items.append(MckpItem(id=cid, value=value, cost=inventory.component(cid).cost))

    instance = MckpInstance(items=tuple(items), budget=budget, groups=tuple(groups))
    solution = solve_exact(instance)

    values = {item.id: item.value for item in items}
    selected = tuple(sorted(solution.chosen))
    decisions = []
    for cid in selected:
        owner = ""
        for skill, group in zip(skills, groups):
            if cid in group:
                owner = skill.name
                break
        decisions.append(DecisionRecord(
            skill_name=owner, candidate_id=cid,
            action=Action.ACCEPTED, value=values[cid],
        ))
    uncovered = tuple(skills[gi].name for gi in solution.uncovered_groups)
    return CompositionResult(
        composer_name=OFFLINE_KNAPSACK,
        selected=selected,
        budget_given=budget,
        budget_spent=solution.total_cost,
        skills=tuple(skills),
        decisions=tuple(decisions),
        uncovered_skills=uncovered,
    )


def compose_online(
    inventory: Inventory,
    skills: Sequence[Skill],
    index: SimilarityIndex,
    budget: Fraction,
    k: int,
    zcl: ZclParams,
    sandbox: Sandbox,
    judge: Judge,
    seed: int,
    *,
    threshold_exponent: str = THRESHOLD_FRACTION_USED,
    audit: Optional[AuditLog] = None,
) -> CompositionResult:
    """Test-then-accept composition under an exact budget.

    Skills are processed in order.  For each skill the top-k
    candidates are walked best-first: blacklisted candidates are
    skipped without testing; an already-selected candidate that
    scores above zero covers the skill at no further cost; otherwise
    the candidate is scored in the sandbox (broken components are
    blacklisted immediately, which also stops their remaining
    queries), its value is estimated from the helpful-query count,
    and it is accepted if the value-to-cost ratio clears the current
    threshold and the cost still fits the remaining budget.  The
    first acceptance covers the skill and the walk moves on.
    """
    if budget <= 0:
        raise ValueError(f"online composition requires a positive budget, got {budget}")
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if threshold_exponent not in (THRESHOLD_FRACTION_USED, THRESHOLD_REMAINING_BUDGET):
        raise ValueError(f"unknown threshold mode {threshold_exponent!r}")

    remaining = budget
    selected: list[str] = []
    selected_set: set[str] = set()
    blacklist = Blacklist()
    decisions: list[DecisionRecord] = []
    trials: list[TrialRecord] = []

    def current_threshold() -> float:
        if threshold_exponent == THRESHOLD_REMAINING_BUDGET:
            return _threshold_raw_exponent(zcl, float(remaining))
        z = (budget - remaining) / budget
        return zcl_threshold(zcl, z)

    for skill in skills:
        run_seed = derive_seed("online", seed, skill.name)
        for cid, _score in index.top_k(skill_query_text(skill), k):
            component = inventory.component(cid)
            if cid in blacklist:
                decisions.append(DecisionRecord(
                    skill_name=skill.name, candidate_id=cid,
                    action=Action.SKIPPED_BLACKLISTED,
                ))
                continue
            score, records = score_component(
                component, skill, sandbox, judge, blacklist, run_seed, audit=audit,
            )
            trials.extend(records)
            if records and records[-1].judgement.broken:
                decisions.append(DecisionRecord(
                    skill_name=skill.name, candidate_id=cid,
                    action=Action.REJECTED_BROKEN,
                ))
                continue
            value = estimate_value(score, len(skill.queries), zcl.upper)
            if cid in selected_set:
                if score > 0:
                    decisions.append(DecisionRecord(
                        skill_name=skill.name, candidate_id=cid,
                        action=Action.SKIPPED_COVERED, value=value,
                    ))
                    break
                decisions.append(DecisionRecord(
                    skill_name=skill.name, candidate_id=cid,
                    action=Action.REJECTED_THRESHOLD, value=value,
                    ratio=Fraction(0), threshold=current_threshold(),
                ))
                continue
            threshold = current_threshold()
            ratio = value / component.cost
            if ratio >= threshold:
                if component.cost <= remaining:
                    remaining -= component.cost
                    selected.append(cid)
                    selected_set.add(cid)
                    decisions.append(DecisionRecord(
                        skill_name=skill.name, candidate_id=cid,
                        action=Action.ACCEPTED, value=value,
                        ratio=ratio, threshold=threshold,
                    ))
                    break
                decisions.append(DecisionRecord(
                    skill_name=skill.name, candidate_id=cid,
                    action=Action.REJECTED_BUDGET, value=value,
                    ratio=ratio, threshold=threshold,
                ))
                continue
            decisions.append(DecisionRecord(
                skill_name=skill.name, candidate_id=cid,
                action=Action.REJECTED_THRESHOLD, value=value,
                ratio=ratio, threshold=threshold,
            ))

    covered = {d.skill_name for d in decisions if d.action in (Action.ACCEPTED, Action.SKIPPED_COVERED)}
    uncovered = tuple(s.name for s in skills if s.name not in covered)
    return CompositionResult(
        composer_name=ONLINE_KNAPSACK,
        selected=tuple(selected),
        budget_given=budget,
        budget_spent=budget - remaining,
        skills=tuple(skills),
        decisions=tuple(decisions),
        trial_log=tuple(trials),
        uncovered_skills=uncovered,
    )


def audit_composition(result: CompositionResult) -> list[str]:
    """Structural checks over an online result's logs.

    Returns human-readable violations (empty list = clean):

    * trials for a component never continue after its broken verdict;
    * per-skill trials form one contiguous block, in skill order;
    * once a skill is covered (accepted or already-covered), no
      further trials are attributed to it.
    """
    violations: list[str] = []
    broken_at: dict[str, int] = {}
    for idx, trial in enumerate(result.trial_log):
        if trial.component_id in broken_at:
            violations.append(
                f"trial {idx} ran component {trial.component_id!r} after it was "
                f"blacklisted at trial {broken_at[trial.component_id]}"
            )
        if trial.judgement.broken and trial.component_id not in broken_at:
            broken_at[trial.component_id] = idx

    skill_order = [s.name for s in result.skills]
    seen_blocks: list[str] = []
    for trial in result.trial_log:
        if not seen_blocks or seen_blocks[-1] != trial.skill_name:
            seen_blocks.append(trial.skill_name)
    if len(set(seen_blocks)) != len(seen_blocks):
        violations.append(f"per-skill trial blocks are interleaved: {seen_blocks}")
    positions = {name: i for i, name in enumerate(skill_order)}
    indexed = [positions[b] for b in seen_blocks if b in positions]
    if indexed != sorted(indexed):
        violations.append(f"trial blocks out of skill order: {seen_blocks}")

    covered_by: dict[str, str] = {}
    for decision in result.decisions:
        if decision.action in (Action.ACCEPTED, Action.SKIPPED_COVERED):
            covered_by.setdefault(decision.skill_name, decision.candidate_id)
    last_trial_for: dict[str, str] = {}
    for trial in result.trial_log:
        last_trial_for[trial.skill_name] = trial.component_id
    for skill_name, winner in covered_by.items():
        last = last_trial_for.get(skill_name)
        if last is not None and last != winner:
            violations.append(
                f"skill {skill_name!r} kept testing after its covering candidate "
                f"{winner!r} (last trial hit {last!r})"
            )
    return violations
