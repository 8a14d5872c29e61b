"""Trial execution: run a component against a test query, judge it.

A trial dispatches one test query to one component inside a sandbox,
producing a transcript, and a judge reduces that transcript to a
verdict: helpful, broken, or merely useless.  A broken verdict means
the component did not operate at all and dominates helpfulness.

The simulated sandbox resolves trials from hidden ground truth: a
non-operable component always errors; an operable one helps only if
the query's capability tag is among its capabilities and a seeded
Bernoulli draw at its reliability succeeds.  Trial seeds derive from
(run seed, component id, skill name, query index), so outcomes do not
depend on execution order and replay exactly.

A backend failure (unknown component, transport error) raises
``SandboxError`` or ``JudgeError``; that is an error, never a broken
verdict.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Optional, Protocol, Sequence

from .inventory import Component, LatentProfile
from .seeding import derive_seed, derived_rng
from .skills import Skill, TestQuery, query_capability_tag

STEP_ERROR = "error: component returned no usable output"
STEP_UNRELATED = "observation: output did not relate to the request"
STEP_INCOMPLETE = "observation: output was incomplete"
STEP_HELPFUL = "observation: output addressed the request"


class SandboxError(RuntimeError):
    """The sandbox itself failed; distinct from a broken component."""


class JudgeError(RuntimeError):
    """The judge could not produce a verdict.

    ``payload`` carries the raw response when an external judge
    returned something unusable.
    """

    def __init__(self, message: str, payload: object = None) -> None:
        super().__init__(message)
        self.payload = payload


@dataclass(frozen=True)
class Judgement:
    helpful: bool
    broken: bool
    reason: str

    def __post_init__(self) -> None:
        # broken dominates: a component that failed to run cannot count as helpful
        if self.broken and self.helpful:
            object.__setattr__(self, "helpful", False)


@dataclass(frozen=True)
class TrialRecord:
    component_id: str
    skill_name: str
    query: TestQuery
    transcript: tuple[str, ...]
    judgement: Judgement

    def __post_init__(self) -> None:
        if not self.transcript:
            raise ValueError("trial transcript must be non-empty")


def trial_to_jsonable(record: TrialRecord) -> dict:
    return {
        "component_id": record.component_id,
        "skill_name": record.skill_name,
        "query": {"query": record.query.query, "plan": record.query.plan},
        "transcript": list(record.transcript),
        "judgement": {
            "helpful": record.judgement.helpful,
            "broken": record.judgement.broken,
            "reason": record.judgement.reason,
        },
    }


class Blacklist:
    """Insertion-only set of component ids that turned out broken."""

    def __init__(self) -> None:
        self._ids: dict[str, None] = {}

    def add(self, component_id: str) -> None:
        self._ids.setdefault(component_id, None)

    def __contains__(self, component_id: str) -> bool:
        return component_id in self._ids

    def __len__(self) -> int:
        return len(self._ids)

    def ids(self) -> tuple[str, ...]:
        return tuple(self._ids)


class Sandbox(Protocol):
    def run(self, component: Component, query: TestQuery, seed: int) -> Sequence[str]: ...


class Judge(Protocol):
    def judge(self, component: Component, query: TestQuery, transcript: Sequence[str]) -> Judgement: ...


class SimulatedSandbox:
    """Resolves trials from a ground-truth mapping of latent profiles."""

    def __init__(self, ground_truth: Mapping[str, LatentProfile]) -> None:
        self._truth = dict(ground_truth)

    def run(self, component: Component, query: TestQuery, seed: int) -> list[str]:
        profile = self._truth.get(component.id)
        if profile is None:
            raise SandboxError(f"no ground truth for component {component.id!r}")
        transcript = [f"route test query to {component.name}: {query.query}"]
        if not profile.operable:
            transcript.append(STEP_ERROR)
            return transcript
        tag = query_capability_tag(query.query)
        if tag is None or tag not in profile.capabilities:
            transcript.append(STEP_UNRELATED)
            return transcript
        draw = derived_rng("trial", seed).random()
        transcript.append(STEP_HELPFUL if draw < profile.reliability else STEP_INCOMPLETE)
        return transcript


class SimulatedJudge:
    """Reads the sandbox's outcome markers back out of the transcript."""

    def judge(self, component: Component, query: TestQuery, transcript: Sequence[str]) -> Judgement:
        if any(step.startswith("error:") for step in transcript):
            return Judgement(helpful=False, broken=True, reason="component errored during execution")
        if STEP_HELPFUL in transcript:
            return Judgement(helpful=True, broken=False, reason="output addressed the test query")
        return Judgement(helpful=False, broken=False, reason="output did not address the test query")


JudgeTransport = Callable[[dict], object]


class ExternalJudge:
    """Adapter for an external judging endpoint.

    Sends ``{"query", "reference_plan", "tool", "agent_steps"}`` and
    expects ``{"helpful": bool, "broken": bool, "reason": str}``.
    """

    def __init__(self, transport: JudgeTransport) -> None:
        self._transport = transport

    def judge(self, component: Component, query: TestQuery, transcript: Sequence[str]) -> Judgement:
        request = {
            "query": query.query,
            "reference_plan": query.plan,
            "tool": component.name,
            "agent_steps": list(transcript),
        }
        payload = self._transport(request)
        if not isinstance(payload, dict):
            raise JudgeError("judge response is not an object", payload=payload)
        helpful = payload.get("helpful")
        broken = payload.get("broken")
        reason = payload.get("reason", "")
        if not isinstance(helpful, bool) or not isinstance(broken, bool) or not isinstance(reason, str):
            raise JudgeError("judge response must carry boolean helpful/broken and a string reason",
                             payload=payload)
        return Judgement(helpful=helpful, broken=broken, reason=reason)


class AuditLog:
    """Appends one JSON line per trial to a log file."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)

    def append(self, record: TrialRecord) -> None:
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(trial_to_jsonable(record), ensure_ascii=False) + "\n")


def trial_seed(run_seed: int, component_id: str, skill_name: str, query_index: int) -> int:
    """The per-trial seed; exposed so tests can replay draws exactly."""
    return derive_seed("trial-seed", run_seed, component_id, skill_name, query_index)


def run_trial(
    component: Component,
    query: TestQuery,
    sandbox: Sandbox,
    judge: Judge,
    seed: int,
    skill_name: str = "",
    audit: Optional[AuditLog] = None,
) -> TrialRecord:
    """Execute one trial; ``seed`` is the already-derived trial seed."""
    transcript = tuple(sandbox.run(component, query, seed))
    judgement = judge.judge(component, query, transcript)
    record = TrialRecord(
        component_id=component.id,
        skill_name=skill_name,
        query=query,
        transcript=transcript,
        judgement=judgement,
    )
    if audit is not None:
        audit.append(record)
    return record


def score_component(
    component: Component,
    skill: Skill,
    sandbox: Sandbox,
    judge: Judge,
    blacklist: Blacklist,
    seed: int,
    audit: Optional[AuditLog] = None,
) -> tuple[int, tuple[TrialRecord, ...]]:
    """Run the skill's queries against a component and count helpful ones.

    Stops at the first broken verdict and blacklists the component;
    remaining queries are never attempted.  Refuses components that
    are already blacklisted.
    """
    if component.id in blacklist:
        raise ValueError(f"component {component.id!r} is blacklisted and must not be scored again")
    score = 0
    records: list[TrialRecord] = []
    for index, query in enumerate(skill.queries):
        record = run_trial(
            component,
            query,
            sandbox,
            judge,
            trial_seed(seed, component.id, skill.name, index),
            skill_name=skill.name,
            audit=audit,
        )
        records.append(record)
        if record.judgement.broken:
            blacklist.add(component.id)
            break
        if record.judgement.helpful:
            score += 1
    return score, tuple(records)
