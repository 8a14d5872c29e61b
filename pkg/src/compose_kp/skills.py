"""Task decomposition into skills with per-skill test queries.

A task description (a handful of bullet points) is decomposed into at
most six skills.  Each skill carries a name, an importance from 1 to
10, a short description, and a fixed number of test queries, where a
query pairs the request text with a reference plan a judge can check
a transcript against.

Two generators are provided.  ``KeywordSkillGenerator`` maps task
wording onto a capability-tag pool deterministically and needs no
network.  ``ExternalSkillGenerator`` delegates to an injected
transport (typically an LLM endpoint) and validates the response into
the same schema.  Either way, ``generate_skills`` enforces the schema
before anything downstream sees the result.

Test queries embed their capability tag in square brackets at the
front of the query text (``[flight_booking] ...``); the simulated
sandbox parses that marker to decide whether a component's hidden
capabilities match the request.
"""

from __future__ import annotations

import json
import re
import urllib.request
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

from .rationals import rational_from_jsonable
from .similarity import tokenize

MAX_SKILLS = 6

_QUERY_TAG_RE = re.compile(r"^\[([a-z0-9_]+)\]")


class SkillGenerationError(ValueError):
    """Task could not be decomposed, or a response failed validation.

    ``payload`` carries the raw response when an external generator
    produced something unusable, so callers can log it.
    """

    def __init__(self, message: str, payload: object = None) -> None:
        super().__init__(message)
        self.payload = payload


@dataclass(frozen=True)
class TestQuery:
    query: str
    plan: str

    def __post_init__(self) -> None:
        if not self.query.strip():
            raise ValueError("test query text must be non-empty")
        if not self.plan.strip():
            raise ValueError("test query plan must be non-empty")


@dataclass(frozen=True)
class Skill:
    name: str
    importance: int
    description: str
    queries: tuple[TestQuery, ...]

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise ValueError("skill name must be non-empty")
        if not isinstance(self.importance, int) or not (1 <= self.importance <= 10):
            raise ValueError(f"skill importance must be an integer in [1, 10], got {self.importance!r}")
        if not self.queries:
            raise ValueError(f"skill {self.name!r} must carry at least one test query")


@dataclass(frozen=True)
class TaskSpec:
    name: str
    description: tuple[str, ...]
    budget: Optional[Fraction] = field(default=None)

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise ValueError("task name must be non-empty")
        if not self.description or not all(isinstance(b, str) and b.strip() for b in self.description):
            raise ValueError("task description must be a non-empty list of non-empty bullets")


def query_capability_tag(query_text: str) -> Optional[str]:
    """Extract the leading ``[tag]`` marker from a query, if present."""
    match = _QUERY_TAG_RE.match(query_text)
    return match.group(1) if match else None


class SkillGenerator(Protocol):
    def generate(self, task: TaskSpec, queries_per_skill: int, seed: int) -> Sequence[Skill]: ...


def _phrase(tag: str) -> str:
    return tag.replace("_", " ")


def _token_matches_part(token: str, part: str) -> bool:
    if token == part:
        return True
    if len(part) >= 4 and token.startswith(part):
        return True
    if len(token) >= 4 and part.startswith(token):
        return True
    return False


class KeywordSkillGenerator:
    """Deterministic decomposition against a capability-tag pool.

    A tag is considered mentioned when every underscore-separated part
    of the tag matches at least one task token (exact match, or a
    shared prefix of length four or more, so plurals and simple
    inflections count).  Matched tags are ranked by total match count
    and capped at six skills; the match count, clamped to [1, 10],
    doubles as the skill's importance.
    """

    def __init__(self, capability_pool: Sequence[str]) -> None:
        if not capability_pool:
            raise ValueError("capability pool must be non-empty")
        self.capability_pool = tuple(capability_pool)

    def generate(self, task: TaskSpec, queries_per_skill: int, seed: int) -> list[Skill]:
        tokens = tokenize(" ".join(task.description))
        ranked: list[tuple[int, str]] = []
        for tag in self.capability_pool:
            parts = tag.split("_")
            total = 0
            matched_all = True
            for part in parts:
                hits = sum(1 for tok in tokens if _token_matches_part(tok, part))
                if hits == 0:
                    matched_all = False
                    break
                total += hits
            if matched_all:
                ranked.append((total, tag))
        if not ranked:
            raise SkillGenerationError(
                f"task {task.name!r} mentions no capability from the pool; cannot decompose"
            )
        ranked.sort(key=lambda pair: (-pair[0], pair[1]))
        skills = []
        for count, tag in ranked[:MAX_SKILLS]:
            skills.append(_make_skill(tag, count, queries_per_skill))
        return skills


def _make_skill(tag: str, match_count: int, queries_per_skill: int) -> Skill:
    phrase = _phrase(tag)
    queries = tuple(
        TestQuery(
            query=f"[{tag}] sample request {i + 1}: exercise the {phrase} capability end to end.",
            plan=f"Route the request to a component advertising {phrase} and verify one round trip.",
        )
        for i in range(queries_per_skill)
    )
    return Skill(
        name=tag,
        importance=min(10, max(1, match_count)),
        description=f"Ability to satisfy {phrase} needs identified in the task brief.",
        queries=queries,
    )


Transport = Callable[[dict], object]


class ExternalSkillGenerator:
    """Delegates decomposition to an injected transport callable.

    The transport receives ``{"task_description": [...],
    "max_skills": 6, "queries_per_skill": n}`` and must return parsed
    JSON: either a list of skill objects or ``{"skills": [...]}``,
    each object shaped ``{name, importance, description, queries:
    [{query, plan}, ...]}``.  Responses with too many queries per
    skill are truncated to the requested count; anything else
    malformed raises :class:`SkillGenerationError` with the raw
    payload attached.
    """

    def __init__(self, transport: Transport) -> None:
        self._transport = transport

    def generate(self, task: TaskSpec, queries_per_skill: int, seed: int) -> list[Skill]:
        request = {
            "task_description": list(task.description),
            "max_skills": MAX_SKILLS,
            "queries_per_skill": queries_per_skill,
        }
        payload = self._transport(request)
        return _parse_skill_payload(payload, queries_per_skill)


def _parse_skill_payload(payload: object, queries_per_skill: int) -> list[Skill]:
    body = payload
    if isinstance(body, dict) and "skills" in body:
        body = body["skills"]
    if not isinstance(body, list):
        raise SkillGenerationError("skill response is not a list of skill objects", payload=payload)
    skills: list[Skill] = []
    for idx, entry in enumerate(body):
        if not isinstance(entry, dict):
            raise SkillGenerationError(f"skill entry {idx} is not an object", payload=payload)
        try:
            name = entry["name"]
            importance = entry["importance"]
            description = entry["description"]
            raw_queries = entry["queries"]
        except KeyError as exc:
            raise SkillGenerationError(f"skill entry {idx} is missing field {exc}", payload=payload) from None
        if not isinstance(raw_queries, list) or len(raw_queries) < queries_per_skill:
            raise SkillGenerationError(
                f"skill entry {idx} must carry at least {queries_per_skill} queries", payload=payload
            )
        queries = []
        for qidx, q in enumerate(raw_queries[:queries_per_skill]):
            if not isinstance(q, dict) or not isinstance(q.get("query"), str) or not isinstance(q.get("plan"), str):
                raise SkillGenerationError(
                    f"skill entry {idx} query {qidx} must be {{query, plan}} strings", payload=payload
                )
            queries.append(TestQuery(query=q["query"], plan=q["plan"]))
        try:
            skills.append(Skill(
                name=str(name),
                importance=int(importance),
                description=str(description),
                queries=tuple(queries),
            ))
        except (TypeError, ValueError) as exc:
            raise SkillGenerationError(f"skill entry {idx} is invalid: {exc}", payload=payload) from None
    return skills


def http_transport(url: str, timeout: float = 30.0) -> Transport:
    """A transport that POSTs the request as JSON and parses the reply."""

    def call(request: dict) -> object:
        data = json.dumps(request).encode("utf-8")
        req = urllib.request.Request(url, data=data, headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))

    return call


def generate_skills(
    task: TaskSpec,
    queries_per_skill: int,
    generator: SkillGenerator,
    seed: int = 0,
) -> tuple[Skill, ...]:
    """Run a generator and enforce the skill schema on its output.

    Post-conditions: between 1 and 6 skills, distinct names, and
    exactly ``queries_per_skill`` queries on every skill.
    """
    if queries_per_skill < 1:
        raise ValueError(f"queries_per_skill must be at least 1, got {queries_per_skill}")
    skills = tuple(generator.generate(task, queries_per_skill, seed))
    if not (1 <= len(skills) <= MAX_SKILLS):
        raise SkillGenerationError(f"expected 1..{MAX_SKILLS} skills, got {len(skills)}")
    names = [s.name for s in skills]
    if len(set(names)) != len(names):
        raise SkillGenerationError(f"skill names must be distinct, got {names}")
    for skill in skills:
        if len(skill.queries) != queries_per_skill:
            raise SkillGenerationError(
                f"skill {skill.name!r} has {len(skill.queries)} queries, expected {queries_per_skill}"
            )
    return skills


def task_to_jsonable(task: TaskSpec) -> dict:
    return {
        "name": task.name,
        "description": list(task.description),
        "budget": None if task.budget is None else str(task.budget),
    }


def task_from_jsonable(raw: object, where: str = "task") -> TaskSpec:
    if not isinstance(raw, dict):
        raise ValueError(f"{where}: expected a JSON object")
    name = raw.get("name")
    if not isinstance(name, str) or not name.strip():
        raise ValueError(f"{where}.name: expected a non-empty string")
    description = raw.get("description")
    if not isinstance(description, list) or not description:
        raise ValueError(f"{where}.description: expected a non-empty array of strings")
    budget_raw = raw.get("budget")
    budget = None if budget_raw is None else rational_from_jsonable(budget_raw)
    return TaskSpec(name=name, description=tuple(description), budget=budget)


def load_task(path: str | Path) -> TaskSpec:
    """Read a task file; accepts a bare task or a ``{"task": ...}`` wrapper."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(raw, dict) and "task" in raw and isinstance(raw["task"], dict):
        return task_from_jsonable(raw["task"])
    return task_from_jsonable(raw)


def skill_to_jsonable(skill: Skill) -> dict:
    return {
        "name": skill.name,
        "importance": skill.importance,
        "description": skill.description,
        "queries": [{"query": q.query, "plan": q.plan} for q in skill.queries],
    }
