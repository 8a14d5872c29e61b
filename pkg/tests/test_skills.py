"""Skill decomposition: keyword generator, external generator, schema."""

import json
from fractions import Fraction

import pytest

from compose_kp.skills import (
    MAX_SKILLS,
    ExternalSkillGenerator,
    KeywordSkillGenerator,
    Skill,
    SkillGenerationError,
    TaskSpec,
    TestQuery as SkillQuery,
    generate_skills,
    load_task,
    query_capability_tag,
    skill_to_jsonable,
    task_from_jsonable,
    task_to_jsonable,
)

POOL = ("flight_booking", "hotel_booking", "car_rental",
        "weather_forecast", "web_search", "fact_lookup")


def make_task(*bullets: str, budget=None) -> TaskSpec:
    return TaskSpec(name="t", description=tuple(bullets), budget=budget)


class TestQueryTag:
    def test_extracts_leading_tag(self):
        assert query_capability_tag("[car_rental] please handle this") == "car_rental"

    def test_no_tag_is_none(self):
        assert query_capability_tag("please handle this") is None

    def test_tag_must_lead(self):
        assert query_capability_tag(" [car_rental] x") is None


class TestKeywordGenerator:
    def test_matches_only_mentioned_tags(self):
        gen = KeywordSkillGenerator(POOL)
        task = make_task("Book a flight and reserve a hotel for the trip.")
        skills = generate_skills(task, 2, gen)
        assert {s.name for s in skills} == {"flight_booking", "hotel_booking"}

    def test_all_parts_must_match(self):
        # "flight" alone does not produce flight_booking
        gen = KeywordSkillGenerator(POOL)
        task = make_task("Compare flight prices across airlines.")
        with pytest.raises(SkillGenerationError, match="no capability"):
            generate_skills(task, 1, gen)

    def test_prefix_matching_covers_inflections(self):
        gen = KeywordSkillGenerator(POOL)
        task = make_task("Handles booking flights and searching the web.")
        skills = generate_skills(task, 1, gen)
        assert {s.name for s in skills} == {"flight_booking", "web_search"}

    def test_rank_by_match_count(self):
        gen = KeywordSkillGenerator(POOL)
        task = make_task(
            "Search the web. Search the web again. Web searches matter. Look up one fact.")
        skills = generate_skills(task, 1, gen)
        names = [s.name for s in skills]
        assert names == ["web_search", "fact_lookup"]

    def test_rank_ties_break_by_tag(self):
        gen = KeywordSkillGenerator(POOL)
        # both tags match exactly twice: tie resolved alphabetically
        task = make_task("web search web search, fact lookup fact lookup")
        skills = generate_skills(task, 1, gen)
        assert [s.name for s in skills] == ["fact_lookup", "web_search"]

    def test_importance_is_clamped_match_count(self):
        gen = KeywordSkillGenerator(POOL)
        bullets = tuple(["web search " * 12])
        skills = generate_skills(make_task(*bullets), 1, gen)
        (skill,) = skills
        assert skill.importance == 10

    def test_cap_at_six_skills(self):
        pool = tuple(f"alpha{i}_beta{i}" for i in range(8))
        text = " ".join(f"alpha{i} beta{i}" for i in range(8))
        gen = KeywordSkillGenerator(pool)
        skills = generate_skills(make_task(text), 1, gen)
        assert len(skills) == MAX_SKILLS

    def test_queries_carry_tag_marker_and_plan(self):
        gen = KeywordSkillGenerator(POOL)
        skills = generate_skills(make_task("rent a car, a rental car"), 3, gen)
        (skill,) = skills
        assert len(skill.queries) == 3
        assert all(query_capability_tag(q.query) == "car_rental" for q in skill.queries)
        assert all(q.plan for q in skill.queries)
        assert len({q.query for q in skill.queries}) == 3

    def test_deterministic(self):
        gen = KeywordSkillGenerator(POOL)
        task = make_task("book flights, book hotels, check the weather forecast")
        assert generate_skills(task, 2, gen) == generate_skills(task, 2, gen)

    def test_empty_pool_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            KeywordSkillGenerator(())


def ok_entry(name="s1", importance=5, n_queries=2):
    return {
        "name": name,
        "importance": importance,
        "description": "does things",
        "queries": [{"query": f"q{i}", "plan": f"p{i}"} for i in range(n_queries)],
    }


class TestExternalGenerator:
    def test_accepts_bare_list(self):
        gen = ExternalSkillGenerator(lambda req: [ok_entry()])
        skills = generate_skills(make_task("x"), 2, gen)
        assert skills[0].name == "s1"
        assert skills[0].queries == (SkillQuery("q0", "p0"), SkillQuery("q1", "p1"))

    def test_accepts_wrapped_list(self):
        gen = ExternalSkillGenerator(lambda req: {"skills": [ok_entry()]})
        assert len(generate_skills(make_task("x"), 2, gen)) == 1

    def test_request_shape(self):
        seen = {}

        def transport(req):
            seen.update(req)
            return [ok_entry()]

        generate_skills(make_task("bullet one", "bullet two"), 2,
                        ExternalSkillGenerator(transport))
        assert seen == {"task_description": ["bullet one", "bullet two"],
                        "max_skills": MAX_SKILLS, "queries_per_skill": 2}

    def test_extra_queries_truncated(self):
        gen = ExternalSkillGenerator(lambda req: [ok_entry(n_queries=5)])
        skills = generate_skills(make_task("x"), 2, gen)
        assert len(skills[0].queries) == 2

    def test_too_few_queries_rejected_with_payload(self):
        payload = [ok_entry(n_queries=1)]
        gen = ExternalSkillGenerator(lambda req: payload)
        with pytest.raises(SkillGenerationError, match="at least 2 queries") as info:
            generate_skills(make_task("x"), 2, gen)
        assert info.value.payload == payload

    def test_non_list_rejected(self):
        gen = ExternalSkillGenerator(lambda req: "nope")
        with pytest.raises(SkillGenerationError, match="not a list"):
            generate_skills(make_task("x"), 1, gen)

    def test_missing_field_rejected(self):
        entry = ok_entry()
        del entry["importance"]
        gen = ExternalSkillGenerator(lambda req: [entry])
        with pytest.raises(SkillGenerationError, match="missing field"):
            generate_skills(make_task("x"), 2, gen)

    def test_bad_query_shape_rejected(self):
        entry = ok_entry()
        entry["queries"][0] = {"query": "q"}
        gen = ExternalSkillGenerator(lambda req: [entry])
        with pytest.raises(SkillGenerationError, match="query 0"):
            generate_skills(make_task("x"), 1, gen)

    def test_out_of_range_importance_rejected(self):
        gen = ExternalSkillGenerator(lambda req: [ok_entry(importance=0)])
        with pytest.raises(SkillGenerationError, match="invalid"):
            generate_skills(make_task("x"), 2, gen)


class TestGenerateSkillsValidation:
    class FixedGenerator:
        def __init__(self, skills):
            self.skills = skills

        def generate(self, task, queries_per_skill, seed):
            return self.skills

    def queries(self, n):
        return tuple(SkillQuery(f"q{i}", f"p{i}") for i in range(n))

    def test_zero_skills_rejected(self):
        with pytest.raises(SkillGenerationError, match="expected 1..6"):
            generate_skills(make_task("x"), 1, self.FixedGenerator([]))

    def test_seven_skills_rejected(self):
        skills = [Skill(f"s{i}", 1, "d", self.queries(1)) for i in range(7)]
        with pytest.raises(SkillGenerationError, match="expected 1..6"):
            generate_skills(make_task("x"), 1, self.FixedGenerator(skills))

    def test_duplicate_names_rejected(self):
        skills = [Skill("s", 1, "d", self.queries(1)),
                  Skill("s", 2, "d", self.queries(1))]
        with pytest.raises(SkillGenerationError, match="distinct"):
            generate_skills(make_task("x"), 1, self.FixedGenerator(skills))

    def test_wrong_query_count_rejected(self):
        skills = [Skill("s", 1, "d", self.queries(3))]
        with pytest.raises(SkillGenerationError, match="expected 2"):
            generate_skills(make_task("x"), 2, self.FixedGenerator(skills))

    def test_queries_per_skill_must_be_positive(self):
        with pytest.raises(ValueError, match="at least 1"):
            generate_skills(make_task("x"), 0, self.FixedGenerator([]))


class TestModelValidation:
    def test_importance_bounds(self):
        q = (SkillQuery("q", "p"),)
        with pytest.raises(ValueError, match="importance"):
            Skill("s", 0, "d", q)
        with pytest.raises(ValueError, match="importance"):
            Skill("s", 11, "d", q)

    def test_skill_needs_queries(self):
        with pytest.raises(ValueError, match="at least one"):
            Skill("s", 5, "d", ())

    def test_query_text_non_empty(self):
        with pytest.raises(ValueError, match="non-empty"):
            SkillQuery("  ", "p")

    def test_task_bullets_non_empty(self):
        with pytest.raises(ValueError, match="bullets"):
            TaskSpec(name="t", description=("", "x"))


class TestTaskSerialization:
    def test_round_trip_with_budget(self):
        task = make_task("a", "b", budget=Fraction(15, 2))
        again = task_from_jsonable(task_to_jsonable(task))
        assert again == task

    def test_round_trip_without_budget(self):
        task = make_task("a")
        assert task_from_jsonable(task_to_jsonable(task)) == task

    def test_load_bare_and_wrapped(self, tmp_path):
        body = {"name": "t", "description": ["do a thing"], "budget": "7/2"}
        bare = tmp_path / "bare.json"
        bare.write_text(json.dumps(body), encoding="utf-8")
        wrapped = tmp_path / "wrapped.json"
        wrapped.write_text(json.dumps({"task": body, "other": 1}), encoding="utf-8")
        assert load_task(bare) == load_task(wrapped)
        assert load_task(bare).budget == Fraction(7, 2)

    def test_bad_task_errors_name_the_field(self):
        with pytest.raises(ValueError, match="task.name"):
            task_from_jsonable({"description": ["x"]})
        with pytest.raises(ValueError, match="task.description"):
            task_from_jsonable({"name": "t", "description": []})

    def test_skill_to_jsonable_shape(self):
        skill = Skill("s", 4, "d", (SkillQuery("q", "p"),))
        assert skill_to_jsonable(skill) == {
            "name": "s", "importance": 4, "description": "d",
            "queries": [{"query": "q", "plan": "p"}]}
