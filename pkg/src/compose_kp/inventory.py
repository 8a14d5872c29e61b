"""Component inventory model, generation, and serialization.

An inventory is the catalog a composer chooses from: each component
advertises an id, a human-readable name and description, a positive
rational cost, and a kind (tool or sub-agent).  What a component can
actually do lives in a latent profile (capability tags, reliability,
operability) that is never written into the public inventory file;
it is stored in a separate ground-truth sidecar so that composers can
only learn it by testing.

Generated descriptions are deterministic templated renderings of the
capability tags.  Distractor components copy the description of an
operable component and rewrite it word-by-word through a fixed table
that strips the templating filler, which leaves a tighter, more
query-focused wording with positive lexical similarity to capability
queries.  Distractors carry no capabilities and are not operable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .rationals import rational_from_jsonable, rational_to_jsonable
from .seeding import derived_rng


class SchemaError(ValueError):
    """A serialized file violated the expected schema.

    The message always begins with the path of the offending field,
    e.g. ``components[3].cost: expected a positive rational``.
    """


class PriceClass(str, Enum):
    FREE = "free"
    RATE_LIMITED = "rate_limited"
    PAID = "paid"


class ComponentKind(str, Enum):
    TOOL = "tool"
    SUB_AGENT = "sub_agent"


# Flat price tiers, in dollars per metering bucket.
PRICES: dict[PriceClass, Fraction] = {
    PriceClass.FREE: Fraction(3),
    PriceClass.RATE_LIMITED: Fraction(5),
    PriceClass.PAID: Fraction(8),
}

_PRICE_ORDER = (PriceClass.FREE, PriceClass.RATE_LIMITED, PriceClass.PAID)


def cost_of(price_class: PriceClass) -> Fraction:
    """Dollar cost charged for selecting a component of this tier."""
    return PRICES[price_class]


DEFAULT_CAPABILITY_POOL: tuple[str, ...] = (
    "web_search",
    "fact_lookup",
    "code_generation",
    "file_conversion",
    "scientific_papers",
    "medical_reference",
    "travel_booking",
    "flight_booking",
    "hotel_booking",
    "car_rental",
    "weather_forecast",
    "mortgage_planning",
    "property_lookup",
    "credit_report",
    "news_headlines",
    "stock_quotes",
    "language_translation",
    "unit_conversion",
    "calendar_scheduling",
    "email_drafting",
    "image_analysis",
    "data_visualization",
    "music_discovery",
)


@dataclass(frozen=True)
class LatentProfile:
    """Hidden ground truth about what a component really does."""

    capabilities: frozenset[str]
    reliability: Fraction
    operable: bool

    def __post_init__(self) -> None:
        if not (0 <= self.reliability <= 1):
            raise ValueError(f"reliability must lie in [0, 1], got {self.reliability}")


@dataclass(frozen=True)
class Component:
    id: str
    name: str
    description: str
    cost: Fraction
    kind: ComponentKind
    latent: Optional[LatentProfile] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("component id must be non-empty")
        if self.cost <= 0:
            raise ValueError(f"component {self.id!r} must have positive cost, got {self.cost}")


@dataclass(frozen=True)
class Inventory:
    components: tuple[Component, ...]
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for comp in self.components:
            if comp.id in seen:
                raise ValueError(f"duplicate component id {comp.id!r}")
            seen.add(comp.id)
        object.__setattr__(self, "_by_id", {c.id: c for c in self.components})

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def component(self, component_id: str) -> Component:
        try:
            return self._by_id[component_id]  # type: ignore[attr-defined]
        except KeyError:
            raise KeyError(f"unknown component id {component_id!r}") from None

    def ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.components)


# Description templates share a fixed filler lexicon.  Every filler
# word below maps to a rewrite (possibly empty) in DISTRACTOR_REWRITES,
# and none of the filler words collides with a capability-tag word, so
# a rewritten distractor description reduces to exactly the tag words.
_TEMPLATES = (
    "Offers {joined} support for everyday requests and handles common {first} workloads.",
    "Provides {joined} capabilities with consistent results across general {first} tasks.",
    "Handles {joined} requests for everyday use and covers typical {first} workloads.",
)

DISTRACTOR_REWRITES: dict[str, str] = {
    "offers": "",
    "provides": "",
    "handles": "",
    "covers": "",
    "support": "",
    "capabilities": "",
    "requests": "",
    "tasks": "",
    "workloads": "",
    "use": "",
    "for": "",
    "and": "",
    "with": "",
    "across": "",
    "everyday": "",
    "common": "",
    "general": "",
    "typical": "",
    "consistent": "",
    "results": "",
}


def _phrase(tag: str) -> str:
    return tag.replace("_", " ")


def render_description(tags: Sequence[str], variant: int) -> str:
    """Deterministic templated description for an operable component."""
    if not tags:
        raise ValueError("cannot render a description for zero tags")
    template = _TEMPLATES[variant % len(_TEMPLATES)]
    phrases = [_phrase(t) for t in tags]
    return template.format(joined=" and ".join(phrases), first=phrases[0])


def distill_description(description: str) -> str:
    """Rewrite a description through the fixed word table.

    Filler words disappear; everything else survives unchanged in
    order.  Applied to a templated description this leaves only the
    capability-tag words, which is what makes distractors rank above
    the components they shadow on tag-focused queries.
    """
    words = re.findall(r"[a-z0-9]+", description.lower())
    rewritten = [DISTRACTOR_REWRITES.get(w, w) for w in words]
    return " ".join(w for w in rewritten if w)


def _validate_pool(capability_pool: Sequence[str]) -> tuple[str, ...]:
    pool = tuple(capability_pool)
    if not pool:
        raise ValueError("capability pool must be non-empty")
    if len(set(pool)) != len(pool):
        raise ValueError("capability pool contains duplicate tags")
    for tag in pool:
        if not re.fullmatch(r"[a-z0-9_]+", tag):
            raise ValueError(f"capability tag {tag!r} must be lowercase [a-z0-9_]+")
    return pool


def generate_inventory(
    size: int,
    distractor_count: int,
    capability_pool: Sequence[str] | None = None,
    seed: int = 0,
    *,
    cost_override: Fraction | None = None,
    kind: ComponentKind = ComponentKind.TOOL,
    reliability_levels: Sequence[Fraction] = (Fraction(1),),
    distractor_targets: Sequence[str] | None = None,
) -> Inventory:
    """Generate a seeded synthetic inventory with hidden ground truth.

    The first ``len(pool)`` operable components are anchors: component
    ``i`` carries exactly the tag ``pool[i]``, which guarantees every
    tag in the pool is covered whenever there are at least that many
    operable components.  Later components get a round-robin primary
    tag plus zero to two seeded extras.  The final ``distractor_count``
    components are distractors: each copies an operable component's
    description through :func:`distill_description`, carries no
    capabilities, and is not operable.

    ``distractor_targets`` biases which components the distractors
    shadow: distractor ``j`` copies a component carrying the tag
    ``targets[j % len(targets)]``, preferring one whose tag set is
    exactly that tag.

    ``cost_override`` prices every component at the given value
    instead of drawing a price tier.  ``reliability_levels`` is the
    set of reliabilities operable components draw from.
    """
    if not isinstance(size, int) or isinstance(size, bool) or size <= 0:
        raise ValueError(f"size must be a positive integer, got {size!r}")
    if not isinstance(distractor_count, int) or distractor_count < 0:
        raise ValueError(f"distractor_count must be a non-negative integer, got {distractor_count!r}")
    if distractor_count > size:
        raise ValueError(f"distractor_count {distractor_count} exceeds size {size}")
    if distractor_count > 0 and distractor_count == size:
        raise ValueError("distractors shadow operable components; at least one operable component is required")
    pool = _validate_pool(capability_pool if capability_pool is not None else DEFAULT_CAPABILITY_POOL)
    if cost_override is not None and cost_override <= 0:
        raise ValueError(f"cost_override must be positive, got {cost_override}")
    levels = tuple(Fraction(r) for r in reliability_levels)
    if not levels:
        raise ValueError("reliability_levels must be non-empty")
    for level in levels:
        if not (0 <= level <= 1):
            raise ValueError(f"reliability level {level} must lie in [0, 1]")
    targets: tuple[str, ...] | None = None
    if distractor_targets is not None:
        targets = tuple(distractor_targets)
        for tag in targets:
            if tag not in pool:
                raise ValueError(f"distractor target {tag!r} is not in the capability pool")
        if not targets:
            targets = None

    rng = derived_rng("inventory", seed)
    width = max(3, len(str(size - 1)))
    operable_count = size - distractor_count
    components: list[Component] = []

    for i in range(operable_count):
        if i < len(pool):
            tags = [pool[i]]
        else:
            tags = [pool[i % len(pool)]]
            extra_roll = rng.random()
            extra_count = 0 if extra_roll < 0.7 else (1 if extra_roll < 0.9 else 2)
            # a small pool cannot supply more distinct extras than it holds
            extra_count = min(extra_count, len(pool) - 1)
            while len(tags) - 1 < extra_count:
                candidate = pool[rng.randrange(len(pool))]
                if candidate not in tags:
                    tags.append(candidate)
        variant = rng.randrange(len(_TEMPLATES))
        # price tiers cycle by index so every capability is offered at
        # every tier once it has a few providers; with a pool of 23
        # tags a tag's providers land on all three tiers
        price = _PRICE_ORDER[i % len(_PRICE_ORDER)]
        reliability = levels[rng.randrange(len(levels))]
        cost = cost_override if cost_override is not None else cost_of(price)
        comp_id = f"c{i:0{width}d}"
        components.append(
            Component(
                id=comp_id,
                name=f"{tags[0]}_{i:0{width}d}",
                description=render_description(tags, variant),
                cost=cost,
                kind=kind,
                latent=LatentProfile(
                    capabilities=frozenset(tags),
                    reliability=reliability,
                    operable=True,
                ),
            )
        )

    by_tag: dict[str, list[Component]] = {tag: [] for tag in pool}
    exact_tag: dict[str, list[Component]] = {tag: [] for tag in pool}
    for comp in components:
        assert comp.latent is not None
        comp_tags = sorted(comp.latent.capabilities)
        for tag in comp_tags:
            by_tag[tag].append(comp)
        if len(comp_tags) == 1:
            exact_tag[comp_tags[0]].append(comp)

    for j in range(distractor_count):
        if targets is not None:
            tag = targets[j % len(targets)]
            candidates = exact_tag[tag] or by_tag[tag]
            if not candidates:
                raise ValueError(f"no operable component carries distractor target {tag!r}")
        else:
            candidates = components[:operable_count]
        base = candidates[rng.randrange(len(candidates))]
        idx = operable_count + j
        price = _PRICE_ORDER[idx % len(_PRICE_ORDER)]
        cost = cost_override if cost_override is not None else cost_of(price)
        assert base.latent is not None
        primary = sorted(base.latent.capabilities)[0]
        components.append(
            Component(
                id=f"c{idx:0{width}d}",
                name=f"{primary}_{idx:0{width}d}",
                description=distill_description(base.description),
                cost=cost,
                kind=kind,
                latent=LatentProfile(
                    capabilities=frozenset(),
                    reliability=Fraction(0),
                    operable=False,
                ),
            )
        )

    metadata = {
        "seed": seed,
        "size": size,
        "distractor_count": distractor_count,
        "kind": kind.value,
        "capability_pool": list(pool),
        "cost_override": None if cost_override is None else rational_to_jsonable(cost_override),
        "reliability_levels": [rational_to_jsonable(r) for r in levels],
        "distractor_targets": None if targets is None else list(targets),
    }
    return Inventory(components=tuple(components), metadata=metadata)


def inventory_to_jsonable(inventory: Inventory) -> dict:
    return {
        "metadata": dict(inventory.metadata),
        "components": [
            {
                "id": c.id,
                "name": c.name,
                "description": c.description,
                "cost": rational_to_jsonable(c.cost),
                "kind": c.kind.value,
            }
            for c in inventory.components
        ],
    }


def ground_truth_of(inventory: Inventory) -> dict[str, LatentProfile]:
    """Extract the latent profiles; errors if any component lacks one."""
    truth: dict[str, LatentProfile] = {}
    for comp in inventory.components:
        if comp.latent is None:
            raise ValueError(f"component {comp.id!r} has no latent profile attached")
        truth[comp.id] = comp.latent
    return truth


def ground_truth_to_jsonable(truth: Mapping[str, LatentProfile]) -> dict:
    return {
        cid: {
            "capabilities": sorted(profile.capabilities),
            "reliability": rational_to_jsonable(profile.reliability),
            "operable": profile.operable,
        }
        for cid, profile in sorted(truth.items())
    }


def _dump_json(obj: object, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def save_inventory(inventory: Inventory, path: str | Path) -> None:
    """Write the public inventory file (latent profiles excluded)."""
    _dump_json(inventory_to_jsonable(inventory), path)


def save_ground_truth(truth: Mapping[str, LatentProfile], path: str | Path) -> None:
    _dump_json(ground_truth_to_jsonable(truth), path)


def _expect(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise SchemaError(f"{path}: {message}")


def _parse_rational_field(value: object, path: str, *, positive: bool = False) -> Fraction:
    try:
        parsed = rational_from_jsonable(value)  # type: ignore[arg-type]
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"{path}: expected a rational number, got {value!r}") from exc
    if positive and parsed <= 0:
        raise SchemaError(f"{path}: expected a positive rational, got {value!r}")
    return parsed


def load_inventory(path: str | Path) -> Inventory:
    """Read and validate an inventory file.

    Schema violations raise :class:`SchemaError` naming the offending
    field path; duplicate component ids are schema violations too.
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    _expect(isinstance(raw, dict), "$", "expected a JSON object")
    metadata = raw.get("metadata", {})
    _expect(isinstance(metadata, dict), "metadata", "expected a JSON object")
    items = raw.get("components")
    _expect(isinstance(items, list), "components", "expected a JSON array")
    components: list[Component] = []
    seen: set[str] = set()
    for idx, entry in enumerate(items):
        where = f"components[{idx}]"
        _expect(isinstance(entry, dict), where, "expected a JSON object")
        cid = entry.get("id")
        _expect(isinstance(cid, str) and bool(cid), f"{where}.id", "expected a non-empty string")
        _expect(cid not in seen, f"{where}.id", f"duplicate component id {cid!r}")
        seen.add(cid)
        name = entry.get("name")
        _expect(isinstance(name, str) and bool(name), f"{where}.name", "expected a non-empty string")
        description = entry.get("description")
        _expect(isinstance(description, str), f"{where}.description", "expected a string")
        cost = _parse_rational_field(entry.get("cost"), f"{where}.cost", positive=True)
        kind_raw = entry.get("kind")
        try:
            kind = ComponentKind(kind_raw)
        except ValueError:
            raise SchemaError(
                f"{where}.kind: expected one of {[k.value for k in ComponentKind]}, got {kind_raw!r}"
            ) from None
        components.append(Component(id=cid, name=name, description=description, cost=cost, kind=kind))
    return Inventory(components=tuple(components), metadata=metadata)


def load_ground_truth(path: str | Path) -> dict[str, LatentProfile]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    _expect(isinstance(raw, dict), "$", "expected a JSON object")
    truth: dict[str, LatentProfile] = {}
    for cid, entry in raw.items():
        where = f"$[{cid!r}]"
        _expect(isinstance(entry, dict), where, "expected a JSON object")
        caps = entry.get("capabilities")
        _expect(isinstance(caps, list) and all(isinstance(t, str) for t in caps),
                f"{where}.capabilities", "expected an array of strings")
        reliability = _parse_rational_field(entry.get("reliability"), f"{where}.reliability")
        _expect(0 <= reliability <= 1, f"{where}.reliability", "expected a rational in [0, 1]")
        operable = entry.get("operable")
        _expect(isinstance(operable, bool), f"{where}.operable", "expected a boolean")
        truth[cid] = LatentProfile(
            capabilities=frozenset(caps),
            reliability=reliability,
            operable=operable,
        )
    return truth


def attach_ground_truth(inventory: Inventory, truth: Mapping[str, LatentProfile]) -> Inventory:
    """Return a copy of the inventory with latent profiles attached."""
    missing = [c.id for c in inventory.components if c.id not in truth]
    if missing:
        raise ValueError(f"ground truth missing for component ids: {missing}")
    rebuilt = tuple(
        Component(
            id=c.id, name=c.name, description=c.description,
            cost=c.cost, kind=c.kind, latent=truth[c.id],
        )
        for c in inventory.components
    )
    return Inventory(components=rebuilt, metadata=inventory.metadata)


def iter_operable(inventory: Inventory) -> Iterable[Component]:
    for comp in inventory.components:
        if comp.latent is not None and comp.latent.operable:
            yield comp
