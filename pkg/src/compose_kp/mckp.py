"""Exact knapsack-with-coverage solver and its brute-force oracle.

The problem: pick a subset of items maximizing total value subject to
a budget, where every group (a set of item ids) should intersect the
chosen subset.  Coverage outranks value: the solver lexicographically
maximizes (groups covered, total value), then prefers lower total
cost, then the lexicographically smallest sorted id tuple, so results
are fully deterministic.  A solution is feasible when all groups are
covered; when full coverage is unaffordable the best partial cover is
returned with the uncovered group indices.

All arithmetic is exact: rational inputs are rescaled to integers and
the branch-and-bound bound uses an exact fractional relaxation, so no
tolerance enters feasibility or optimality.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

MAX_BRUTE_FORCE_ITEMS = 20


class OracleSizeError(ValueError):
    """Brute force refused an instance above its size cap."""


@dataclass(frozen=True)
class MckpItem:
    id: str
    value: Fraction
    cost: Fraction

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("item id must be non-empty")
        if self.value < 0:
            raise ValueError(f"item {self.id!r} value must be non-negative, got {self.value}")
        if self.cost <= 0:
            raise ValueError(f"item {self.id!r} cost must be positive, got {self.cost}")


@dataclass(frozen=True)
class MckpInstance:
    items: tuple[MckpItem, ...]
    budget: Fraction
    groups: tuple[frozenset[str], ...] = ()

    def __post_init__(self) -> None:
        if self.budget < 0:
            raise ValueError(f"budget must be non-negative, got {self.budget}")
        ids = [item.id for item in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("item ids must be unique")
        known = set(ids)
        for gi, group in enumerate(self.groups):
            unknown = group - known
            if unknown:
                raise ValueError(f"group {gi} references unknown item ids {sorted(unknown)}")


@dataclass(frozen=True)
class MckpSolution:
    chosen: frozenset[str]
    objective: Fraction
    total_cost: Fraction
    feasible: bool
    uncovered_groups: tuple[int, ...]


def _scaled(instance: MckpInstance) -> tuple[list[int], list[int], int, int, int]:
    """Rescale values and costs to integers; returns (vals, costs, budget, vden, cden)."""
    vden = math.lcm(*(item.value.denominator for item in instance.items)) if instance.items else 1
    cden = math.lcm(
        instance.budget.denominator,
        *(item.cost.denominator for item in instance.items),
    ) if instance.items else instance.budget.denominator
    vals = [int(item.value * vden) for item in instance.items]
    costs = [int(item.cost * cden) for item in instance.items]
    budget = int(instance.budget * cden)
    return vals, costs, budget, vden, cden


def _group_masks(instance: MckpInstance) -> list[int]:
    masks = [0] * len(instance.items)
    for gi, group in enumerate(instance.groups):
        bit = 1 << gi
        for idx, item in enumerate(instance.items):
            if item.id in group:
                masks[idx] |= bit
    return masks


def _solution(
    instance: MckpInstance,
    ids: Sequence[str],
    val_scaled: int,
    cost_scaled: int,
    covmask: int,
    vden: int,
    cden: int,
) -> MckpSolution:
    uncovered = tuple(gi for gi in range(len(instance.groups)) if not covmask & (1 << gi))
    return MckpSolution(
        chosen=frozenset(ids),
        objective=Fraction(val_scaled, vden),
        total_cost=Fraction(cost_scaled, cden),
        feasible=not uncovered,
        uncovered_groups=uncovered,
    )


def solve_exact(instance: MckpInstance) -> MckpSolution:
    """Branch-and-bound with an exact fractional-relaxation bound.

    Coverage is folded into a single objective F = C * covered + value
    with C larger than any possible value sum, which makes the
    (coverage, value) lexicographic order a plain maximization.  The
    bound adds, per uncovered group, full credit C whenever some
    remaining member still fits the remaining budget, plus the
    classic fractional knapsack bound over remaining items.
    """
    n = len(instance.items)
    vals, costs, budget, vden, cden = _scaled(instance)
    gmasks = _group_masks(instance)
    num_groups = len(instance.groups)
    big = sum(vals) + 1

    order = sorted(range(n), key=lambda i: (-Fraction(vals[i], costs[i]), instance.items[i].id))
    svals = [vals[i] for i in order]
    scosts = [costs[i] for i in order]
    sgmasks = [gmasks[i] for i in order]
    sids = [instance.items[i].id for i in order]

    # prefix sums over the density ordering, for the fractional bound
    pcost = [0] * (n + 1)
    pval = [0] * (n + 1)
    for j in range(n):
        pcost[j + 1] = pcost[j] + scosts[j]
        pval[j + 1] = pval[j] + svals[j]

    # per group: member positions (ascending) and suffix-min member cost
    group_pos: list[list[int]] = [[] for _ in range(num_groups)]
    for pos in range(n):
        mask = sgmasks[pos]
        while mask:
            low = mask & -mask
            group_pos[low.bit_length() - 1].append(pos)
            mask ^= low
    group_sufmin: list[list[int]] = []
    for gi in range(num_groups):
        positions = group_pos[gi]
        sufmin = [0] * len(positions)
        running = None
        for k in range(len(positions) - 1, -1, -1):
            cost_k = scosts[positions[k]]
            running = cost_k if running is None else min(running, cost_k)
            sufmin[k] = running
        group_sufmin.append(sufmin)

    best_f = -1
    best_cost = 0
    best_ids: tuple[str, ...] = ()
    best_val = 0
    best_cov = 0

    def consider(covmask: int, val: int, cost: int, chosen: list[str]) -> None:
        nonlocal best_f, best_cost, best_ids, best_val, best_cov
        f = big * covmask.bit_count() + val
        if f < best_f:
            return
        if f == best_f:
            if cost > best_cost:
                return
            if cost == best_cost:
                ids_sorted = tuple(sorted(chosen))
                if ids_sorted >= best_ids:
                    return
                best_ids = ids_sorted
                return
        best_f = f
        best_cost = cost
        best_ids = tuple(sorted(chosen))
        best_val = val
        best_cov = covmask

    def upper_bound(depth: int, covmask: int, remaining: int) -> Fraction:
        potential = 0
        for gi in range(num_groups):
            if covmask & (1 << gi):
                continue
            positions = group_pos[gi]
            k = bisect_right(positions, depth - 1)
            if k < len(positions) and group_sufmin[gi][k] <= remaining:
                potential += 1
        limit = pcost[depth] + remaining
        m = bisect_right(pcost, limit, depth, n + 1) - 1
        frac = Fraction(0)
        bound_val = pval[m] - pval[depth]
        if m < n:
            leftover = remaining - (pcost[m] - pcost[depth])
            if leftover > 0:
                frac = Fraction(leftover * svals[m], scosts[m])
        return Fraction(big * (covmask.bit_count() + potential) + bound_val) + frac

    chosen: list[str] = []

    def walk(depth: int, covmask: int, val: int, cost: int) -> None:
        consider(covmask, val, cost, chosen)
        if depth == n:
            return
        remaining = budget - cost
        bound = Fraction(val) + upper_bound(depth, covmask, remaining)
        if bound < best_f or (bound == best_f and cost >= best_cost):
            return
        if scosts[depth] <= remaining:
            chosen.append(sids[depth])
            walk(depth + 1, covmask | sgmasks[depth], val + svals[depth], cost + scosts[depth])
            chosen.pop()
        walk(depth + 1, covmask, val, cost)

    walk(0, 0, 0, 0)
    return _solution(instance, best_ids, best_val, best_cost, best_cov, vden, cden)


def brute_force(instance: MckpInstance) -> MckpSolution:
    """Exhaustive oracle over all subsets; same tie-breaking order.

    Only intended for verification; instances above
    ``MAX_BRUTE_FORCE_ITEMS`` items raise :class:`OracleSizeError`.
    """
    n = len(instance.items)
    if n > MAX_BRUTE_FORCE_ITEMS:
        raise OracleSizeError(
            f"brute force handles at most {MAX_BRUTE_FORCE_ITEMS} items, got {n}"
        )
    vals, costs, budget, vden, cden = _scaled(instance)
    gmasks = _group_masks(instance)

    order = sorted(range(n), key=lambda i: instance.items[i].id)
    ovals = [vals[i] for i in order]
    ocosts = [costs[i] for i in order]
    ogmasks = [gmasks[i] for i in order]
    oids = [instance.items[i].id for i in order]

    def ids_of(subset: int) -> tuple[str, ...]:
        # items are in ascending id order, so bit order is id order
        out = []
        bit = 0
        while subset:
            if subset & 1:
                out.append(oids[bit])
            subset >>= 1
            bit += 1
        return tuple(out)

    total = 1 << n
    sub_cost = [0] * total
    sub_val = [0] * total
    sub_mask = [0] * total

    best_subset = 0
    best_cov = 0
    best_val = 0
    best_cost = 0

    for subset in range(1, total):
        low = subset & -subset
        idx = low.bit_length() - 1
        rest = subset ^ low
        cost = sub_cost[rest] + ocosts[idx]
        val = sub_val[rest] + ovals[idx]
        mask = sub_mask[rest] | ogmasks[idx]
        sub_cost[subset] = cost
        sub_val[subset] = val
        sub_mask[subset] = mask
        if cost > budget:
            continue
        cov = mask.bit_count()
        if cov < best_cov:
            continue
        if cov == best_cov:
            if val < best_val:
                continue
            if val == best_val:
                if cost > best_cost:
                    continue
                if cost == best_cost and ids_of(subset) >= ids_of(best_subset):
                    continue
        best_subset = subset
        best_cov = cov
        best_val = val
        best_cost = cost

    return _solution(
        instance,
        ids_of(best_subset),
        best_val,
        best_cost,
        sub_mask[best_subset],
        vden,
        cden,
    )
