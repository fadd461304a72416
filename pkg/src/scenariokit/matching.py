"""Relations between scenario categories and scenarios.

``comprises(C, S)`` decides structurally whether category ``C`` abstracts
scenario ``S``: every actor, physical element and activity category of ``C``
must be realised by a distinct element of ``S`` with a compatible type and
tags that imply the category's tags, and every act of ``C`` must appear in
``S`` under that assignment.

``includes(C2, C1)`` is a sufficient test for "C2 comprises every scenario
C1 comprises".  It can miss inclusions that rely on semantic overlap the
structure does not show.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from .model import (
    Activity,
    ActivityCategory,
    Actor,
    ActorCategory,
    PhysicalElement,
    PhysicalElementCategory,
    Scenario,
    ScenarioCategory,
    derived_tags,
)
from .tags import Tag, TagRegistry, UnknownTag, default_registry

__all__ = [
    "BudgetExceeded",
    "MATCH_BUDGET",
    "comprises",
    "includes",
    "select",
    "parse_tag_query",
    "TagQuery",
]

MATCH_BUDGET = 10_000


class BudgetExceeded(RuntimeError):
    pass


# --- bipartite matching --------------------------------------------------------


def _has_saturating_matching(candidates: Sequence[Sequence[int]], n_right: int) -> bool:
    """Kuhn's augmenting paths: can every left vertex get its own right vertex?"""
    owner = [-1] * n_right

    def augment(u: int, seen: list[bool]) -> bool:
        for v in candidates[u]:
            if seen[v]:
                continue
            seen[v] = True
            if owner[v] == -1 or augment(owner[v], seen):
                owner[v] = u
                return True
        return False

    return all(augment(u, [False] * n_right) for u in range(len(candidates)))


def _injective_assignments(candidates: Sequence[Sequence[int]], budget: list[int]):
    """Yield every injective assignment left -> right allowed by ``candidates``."""
    n = len(candidates)
    order = sorted(range(n), key=lambda i: len(candidates[i]))
    chosen = [-1] * n
    used: set[int] = set()

    def rec(k: int):
        if k == n:
            budget[0] -= 1
            if budget[0] < 0:
                raise BudgetExceeded(f"more than {MATCH_BUDGET} assignments tried")
            yield tuple(chosen)
            return
        i = order[k]
        for v in candidates[i]:
            if v in used:
                continue
            used.add(v)
            chosen[i] = v
            yield from rec(k + 1)
            used.discard(v)
        chosen[i] = -1

    yield from rec(0)


def _search(
    actor_cands: list[list[int]],
    activity_cands: list[list[int]],
    phys_cands: list[list[int]],
    n_actor: int,
    n_activity: int,
    n_phys: int,
    acts_ok: Callable[[tuple[int, ...], tuple[int, ...]], bool],
) -> bool:
    for cands, n in ((actor_cands, n_actor), (activity_cands, n_activity), (phys_cands, n_phys)):
        if not _has_saturating_matching(cands, n):
            return False
    budget = [MATCH_BUDGET]
    for actors in _injective_assignments(actor_cands, budget):
        for activities in _injective_assignments(activity_cands, budget):
            if acts_ok(actors, activities):
                return True
    return False


# --- compatibility rules ---------------------------------------------------------


def _implies_all(registry: TagRegistry, specific: Iterable[str], general: Iterable[str]) -> bool:
    have = [registry.resolve(t) for t in specific]
    return all(any(s.implies(registry.resolve(g)) for s in have) for g in general)


def _element_tags(el) -> tuple[str, ...]:
    return tuple(el.tags) + tuple(el.category.tags)


def _actor_fits(reg: TagRegistry, actor: Actor, cat: ActorCategory) -> bool:
    return actor.category.actor_type is cat.actor_type and _implies_all(reg, _element_tags(actor), cat.tags)


def _activity_fits(reg: TagRegistry, activity: Activity, cat: ActivityCategory) -> bool:
    own = activity.category
    return (
        own.model == cat.model
        and set(own.state_variables) == set(cat.state_variables)
        and _implies_all(reg, _element_tags(activity), cat.tags)
    )


def _physical_fits(reg: TagRegistry, element: PhysicalElement, cat: PhysicalElementCategory) -> bool:
    return _implies_all(reg, _element_tags(element), cat.tags)


def _index_of(seq: Sequence, item) -> int:
    for i, x in enumerate(seq):
        if x is item:
            return i
    for i, x in enumerate(seq):
        if x == item:
            return i
    return -1


def comprises(category: ScenarioCategory, scenario: Scenario, registry: TagRegistry | None = None) -> bool:
    """True iff ``category`` is a structural abstraction of ``scenario``."""
    reg = registry or default_registry()
    actors, activities, physicals = scenario.actors, scenario.activities, scenario.physical_elements
    actor_cands = [[j for j, a in enumerate(actors) if _actor_fits(reg, a, c)] for c in category.actor_categories]
    activity_cands = [
        [j for j, v in enumerate(activities) if _activity_fits(reg, v, c)] for c in category.activity_categories
    ]
    phys_cands = [
        [j for j, p in enumerate(physicals) if _physical_fits(reg, p, c)] for c in category.physical_element_categories
    ]
    scenario_acts = {(_index_of(actors, a.actor), _index_of(activities, a.activity)) for a in scenario.acts}
    cat_acts = [
        (_index_of(category.actor_categories, a.actor_category), _index_of(category.activity_categories, a.activity_category))
        for a in category.acts
    ]

    def acts_ok(actor_map, activity_map):
        return all((actor_map[i], activity_map[j]) in scenario_acts for i, j in cat_acts)

    return _search(
        actor_cands, activity_cands, phys_cands, len(actors), len(activities), len(physicals), acts_ok
    )


def includes(c2: ScenarioCategory, c1: ScenarioCategory, registry: TagRegistry | None = None) -> bool:
    """Sufficient test that ``c2`` comprises every scenario ``c1`` comprises."""
    reg = registry or default_registry()

    def actor_ok(specific: ActorCategory, general: ActorCategory) -> bool:
        return specific.actor_type is general.actor_type and _implies_all(reg, specific.tags, general.tags)

    def activity_ok(specific: ActivityCategory, general: ActivityCategory) -> bool:
        return (
            specific.model == general.model
            and set(specific.state_variables) == set(general.state_variables)
            and _implies_all(reg, specific.tags, general.tags)
        )

    actor_cands = [[j for j, a in enumerate(c1.actor_categories) if actor_ok(a, g)] for g in c2.actor_categories]
    activity_cands = [
        [j for j, v in enumerate(c1.activity_categories) if activity_ok(v, g)] for g in c2.activity_categories
    ]
    phys_cands = [
        [j for j, p in enumerate(c1.physical_element_categories) if _implies_all(reg, p.tags, g.tags)]
        for g in c2.physical_element_categories
    ]
    c1_acts = {
        (_index_of(c1.actor_categories, a.actor_category), _index_of(c1.activity_categories, a.activity_category))
        for a in c1.acts
    }
    c2_acts = [
        (_index_of(c2.actor_categories, a.actor_category), _index_of(c2.activity_categories, a.activity_category))
        for a in c2.acts
    ]

    def acts_ok(actor_map, activity_map):
        return all((actor_map[i], activity_map[j]) in c1_acts for i, j in c2_acts)

    return _search(
        actor_cands,
        activity_cands,
        phys_cands,
        len(c1.actor_categories),
        len(c1.activity_categories),
        len(c1.physical_element_categories),
        acts_ok,
    )


# --- tag queries -----------------------------------------------------------------


@dataclass(frozen=True)
class TagQuery:
    op: str  # "tag", "and", "or", "not"
    args: tuple = ()
    tag: Tag | None = None

    def matches(self, tags: frozenset[Tag]) -> bool:
        if self.op == "tag":
            return self.tag in tags
        if self.op == "not":
            return not self.args[0].matches(tags)
        if self.op == "and":
            return all(a.matches(tags) for a in self.args)
        return any(a.matches(tags) for a in self.args)


_QUERY_TOKEN = re.compile(r"\s*(\(|\)|\bAND\b|\bOR\b|\bNOT\b|&&|\|\||!|[^()!&|]+?(?=\s*(?:\(|\)|\bAND\b|\bOR\b|\bNOT\b|&&|\|\||!|$)))")


def parse_tag_query(text: str, registry: TagRegistry | None = None) -> TagQuery:
    """Parse ``"Ego vehicle AND (Decelerating OR NOT Cruising)"``.

    Atoms are tag labels or partial paths; unknown atoms raise
    :class:`~scenariokit.tags.UnknownTag`.
    """
    reg = registry or default_registry()
    tokens: list[str] = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _QUERY_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse tag query at position {pos}: {text!r}")
        tok = m.group(1).strip()
        if tok:
            tokens.append({"&&": "AND", "||": "OR", "!": "NOT"}.get(tok, tok))
        pos = m.end()
    i = 0

    def peek():
        return tokens[i] if i < len(tokens) else None

    def take():
        nonlocal i
        i += 1
        return tokens[i - 1]

    def or_():
        items = [and_()]
        while peek() == "OR":
            take()
            items.append(and_())
        return items[0] if len(items) == 1 else TagQuery("or", tuple(items))

    def and_():
        items = [not_()]
        while peek() == "AND":
            take()
            items.append(not_())
        return items[0] if len(items) == 1 else TagQuery("and", tuple(items))

    def not_():
        if peek() == "NOT":
            take()
            return TagQuery("not", (not_(),))
        if peek() == "(":
            take()
            inner = or_()
            if peek() != ")":
                raise ValueError(f"missing ')' in tag query {text!r}")
            take()
            return inner
        tok = peek()
        if tok is None or tok in ("AND", "OR", ")"):
            raise ValueError(f"expected a tag in query {text!r}")
        take()
        return TagQuery("tag", tag=reg.resolve(tok))

    if not tokens:
        raise ValueError("empty tag query")
    query = or_()
    if i != len(tokens):
        raise ValueError(f"unexpected {tokens[i]!r} in tag query {text!r}")
    return query


def select(
    library: Iterable[Scenario], query: str | TagQuery, registry: TagRegistry | None = None
) -> list[Scenario]:
    """Scenarios whose derived tags satisfy ``query``, in input order."""
    reg = registry or default_registry()
    q = query if isinstance(query, TagQuery) else parse_tag_query(query, reg)
    return [s for s in library if q.matches(derived_tags(s, reg))]
