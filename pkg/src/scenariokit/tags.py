"""Hierarchical tag trees.

A tag implies every ancestor in its tree: a scenario tagged "Decelerating"
is also "Driving forward" and a "Vehicle longitudinal activity".  Leaf labels
may repeat across branches ("Left" under both "Turning" and "Changing lane"),
so tags are identified internally by their full path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Sequence, Union

__all__ = [
    "Tag",
    "TagError",
    "UnknownTag",
    "AmbiguousTag",
    "TagRegistry",
    "register_default_trees",
    "default_registry",
    "tag_implies",
    "EGO_VEHICLE",
]

EGO_VEHICLE = "Ego vehicle"
SEPARATOR = "/"


class TagError(ValueError):
    pass


class UnknownTag(TagError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown tag {name!r}")


class AmbiguousTag(TagError):
    def __init__(self, name: str, candidates: Sequence["Tag"]):
        self.name = name
        self.candidates = tuple(candidates)
        options = ", ".join(str(c) for c in candidates)
        super().__init__(f"tag {name!r} is ambiguous; qualify it as one of: {options}")


@dataclass(frozen=True, order=True)
class Tag:
    path: tuple[str, ...]

    @property
    def name(self) -> str:
        return self.path[-1]

    @property
    def ancestors(self) -> tuple["Tag", ...]:
        """Strict ancestors, root first."""
        return tuple(Tag(self.path[:i]) for i in range(1, len(self.path)))

    def implies(self, general: "Tag") -> bool:
        return self.path[: len(general.path)] == general.path

    def __str__(self) -> str:
        return SEPARATOR.join(self.path)


TagLike = Union[str, Tag]


class TagRegistry:
    """A forest of tag trees with name resolution.

    ``trees`` maps each root label to its nested children, for example
    ``{"Turning": {"Left": {}, "Right": {}}}`` under a root.
    """

    def __init__(self, trees: Mapping[str, Mapping] | None = None):
        self._trees: dict[str, dict] = {}
        self._tags: dict[tuple[str, ...], Tag] = {}
        self._by_name: dict[str, list[Tag]] = {}
        for root, children in (trees or {}).items():
            self.add_tree(root, children)

    def add_tree(self, root: str, children: Mapping | None = None) -> None:
        if not root or SEPARATOR in root:
            raise TagError(f"invalid tag label {root!r}")
        if (root,) in self._tags:
            raise TagError(f"tree {root!r} is already registered")
        self._trees[root] = _freeze(children or {})
        self._index((root,), self._trees[root])

    def _index(self, path: tuple[str, ...], children: Mapping) -> None:
        label = path[-1]
        if not label or SEPARATOR in label:
            raise TagError(f"invalid tag label {label!r}")
        tag = Tag(path)
        self._tags[path] = tag
        self._by_name.setdefault(label, []).append(tag)
        for child, grandchildren in children.items():
            self._index(path + (child,), grandchildren)

    @property
    def trees(self) -> dict[str, dict]:
        return self._trees

    def __contains__(self, item: TagLike) -> bool:
        try:
            self.resolve(item)
        except TagError:
            return False
        return True

    def __iter__(self):
        return iter(self._tags.values())

    def __len__(self) -> int:
        return len(self._tags)

    def resolve(self, item: TagLike) -> Tag:
        """Map a label, partial path (``"Turning/Left"``) or Tag to its node."""
        if isinstance(item, Tag):
            if item.path in self._tags:
                return item
            raise UnknownTag(str(item))
        parts = tuple(p.strip() for p in item.split(SEPARATOR))
        if parts in self._tags:
            return self._tags[parts]
        matches = [t for t in self._by_name.get(parts[-1], ()) if t.path[-len(parts):] == parts]
        if not matches:
            raise UnknownTag(item)
        if len(matches) > 1:
            raise AmbiguousTag(item, matches)
        return matches[0]

    def closure(self, tags: Iterable[TagLike]) -> frozenset[Tag]:
        """Resolved tags together with all of their ancestors."""
        out: set[Tag] = set()
        for item in tags:
            tag = self.resolve(item)
            out.add(tag)
            out.update(tag.ancestors)
        return frozenset(out)

    def implies(self, specific: TagLike, general: TagLike) -> bool:
        return self.resolve(specific).implies(self.resolve(general))

    def to_dict(self) -> dict:
        return {"trees": _thaw(self._trees)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "TagRegistry":
        return cls(data["trees"])

    def __eq__(self, other) -> bool:
        return isinstance(other, TagRegistry) and self._trees == other._trees

    def __repr__(self) -> str:
        return f"TagRegistry({len(self._trees)} trees, {len(self._tags)} tags)"


def _freeze(children: Mapping) -> dict:
    return {str(k): _freeze(v or {}) for k, v in children.items()}


def _thaw(children: Mapping) -> dict:
    return {k: _thaw(v) for k, v in children.items()}


def register_default_trees() -> TagRegistry:
    """Registry with the vehicle lateral/longitudinal trees and "Ego vehicle"."""
    text = resources.files("scenariokit").joinpath("fixtures/tag_trees.scn.json").read_text("utf-8")
    return TagRegistry.from_dict(json.loads(text)["body"])


@lru_cache(maxsize=1)
def default_registry() -> TagRegistry:
    return register_default_trees()


def tag_implies(registry: TagRegistry, specific: TagLike, general: TagLike) -> bool:
    """True iff ``general`` is ``specific`` or one of its ancestors."""
    return registry.implies(specific, general)
