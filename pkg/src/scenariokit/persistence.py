"""The ``.scn.json`` file format and scenario libraries.

A file is a JSON object ``{"format_version", "kind", "imports", "body"}``.
Elements are written inline, with a ``"type"`` discriminator, the first time
they are met while walking the object graph; every later occurrence is a
reference ``{"$ref": "<uid>"}``.  Elements defined in another file are also
written as references, and that file is listed under ``imports`` (paths
relative to the importing file).  Output is canonical: keys sorted, two-space
indent, floats in shortest round-trip form, so equal inputs give identical
bytes.

A :class:`Library` is a directory of such files plus an ``index.scn.json``
that maps every defined uid to the file defining it.  Loading through a
library resolves references across files and keeps one instance per uid.
"""

from __future__ import annotations

import json
import os
from dataclasses import fields
from importlib import resources
from pathlib import Path
from typing import Any, Iterator, Mapping, Union

from . import conditions as cond
from .model import (
    Act,
    Activity,
    ActivityCategory,
    Actor,
    ActorCategory,
    CategoryAct,
    Event,
    PhysicalElement,
    PhysicalElementCategory,
    Property,
    QualitativeElement,
    Scenario,
    ScenarioCategory,
    ScenarioElement,
    StateVector,
    ValidationReport,
    validate,
)
from .tags import TagRegistry, default_registry

__all__ = [
    "FORMAT_VERSION",
    "SUFFIX",
    "INDEX_NAME",
    "PersistenceError",
    "ParseError",
    "UnresolvedReference",
    "VersionMismatch",
    "ValidationFailed",
    "DuplicateUid",
    "IOFailure",
    "LibraryError",
    "dumps",
    "loads",
    "save",
    "load",
    "Library",
    "bundled_fixtures",
    "fixtures_dir",
]

FORMAT_VERSION = "1.0.0"
SUFFIX = ".scn.json"
INDEX_NAME = "index" + SUFFIX
KINDS = ("scenario", "scenario_category", "tag_trees", "library_index")

Element = Union[Scenario, ScenarioCategory]
Loaded = Union[Scenario, ScenarioCategory, TagRegistry, dict]


class PersistenceError(Exception):
    pass


class ParseError(PersistenceError, ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None, path: str | None = None):
        self.line, self.column, self.path = line, column, path
        where = ""
        if path:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:{column}:"
        super().__init__(f"{where} {message}".strip())


class UnresolvedReference(PersistenceError, KeyError):
    def __init__(self, uid: str, path: str | None = None):
        self.uid = uid
        suffix = f" in {path}" if path else ""
        super().__init__(f"unresolved reference to uid {uid!r}{suffix}")

    def __str__(self) -> str:
        return self.args[0]


class VersionMismatch(PersistenceError):
    pass


class ValidationFailed(PersistenceError):
    def __init__(self, report: ValidationReport, path: str | None = None):
        self.report = report
        super().__init__(f"{path or 'element'} is invalid:\n{report}")


class DuplicateUid(PersistenceError):
    def __init__(self, uid: str, detail: str = ""):
        self.uid = uid
        super().__init__(f"duplicate uid {uid!r}" + (f": {detail}" if detail else ""))


class IOFailure(PersistenceError, OSError):
    pass


class LibraryError(PersistenceError):
    pass


_TYPES: dict[str, type] = {
    cls.__name__: cls
    for cls in (
        PhysicalElementCategory,
        ActorCategory,
        ActivityCategory,
        PhysicalElement,
        Actor,
        Event,
        Activity,
        Scenario,
        ScenarioCategory,
    )
}
_ROOT_KIND = {Scenario: "scenario", ScenarioCategory: "scenario_category"}


# --- encoding ---------------------------------------------------------------------


class _Encoder:
    def __init__(self, external: Mapping[str, ScenarioElement]):
        self.external = external
        self.seen: dict[str, ScenarioElement] = {}
        self.used_external: set[str] = set()

    def element(self, el: ScenarioElement) -> dict:
        other = self.seen.get(el.uid)
        if other is not None:
            if other is not el and other != el:
                raise DuplicateUid(el.uid, "two different elements share it")
            return {"$ref": el.uid}
        ext = self.external.get(el.uid)
        if ext is not None:
            if ext is not el and ext != el:
                raise DuplicateUid(el.uid, "it is already defined differently elsewhere in the library")
            self.used_external.add(el.uid)
            return {"$ref": el.uid}
        self.seen[el.uid] = el
        out: dict[str, Any] = {"type": type(el).__name__}
        # collections first, so shared members are defined where they are listed
        ordered = sorted(fields(el), key=lambda f: not isinstance(getattr(el, f.name), tuple))
        for f in ordered:
            out[f.name] = self.value(getattr(el, f.name))
        return out

    def value(self, v: Any) -> Any:
        if isinstance(v, ScenarioElement):
            return self.element(v)
        if isinstance(v, Act):
            return {"actor": self.element(v.actor), "activity": self.element(v.activity)}
        if isinstance(v, CategoryAct):
            return {
                "actor_category": self.element(v.actor_category),
                "activity_category": self.element(v.activity_category),
            }
        if isinstance(v, StateVector):
            return {"values": dict(v.values), "units": dict(v.units)}
        if isinstance(v, Property):
            return {"value": v.value, "unit": v.unit}
        if isinstance(v, tuple):
            return [self.value(x) for x in v]
        if isinstance(v, Mapping):
            return {str(k): self.value(x) for k, x in v.items()}
        if isinstance(v, (cond.Compare, cond.And, cond.Or, cond.Not, cond.Collision, cond.Linked)):
            return cond.to_text(v)
        if hasattr(v, "value") and isinstance(v, str):  # str enums
            return v.value
        return v


def _document(kind: str, body: Any, imports: list[str]) -> dict:
    return {"format_version": FORMAT_VERSION, "kind": kind, "imports": sorted(imports), "body": body}


def _canonical(doc: dict) -> str:
    try:
        return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"
    except ValueError as exc:
        raise PersistenceError(f"cannot serialise: {exc}") from None


def _encode(
    element: Union[Element, TagRegistry], external: Mapping[str, ScenarioElement] | None = None
) -> tuple[str, Any, set[str]]:
    if isinstance(element, TagRegistry):
        return "tag_trees", element.to_dict(), set()
    kind = _ROOT_KIND.get(type(element))
    if kind is None:
        raise TypeError(f"cannot save a {type(element).__name__}; save a Scenario, ScenarioCategory or TagRegistry")
    enc = _Encoder(external or {})
    body = enc.element(element)
    return kind, body, enc.used_external


def dumps(element: Union[Element, TagRegistry]) -> str:
    """Canonical text of a self-contained file for ``element``."""
    kind, body, _ = _encode(element)
    return _canonical(_document(kind, body, []))


def save(
    element: Union[Element, TagRegistry],
    path: Union[str, os.PathLike],
    library: "Library | None" = None,
) -> Path:
    """Write ``element`` to ``path``; with a library, reuse its definitions.

    Sub-elements the library already defines are written as references and the
    defining files are imported.  Raises :class:`DuplicateUid` when a uid in
    ``element`` is already defined differently in the library.
    """
    if library is not None:
        return library.save(element, path)
    if isinstance(element, (Scenario, ScenarioCategory)):
        _check_valid(element, None, str(path))
    path = Path(path)
    _write(path, dumps(element))
    return path


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc}") from exc


def _check_valid(element, registry: TagRegistry | None, where: str | None) -> None:
    report = validate(element, registry)
    if not report.ok:
        raise ValidationFailed(report, where)


# --- decoding ---------------------------------------------------------------------


def _parse_json(text: str, path: str | None) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno, path) from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", 1, 1, path)
    for key in ("format_version", "kind", "body"):
        if key not in doc:
            raise ParseError(f"missing field {key!r}", None, None, path)
    _check_version(doc["format_version"], path)
    if doc["kind"] not in KINDS:
        raise ParseError(f"unknown kind {doc['kind']!r}; expected one of {KINDS}", None, None, path)
    imports = doc.get("imports", [])
    if not isinstance(imports, list) or not all(isinstance(i, str) for i in imports):
        raise ParseError("imports must be a list of paths", None, None, path)
    return doc


def _check_version(version: Any, path: str | None) -> None:
    try:
        major = int(str(version).split(".")[0])
    except ValueError:
        raise VersionMismatch(f"{path or 'file'}: malformed format_version {version!r}") from None
    supported = int(FORMAT_VERSION.split(".")[0])
    if major != supported:
        raise VersionMismatch(f"{path or 'file'}: format_version {version!r} is not {supported}.x")


def _definitions(node: Any, out: dict[str, dict], path: str | None) -> None:
    if isinstance(node, dict):
        if "type" in node and "uid" in node:
            uid = node["uid"]
            if uid in out and out[uid] is not node:
                raise DuplicateUid(uid, f"defined twice in {path or 'document'}")
            out[uid] = node
        for v in node.values():
            _definitions(v, out, path)
    elif isinstance(node, list):
        for v in node:
            _definitions(v, out, path)


class _Decoder:
    def __init__(self, defs: Mapping[str, dict], cache: dict[str, ScenarioElement], resolve, path: str | None):
        self.defs = defs
        self.cache = cache
        self.resolve = resolve  # uid -> element for references outside the file
        self.path = path
        self.local: dict[str, ScenarioElement] = {}

    def ref(self, node: Any) -> ScenarioElement:
        if not isinstance(node, dict):
            raise ParseError(f"expected an element or reference, got {node!r}", path=self.path)
        if "$ref" in node:
            return self.element_by_uid(node["$ref"])
        if "type" in node and "uid" in node:
            return self.element_by_uid(node["uid"])
        raise ParseError(f"object without 'type'/'uid' or '$ref': {sorted(node)}", path=self.path)

    def element_by_uid(self, uid: str) -> ScenarioElement:
        if uid in self.local:
            return self.local[uid]
        if uid in self.defs:
            built = self.build(self.defs[uid])
            cached = self.cache.get(uid)
            if cached is not None:
                if cached != built:
                    raise DuplicateUid(uid, f"{self.path or 'document'} redefines it differently")
                built = cached
            self.cache[uid] = built
            self.local[uid] = built
            return built
        if uid in self.cache:
            return self.cache[uid]
        found = self.resolve(uid)
        if found is None:
            raise UnresolvedReference(uid, self.path)
        self.local[uid] = found
        return found

    def build(self, node: dict) -> ScenarioElement:
        cls = _TYPES.get(node["type"])
        if cls is None:
            raise ParseError(f"unknown element type {node['type']!r}", path=self.path)
        known = {f.name for f in fields(cls)}
        unknown = set(node) - known - {"type"}
        if unknown:
            raise ParseError(f"{node['type']} {node['uid']!r} has unknown fields {sorted(unknown)}", path=self.path)
        kwargs = {k: self.field(cls, k, v) for k, v in node.items() if k != "type"}
        try:
            return cls(**kwargs)
        except cond.ConditionError as exc:
            raise ParseError(f"{node['type']} {node['uid']!r}: bad condition: {exc}", path=self.path) from None
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{node['type']} {node['uid']!r}: {exc}", path=self.path) from None

    def field(self, cls: type, name: str, v: Any) -> Any:
        if name in ("category", "start_event", "end_event"):
            return self.ref(v)
        if name in (
            "physical_elements",
            "actors",
            "activities",
            "events",
            "physical_element_categories",
            "actor_categories",
            "activity_categories",
        ):
            return tuple(self.ref(x) for x in self._list(v, name))
        if name == "acts":
            if cls is ScenarioCategory:
                return tuple(
                    CategoryAct(self.ref(a["actor_category"]), self.ref(a["activity_category"]))
                    for a in self._list(v, name)
                )
            return tuple(Act(self.ref(a["actor"]), self.ref(a["activity"])) for a in self._list(v, name))
        if name in ("tags", "state_variables"):
            return tuple(self._list(v, name))
        if name in ("initial_state", "desired_state"):
            if v is None:
                return None
            return StateVector(v.get("values", {}), v.get("units", {}))
        if name == "properties":
            return {k: Property(p["value"], p.get("unit")) for k, p in v.items()}
        return v

    def _list(self, v: Any, name: str) -> list:
        if not isinstance(v, list):
            raise ParseError(f"field {name!r} must be a list", path=self.path)
        return v


def _decode_document(
    doc: dict,
    path: str | None,
    cache: dict[str, ScenarioElement],
    resolve,
) -> Loaded:
    kind, body = doc["kind"], doc["body"]
    if kind == "tag_trees":
        try:
            return TagRegistry.from_dict(body)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad tag trees: {exc}", path=path) from None
    if kind == "library_index":
        return body
    defs: dict[str, dict] = {}
    _definitions(body, defs, path)
    decoder = _Decoder(defs, cache, resolve, path)
    root = decoder.ref(body)
    expected = Scenario if kind == "scenario" else ScenarioCategory
    if type(root) is not expected:
        raise ParseError(f"kind {kind!r} but body is a {type(root).__name__}", path=path)
    return root


def loads(text: str, library: "Library | None" = None, *, registry: TagRegistry | None = None) -> Loaded:
    """Parse one document; references outside it are resolved through ``library``."""
    doc = _parse_json(text, None)
    if library is not None:
        return library._decode(doc, None)
    result = _decode_document(doc, None, {}, lambda uid: None)
    if isinstance(result, (Scenario, ScenarioCategory)):
        _check_valid(result, registry, None)
    return result


def load(path: Union[str, os.PathLike], library: "Library | None" = None) -> Loaded:
    """Load a file, following its imports and, failing that, the library index.

    The result is validated before it is returned.
    """
    if library is not None:
        return library.load_file(path)
    return _Loader(None).load_file(Path(path))


class _Loader:
    """Loads files and their imports sharing one uid cache."""

    def __init__(self, library: "Library | None"):
        self.library = library
        self.cache: dict[str, ScenarioElement] = library._cache if library else {}
        self.files: dict[Path, Loaded] = library._files if library else {}
        self.loading: set[Path] = set()

    def load_file(self, path: Path) -> Loaded:
        path = Path(path).resolve()
        if path in self.files:
            return self.files[path]
        if path in self.loading:
            raise ParseError("import cycle", path=str(path))
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise IOFailure(f"cannot read {path}: {exc}") from exc
        doc = _parse_json(text, str(path))
        self.loading.add(path)
        try:
            for imp in doc.get("imports", []):
                self.load_file(path.parent / imp)
            result = self.decode(doc, str(path))
        finally:
            self.loading.discard(path)
        self.files[path] = result
        return result

    def decode(self, doc: dict, where: str | None) -> Loaded:
        def resolve(uid: str):
            if self.library is None:
                return None
            target = self.library.index.get(uid)
            if target is None:
                return None
            self.load_file(self.library.root / target)
            return self.cache.get(uid)

        result = _decode_document(doc, where, self.cache, resolve)
        if isinstance(result, (Scenario, ScenarioCategory)):
            registry = self.library.registry if self.library else None
            _check_valid(result, registry, where)
        return result


# --- library ----------------------------------------------------------------------


class Library:
    """A directory of ``.scn.json`` files with a uid index.

    ``index.scn.json`` lists ``entries`` (uid -> relative path) and ``files``
    (relative path -> kind and root uid).  Without an index file the index is
    built in memory by scanning the directory, as it is with
    ``use_index=False``.
    """

    def __init__(self, root: Union[str, os.PathLike], *, use_index: bool = True):
        self.root = Path(root)
        if not self.root.is_dir():
            raise IOFailure(f"library root {self.root} is not a directory")
        self._cache: dict[str, ScenarioElement] = {}
        self._files: dict[Path, Loaded] = {}
        self._registry: TagRegistry | None = None
        index_path = self.root / INDEX_NAME
        if use_index and index_path.exists():
            doc = _parse_json(index_path.read_text(encoding="utf-8"), str(index_path))
            if doc["kind"] != "library_index":
                raise ParseError("index file is not a library_index", path=str(index_path))
            self.index: dict[str, str] = dict(doc["body"].get("entries", {}))
            self.files: dict[str, dict] = dict(doc["body"].get("files", {}))
            missing = sorted(p for p in self.files if not (self.root / p).exists())
            if missing:
                raise LibraryError(f"index lists missing files {missing}; rebuild the index")
        else:
            self.index, self.files = self._scan()

    # index --------------------------------------------------------------------

    def _paths(self) -> Iterator[Path]:
        for p in sorted(self.root.rglob("*" + SUFFIX)):
            if p.name != INDEX_NAME:
                yield p

    def _scan(self) -> tuple[dict[str, str], dict[str, dict]]:
        entries: dict[str, str] = {}
        files: dict[str, dict] = {}
        for p in self._paths():
            rel = p.relative_to(self.root).as_posix()
            try:
                doc = _parse_json(p.read_text(encoding="utf-8"), str(p))
            except OSError as exc:
                raise IOFailure(f"cannot read {p}: {exc}") from exc
            defs: dict[str, dict] = {}
            _definitions(doc["body"], defs, str(p))
            root = doc["body"].get("uid") if isinstance(doc["body"], dict) else None
            files[rel] = {"kind": doc["kind"], "root": root}
            for uid in defs:
                if uid in entries and entries[uid] != rel:
                    raise DuplicateUid(uid, f"defined in both {entries[uid]} and {rel}")
                entries[uid] = rel
        return entries, files

    def index_document(self) -> str:
        body = {"entries": dict(self.index), "files": dict(self.files)}
        return _canonical(_document("library_index", body, []))

    def rebuild_index(self, write: bool = True) -> dict[str, str]:
        """Rescan the directory; optionally write ``index.scn.json``."""
        self.index, self.files = self._scan()
        if write:
            _write(self.root / INDEX_NAME, self.index_document())
        return dict(self.index)

    # access -------------------------------------------------------------------

    @property
    def registry(self) -> TagRegistry:
        """Tag trees stored in the library, or the default trees."""
        if self._registry is None:
            trees = [p for p, info in sorted(self.files.items()) if info["kind"] == "tag_trees"]
            self._registry = self.load_file(self.root / trees[0]) if trees else default_registry()
        return self._registry

    def __contains__(self, uid: str) -> bool:
        return uid in self.index

    def __len__(self) -> int:
        return len(self.index)

    def get(self, uid: str) -> ScenarioElement:
        if uid in self._cache:
            return self._cache[uid]
        if uid not in self.index:
            raise UnresolvedReference(uid, str(self.root))
        self.load_file(self.root / self.index[uid])
        return self._cache[uid]

    def load_file(self, path: Union[str, os.PathLike]) -> Loaded:
        path = Path(path)
        if not path.is_absolute() and not path.exists():
            path = self.root / path
        return _Loader(self).load_file(path)

    def _decode(self, doc: dict, where: str | None) -> Loaded:
        return _Loader(self).decode(doc, where)

    def roots(self, kind: str) -> list[Loaded]:
        """Root objects of every file of ``kind``, ordered by path."""
        return [self.load_file(self.root / p) for p, info in sorted(self.files.items()) if info["kind"] == kind]

    def scenarios(self) -> list[Scenario]:
        return self.roots("scenario")

    def categories(self) -> list[ScenarioCategory]:
        return self.roots("scenario_category")

    # writing ------------------------------------------------------------------

    def save(self, element: Union[Element, TagRegistry], path: Union[str, os.PathLike]) -> Path:
        """Save into the library, referencing elements it already defines."""
        path = Path(path)
        if not path.is_absolute():
            path = self.root / path
        rel = path.resolve().relative_to(self.root.resolve()).as_posix()
        if isinstance(element, (Scenario, ScenarioCategory)):
            _check_valid(element, self.registry, rel)
            own = self.index.get(element.uid)
            if own is not None and own != rel:
                raise DuplicateUid(element.uid, f"already defined in {own}")
        external = {}
        for uid, where in self.index.items():
            if where != rel:
                external[uid] = _Lazy(self, uid)
        kind, body, used = _encode(element, _LazyMap(external))
        imports = sorted({os.path.relpath(self.root / self.index[u], path.parent).replace(os.sep, "/") for u in used})
        _write(path, _canonical(_document(kind, body, imports)))
        self._files.pop(path.resolve(), None)
        self.rebuild_index(write=(self.root / INDEX_NAME).exists())
        return path


class _Lazy:
    """Placeholder that loads a library element only when compared."""

    def __init__(self, library: Library, uid: str):
        self.library, self.uid = library, uid

    def get(self) -> ScenarioElement:
        return self.library.get(self.uid)


class _LazyMap(Mapping):
    def __init__(self, items: Mapping[str, _Lazy]):
        self._items = items

    def __getitem__(self, uid: str) -> ScenarioElement:
        return self._items[uid].get()

    def get(self, uid, default=None):
        lazy = self._items.get(uid)
        return default if lazy is None else lazy.get()

    def __iter__(self):
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)


def fixtures_dir() -> Path:
    return Path(str(resources.files("scenariokit").joinpath("fixtures")))


def bundled_fixtures() -> Library:
    """Library with the pedestrian-crossing example and the default tag trees."""
    return Library(fixtures_dir())
