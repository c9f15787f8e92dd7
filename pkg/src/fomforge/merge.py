"""Composing modules into a Current FOM.

A load set is merged into a working copy of the Current FOM one module at a
time, top-down from the roots. Duplicate classes must be identical or one
side must be scaffolding; genuinely new classes may only appear at the root
level or as subclasses of existing classes. Any failure rejects the whole
load set and leaves the caller's Current FOM untouched.

The merged model is kept in a canonical order (siblings and table entries
sorted by name) so the resulting FDD does not depend on load order.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Mapping

from .document import serialize_module
from .model import (
    INTERACTION_ROOT,
    OBJECT_ROOT,
    TABLES,
    ClassDef,
    InteractionClassDef,
    ModelIdentification,
    ModelType,
    ObjectClassDef,
    ObjectModule,
    Reference,
    ReferenceType,
    dangling_references,
    default_mim,
    walk,
)

CURRENT_FOM_NAME = "CurrentFOM"
CURRENT_FOM_VERSION = "1.0"

# rule ids raised by the merge engine
EXT_ATTRIBUTE = "EXT-001"
EXT_PARAMETER = "EXT-002"
ANCESTRY = "ANCESTRY-001"
EQUIVALENCE = "EQUIV-001"
UNRESOLVED_SCAFFOLDING = "SCAFF-002"
TABLE_CONFLICT = "TABLE-001"
SWITCH_CONFLICT = "SWITCH-002"
DANGLING = "DANGLING-001"
SECOND_MIM = "MIM-001"
BAD_MIM = "MIM-002"
IDENTICAL_MISMATCH = "IDENT-002"
EMPTY_LOAD = "LOAD-001"

_TABLE_LABELS = {
    "data_types": "dataTypes",
    "dimensions": "dimensions",
    "transportations": "transportations",
    "synchronization_points": "synchronizations",
    "update_rates": "updateRates",
    "notes": "notes",
}


class Match(str, Enum):
    IDENTICAL = "Identical"
    SCAFFOLDING_OF_A = "ScaffoldingOfA"
    SCAFFOLDING_OF_B = "ScaffoldingOfB"
    CONFLICT = "Conflict"


@dataclass(frozen=True)
class Equivalence:
    match: Match
    reason: str = ""
    warnings: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.match is not Match.CONFLICT


@dataclass(frozen=True)
class PolicyViolation:
    rule_id: str
    reason: str


@dataclass(frozen=True)
class Rejection:
    module: str
    element: str
    rule_id: str
    reason: str

    def __str__(self) -> str:
        return f"[{self.rule_id}] module {self.module}, {self.element}: {self.reason}"


class Outcome(str, Enum):
    ACCEPTED = "Accepted"
    REJECTED = "Rejected"


@dataclass
class MergeReport:
    outcome: Outcome = Outcome.ACCEPTED
    diagnosis: Rejection | None = None
    added_classes: list[str] = field(default_factory=list)
    duplicate_classes_ignored: list[str] = field(default_factory=list)
    scaffolding_resolved: list[str] = field(default_factory=list)
    added_table_entries: dict[str, list[str]] = field(default_factory=dict)
    repeated_modules: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


class MergeRejection(Exception):
    """A load set could not be merged; nothing was changed."""

    def __init__(self, diagnosis: Rejection, report: MergeReport | None = None):
        super().__init__(str(diagnosis))
        self.diagnosis = diagnosis
        self.report = report or MergeReport()
        self.report.outcome = Outcome.REJECTED
        self.report.diagnosis = diagnosis

    @property
    def rule_id(self) -> str:
        return self.diagnosis.rule_id


@dataclass(frozen=True)
class LoadedModule:
    name: str
    version: str
    canonical: bytes


@dataclass(frozen=True)
class CurrentFom:
    merged_model: ObjectModule
    module_designators: tuple[str, ...]
    mim_designator: str
    object_class_handles: Mapping[str, int]
    interaction_class_handles: Mapping[str, int]
    attribute_handles: Mapping[tuple[str, str], int]
    generation: int = 0
    loaded: tuple[LoadedModule, ...] = ()

    def fdd(self) -> bytes:
        return serialize_module(self.merged_model)

    def class_names(self) -> set[str]:
        return set(self.object_class_handles) | set(self.interaction_class_handles)


# -- equivalence and policy ----------------------------------------------------


def _body(cls: ClassDef) -> tuple:
    if isinstance(cls, ObjectClassDef):
        return (cls.sharing,)
    return (cls.sharing, cls.transportation, cls.order)


def _semantics_warnings(a: ClassDef, b: ClassDef, qname: str) -> tuple[str, ...]:
    out = []
    for ma, mb in zip(a.members, b.members):
        if ma.semantics != mb.semantics:
            out.append(f"{qname}.{ma.name}: semantics text differs; keeping the first definition")
    return tuple(out)


def classes_equivalent(a: ClassDef, b: ClassDef, qname: str = "") -> Equivalence:
    """Compare two descriptions of the same class (same qualified position)."""
    if type(a) is not type(b):
        raise TypeError("cannot compare an object class with an interaction class")
    qname = qname or a.name
    if a.is_scaffolding and b.is_scaffolding:
        return Equivalence(Match.IDENTICAL)
    if a.is_scaffolding:
        return Equivalence(Match.SCAFFOLDING_OF_A)
    if b.is_scaffolding:
        return Equivalence(Match.SCAFFOLDING_OF_B)
    if _body(a) != _body(b):
        labels = ("sharing", "transportation", "order")
        diffs = [l for l, x, y in zip(labels, _body(a), _body(b)) if x != y]
        return Equivalence(Match.CONFLICT, f"{', '.join(diffs)} differs")
    what = "attribute" if isinstance(a, ObjectClassDef) else "parameter"
    names_a = [m.name for m in a.members]
    names_b = [m.name for m in b.members]
    if set(names_a) != set(names_b):
        return Equivalence(Match.CONFLICT, f"{what} set differs")
    if names_a != names_b:
        return Equivalence(Match.CONFLICT, f"{what} order differs")
    for ma, mb in zip(a.members, b.members):
        if ma.key() != mb.key():
            return Equivalence(Match.CONFLICT, f"{what} {ma.name} differs")
    return Equivalence(Match.IDENTICAL, warnings=_semantics_warnings(a, b, qname))


def _extension_violation(existing: ClassDef, candidate: ClassDef) -> PolicyViolation | None:
    if existing.is_scaffolding or candidate.is_scaffolding:
        return None
    old = {m.name for m in existing.members}
    new = {m.name for m in candidate.members}
    if old < new:
        added = ", ".join(sorted(new - old))
        if isinstance(candidate, ObjectClassDef):
            return PolicyViolation(
                EXT_ATTRIBUTE,
                f"attribute extension not permitted: adds {added} to an existing class; define a subclass instead",
            )
        return PolicyViolation(
            EXT_PARAMETER,
            f"parameter extension not permitted: adds {added} to an existing interaction; define a subclass instead",
        )
    return None


def _index(root: ClassDef) -> dict[str, ClassDef]:
    return dict(walk(root))


def check_extension_policy(
    candidate: ClassDef, qualified_name: str, current: CurrentFom | ObjectModule
) -> PolicyViolation | None:
    """Return ``None`` if placing ``candidate`` at ``qualified_name`` is a permitted extension.

    New root-level classes and new subclasses of existing classes are
    accepted. Re-stating an existing class with extra attributes or
    parameters is refused, as is a class whose parent does not exist.
    """
    model = current.merged_model if isinstance(current, CurrentFom) else current
    root = model.object_root() if isinstance(candidate, ObjectClassDef) else model.interaction_root()
    index = _index(root)
    existing = index.get(qualified_name)
    if existing is not None:
        return _extension_violation(existing, candidate)
    parent = qualified_name.rpartition(".")[0]
    if parent not in index:
        return PolicyViolation(
            ANCESTRY, f"no identical ancestry for {qualified_name}: parent {parent or '(none)'} absent"
        )
    return None


# -- working tree --------------------------------------------------------------


class _Reject(Exception):
    def __init__(self, element: str, rule_id: str, reason: str):
        self.element = element
        self.rule_id = rule_id
        self.reason = reason


class _Work:
    """Mutable class node used while a load set is being merged."""

    __slots__ = ("defn", "children", "origin")

    def __init__(self, defn: ClassDef, origin: str):
        self.defn = defn
        self.children: dict[str, _Work] = {}
        self.origin = origin

    @classmethod
    def from_def(cls, defn: ClassDef, origin: str) -> _Work:
        node = cls(dataclasses.replace(defn, children=()), origin)
        for child in defn.children:
            node.children[child.name] = cls.from_def(child, origin)
        return node

    def freeze(self) -> ClassDef:
        kids = tuple(self.children[k].freeze() for k in sorted(self.children))
        return dataclasses.replace(self.defn, children=kids)

    def walk(self, prefix: str = ""):
        qname = f"{prefix}.{self.defn.name}" if prefix else self.defn.name
        yield qname, self
        for k in sorted(self.children):
            yield from self.children[k].walk(qname)


def _merge_node(
    work: _Work, incoming: ClassDef, qname: str, module: str, report: MergeReport
) -> None:
    eq = classes_equivalent(work.defn, dataclasses.replace(incoming, children=()), qname)
    is_root = "." not in qname
    if eq.match is Match.CONFLICT:
        violation = _extension_violation(work.defn, incoming)
        if violation is not None:
            raise _Reject(qname, violation.rule_id, violation.reason)
        raise _Reject(qname, EQUIVALENCE, f"conflicting duplicate: {eq.reason}")
    report.warnings.extend(eq.warnings)
    if eq.match is Match.SCAFFOLDING_OF_A:
        work.defn = dataclasses.replace(incoming, children=())
        work.origin = module
        if not is_root:
            report.scaffolding_resolved.append(qname)
    elif not is_root:
        report.duplicate_classes_ignored.append(qname)
    for child in incoming.children:
        child_qname = f"{qname}.{child.name}"
        existing = work.children.get(child.name)
        if existing is None:
            # parent present by construction: a new root-level class or a new subclass
            work.children[child.name] = _Work.from_def(child, module)
        else:
            _merge_node(existing, child, child_qname, module, report)


def merge_class_tree(
    current_tree: ClassDef, module_tree: ClassDef, module: str = "module"
) -> tuple[ClassDef, MergeReport]:
    """Merge one module's class tree into a current tree rooted at the same root.

    Raises :class:`MergeRejection` on conflicts or extension-policy violations.
    """
    if current_tree.name != module_tree.name:
        raise ValueError("trees must share the same root")
    work = _Work.from_def(current_tree, "")
    report = MergeReport()
    before = {q for q, _ in walk(current_tree)}
    try:
        _merge_node(work, module_tree, current_tree.name, module, report)
    except _Reject as exc:
        raise MergeRejection(Rejection(module, exc.element, exc.rule_id, exc.reason), report) from None
    merged = work.freeze()
    report.added_classes = [q for q, _ in walk(merged) if q not in before]
    return merged, report


# -- tables --------------------------------------------------------------------


def _entry_conflict(table: str, old, new) -> tuple[str | None, str | None]:
    """Return ``(conflict_reason, warning)`` for two same-named table entries."""
    if old == new:
        return None, None
    if table == "synchronization_points" and old.tag_data_type == new.tag_data_type:
        return None, f"synchronization point {old.label}: semantics text differs"
    if table == "notes":
        return "note bodies differ", None
    diffs = [
        f.name
        for f in dataclasses.fields(old)
        if getattr(old, f.name) != getattr(new, f.name)
    ]
    return f"{', '.join(diffs)} differs", None


class _Tables:
    def __init__(self, model: ObjectModule):
        self.entries = {t: dict(model.table(t)) for t in TABLES}
        self.switches = model.switches

    def merge(self, module: ObjectModule, report: MergeReport) -> None:
        for table in TABLES:
            current = self.entries[table]
            for entry in getattr(module, table):
                old = current.get(entry.name)
                if old is None:
                    current[entry.name] = entry
                    report.added_table_entries.setdefault(_TABLE_LABELS[table], []).append(entry.name)
                    continue
                conflict, warning = _entry_conflict(table, old, entry)
                if conflict:
                    raise _Reject(
                        f"{_TABLE_LABELS[table]}/{entry.name}",
                        TABLE_CONFLICT,
                        f"duplicate entries must be equivalent: {conflict}",
                    )
                if warning:
                    report.warnings.append(warning)
        if module.switches is not None:
            if self.switches is None:
                self.switches = module.switches
            elif self.switches != module.switches:
                diffs = [
                    k
                    for (k, v), (_, w) in zip(self.switches.values, module.switches.values)
                    if v != w
                ]
                raise _Reject(
                    "switches",
                    SWITCH_CONFLICT,
                    f"switches tables must be exactly equal; {', '.join(diffs)} differ",
                )

    def sorted(self) -> dict[str, tuple]:
        return {t: tuple(self.entries[t][k] for k in sorted(self.entries[t])) for t in TABLES}


def merge_tables(current: ObjectModule, module: ObjectModule) -> tuple[dict, MergeReport]:
    """Merge the flat tables and the switches of ``module`` into those of ``current``.

    Returns a mapping of table attribute names (plus ``"switches"``) to merged
    values. Raises :class:`MergeRejection` on non-equivalent duplicates.
    """
    tables = _Tables(current)
    report = MergeReport()
    try:
        tables.merge(module, report)
    except _Reject as exc:
        raise MergeRejection(Rejection(module.name, exc.element, exc.rule_id, exc.reason), report) from None
    out = tables.sorted()
    out["switches"] = tables.switches
    return out, report


# -- load sets -----------------------------------------------------------------


def _assign(handles: dict, keys, start: int) -> dict:
    out = dict(handles)
    nxt = start
    for key in keys:
        if key not in out:
            nxt += 1
            out[key] = nxt
    return out


def _handles(model: ObjectModule, old: CurrentFom | None) -> tuple[dict, dict, dict]:
    obj_old = dict(old.object_class_handles) if old else {}
    int_old = dict(old.interaction_class_handles) if old else {}
    attr_old = dict(old.attribute_handles) if old else {}
    obj_walk = list(walk(model.object_root()))
    obj = _assign(obj_old, [q for q, _ in obj_walk], max(obj_old.values(), default=0))
    inter = _assign(
        int_old, [q for q, _ in walk(model.interaction_root())], max(int_old.values(), default=0)
    )
    attrs = _assign(
        attr_old,
        [(q, a.name) for q, c in obj_walk for a in c.attributes],
        max(attr_old.values(), default=0),
    )
    return obj, inter, attrs


def _composite(
    obj_root: ClassDef, int_root: ClassDef, tables: _Tables, constituents: list[str]
) -> ObjectModule:
    mim, *modules = constituents
    ident = ModelIdentification(
        CURRENT_FOM_NAME,
        ModelType.FOM,
        CURRENT_FOM_VERSION,
        (Reference(ReferenceType.COMPOSED_FROM, tuple([mim] + sorted(set(modules)))),),
    )
    return ObjectModule(
        ident,
        (obj_root,),
        (int_root,),
        switches=tables.switches,
        **tables.sorted(),
    )


def _check_resolved(works: list[_Work]) -> None:
    for work in works:
        for qname, node in work.walk():
            if node.defn.is_scaffolding:
                raise _Reject(
                    qname,
                    UNRESOLVED_SCAFFOLDING,
                    f"scaffolding {qname} has no regular definition in the Current FOM or load set",
                )


def _check_dangling(model: ObjectModule) -> None:
    dangling = dangling_references(model)
    if dangling:
        parts = [f"{_TABLE_LABELS[t]}: {', '.join(sorted(n))}" for t, n in sorted(dangling.items())]
        raise _Reject("references", DANGLING, f"unresolved references ({'; '.join(parts)})")


def initial_fom(mim: ObjectModule | None = None) -> CurrentFom:
    """A Current FOM holding only the MIM (the built-in one by default)."""
    mim = mim or default_mim()
    if mim.model_type is not ModelType.MIM:
        raise MergeRejection(Rejection(mim.name, "identification", BAD_MIM, "module is not a MIM"))
    obj = _Work.from_def(mim.object_root(), mim.name)
    inter = _Work.from_def(mim.interaction_root(), mim.name)
    tables = _Tables(mim)
    try:
        _check_resolved([obj, inter])
        model = _composite(obj.freeze(), inter.freeze(), tables, [mim.name])
        _check_dangling(model)
    except _Reject as exc:
        raise MergeRejection(Rejection(mim.name, exc.element, exc.rule_id, exc.reason)) from None
    obj_h, int_h, attr_h = _handles(model, None)
    return CurrentFom(
        merged_model=model,
        module_designators=(),
        mim_designator=mim.name,
        object_class_handles=MappingProxyType(obj_h),
        interaction_class_handles=MappingProxyType(int_h),
        attribute_handles=MappingProxyType(attr_h),
        generation=0,
        loaded=(),
    )


def merge_modules(current: CurrentFom, load_set: list[ObjectModule]) -> tuple[CurrentFom, MergeReport]:
    """Atomically merge ``load_set`` into ``current``.

    Returns the new Current FOM and a report. On any failure raises
    :class:`MergeRejection`; ``current`` is an immutable value and is never
    modified. A module equal by name and version to one already loaded is a
    repeated description and is skipped.
    """
    report = MergeReport()
    if not load_set:
        raise MergeRejection(Rejection("-", "loadSet", EMPTY_LOAD, "load set is empty"), report)
    model = current.merged_model
    obj = _Work.from_def(model.object_root(), "")
    inter = _Work.from_def(model.interaction_root(), "")
    tables = _Tables(model)
    loaded = {(lm.name, lm.version): lm for lm in current.loaded}
    new_loaded: list[LoadedModule] = []
    designators: list[str] = []
    constituents = [current.mim_designator, *current.module_designators]

    for module in load_set:
        try:
            if module.model_type is ModelType.MIM:
                raise _Reject(
                    "identification",
                    SECOND_MIM,
                    "a federation execution has exactly one MIM, supplied at creation",
                )
            canonical = serialize_module(module)
            key = (module.name, module.identification.version)
            seen = loaded.get(key)
            if seen is not None:
                if seen.canonical != canonical:
                    raise _Reject(
                        "identification",
                        IDENTICAL_MISMATCH,
                        f"a different module named {module.name} version {key[1]} is already loaded",
                    )
                report.repeated_modules.append(module.name)
                continue
            _merge_node(obj, module.object_root(), OBJECT_ROOT, module.name, report)
            _merge_node(inter, module.interaction_root(), INTERACTION_ROOT, module.name, report)
            tables.merge(module, report)
        except _Reject as exc:
            raise MergeRejection(Rejection(module.name, exc.element, exc.rule_id, exc.reason), report) from None
        lm = LoadedModule(module.name, key[1], canonical)
        loaded[key] = lm
        new_loaded.append(lm)
        designators.append(module.name)

    try:
        _check_resolved([obj, inter])
        merged = _composite(obj.freeze(), inter.freeze(), tables, constituents + designators)
        _check_dangling(merged)
    except _Reject as exc:
        culprit = load_set[-1].name
        if exc.rule_id == UNRESOLVED_SCAFFOLDING:
            culprit = _scaffolding_origin(obj, inter, exc.element) or culprit
        raise MergeRejection(Rejection(culprit, exc.element, exc.rule_id, exc.reason), report) from None

    obj_h, int_h, attr_h = _handles(merged, current)
    before = current.class_names()
    report.added_classes = [
        q for q, _ in (*walk(merged.object_root()), *walk(merged.interaction_root())) if q not in before
    ]
    new = CurrentFom(
        merged_model=merged,
        module_designators=current.module_designators + tuple(designators),
        mim_designator=current.mim_designator,
        object_class_handles=MappingProxyType(obj_h),
        interaction_class_handles=MappingProxyType(int_h),
        attribute_handles=MappingProxyType(attr_h),
        generation=current.generation + 1,
        loaded=current.loaded + tuple(new_loaded),
    )
    return new, report


def _scaffolding_origin(obj: _Work, inter: _Work, qname: str) -> str | None:
    for work in (obj, inter):
        for q, node in work.walk():
            if q == qname:
                return node.origin or None
    return None


# -- diff ----------------------------------------------------------------------


@dataclass(frozen=True)
class DiffEntry:
    change: str
    kind: str
    key: str
    detail: str = ""

    def __str__(self) -> str:
        sign = {"added": "+", "removed": "-", "changed": "~", "reordered": "%"}[self.change]
        return f"{sign} {self.kind} {self.key}" + (f" ({self.detail})" if self.detail else "")


@dataclass(frozen=True)
class FomDiff:
    entries: tuple[DiffEntry, ...] = ()

    def __bool__(self) -> bool:
        return bool(self.entries)

    def select(self, change: str, kinds: tuple[str, ...] = ()) -> list[str]:
        return [e.key for e in self.entries if e.change == change and (not kinds or e.kind in kinds)]

    @property
    def added_classes(self) -> list[str]:
        return self.select("added", ("objectClass", "interactionClass"))

    @property
    def removed_classes(self) -> list[str]:
        return self.select("removed", ("objectClass", "interactionClass"))


def _order_changed(a_keys: list, b_keys: list) -> bool:
    common = set(a_keys) & set(b_keys)
    return [k for k in a_keys if k in common] != [k for k in b_keys if k in common]


def _diff_keyed(kind: str, a: dict, b: dict, out: list, describe=None) -> None:
    for k in a:
        if k not in b:
            out.append(DiffEntry("removed", kind, k))
    for k in b:
        if k not in a:
            out.append(DiffEntry("added", kind, k))
        elif a[k] != b[k]:
            out.append(DiffEntry("changed", kind, k, describe(a[k], b[k]) if describe else ""))
    if _order_changed(list(a), list(b)):
        out.append(DiffEntry("reordered", kind, "*"))


def _describe(x, y) -> str:
    if dataclasses.is_dataclass(x):
        return ", ".join(
            f.name for f in dataclasses.fields(x) if getattr(x, f.name) != getattr(y, f.name)
        )
    return ""


def _diff_tree(kind: str, member_kind: str, ra: ClassDef, rb: ClassDef, out: list) -> None:
    fa = dict(walk(ra))
    fb = dict(walk(rb))
    for q in fa:
        if q not in fb:
            out.append(DiffEntry("removed", kind, q))
    for q, cb in fb.items():
        ca = fa.get(q)
        if ca is None:
            out.append(DiffEntry("added", kind, q))
            continue
        if ca.is_scaffolding != cb.is_scaffolding or _body(ca) != _body(cb):
            out.append(DiffEntry("changed", kind, q, "class description differs"))
        _diff_keyed(
            member_kind,
            {f"{q}#{m.name}": m for m in ca.members},
            {f"{q}#{m.name}": m for m in cb.members},
            out,
            _describe,
        )
        if _order_changed([c.name for c in ca.children], [c.name for c in cb.children]):
            out.append(DiffEntry("reordered", kind, q, "subclass order"))


def diff_foms(a: ObjectModule, b: ObjectModule) -> FomDiff:
    """Structured difference from ``a`` to ``b`` at qualified-name granularity.

    The diff is empty exactly when the two canonical documents are byte-equal.
    """
    out: list[DiffEntry] = []
    ia, ib = a.identification, b.identification
    for label in ("name", "model_type", "version", "references"):
        if getattr(ia, label) != getattr(ib, label):
            out.append(DiffEntry("changed", "identification", label))
    if ia.model_type.has_explicit_roots != ib.model_type.has_explicit_roots:
        out.append(DiffEntry("changed", "identification", "roots", "explicit vs implicit roots"))
    _diff_tree("objectClass", "attribute", a.object_root(), b.object_root(), out)
    _diff_tree("interactionClass", "parameter", a.interaction_root(), b.interaction_root(), out)
    for table in TABLES:
        _diff_keyed(_TABLE_LABELS[table], a.table(table), b.table(table), out, _describe)
    if a.switches != b.switches:
        if a.switches is None or b.switches is None:
            out.append(DiffEntry("added" if a.switches is None else "removed", "switches", "table"))
        else:
            for (k, v), (_, w) in zip(a.switches.values, b.switches.values):
                if v != w:
                    out.append(DiffEntry("changed", "switches", k, f"{v.value} -> {w.value}"))
    return FomDiff(tuple(out))
