"""Object model types for FOM/SOM modules, the built-in MIM, and the Current FOM.

Everything here is an immutable value. Constructors validate their own
invariants and raise :class:`ModelError` on violation, so any module that
exists in memory is structurally sound (superclass-closed, no scaffolding
with properties, unique sibling names).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Iterator, Union

OBJECT_ROOT = "HLAobjectRoot"
INTERACTION_ROOT = "HLAinteractionRoot"
MOM_ROOT = "HLAmanager"
RESERVED_TOP_LEVEL = frozenset({OBJECT_ROOT, INTERACTION_ROOT, MOM_ROOT})
NA = "NA"

_NAME_RE = re.compile(r"[^\s.]+")


class ModelError(ValueError):
    """A value violates an object-model invariant."""

    def __init__(self, rule_id: str, message: str):
        super().__init__(f"{rule_id}: {message}")
        self.rule_id = rule_id
        self.message = message


class ModelType(str, Enum):
    FOM = "FOM"
    SOM = "SOM"
    FOM_MODULE = "FOMmodule"
    SOM_MODULE = "SOMmodule"
    MIM = "MIM"

    @property
    def has_explicit_roots(self) -> bool:
        return self not in (ModelType.FOM_MODULE, ModelType.SOM_MODULE)


class ReferenceType:
    STANDALONE = "Standalone"
    DEPENDENCY = "Dependency"
    COMPOSED_FROM = "ComposedFrom"


class Sharing(str, Enum):
    PUBLISH = "Publish"
    SUBSCRIBE = "Subscribe"
    PUBLISH_SUBSCRIBE = "PublishSubscribe"
    NEITHER = "Neither"


class Order(str, Enum):
    TIMESTAMP = "TimeStamp"
    RECEIVE = "Receive"


class Reliability(str, Enum):
    RELIABLE = "Reliable"
    BEST_EFFORT = "BestEffort"


class DataTypeCategory(str, Enum):
    BASIC = "Basic"
    SIMPLE = "Simple"
    ENUMERATED = "Enumerated"
    ARRAY = "Array"
    FIXED_RECORD = "FixedRecord"
    VARIANT = "Variant"


class SwitchValue(str, Enum):
    ENABLED = "Enabled"
    DISABLED = "Disabled"


class ModuleKind(str, Enum):
    STANDALONE = "Standalone"
    DEPENDENT = "Dependent"


SWITCH_NAMES = (
    "autoProvide",
    "attributeScopeAdvisory",
    "attributeRelevanceAdvisory",
    "objectClassRelevanceAdvisory",
    "interactionRelevanceAdvisory",
    "serviceReporting",
)


def is_valid_name(name: str) -> bool:
    return bool(_NAME_RE.fullmatch(name))


def _check_name(name: str, what: str) -> None:
    if not isinstance(name, str) or not is_valid_name(name):
        raise ModelError("NAME-001", f"invalid {what} name {name!r}")


def _check_unique(names: list[str], rule_id: str, what: str) -> None:
    seen = set()
    for n in names:
        if n in seen:
            raise ModelError(rule_id, f"duplicate {what} {n!r}")
        seen.add(n)


def canonical_rate(value: Union[str, int, float, Decimal]) -> str:
    """Render a positive rate so that numerically equal rates are byte-equal."""
    try:
        d = Decimal(str(value).strip())
    except InvalidOperation:
        raise ModelError("VALUE-001", f"update rate {value!r} is not a decimal") from None
    if not d.is_finite() or d <= 0:
        raise ModelError("VALUE-001", f"update rate {value!r} must be positive")
    text = format(d.normalize(), "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text


def canonical_text(text: str) -> str:
    return " ".join(text.split())


@dataclass(frozen=True)
class Reference:
    type: str
    identification: Union[tuple[str, ...], str] = NA

    def __post_init__(self) -> None:
        idents = self.identification
        if isinstance(idents, list):
            idents = tuple(idents)
            object.__setattr__(self, "identification", idents)
        if not self.type or not is_valid_name(self.type):
            raise ModelError("REF-001", f"invalid reference type {self.type!r}")
        if (self.type == ReferenceType.STANDALONE) != (idents == NA):
            raise ModelError("REF-001", "identification is NA exactly when type is Standalone")
        if idents == NA:
            return
        for name in idents:
            _check_name(name, "referenced module")
            if "," in name or name == NA:
                raise ModelError("REF-001", f"invalid referenced module name {name!r}")
        if self.type in (ReferenceType.DEPENDENCY, ReferenceType.COMPOSED_FROM) and not idents:
            raise ModelError("REF-001", f"{self.type} reference must list at least one module")

    @property
    def names(self) -> tuple[str, ...]:
        return () if self.identification == NA else self.identification


@dataclass(frozen=True)
class ModelIdentification:
    name: str
    model_type: ModelType
    version: str = "1.0"
    references: tuple[Reference, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "model_type", ModelType(self.model_type))
        object.__setattr__(self, "references", tuple(self.references))
        if not self.name or not is_valid_name(self.name):
            raise ModelError("IDENT-001", f"invalid model name {self.name!r}")
        if self.model_type in (ModelType.FOM_MODULE, ModelType.SOM_MODULE):
            for kind in (ReferenceType.DEPENDENCY, ReferenceType.COMPOSED_FROM):
                if sum(r.type == kind for r in self.references) > 1:
                    raise ModelError("REF-002", f"more than one {kind} reference")

    def references_of(self, kind: str) -> tuple[Reference, ...]:
        return tuple(r for r in self.references if r.type == kind)


@dataclass(frozen=True)
class AttributeDef:
    name: str
    data_type: str
    transportation: str = "HLAreliable"
    order: Order = Order.RECEIVE
    dimensions: tuple[str, ...] = ()
    semantics: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "order", Order(self.order))
        object.__setattr__(self, "dimensions", tuple(self.dimensions))
        _check_name(self.name, "attribute")
        _check_name(self.data_type, "data type")
        _check_name(self.transportation, "transportation")
        for d in self.dimensions:
            _check_name(d, "dimension")

    def key(self) -> tuple:
        """Everything that participates in equivalence (semantics excluded)."""
        return (self.name, self.data_type, self.transportation, self.order, self.dimensions)


@dataclass(frozen=True)
class ParameterDef:
    name: str
    data_type: str
    semantics: str = ""

    def __post_init__(self) -> None:
        _check_name(self.name, "parameter")
        _check_name(self.data_type, "data type")

    def key(self) -> tuple:
        return (self.name, self.data_type)


@dataclass(frozen=True)
class ObjectClassDef:
    """An object class description; ``sharing=None`` marks a scaffolding description."""

    name: str
    sharing: Sharing | None = None
    attributes: tuple[AttributeDef, ...] = ()
    children: tuple[ObjectClassDef, ...] = ()

    def __post_init__(self) -> None:
        if self.sharing is not None:
            object.__setattr__(self, "sharing", Sharing(self.sharing))
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "children", tuple(self.children))
        _check_class_common(self, self.attributes, "attribute")

    @property
    def is_scaffolding(self) -> bool:
        return self.sharing is None

    @property
    def members(self) -> tuple[AttributeDef, ...]:
        return self.attributes


@dataclass(frozen=True)
class InteractionClassDef:
    """An interaction class description; ``sharing=None`` marks scaffolding."""

    name: str
    sharing: Sharing | None = None
    transportation: str | None = None
    order: Order | None = None
    parameters: tuple[ParameterDef, ...] = ()
    children: tuple[InteractionClassDef, ...] = ()

    def __post_init__(self) -> None:
        if self.sharing is not None:
            object.__setattr__(self, "sharing", Sharing(self.sharing))
        if self.order is not None:
            object.__setattr__(self, "order", Order(self.order))
        object.__setattr__(self, "parameters", tuple(self.parameters))
        object.__setattr__(self, "children", tuple(self.children))
        _check_class_common(self, self.parameters, "parameter")
        if self.sharing is None:
            if self.transportation is not None or self.order is not None:
                raise ModelError(
                    "SCAFF-001", f"scaffolding interaction {self.name!r} carries properties"
                )
        else:
            if self.transportation is None or self.order is None:
                raise ModelError(
                    "VALUE-002", f"interaction {self.name!r} needs transportation and order"
                )
            _check_name(self.transportation, "transportation")

    @property
    def is_scaffolding(self) -> bool:
        return self.sharing is None

    @property
    def members(self) -> tuple[ParameterDef, ...]:
        return self.parameters


ClassDef = Union[ObjectClassDef, InteractionClassDef]


def _check_class_common(cls: ClassDef, members: tuple, what: str) -> None:
    if not isinstance(cls.name, str) or not cls.name:
        raise ModelError("NAME-001", f"invalid class name {cls.name!r}")
    if "." in cls.name:
        # a dotted name claims ancestors that are not present as enclosing classes
        raise ModelError(
            "CLOSURE-001", f"class {cls.name!r} is not nested under its superclasses"
        )
    _check_name(cls.name, "class")
    if cls.sharing is None and members:
        raise ModelError("SCAFF-001", f"scaffolding class {cls.name!r} carries {what}s")
    _check_unique([m.name for m in members], "DUP-002", f"{what} in {cls.name}")
    _check_unique([c.name for c in cls.children], "DUP-001", f"subclass of {cls.name}")


@dataclass(frozen=True)
class DataTypeDef:
    name: str
    category: DataTypeCategory
    definition: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "category", DataTypeCategory(self.category))
        object.__setattr__(self, "definition", canonical_text(self.definition))
        _check_name(self.name, "data type")


@dataclass(frozen=True)
class Dimension:
    name: str
    upper_bound: int

    def __post_init__(self) -> None:
        _check_name(self.name, "dimension")
        if isinstance(self.upper_bound, bool) or not isinstance(self.upper_bound, int):
            raise ModelError("VALUE-001", f"dimension {self.name!r} bound must be an integer")
        if self.upper_bound <= 0:
            raise ModelError("VALUE-001", f"dimension {self.name!r} bound must be positive")


@dataclass(frozen=True)
class Transportation:
    name: str
    reliability: Reliability

    def __post_init__(self) -> None:
        object.__setattr__(self, "reliability", Reliability(self.reliability))
        _check_name(self.name, "transportation")


@dataclass(frozen=True)
class SynchronizationPoint:
    label: str
    tag_data_type: str
    semantics: str = ""

    def __post_init__(self) -> None:
        _check_name(self.label, "synchronization label")
        _check_name(self.tag_data_type, "data type")

    @property
    def name(self) -> str:
        return self.label


@dataclass(frozen=True)
class UpdateRate:
    name: str
    rate_hz: str

    def __post_init__(self) -> None:
        _check_name(self.name, "update rate")
        object.__setattr__(self, "rate_hz", canonical_rate(self.rate_hz))


@dataclass(frozen=True)
class Switches:
    values: tuple[tuple[str, SwitchValue], ...]

    def __post_init__(self) -> None:
        values = self.values
        if isinstance(values, dict):
            values = tuple(values.items())
        got = dict(values)
        if len(got) != len(values) or set(got) != set(SWITCH_NAMES):
            raise ModelError("SWITCH-001", "switches table must list each of the six switches once")
        object.__setattr__(
            self, "values", tuple((k, SwitchValue(got[k])) for k in SWITCH_NAMES)
        )

    @classmethod
    def all(cls, value: SwitchValue = SwitchValue.ENABLED) -> Switches:
        return cls(tuple((k, value) for k in SWITCH_NAMES))

    def __getitem__(self, key: str) -> SwitchValue:
        return dict(self.values)[key]


@dataclass(frozen=True)
class NoteEntry:
    label: str
    body: str = ""

    def __post_init__(self) -> None:
        _check_name(self.label, "note label")

    @property
    def name(self) -> str:
        return self.label


TABLES = (
    "data_types",
    "dimensions",
    "transportations",
    "synchronization_points",
    "update_rates",
    "notes",
)


@dataclass(frozen=True)
class ObjectModule:
    """One FOM/SOM module, MIM, or composite FOM.

    For ``FOMmodule``/``SOMmodule`` documents ``objects`` and ``interactions``
    hold the children of the implicit roots. For MIM, FOM and SOM they hold
    exactly the explicit roots.
    """

    identification: ModelIdentification
    objects: tuple[ObjectClassDef, ...] = ()
    interactions: tuple[InteractionClassDef, ...] = ()
    data_types: tuple[DataTypeDef, ...] = ()
    dimensions: tuple[Dimension, ...] = ()
    transportations: tuple[Transportation, ...] = ()
    synchronization_points: tuple[SynchronizationPoint, ...] = ()
    update_rates: tuple[UpdateRate, ...] = ()
    switches: Switches | None = None
    notes: tuple[NoteEntry, ...] = ()
    # original document bytes, when the module came from a parse
    source: bytes | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        for name in ("objects", "interactions") + TABLES:
            object.__setattr__(self, name, tuple(getattr(self, name)))
        problems = validate_module_closure(self)
        if problems:
            rule_id, message = problems[0]
            raise ModelError(rule_id, message)
        for table in TABLES:
            _check_unique([e.name for e in getattr(self, table)], "DUP-003", f"{table} entry")

    @property
    def name(self) -> str:
        return self.identification.name

    @property
    def model_type(self) -> ModelType:
        return self.identification.model_type

    def object_root(self) -> ObjectClassDef:
        """The object tree rooted at HLAobjectRoot (scaffolding root when implicit)."""
        if self.model_type.has_explicit_roots:
            return self.objects[0]
        return ObjectClassDef(OBJECT_ROOT, children=self.objects)

    def interaction_root(self) -> InteractionClassDef:
        if self.model_type.has_explicit_roots:
            return self.interactions[0]
        return InteractionClassDef(INTERACTION_ROOT, children=self.interactions)

    def table(self, name: str) -> dict:
        return {e.name: e for e in getattr(self, name)}


def validate_module_closure(m: ObjectModule) -> list[tuple[str, str]]:
    """Return ``(rule_id, message)`` problems with the module's class trees.

    Nesting makes every class's ancestry explicit, so closure reduces to
    checking the roots: explicit-root models must hold exactly the two roots,
    modules with implicit roots must not name them (or the MOM classes).
    """
    problems = []
    if m.model_type.has_explicit_roots:
        for tree, root in ((m.objects, OBJECT_ROOT), (m.interactions, INTERACTION_ROOT)):
            if len(tree) != 1 or tree[0].name != root:
                problems.append(
                    ("CLOSURE-002", f"{m.model_type.value} must define exactly the root {root}")
                )
    else:
        for tree in (m.objects, m.interactions):
            for cls in tree:
                if cls.name in RESERVED_TOP_LEVEL:
                    problems.append(
                        ("RESERVED-001", f"only the MIM may define {cls.name}")
                    )
        _dupes = []
        for tree in (m.objects, m.interactions):
            names = [c.name for c in tree]
            _dupes.extend(n for n in set(names) if names.count(n) > 1)
        for n in sorted(_dupes):
            problems.append(("DUP-001", f"duplicate root-level class {n!r}"))
    return problems


def walk(cls: ClassDef, prefix: str = "") -> Iterator[tuple[str, ClassDef]]:
    """Depth-first pre-order walk yielding ``(qualified_name, class)``."""
    qname = f"{prefix}.{cls.name}" if prefix else cls.name
    yield qname, cls
    for child in cls.children:
        yield from walk(child, qname)


def qualified_names(m: ObjectModule, include_scaffolding: bool = True) -> set[str]:
    """Fully-qualified names of every object and interaction class in ``m``."""
    out = set()
    for root in (m.object_root(), m.interaction_root()):
        for qname, cls in walk(root):
            if include_scaffolding or not cls.is_scaffolding:
                out.add(qname)
    return out


def referenced_names(m: ObjectModule) -> dict[str, set[str]]:
    """Names the module refers to, grouped by the table they must resolve in."""
    refs = {"data_types": set(), "transportations": set(), "dimensions": set()}
    for _, cls in walk(m.object_root()):
        for a in cls.attributes:
            refs["data_types"].add(a.data_type)
            refs["transportations"].add(a.transportation)
            refs["dimensions"].update(a.dimensions)
    for _, cls in walk(m.interaction_root()):
        if cls.transportation is not None:
            refs["transportations"].add(cls.transportation)
        for p in cls.parameters:
            refs["data_types"].add(p.data_type)
    for sp in m.synchronization_points:
        refs["data_types"].add(sp.tag_data_type)
    return refs


def dangling_references(m: ObjectModule, *others: ObjectModule) -> dict[str, set[str]]:
    """References in ``m`` that neither ``m`` nor any of ``others`` defines."""
    out = {}
    for table, names in referenced_names(m).items():
        defined = set(m.table(table))
        for o in others:
            defined |= set(o.table(table))
        missing = names - defined
        if missing:
            out[table] = missing
    return out


def classify_module(m: ObjectModule) -> tuple[ModuleKind, list[str]]:
    """Decide Standalone vs Dependent from the module's structure.

    A warning is returned when the References field declares otherwise; the
    computed kind always wins.
    """
    has_scaffolding = False
    for root in (m.object_root(), m.interaction_root()):
        # the implicit root of a module is scaffolding by construction, skip it
        for top in root.children:
            if any(c.is_scaffolding for _, c in walk(top)):
                has_scaffolding = True
    dangling = dangling_references(m, default_mim())
    declares_dependency = bool(m.identification.references_of(ReferenceType.DEPENDENCY))
    kind = (
        ModuleKind.DEPENDENT
        if has_scaffolding or dangling or declares_dependency
        else ModuleKind.STANDALONE
    )
    warnings = []
    declared = None
    if m.identification.references_of(ReferenceType.STANDALONE):
        declared = ModuleKind.STANDALONE
    elif declares_dependency:
        declared = ModuleKind.DEPENDENT
    if declared is not None and declared != kind:
        warnings.append(
            f"module {m.name} declares itself {declared.value} but is {kind.value}"
        )
    return kind, warnings


def _str_attr(name: str, data_type: str = "HLAunicodeString") -> AttributeDef:
    return AttributeDef(name, data_type, "HLAreliable", Order.RECEIVE)


def _mom_interaction(name: str, params: list[tuple[str, str]]) -> InteractionClassDef:
    return InteractionClassDef(
        name,
        Sharing.PUBLISH_SUBSCRIBE,
        "HLAreliable",
        Order.RECEIVE,
        tuple(ParameterDef(n, t) for n, t in params),
    )


def _mom_group(name: str, children: list[InteractionClassDef]) -> InteractionClassDef:
    return InteractionClassDef(
        name, Sharing.NEITHER, "HLAreliable", Order.RECEIVE, (), tuple(children)
    )


MIM_NAME = "HLAstandardMIM"


def _build_default_mim() -> ObjectModule:
    federation = ObjectClassDef(
        "HLAfederation",
        Sharing.PUBLISH_SUBSCRIBE,
        (
            _str_attr("HLAfederationName"),
            _str_attr("HLAFOMmoduleDesignatorList", "HLAmoduleDesignatorList"),
            _str_attr("HLAMIMDesignator"),
            _str_attr("HLAcurrentFDD"),
        ),
    )
    federate = ObjectClassDef(
        "HLAfederate",
        Sharing.PUBLISH_SUBSCRIBE,
        (
            _str_attr("HLAfederateName"),
            _str_attr("HLAFOMmoduleDesignatorList", "HLAmoduleDesignatorList"),
        ),
    )
    object_root = ObjectClassDef(
        OBJECT_ROOT,
        Sharing.NEITHER,
        (AttributeDef("HLAprivilegeToDeleteObject", "HLAtoken", "HLAreliable", Order.TIMESTAMP),),
        (ObjectClassDef(MOM_ROOT, Sharing.NEITHER, (), (federation, federate)),),
    )

    fed_interactions = _mom_group(
        "HLAfederation",
        [
            _mom_group(
                "HLArequest",
                [
                    _mom_interaction(
                        "HLArequestFOMmoduleData", [("HLAFOMmoduleIndicator", "HLAinteger32BE")]
                    ),
                    _mom_interaction("HLArequestMIMData", []),
                ],
            ),
            _mom_group(
                "HLAreport",
                [
                    _mom_interaction(
                        "HLAreportFOMmoduleData",
                        [
                            ("HLAFOMmoduleIndicator", "HLAinteger32BE"),
                            ("HLAFOMmoduleData", "HLAunicodeString"),
                        ],
                    ),
                    _mom_interaction("HLAreportMIMData", [("HLAMIMData", "HLAunicodeString")]),
                ],
            ),
        ],
    )
    fedr_interactions = _mom_group(
        "HLAfederate",
        [
            _mom_group(
                "HLArequest",
                [
                    _mom_interaction(
                        "HLArequestFOMmoduleData",
                        [
                            ("HLAfederate", "HLAunicodeString"),
                            ("HLAFOMmoduleIndicator", "HLAinteger32BE"),
                        ],
                    )
                ],
            ),
            _mom_group(
                "HLAreport",
                [
                    _mom_interaction(
                        "HLAreportFOMmoduleData",
                        [
                            ("HLAfederate", "HLAunicodeString"),
                            ("HLAFOMmoduleIndicator", "HLAinteger32BE"),
                            ("HLAFOMmoduleData", "HLAunicodeString"),
                        ],
                    )
                ],
            ),
        ],
    )
    interaction_root = InteractionClassDef(
        INTERACTION_ROOT,
        Sharing.NEITHER,
        "HLAreliable",
        Order.RECEIVE,
        (),
        (_mom_group(MOM_ROOT, [fed_interactions, fedr_interactions]),),
    )

    data_types = (
        DataTypeDef("HLAoctet", DataTypeCategory.BASIC, "size=8 endian=Big"),
        DataTypeDef("HLAunicodeChar", DataTypeCategory.BASIC, "size=16 endian=Big"),
        DataTypeDef("HLAinteger32BE", DataTypeCategory.BASIC, "size=32 endian=Big"),
        DataTypeDef("HLAfloat64BE", DataTypeCategory.BASIC, "size=64 endian=Big"),
        DataTypeDef("HLAunicodeString", DataTypeCategory.ARRAY, "element=HLAunicodeChar cardinality=Dynamic"),
        DataTypeDef("HLAtoken", DataTypeCategory.ARRAY, "element=HLAoctet cardinality=Dynamic"),
        DataTypeDef(
            "HLAmoduleDesignatorList",
            DataTypeCategory.ARRAY,
            "element=HLAunicodeString cardinality=Dynamic",
        ),
    )
    return ObjectModule(
        identification=ModelIdentification(MIM_NAME, ModelType.MIM, "1.0"),
        objects=(object_root,),
        interactions=(interaction_root,),
        data_types=data_types,
        transportations=(
            Transportation("HLAreliable", Reliability.RELIABLE),
            Transportation("HLAbestEffort", Reliability.BEST_EFFORT),
        ),
        switches=Switches.all(SwitchValue.ENABLED),
    )


_DEFAULT_MIM = _build_default_mim()


def default_mim() -> ObjectModule:
    """The built-in MOM and Initialization Module."""
    return _DEFAULT_MIM
