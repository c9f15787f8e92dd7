"""Reading and writing ``.fmod`` module documents.

The format is a small XML dialect. A class element whose only non-class
child is ``<name>`` is a scaffolding description; anything else makes it
regular and requires ``<sharing>``. Unknown elements and attributes are
errors, never silently dropped.

:func:`serialize_module` is canonical: equal modules give byte-equal
documents, and ``parse_module(serialize_module(m)) == m``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from xml.parsers import expat

from .model import (
    INTERACTION_ROOT,
    NA,
    OBJECT_ROOT,
    RESERVED_TOP_LEVEL,
    SWITCH_NAMES,
    AttributeDef,
    DataTypeCategory,
    DataTypeDef,
    Dimension,
    InteractionClassDef,
    ModelError,
    ModelIdentification,
    ModelType,
    NoteEntry,
    ObjectClassDef,
    ObjectModule,
    Order,
    ParameterDef,
    Reference,
    Reliability,
    Sharing,
    SwitchValue,
    Switches,
    SynchronizationPoint,
    Transportation,
    UpdateRate,
    classify_module,
)

FILE_SUFFIX = ".fmod"


class Severity(str, Enum):
    ERROR = "Error"
    WARNING = "Warning"


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: Severity
    line: int
    column: int
    message: str
    rule_id: str

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity.value.lower()} [{self.rule_id}] {self.message}"


class ModuleParseError(ValueError):
    def __init__(self, diagnostics: list[ParseDiagnostic]):
        self.diagnostics = diagnostics
        errors = [d for d in diagnostics if d.severity is Severity.ERROR]
        super().__init__("; ".join(str(d) for d in errors) or "invalid module")


class _Node:
    __slots__ = ("tag", "attrs", "children", "text", "line", "col")

    def __init__(self, tag: str, attrs: dict, line: int, col: int):
        self.tag = tag
        self.attrs = attrs
        self.children: list[_Node] = []
        self.text: list[str] = []
        self.line = line
        self.col = col

    @property
    def content(self) -> str:
        return "".join(self.text)


class _Abort(Exception):
    pass


def _build_tree(data: bytes, diags: list[ParseDiagnostic]) -> _Node | None:
    parser = expat.ParserCreate("UTF-8")
    stack: list[_Node] = []
    root: list[_Node] = []

    def start(tag, attrs):
        node = _Node(tag, attrs, parser.CurrentLineNumber, parser.CurrentColumnNumber + 1)
        if stack:
            stack[-1].children.append(node)
        else:
            root.append(node)
        stack.append(node)

    def end(tag):
        stack.pop()

    def chars(text):
        if stack:
            stack[-1].text.append(text)

    def doctype(*args):
        diags.append(
            ParseDiagnostic(
                Severity.ERROR,
                parser.CurrentLineNumber,
                parser.CurrentColumnNumber + 1,
                "document type declarations are not allowed",
                "XML-001",
            )
        )
        raise _Abort

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    parser.StartDoctypeDeclHandler = doctype
    try:
        parser.Parse(data, True)
    except _Abort:
        return None
    except expat.ExpatError as exc:
        diags.append(
            ParseDiagnostic(
                Severity.ERROR,
                exc.lineno,
                exc.offset + 1,
                f"malformed markup: {expat.ErrorString(exc.code)}",
                "XML-001",
            )
        )
        return None
    return root[0]


class _Reader:
    """Turns the positioned element tree into model values, collecting diagnostics."""

    def __init__(self, diags: list[ParseDiagnostic]):
        self.diags = diags

    def error(self, node: _Node, rule_id: str, message: str) -> None:
        self.diags.append(ParseDiagnostic(Severity.ERROR, node.line, node.col, message, rule_id))

    def attrs(self, node: _Node, required: tuple = (), optional: tuple = ()) -> dict | None:
        ok = True
        for key in node.attrs:
            if key not in required and key not in optional:
                self.error(node, "ATTR-001", f"unknown attribute {key!r} on <{node.tag}>")
                ok = False
        for key in required:
            if key not in node.attrs:
                self.error(node, "ATTR-002", f"<{node.tag}> is missing attribute {key!r}")
                ok = False
        return dict(node.attrs) if ok else None

    def no_text(self, node: _Node) -> None:
        if node.content.strip():
            self.error(node, "XML-002", f"unexpected text inside <{node.tag}>")

    def leaf(self, node: _Node) -> None:
        for child in node.children:
            self.error(child, "ELEM-001", f"unexpected element <{child.tag}> inside <{node.tag}>")

    def enum(self, node: _Node, enum_cls, value: str, what: str):
        try:
            return enum_cls(value)
        except ValueError:
            allowed = ", ".join(e.value for e in enum_cls)
            self.error(node, "VALUE-001", f"invalid {what} {value!r} (expected one of {allowed})")
            return None

    def build(self, node: _Node, ctor, *args, **kwargs):
        try:
            return ctor(*args, **kwargs)
        except ModelError as exc:
            self.error(node, exc.rule_id, exc.message)
            return None

    # -- document ---------------------------------------------------------

    def module(self, root: _Node) -> ObjectModule | None:
        if root.tag != "objectModel":
            self.error(root, "ELEM-001", f"root element must be <objectModel>, not <{root.tag}>")
            return None
        for key in ("name", "modelType"):
            if key not in root.attrs:
                self.error(root, "IDENT-001", f"missing identification attribute {key!r}")
        attrs = self.attrs(root, ("name", "modelType"), ("version",))
        self.no_text(root)
        model_type = None
        if attrs is not None:
            model_type = self.enum(root, ModelType, attrs["modelType"], "modelType")

        sections: dict[str, _Node] = {}
        for child in root.children:
            if child.tag not in _SECTIONS:
                self.error(child, "ELEM-001", f"unknown element <{child.tag}>")
            elif child.tag in sections:
                self.error(child, "ELEM-002", f"section <{child.tag}> appears twice")
            else:
                sections[child.tag] = child

        references = self.references(sections.get("references"))
        explicit = model_type is not None and model_type.has_explicit_roots
        objects = self.class_list(sections.get("objects"), "objectClass", explicit, OBJECT_ROOT)
        interactions = self.class_list(
            sections.get("interactions"), "interactionClass", explicit, INTERACTION_ROOT
        )
        tables = {
            "data_types": self.table(sections.get("dataTypes"), "dataType", self.data_type),
            "dimensions": self.table(sections.get("dimensions"), "dimension", self.dimension),
            "transportations": self.table(
                sections.get("transportations"), "transportation", self.transportation
            ),
            "synchronization_points": self.table(
                sections.get("synchronizations"), "synchronizationPoint", self.sync_point
            ),
            "update_rates": self.table(sections.get("updateRates"), "updateRate", self.update_rate),
            "notes": self.table(sections.get("notes"), "note", self.note),
        }
        switches = self.switches(sections.get("switches"))

        if any(d.severity is Severity.ERROR for d in self.diags) or attrs is None:
            return None
        ident = self.build(
            root,
            ModelIdentification,
            attrs["name"],
            model_type,
            attrs.get("version", ""),
            tuple(references),
        )
        if ident is None:
            return None
        return self.build(
            root,
            ObjectModule,
            ident,
            tuple(objects),
            tuple(interactions),
            switches=switches,
            **{k: tuple(v) for k, v in tables.items()},
        )

    def references(self, node: _Node | None) -> list[Reference]:
        out = []
        if node is None:
            return out
        self.attrs(node)
        self.no_text(node)
        for child in node.children:
            if child.tag != "reference":
                self.error(child, "ELEM-001", f"unexpected element <{child.tag}> in <references>")
                continue
            attrs = self.attrs(child, ("type", "idents"))
            self.leaf(child)
            if attrs is None:
                continue
            idents = attrs["idents"].strip()
            ident_value = NA if idents == NA else tuple(
                s.strip() for s in idents.split(",") if s.strip()
            )
            ref = self.build(child, Reference, attrs["type"], ident_value)
            if ref is not None:
                out.append(ref)
        return out

    def class_list(self, node: _Node | None, tag: str, explicit: bool, root_name: str) -> list:
        if node is None:
            if explicit:
                self.diags.append(
                    ParseDiagnostic(Severity.ERROR, 1, 1, f"model must define {root_name}", "CLOSURE-002")
                )
            return []
        self.attrs(node)
        self.no_text(node)
        out = []
        seen: set[str] = set()
        for child in node.children:
            if child.tag != tag:
                self.error(child, "ELEM-001", f"unexpected element <{child.tag}> in <{node.tag}>")
                continue
            cls = self.class_def(child, tag, [])
            if cls is None:
                continue
            if explicit:
                if cls.name != root_name:
                    self.error(child, "CLOSURE-002", f"top-level class must be {root_name}, got {cls.name}")
            elif cls.name in RESERVED_TOP_LEVEL:
                self.error(child, "RESERVED-001", f"only the MIM may define {cls.name}")
            if cls.name in seen:
                self.error(child, "DUP-001", f"duplicate sibling class {cls.name!r}")
                continue
            seen.add(cls.name)
            out.append(cls)
        if explicit and len(out) != 1 and not any(
            d.rule_id == "CLOSURE-002" for d in self.diags
        ):
            self.error(node, "CLOSURE-002", f"model must define exactly one {root_name}")
        return out

    def class_def(self, node: _Node, tag: str, path: list[str]):
        self.attrs(node)
        self.no_text(node)
        is_object = tag == "objectClass"
        member_tag = "attribute" if is_object else "parameter"
        props = ("sharing",) if is_object else ("sharing", "transportation", "order")
        name_nodes, prop_nodes, members, subclasses = [], {}, [], []
        for child in node.children:
            if child.tag == "name":
                name_nodes.append(child)
            elif child.tag in props:
                if child.tag in prop_nodes:
                    self.error(child, "ELEM-002", f"<{child.tag}> given twice")
                prop_nodes[child.tag] = child
            elif child.tag == member_tag:
                members.append(child)
            elif child.tag == tag:
                subclasses.append(child)
            else:
                self.error(child, "ELEM-001", f"unexpected element <{child.tag}> in <{tag}>")
        if not name_nodes:
            self.error(node, "ELEM-003", f"<{tag}> is missing <name>")
            return None
        if len(name_nodes) > 1:
            self.error(name_nodes[1], "ELEM-002", "<name> given twice")
        name_node = name_nodes[0]
        self.attrs(name_node)
        self.leaf(name_node)
        name = name_node.content.strip()
        if "." in name:
            *ancestors, leaf = name.split(".")
            where = ".".join(path) or "the root"
            self.error(
                name_node,
                "CLOSURE-001",
                f"class {leaf!r} names superclasses {'.'.join(ancestors)} that this module does "
                f"not define (neither regular nor scaffolding) under {where}",
            )
            return None
        qpath = path + [name]

        values = {}
        for key, child in prop_nodes.items():
            self.attrs(child)
            self.leaf(child)
            values[key] = child.content.strip()

        if "sharing" not in values:
            if members or prop_nodes:
                what = "attributes" if is_object else "parameters or properties"
                self.error(
                    node,
                    "SCAFF-001",
                    f"class {name!r} has {what} but no <sharing>; scaffolding must carry only a name",
                )
                return None
            sharing = None
        else:
            sharing = self.enum(prop_nodes["sharing"], Sharing, values["sharing"], "sharing")
            if sharing is None:
                return None

        member_defs = []
        member_names: set[str] = set()
        for m in members:
            d = self.attribute(m) if is_object else self.parameter(m)
            if d is None:
                continue
            if d.name in member_names:
                self.error(m, "DUP-002", f"duplicate {member_tag} {d.name!r} in class {name!r}")
                continue
            member_names.add(d.name)
            member_defs.append(d)

        children = []
        child_names: set[str] = set()
        for sub in subclasses:
            c = self.class_def(sub, tag, qpath)
            if c is None:
                continue
            if c.name in child_names:
                self.error(sub, "DUP-001", f"duplicate sibling class {c.name!r} under {'.'.join(qpath)}")
                continue
            child_names.add(c.name)
            children.append(c)

        if is_object:
            return self.build(node, ObjectClassDef, name, sharing, tuple(member_defs), tuple(children))
        transportation = order = None
        if sharing is not None:
            for key in ("transportation", "order"):
                if key not in values:
                    self.error(node, "ELEM-003", f"regular interaction {name!r} is missing <{key}>")
            transportation = values.get("transportation")
            if "order" in values:
                order = self.enum(prop_nodes["order"], Order, values["order"], "order")
            if transportation is None or order is None:
                return None
        return self.build(
            node,
            InteractionClassDef,
            name,
            sharing,
            transportation,
            order,
            tuple(member_defs),
            tuple(children),
        )

    def attribute(self, node: _Node) -> AttributeDef | None:
        attrs = self.attrs(
            node, ("name", "dataType", "transportation", "order"), ("dimensions", "semantics")
        )
        self.leaf(node)
        self.no_text(node)
        if attrs is None:
            return None
        order = self.enum(node, Order, attrs["order"], "order")
        if order is None:
            return None
        return self.build(
            node,
            AttributeDef,
            attrs["name"],
            attrs["dataType"],
            attrs["transportation"],
            order,
            tuple(attrs.get("dimensions", "").split()),
            attrs.get("semantics", ""),
        )

    def parameter(self, node: _Node) -> ParameterDef | None:
        attrs = self.attrs(node, ("name", "dataType"), ("semantics",))
        self.leaf(node)
        self.no_text(node)
        if attrs is None:
            return None
        return self.build(node, ParameterDef, attrs["name"], attrs["dataType"], attrs.get("semantics", ""))

    def table(self, node: _Node | None, tag: str, reader) -> list:
        out = []
        if node is None:
            return out
        self.attrs(node)
        self.no_text(node)
        seen: set[str] = set()
        for child in node.children:
            if child.tag != tag:
                self.error(child, "ELEM-001", f"unexpected element <{child.tag}> in <{node.tag}>")
                continue
            entry = reader(child)
            if entry is None:
                continue
            if entry.name in seen:
                self.error(child, "DUP-003", f"duplicate {tag} {entry.name!r}")
                continue
            seen.add(entry.name)
            out.append(entry)
        return out

    def data_type(self, node: _Node) -> DataTypeDef | None:
        attrs = self.attrs(node, ("name", "category"))
        self.leaf(node)
        if attrs is None:
            return None
        category = self.enum(node, DataTypeCategory, attrs["category"], "category")
        if category is None:
            return None
        return self.build(node, DataTypeDef, attrs["name"], category, node.content)

    def dimension(self, node: _Node) -> Dimension | None:
        attrs = self.attrs(node, ("name", "upperBound"))
        self.leaf(node)
        self.no_text(node)
        if attrs is None:
            return None
        bound = attrs["upperBound"].strip()
        if not bound.isdigit():
            self.error(node, "VALUE-001", f"upperBound {bound!r} is not a positive integer")
            return None
        return self.build(node, Dimension, attrs["name"], int(bound))

    def transportation(self, node: _Node) -> Transportation | None:
        attrs = self.attrs(node, ("name", "reliability"))
        self.leaf(node)
        self.no_text(node)
        if attrs is None:
            return None
        rel = self.enum(node, Reliability, attrs["reliability"], "reliability")
        if rel is None:
            return None
        return self.build(node, Transportation, attrs["name"], rel)

    def sync_point(self, node: _Node) -> SynchronizationPoint | None:
        attrs = self.attrs(node, ("label", "tagDataType"), ("semantics",))
        self.leaf(node)
        self.no_text(node)
        if attrs is None:
            return None
        return self.build(
            node, SynchronizationPoint, attrs["label"], attrs["tagDataType"], attrs.get("semantics", "")
        )

    def update_rate(self, node: _Node) -> UpdateRate | None:
        attrs = self.attrs(node, ("name", "rateHz"))
        self.leaf(node)
        self.no_text(node)
        if attrs is None:
            return None
        return self.build(node, UpdateRate, attrs["name"], attrs["rateHz"])

    def note(self, node: _Node) -> NoteEntry | None:
        attrs = self.attrs(node, ("label",))
        self.leaf(node)
        if attrs is None:
            return None
        return self.build(node, NoteEntry, attrs["label"], node.content)

    def switches(self, node: _Node | None) -> Switches | None:
        if node is None:
            return None
        self.attrs(node)
        self.no_text(node)
        values = {}
        for child in node.children:
            if child.tag != "switch":
                self.error(child, "ELEM-001", f"unexpected element <{child.tag}> in <switches>")
                continue
            attrs = self.attrs(child, ("name", "value"))
            self.leaf(child)
            if attrs is None:
                continue
            if attrs["name"] not in SWITCH_NAMES:
                self.error(child, "SWITCH-001", f"unknown switch {attrs['name']!r}")
                continue
            if attrs["name"] in values:
                self.error(child, "DUP-003", f"switch {attrs['name']!r} given twice")
                continue
            value = self.enum(child, SwitchValue, attrs["value"], "switch value")
            if value is not None:
                values[attrs["name"]] = value
        missing = [k for k in SWITCH_NAMES if k not in values]
        if missing:
            self.error(node, "SWITCH-001", f"switches table is missing {', '.join(missing)}")
            return None
        return Switches(tuple(values.items()))


_SECTIONS = (
    "references",
    "objects",
    "interactions",
    "dataTypes",
    "dimensions",
    "transportations",
    "synchronizations",
    "updateRates",
    "switches",
    "notes",
)


def check_module(document: bytes | str) -> tuple[ObjectModule | None, list[ParseDiagnostic]]:
    """Parse ``document`` and return the module (or ``None``) with every diagnostic."""
    if isinstance(document, str):
        document = document.encode("utf-8")
    diags: list[ParseDiagnostic] = []
    try:
        document.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = document[: exc.start].count(b"\n") + 1
        col = exc.start - (document.rfind(b"\n", 0, exc.start) + 1) + 1
        diags.append(ParseDiagnostic(Severity.ERROR, line, col, "input is not valid UTF-8", "XML-001"))
        return None, diags
    tree = _build_tree(document, diags)
    if tree is None:
        return None, diags
    module = _Reader(diags).module(tree)
    if module is None:
        if not any(d.severity is Severity.ERROR for d in diags):
            diags.append(ParseDiagnostic(Severity.ERROR, tree.line, tree.col, "invalid module", "MODEL-001"))
        return None, diags
    if not module.model_type.has_explicit_roots:
        _, warnings = classify_module(module)
        diags.extend(
            ParseDiagnostic(Severity.WARNING, tree.line, tree.col, w, "CLASSIFY-001") for w in warnings
        )
    object.__setattr__(module, "source", bytes(document))
    return module, diags


def parse_module(document: bytes | str) -> ObjectModule:
    """Parse a module document, raising :class:`ModuleParseError` on any error.

    The returned module remembers the exact input bytes in ``source``.
    """
    module, diags = check_module(document)
    if module is None:
        raise ModuleParseError(diags)
    return module


# -- serialization ------------------------------------------------------------

_ATTR_ESCAPES = {
    "&": "&amp;",
    "<": "&lt;",
    ">": "&gt;",
    '"': "&quot;",
    "\n": "&#10;",
    "\r": "&#13;",
    "\t": "&#9;",
}
_TEXT_ESCAPES = {"&": "&amp;", "<": "&lt;", ">": "&gt;", "\r": "&#13;"}


_ATTR_TABLE = str.maketrans(_ATTR_ESCAPES)
_TEXT_TABLE = str.maketrans(_TEXT_ESCAPES)


def _attrs(pairs: list[tuple[str, str]]) -> str:
    return "".join(f' {k}="{v.translate(_ATTR_TABLE)}"' for k, v in pairs)


class _Writer:
    def __init__(self) -> None:
        self.lines: list[str] = []

    def emit(self, depth: int, text: str) -> None:
        self.lines.append("  " * depth + text)

    def empty(self, depth: int, tag: str, pairs: list[tuple[str, str]]) -> None:
        self.emit(depth, f"<{tag}{_attrs(pairs)}/>")

    def text(self, depth: int, tag: str, pairs: list[tuple[str, str]], body: str) -> None:
        if body:
            self.emit(depth, f"<{tag}{_attrs(pairs)}>{body.translate(_TEXT_TABLE)}</{tag}>")
        else:
            self.empty(depth, tag, pairs)

    def object_class(self, depth: int, cls: ObjectClassDef) -> None:
        self.emit(depth, "<objectClass>")
        self.text(depth + 1, "name", [], cls.name)
        if cls.sharing is not None:
            self.text(depth + 1, "sharing", [], cls.sharing.value)
        for a in cls.attributes:
            pairs = [
                ("name", a.name),
                ("dataType", a.data_type),
                ("transportation", a.transportation),
                ("order", a.order.value),
            ]
            if a.dimensions:
                pairs.append(("dimensions", " ".join(a.dimensions)))
            if a.semantics:
                pairs.append(("semantics", a.semantics))
            self.empty(depth + 1, "attribute", pairs)
        for child in cls.children:
            self.object_class(depth + 1, child)
        self.emit(depth, "</objectClass>")

    def interaction_class(self, depth: int, cls: InteractionClassDef) -> None:
        self.emit(depth, "<interactionClass>")
        self.text(depth + 1, "name", [], cls.name)
        if cls.sharing is not None:
            self.text(depth + 1, "sharing", [], cls.sharing.value)
            self.text(depth + 1, "transportation", [], cls.transportation)
            self.text(depth + 1, "order", [], cls.order.value)
        for p in cls.parameters:
            pairs = [("name", p.name), ("dataType", p.data_type)]
            if p.semantics:
                pairs.append(("semantics", p.semantics))
            self.empty(depth + 1, "parameter", pairs)
        for child in cls.children:
            self.interaction_class(depth + 1, child)
        self.emit(depth, "</interactionClass>")

    def section(self, tag: str, entries, write_entry) -> None:
        if not entries:
            return
        self.emit(1, f"<{tag}>")
        for e in entries:
            write_entry(e)
        self.emit(1, f"</{tag}>")


def serialize_module(m: ObjectModule) -> bytes:
    """Canonical UTF-8 document for ``m`` (LF line endings, 2-space indent)."""
    w = _Writer()
    ident = m.identification
    w.lines.append('<?xml version="1.0" encoding="UTF-8"?>')
    w.emit(
        0,
        f"<objectModel{_attrs([('name', ident.name), ('modelType', ident.model_type.value), ('version', ident.version)])}>",
    )

    def ref(r: Reference):
        idents = NA if r.identification == NA else ",".join(r.identification)
        w.empty(2, "reference", [("type", r.type), ("idents", idents)])

    w.section("references", ident.references, ref)
    w.section("objects", m.objects, lambda c: w.object_class(2, c))
    w.section("interactions", m.interactions, lambda c: w.interaction_class(2, c))
    w.section(
        "dataTypes",
        m.data_types,
        lambda d: w.text(2, "dataType", [("name", d.name), ("category", d.category.value)], d.definition),
    )
    w.section(
        "dimensions",
        m.dimensions,
        lambda d: w.empty(2, "dimension", [("name", d.name), ("upperBound", str(d.upper_bound))]),
    )
    w.section(
        "transportations",
        m.transportations,
        lambda t: w.empty(2, "transportation", [("name", t.name), ("reliability", t.reliability.value)]),
    )

    def sync(s: SynchronizationPoint):
        pairs = [("label", s.label), ("tagDataType", s.tag_data_type)]
        if s.semantics:
            pairs.append(("semantics", s.semantics))
        w.empty(2, "synchronizationPoint", pairs)

    w.section("synchronizations", m.synchronization_points, sync)
    w.section(
        "updateRates",
        m.update_rates,
        lambda u: w.empty(2, "updateRate", [("name", u.name), ("rateHz", u.rate_hz)]),
    )
    if m.switches is not None:
        w.section(
            "switches",
            m.switches.values,
            lambda kv: w.empty(2, "switch", [("name", kv[0]), ("value", kv[1].value)]),
        )
    w.section("notes", m.notes, lambda n: w.text(2, "note", [("label", n.label)], n.body))
    w.emit(0, "</objectModel>")
    return ("\n".join(w.lines) + "\n").encode("utf-8")


def read_module(path) -> ObjectModule:
    with open(path, "rb") as fh:
        return parse_module(fh.read())
