"""Seeded random generators for modules and load sets.

Everything takes a ``random.Random`` so a case is reproducible from its seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from fomforge.model import (
    AttributeDef,
    DataTypeCategory,
    DataTypeDef,
    Dimension,
    InteractionClassDef,
    ModelIdentification,
    ModelType,
    NoteEntry,
    ObjectClassDef,
    ObjectModule,
    Order,
    ParameterDef,
    Reference,
    SWITCH_NAMES,
    Reliability,
    Sharing,
    SwitchValue,
    Switches,
    SynchronizationPoint,
    Transportation,
    UpdateRate,
    default_mim,
)

MIM_TYPES = ["HLAunicodeString", "HLAinteger32BE", "HLAfloat64BE"]
MIM_TRANSPORTS = ["HLAreliable", "HLAbestEffort"]
_TEXT_CHARS = "abc XYZ 019 &<>\"' \n\t\r é漢 ]]> #;"


def rand_text(rng: random.Random, max_len: int = 12) -> str:
    return "".join(rng.choice(_TEXT_CHARS) for _ in range(rng.randint(0, max_len)))


def rand_name(rng: random.Random, prefix: str = "N") -> str:
    alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-"
    return prefix + "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 6)))


# -- arbitrary (structurally valid) modules, for round-trip checks ---------------


def _arbitrary_object(rng, depth, budget) -> ObjectClassDef:
    budget[0] -= 1
    scaffold = rng.random() < 0.3
    attrs = ()
    if not scaffold:
        names = sorted({rand_name(rng, "a") for _ in range(rng.randint(0, 3))}, key=lambda _: rng.random())
        attrs = tuple(
            AttributeDef(
                n,
                rand_name(rng, "T"),
                rng.choice(MIM_TRANSPORTS + ["Tx"]),
                rng.choice(list(Order)),
                tuple(rand_name(rng, "D") for _ in range(rng.randint(0, 2))),
                rand_text(rng) if rng.random() < 0.4 else "",
            )
            for n in names
        )
    kids = {}
    while depth < 4 and budget[0] > 0 and rng.random() < 0.5:
        child = _arbitrary_object(rng, depth + 1, budget)
        kids.setdefault(child.name, child)
    return ObjectClassDef(
        rand_name(rng, "C"),
        None if scaffold else rng.choice(list(Sharing)),
        attrs,
        tuple(kids.values()),
    )


def _arbitrary_interaction(rng, depth, budget) -> InteractionClassDef:
    budget[0] -= 1
    scaffold = rng.random() < 0.3
    kids = {}
    while depth < 4 and budget[0] > 0 and rng.random() < 0.5:
        child = _arbitrary_interaction(rng, depth + 1, budget)
        kids.setdefault(child.name, child)
    if scaffold:
        return InteractionClassDef(rand_name(rng, "I"), children=tuple(kids.values()))
    names = list(dict.fromkeys(rand_name(rng, "p") for _ in range(rng.randint(0, 3))))
    return InteractionClassDef(
        rand_name(rng, "I"),
        rng.choice(list(Sharing)),
        rng.choice(MIM_TRANSPORTS),
        rng.choice(list(Order)),
        tuple(ParameterDef(n, rand_name(rng, "T"), rand_text(rng) if rng.random() < 0.3 else "") for n in names),
        tuple(kids.values()),
    )


def _unique(items):
    seen = {}
    for it in items:
        seen.setdefault(it.name, it)
    return tuple(seen.values())


def _random_switches(rng: random.Random) -> Switches | None:
    if rng.random() < 0.5:
        return None
    return Switches(tuple((k, rng.choice(list(SwitchValue))) for k in SWITCH_NAMES))


def arbitrary_module(rng: random.Random) -> ObjectModule:
    """A random module that satisfies every model invariant (references may dangle)."""
    budget = [rng.randint(0, 30)]
    objects = _unique(_arbitrary_object(rng, 1, budget) for _ in range(rng.randint(0, 3)) if budget[0] > 0)
    interactions = _unique(
        _arbitrary_interaction(rng, 1, budget) for _ in range(rng.randint(0, 2)) if budget[0] > 0
    )
    explicit = rng.random() < 0.1
    model_type = rng.choice([ModelType.FOM, ModelType.MIM]) if explicit else rng.choice(
        [ModelType.FOM_MODULE, ModelType.SOM_MODULE]
    )
    if explicit:
        objects = (ObjectClassDef("HLAobjectRoot", Sharing.NEITHER, (), objects),)
        interactions = (
            InteractionClassDef("HLAinteractionRoot", Sharing.NEITHER, "HLAreliable", Order.RECEIVE, (), interactions),
        )
    refs = []
    r = rng.random()
    if r < 0.3:
        refs.append(Reference("Standalone"))
    elif r < 0.6:
        refs.append(Reference("Dependency", tuple(rand_name(rng, "M") for _ in range(rng.randint(1, 3)))))
    if rng.random() < 0.2:
        refs.append(Reference("ComposedFrom", (rand_name(rng, "M"),)))
    if rng.random() < 0.1:
        refs.append(Reference("Other", ()))
    categories = list(DataTypeCategory)
    return ObjectModule(
        identification=ModelIdentification(
            rand_name(rng, "M"), model_type, rng.choice(["1.0", "2", "", "v 3"]), tuple(refs)
        ),
        objects=objects,
        interactions=interactions,
        data_types=_unique(
            DataTypeDef(rand_name(rng, "T"), rng.choice(categories), rand_text(rng, 20))
            for _ in range(rng.randint(0, 4))
        ),
        dimensions=_unique(
            Dimension(rand_name(rng, "D"), rng.randint(1, 10_000)) for _ in range(rng.randint(0, 2))
        ),
        transportations=_unique(
            Transportation(rand_name(rng, "X"), rng.choice(list(Reliability))) for _ in range(rng.randint(0, 2))
        ),
        synchronization_points=_unique(
            SynchronizationPoint(rand_name(rng, "S"), rand_name(rng, "T"), rand_text(rng))
            for _ in range(rng.randint(0, 2))
        ),
        update_rates=_unique(
            UpdateRate(rand_name(rng, "U"), rng.choice(["50", "0.5", "12.250", "1e2", "3.0"]))
            for _ in range(rng.randint(0, 2))
        ),
        switches=_random_switches(rng),
        notes=_unique(NoteEntry(rand_name(rng, "L"), rand_text(rng, 30)) for _ in range(rng.randint(0, 2))),
    )


# -- compatible load sets --------------------------------------------------------


@dataclass
class _UClass:
    qname: str
    defn: ObjectClassDef | InteractionClassDef  # without children
    parent: str | None
    children: list[str] = field(default_factory=list)


@dataclass
class Universe:
    """A consistent pool of classes and table entries that modules draw from."""

    objects: dict[str, _UClass]
    interactions: dict[str, _UClass]
    data_types: dict[str, DataTypeDef]
    dimensions: dict[str, Dimension]
    transportations: dict[str, Transportation]
    sync_points: dict[str, SynchronizationPoint]
    update_rates: dict[str, UpdateRate]
    notes: dict[str, NoteEntry]


def _grow(rng, kind, n, types, transports, dims, prefix):
    out: dict[str, _UClass] = {}
    root = "HLAobjectRoot" if kind == "o" else "HLAinteractionRoot"
    leaf_names = [f"{prefix}{i}" for i in range(n)] + ["Sensor", "Sensor"]
    rng.shuffle(leaf_names)
    for leaf in leaf_names[:n]:
        parents = [None] + list(out)
        parent = rng.choice(parents)
        qparent = parent or root
        qname = f"{qparent}.{leaf}"
        if qname in out:
            continue
        if kind == "o":
            attrs = tuple(
                AttributeDef(
                    f"{leaf}_a{j}",
                    rng.choice(types),
                    rng.choice(transports),
                    rng.choice(list(Order)),
                    tuple(rng.sample(dims, rng.randint(0, min(2, len(dims))))),
                    f"{leaf} attribute {j}",
                )
                for j in range(rng.randint(0, 3))
            )
            defn = ObjectClassDef(leaf, rng.choice(list(Sharing)), attrs)
        else:
            params = tuple(
                ParameterDef(f"{leaf}_p{j}", rng.choice(types), f"param {j}") for j in range(rng.randint(0, 3))
            )
            defn = InteractionClassDef(
                leaf, rng.choice(list(Sharing)), rng.choice(transports), rng.choice(list(Order)), params
            )
        out[qname] = _UClass(qname, defn, parent)
        if parent:
            out[parent].children.append(qname)
    return out


def make_universe(rng: random.Random, n_objects: int = 14, n_interactions: int = 6, tag: str = "") -> Universe:
    data_types = {
        f"T{tag}{i}": DataTypeDef(f"T{tag}{i}", DataTypeCategory.SIMPLE, f"HLAinteger32BE units{i}")
        for i in range(4)
    }
    dims = {f"D{tag}{i}": Dimension(f"D{tag}{i}", 10 * (i + 1)) for i in range(2)}
    transports = {f"X{tag}0": Transportation(f"X{tag}0", Reliability.RELIABLE)}
    types = list(data_types) + MIM_TYPES
    transport_names = list(transports) + MIM_TRANSPORTS
    return Universe(
        objects=_grow(rng, "o", n_objects, types, transport_names, list(dims), f"Obj{tag}"),
        interactions=_grow(rng, "i", n_interactions, types, transport_names, list(dims), f"Int{tag}"),
        data_types=data_types,
        dimensions=dims,
        transportations=transports,
        sync_points={f"Sync{tag}{i}": SynchronizationPoint(f"Sync{tag}{i}", "HLAunicodeString", "s") for i in range(2)},
        update_rates={f"Rate{tag}{i}": UpdateRate(f"Rate{tag}{i}", str(5 * (i + 1))) for i in range(2)},
        notes={f"Note{tag}{i}": NoteEntry(f"Note{tag}{i}", f"note {i}") for i in range(2)},
    )


def _ancestors(pool: dict[str, _UClass], qname: str) -> list[str]:
    out = []
    parent = pool[qname].parent
    while parent:
        out.append(parent)
        parent = pool[parent].parent
    return out


def _build_tree(pool: dict[str, _UClass], members: dict[str, bool]):
    """Nest the chosen classes; ``members`` maps qname -> regular?"""

    def build(q):
        uc = pool[q]
        kids = tuple(build(c) for c in uc.children if c in members)
        if members[q]:
            return replace(uc.defn, children=kids)
        return type(uc.defn)(uc.defn.name, children=kids)

    return tuple(build(q) for q, uc in pool.items() if uc.parent is None and q in members)


def _upward_closed_subset(rng, pool, size) -> list[str]:
    chosen: set[str] = set()
    for q in rng.sample(list(pool), min(size, len(pool))):
        chosen.add(q)
        chosen.update(_ancestors(pool, q))
    return [q for q in pool if q in chosen]


def module_from(
    rng: random.Random,
    universe: Universe,
    name: str,
    regular_objects: set[str],
    regular_interactions: set[str],
    switches_mode: str = "random",
) -> ObjectModule:
    """A module with the given regular classes plus scaffolding for their ancestors."""
    obj_members = {}
    for q in regular_objects:
        obj_members[q] = True
        for a in _ancestors(universe.objects, q):
            obj_members.setdefault(a, a in regular_objects)
    int_members = {}
    for q in regular_interactions:
        int_members[q] = True
        for a in _ancestors(universe.interactions, q):
            int_members.setdefault(a, a in regular_interactions)
    used_types, used_transports, used_dims = set(), set(), set()
    for q in regular_objects:
        for a in universe.objects[q].defn.attributes:
            used_types.add(a.data_type)
            used_transports.add(a.transportation)
            used_dims.update(a.dimensions)
    for q in regular_interactions:
        d = universe.interactions[q].defn
        used_transports.add(d.transportation)
        used_types.update(p.data_type for p in d.parameters)

    def pick(table: dict, needed: set):
        keep = [k for k in table if k in needed or rng.random() < 0.3]
        rng.shuffle(keep)
        return tuple(table[k] for k in keep)

    has_scaffolding = not all(obj_members.values()) or not all(int_members.values())
    ref = Reference("Dependency", ("Base",)) if has_scaffolding else Reference("Standalone")
    switches = None
    if switches_mode == "random" and rng.random() < 0.3:
        switches = Switches.all(SwitchValue.ENABLED)
    objects = list(_build_tree(universe.objects, obj_members))
    interactions = list(_build_tree(universe.interactions, int_members))
    rng.shuffle(objects)
    rng.shuffle(interactions)
    return ObjectModule(
        identification=ModelIdentification(name, ModelType.FOM_MODULE, "1.0", (ref,)),
        objects=tuple(objects),
        interactions=tuple(interactions),
        data_types=pick(universe.data_types, used_types),
        dimensions=pick(universe.dimensions, used_dims),
        transportations=pick(universe.transportations, used_transports),
        synchronization_points=pick(universe.sync_points, set()),
        update_rates=pick(universe.update_rates, set()),
        switches=switches,
        notes=pick(universe.notes, set()),
    )


def compatible_set(
    rng: random.Random, universe: Universe, n_modules: int, max_classes: int = 30, tag: str = "M"
) -> list[ObjectModule]:
    """Modules that merge cleanly in any order as one atomic load set."""
    objs = _upward_closed_subset(rng, universe.objects, rng.randint(1, 8))
    ints = _upward_closed_subset(rng, universe.interactions, rng.randint(0, 4))
    owners_o = {q: {rng.randrange(n_modules)} for q in objs}
    owners_i = {q: {rng.randrange(n_modules)} for q in ints}
    for owners in (owners_o, owners_i):
        for q in owners:
            if rng.random() < 0.25:
                owners[q].add(rng.randrange(n_modules))
    out = []
    for i in range(n_modules):
        ro = {q for q in objs if i in owners_o[q]}
        ri = {q for q in ints if i in owners_i[q]}
        m = module_from(rng, universe, f"{tag}{i}", ro, ri)
        assert count_classes(m) <= max_classes
        out.append(m)
    return out


def count_classes(m: ObjectModule) -> int:
    def n(cls):
        return 1 + sum(n(c) for c in cls.children)

    return sum(n(c) for c in m.objects) + sum(n(c) for c in m.interactions)


# -- independent flattening oracle -----------------------------------------------


def flatten(m: ObjectModule, scaffolding: bool = True) -> set[str]:
    """Fully-qualified names by direct recursion over the document structure."""
    out = set()

    def rec(prefix, cls):
        q = prefix + "." + cls.name
        if scaffolding or cls.sharing is not None:
            out.add(q)
        for c in cls.children:
            rec(q, c)

    if m.model_type in (ModelType.FOM_MODULE, ModelType.SOM_MODULE):
        for c in m.objects:
            rec("HLAobjectRoot", c)
        for c in m.interactions:
            rec("HLAinteractionRoot", c)
    else:
        for top in m.objects + m.interactions:
            out.add(top.name)
            for c in top.children:
                rec(top.name, c)
    return out


def mim_names() -> set[str]:
    return flatten(default_mim())


# -- poisoned load sets and extension fixtures -------------------------------------

POISON_KINDS = ("attribute-extension", "parameter-extension", "conflicting-duplicate",
                "unresolved-scaffolding", "switches-mismatch")
POISON_RULES = {
    "attribute-extension": "EXT-001",
    "parameter-extension": "EXT-002",
    "conflicting-duplicate": "EQUIV-001",
    "unresolved-scaffolding": "SCAFF-002",
    "switches-mismatch": "SWITCH-002",
}


def base_module(rng: random.Random, universe: Universe, name: str = "Base") -> ObjectModule:
    """A standalone module with at least one object and one interaction class."""
    objs = set(_upward_closed_subset(rng, universe.objects, rng.randint(1, 5)))
    ints = set(_upward_closed_subset(rng, universe.interactions, rng.randint(1, 3)))
    return module_from(rng, universe, name, objs, ints, switches_mode="none")


def _restate(rng, universe: Universe, kind: str, qname: str, defn, name: str) -> ObjectModule:
    """A module re-stating ``qname`` with ``defn``; ancestors are scaffolding."""
    pool = universe.objects if kind == "o" else universe.interactions
    node = defn
    for anc in _ancestors(pool, qname):
        node = type(defn)(pool[anc].defn.name, children=(node,))
    ref = Reference("Dependency", ("Base",))
    return ObjectModule(
        identification=ModelIdentification(name, ModelType.FOM_MODULE, "1.0", (ref,)),
        objects=(node,) if kind == "o" else (),
        interactions=(node,) if kind == "i" else (),
    )


def _extra_attribute(defn: ObjectClassDef, tag: str) -> ObjectClassDef:
    extra = AttributeDef(f"Extra{tag}", "HLAfloat64BE", "HLAreliable", Order.RECEIVE)
    return replace(defn, attributes=defn.attributes + (extra,))


def _extra_parameter(defn: InteractionClassDef, tag: str) -> InteractionClassDef:
    return replace(defn, parameters=defn.parameters + (ParameterDef(f"Extra{tag}", "HLAinteger32BE"),))


def _regulars(module: ObjectModule, attr: str) -> list[str]:
    root = module.object_root() if attr == "objects" else module.interaction_root()
    out = []

    def rec(prefix, cls):
        q = f"{prefix}.{cls.name}"
        if not cls.is_scaffolding:
            out.append(q)
        for c in cls.children:
            rec(q, c)

    for c in root.children:
        rec(root.name, c)
    return out


def poison_module(rng: random.Random, universe: Universe, base: ObjectModule, kind: str, name: str) -> ObjectModule:
    """One module that must make any load set containing it fail with ``POISON_RULES[kind]``."""
    if kind == "attribute-extension":
        q = rng.choice(_regulars(base, "objects"))
        return _restate(rng, universe, "o", q, _extra_attribute(universe.objects[q].defn, name), name)
    if kind == "parameter-extension":
        q = rng.choice(_regulars(base, "interactions"))
        return _restate(rng, universe, "i", q, _extra_parameter(universe.interactions[q].defn, name), name)
    if kind == "conflicting-duplicate":
        q = rng.choice(_regulars(base, "objects"))
        defn = universe.objects[q].defn
        other = rng.choice([s for s in Sharing if s != defn.sharing])
        if defn.attributes and rng.random() < 0.5:
            a = defn.attributes[0]
            changed = replace(a, order=Order.TIMESTAMP if a.order is Order.RECEIVE else Order.RECEIVE)
            bad = replace(defn, attributes=(changed,) + defn.attributes[1:])
        else:
            bad = replace(defn, sharing=other)
        return _restate(rng, universe, "o", q, bad, name)
    if kind == "unresolved-scaffolding":
        child = ObjectClassDef(f"Orphan{name}", Sharing.PUBLISH)
        ghost = ObjectClassDef(f"Ghost{name}", children=(child,))
        return ObjectModule(
            identification=ModelIdentification(name, ModelType.FOM_MODULE, "1.0", (Reference("Dependency", ("Base",)),)),
            objects=(ghost,),
        )
    if kind == "switches-mismatch":
        values = [(k, SwitchValue.ENABLED) for k in SWITCH_NAMES]
        i = rng.randrange(len(values))
        values[i] = (values[i][0], SwitchValue.DISABLED)
        return ObjectModule(
            identification=ModelIdentification(name, ModelType.FOM_MODULE, "1.0", (Reference("Standalone"),)),
            switches=Switches(tuple(values)),
        )
    raise ValueError(kind)


def poisoned_load_set(rng: random.Random, universe: Universe, base: ObjectModule, kind: str, tag: str):
    """Compatible modules plus one poisoned module at a random position."""
    good = compatible_set(rng, universe, rng.randint(1, 3), tag=f"G{tag}_") if rng.random() < 0.8 else []
    poison = poison_module(rng, universe, base, kind, f"P{tag}")
    good.insert(rng.randint(0, len(good)), poison)
    return good


def extension_fixtures(rng: random.Random, universe: Universe, base: ObjectModule, tag: str):
    """``(option, module)`` pairs: a/b are permitted extensions, c/d are not."""
    out = []
    # (a) a new class directly under a root
    if rng.random() < 0.5:
        cls = ObjectClassDef(f"Fresh{tag}", Sharing.PUBLISH, (AttributeDef("Id", "HLAinteger32BE", "HLAreliable", Order.RECEIVE),))
        objs, ints = (cls,), ()
    else:
        cls = InteractionClassDef(f"Fresh{tag}", Sharing.SUBSCRIBE, "HLAbestEffort", Order.RECEIVE,
                                  (ParameterDef("Id", "HLAinteger32BE"),))
        objs, ints = (), (cls,)
    out.append(("a", ObjectModule(
        ModelIdentification(f"A{tag}", ModelType.FOM_MODULE, "1.0", (Reference("Standalone"),)), objs, ints)))
    # (b) a new subclass of an existing class
    q = rng.choice(_regulars(base, "objects"))
    sub = ObjectClassDef(f"Sub{tag}", Sharing.PUBLISH_SUBSCRIBE,
                         (AttributeDef("Extra", "HLAfloat64BE", "HLAreliable", Order.RECEIVE),))
    parent = ObjectClassDef(universe.objects[q].defn.name, children=(sub,))
    out.append(("b", _restate(rng, universe, "o", q, parent, f"B{tag}")))
    # (c) attributes added to an existing object class
    q = rng.choice(_regulars(base, "objects"))
    out.append(("c", _restate(rng, universe, "o", q, _extra_attribute(universe.objects[q].defn, tag), f"C{tag}")))
    # (d) parameters added to an existing interaction class
    q = rng.choice(_regulars(base, "interactions"))
    out.append(("d", _restate(rng, universe, "i", q, _extra_parameter(universe.interactions[q].defn, tag), f"D{tag}")))
    return out
