"""In-process federation executions with modular FOM loading and MOM introspection.

Create and join accept lists of modules that are merged atomically into the
execution's Current FOM. The MOM view (:meth:`Rti.mom_snapshot`) and the MOM
request interactions are answered synchronously.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping

from .document import serialize_module
from .merge import CurrentFom, MergeRejection, MergeReport, initial_fom, merge_modules
from .model import OBJECT_ROOT, ObjectModule, default_mim

DUPLICATE_FEDERATION = "FED-001"
UNKNOWN_FEDERATION = "FED-002"
DUPLICATE_FEDERATE = "FED-003"
UNKNOWN_FEDERATE = "FED-004"
FEDERATES_JOINED = "FED-005"
INDEX_OUT_OF_RANGE = "FED-006"
UNKNOWN_SCOPE = "FED-007"
UNKNOWN_CLASS = "FED-008"
AMBIGUOUS_CLASS = "FED-009"
NO_MODULES = "FED-010"
BAD_NAME = "FED-011"


class FederationError(Exception):
    def __init__(self, rule_id: str, message: str):
        super().__init__(f"[{rule_id}] {message}")
        self.rule_id = rule_id
        self.message = message


class MomKind(str, Enum):
    REQUEST_FOM_MODULE_DATA = "RequestFomModuleData"
    REPORT_FOM_MODULE_DATA = "ReportFomModuleData"
    REQUEST_MIM_DATA = "RequestMimData"
    REPORT_MIM_DATA = "ReportMimData"


FEDERATION_SCOPE = "federation"


@dataclass(frozen=True)
class MomInteraction:
    kind: MomKind
    scope: str
    module_index: int | None = None
    payload: bytes = b""


@dataclass(frozen=True)
class ModuleRecord:
    name: str
    source: bytes


@dataclass(frozen=True)
class Federate:
    name: str
    handle: int
    joined_modules: tuple[str, ...] = ()
    publications: frozenset[int] = frozenset()
    subscriptions: frozenset[int] = frozenset()


@dataclass(frozen=True)
class Event:
    seq: int
    kind: str
    subject: str
    detail: str = ""
    modules: tuple[ObjectModule, ...] = field(default=(), compare=False, repr=False)

    def __str__(self) -> str:
        text = f"#{self.seq} {self.kind} {self.subject}"
        return f"{text} {self.detail}" if self.detail else text


@dataclass(frozen=True)
class MomSnapshot:
    federation_name: str
    fom_module_designators: tuple[str, ...]
    mim_designator: str
    current_fdd: str
    federate_designators: Mapping[str, tuple[str, ...]]


def _source(m: ObjectModule) -> bytes:
    return m.source if m.source is not None else serialize_module(m)


class FederationExecution:
    """State of one named federation execution.

    Mutated only through :class:`Rti`, which holds ``lock`` while doing so.
    """

    def __init__(self, name: str, current_fom: CurrentFom, mim: ObjectModule, modules: list[ModuleRecord]):
        self.name = name
        self.current_fom = current_fom
        self.mim = mim
        self.mim_record = ModuleRecord(mim.name, _source(mim))
        self.module_records: list[ModuleRecord] = list(modules)
        self.federates: dict[str, Federate] = {}
        self.federate_modules: dict[str, list[ModuleRecord]] = {}
        self.event_log: list[Event] = []
        self.last_report: MergeReport | None = None
        self.lock = threading.RLock()
        self._next_federate_handle = 1

    def log(self, kind: str, subject: str, detail: str = "", modules=()) -> None:
        self.event_log.append(Event(len(self.event_log) + 1, kind, subject, detail, tuple(modules)))

    def replay(self) -> CurrentFom:
        """Rebuild the Current FOM from the load events in the log."""
        fom = initial_fom(self.mim)
        for event in self.event_log:
            if event.modules:
                fom, _ = merge_modules(fom, list(event.modules))
        return fom


def _new_records(old: CurrentFom, new: CurrentFom, load_set: list[ObjectModule]) -> list[ModuleRecord]:
    by_key = {}
    for m in load_set:
        by_key.setdefault((m.name, m.identification.version), m)
    return [
        ModuleRecord(lm.name, _source(by_key[(lm.name, lm.version)]))
        for lm in new.loaded[len(old.loaded):]
    ]


class Rti:
    """A run-time infrastructure hosting any number of federation executions."""

    def __init__(self) -> None:
        self.executions: dict[str, FederationExecution] = {}
        self._lock = threading.Lock()

    def _execution(self, name: str) -> FederationExecution:
        try:
            return self.executions[name]
        except KeyError:
            raise FederationError(UNKNOWN_FEDERATION, f"no federation execution named {name!r}") from None

    def _federate(self, fed: FederationExecution, name: str) -> Federate:
        try:
            return fed.federates[name]
        except KeyError:
            raise FederationError(
                UNKNOWN_FEDERATE, f"federate {name!r} has not joined {fed.name!r}"
            ) from None

    # -- lifecycle -------------------------------------------------------------

    def create_federation_execution(
        self, name: str, fom_modules: Iterable[ObjectModule], mim: ObjectModule | None = None
    ) -> FederationExecution:
        fom_modules = list(fom_modules)
        if not name:
            raise FederationError(BAD_NAME, "federation name must be non-empty")
        if not fom_modules:
            raise FederationError(NO_MODULES, "at least one FOM module is required")
        with self._lock:
            if name in self.executions:
                raise FederationError(DUPLICATE_FEDERATION, f"federation {name!r} already exists")
            mim = mim or default_mim()
            start = initial_fom(mim)
            fom, report = merge_modules(start, fom_modules)
            fed = FederationExecution(name, fom, mim, _new_records(start, fom, fom_modules))
            fed.log("create", name, _designator_text(fom_modules), fom_modules)
            fed.last_report = report
            self.executions[name] = fed
            return fed

    def join_federation_execution(
        self, federate_name: str, federation_name: str, additional_modules: Iterable[ObjectModule] = ()
    ) -> Federate:
        additional_modules = list(additional_modules)
        fed = self._execution(federation_name)
        with fed.lock:
            if not federate_name:
                raise FederationError(BAD_NAME, "federate name must be non-empty")
            if federate_name in fed.federates:
                raise FederationError(
                    DUPLICATE_FEDERATE, f"federate {federate_name!r} already joined {federation_name!r}"
                )
            records: list[ModuleRecord] = []
            if additional_modules:
                fom, report = merge_modules(fed.current_fom, additional_modules)
                fed.module_records.extend(_new_records(fed.current_fom, fom, additional_modules))
                fed.current_fom = fom
                fed.last_report = report
                records = [ModuleRecord(m.name, _source(m)) for m in additional_modules]
            federate = Federate(
                federate_name, fed._next_federate_handle, tuple(r.name for r in records)
            )
            fed._next_federate_handle += 1
            fed.federates[federate_name] = federate
            fed.federate_modules[federate_name] = records
            fed.log("join", federate_name, _designator_text(additional_modules), additional_modules)
            return federate

    def resign_federate(self, federation_name: str, federate_name: str) -> None:
        fed = self._execution(federation_name)
        with fed.lock:
            self._federate(fed, federate_name)
            del fed.federates[federate_name]
            del fed.federate_modules[federate_name]
            fed.log("resign", federate_name)

    def destroy_federation_execution(self, name: str) -> None:
        with self._lock:
            fed = self._execution(name)
            with fed.lock:
                if fed.federates:
                    joined = ", ".join(sorted(fed.federates))
                    raise FederationError(FEDERATES_JOINED, f"federates still joined: {joined}")
                del self.executions[name]

    # -- MOM -------------------------------------------------------------------

    def mom_snapshot(self, federation_name: str) -> MomSnapshot:
        fed = self._execution(federation_name)
        with fed.lock:
            return MomSnapshot(
                federation_name=fed.name,
                fom_module_designators=tuple(r.name for r in fed.module_records),
                mim_designator=fed.mim_record.name,
                current_fdd=fed.current_fom.fdd().decode("utf-8"),
                federate_designators=MappingProxyType(
                    {n: tuple(r.name for r in recs) for n, recs in fed.federate_modules.items()}
                ),
            )

    def request_module_data(
        self, federation_name: str, index: int, federate: str | None = None
    ) -> MomInteraction:
        """Answer a request for the content of one loaded module.

        ``federate=None`` indexes the federation-wide designator list;
        otherwise the list of modules that federate supplied when joining.
        The payload is the document exactly as it was supplied.
        """
        fed = self._execution(federation_name)
        with fed.lock:
            if federate is None:
                records, scope = fed.module_records, FEDERATION_SCOPE
            else:
                if federate not in fed.federates:
                    raise FederationError(UNKNOWN_SCOPE, f"no joined federate {federate!r}")
                records, scope = fed.federate_modules[federate], f"federate:{federate}"
            if not isinstance(index, int) or not 0 <= index < len(records):
                raise FederationError(
                    INDEX_OUT_OF_RANGE, f"module index {index} out of range for {scope} ({len(records)} modules)"
                )
            fed.log("reqmod", scope, str(index))
            return MomInteraction(MomKind.REPORT_FOM_MODULE_DATA, scope, index, records[index].source)

    def request_mim_data(self, federation_name: str) -> MomInteraction:
        fed = self._execution(federation_name)
        with fed.lock:
            fed.log("reqmim", fed.name)
            return MomInteraction(MomKind.REPORT_MIM_DATA, FEDERATION_SCOPE, None, fed.mim_record.source)

    # -- declarations ----------------------------------------------------------

    def get_object_class_handle(self, federation_name: str, class_name: str) -> int:
        """Resolve a qualified or unique leaf class name to its stable handle."""
        fed = self._execution(federation_name)
        with fed.lock:
            return _resolve(fed.current_fom.object_class_handles, class_name)

    def get_object_class_name(self, federation_name: str, handle: int) -> str:
        fed = self._execution(federation_name)
        with fed.lock:
            for qname, h in fed.current_fom.object_class_handles.items():
                if h == handle:
                    return qname
        raise FederationError(UNKNOWN_CLASS, f"no object class with handle {handle}")

    def publish_object_class(self, federation_name: str, federate_name: str, cls: str | int) -> int:
        return self._declare(federation_name, federate_name, cls, "publications")

    def subscribe_object_class(self, federation_name: str, federate_name: str, cls: str | int) -> int:
        return self._declare(federation_name, federate_name, cls, "subscriptions")

    def _declare(self, federation_name: str, federate_name: str, cls: str | int, which: str) -> int:
        fed = self._execution(federation_name)
        with fed.lock:
            federate = self._federate(fed, federate_name)
            if isinstance(cls, int):
                if cls not in fed.current_fom.object_class_handles.values():
                    raise FederationError(UNKNOWN_CLASS, f"no object class with handle {cls}")
                handle = cls
            else:
                handle = _resolve(fed.current_fom.object_class_handles, cls)
            fed.federates[federate_name] = replace(
                federate, **{which: getattr(federate, which) | {handle}}
            )
            fed.log("publish" if which == "publications" else "subscribe", federate_name, str(handle))
            return handle

    def federate(self, federation_name: str, federate_name: str) -> Federate:
        fed = self._execution(federation_name)
        with fed.lock:
            return self._federate(fed, federate_name)


def _resolve(handles: Mapping[str, int], name: str) -> int:
    if name in handles:
        return handles[name]
    qualified = f"{OBJECT_ROOT}.{name}"
    if qualified in handles:
        return handles[qualified]
    matches = [q for q in handles if q.rsplit(".", 1)[-1] == name]
    if len(matches) == 1:
        return handles[matches[0]]
    if matches:
        raise FederationError(AMBIGUOUS_CLASS, f"{name!r} matches {', '.join(sorted(matches))}")
    raise FederationError(UNKNOWN_CLASS, f"unknown object class {name!r}")


def _designator_text(modules: list[ObjectModule]) -> str:
    return "[" + ", ".join(m.name for m in modules) + "]"


__all__ = [
    "Event",
    "Federate",
    "FederationError",
    "FederationExecution",
    "MergeRejection",
    "MergeReport",
    "MomInteraction",
    "MomKind",
    "MomSnapshot",
    "ModuleRecord",
    "Rti",
]
