"""Line-oriented scenario scripts driving an :class:`~fomforge.federation.Rti`.

Each non-blank line is one command; ``#`` starts a comment. Module paths are
resolved relative to the script's directory. ``expect`` lines assert on the
most recent non-``expect`` command::

    create Fed samples/module1.fmod
    expect ok
    join Logger Fed samples/module2.fmod
    handle Fed Aircraft
    expect unchanged
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass, field
from pathlib import Path

from .document import ModuleParseError, Severity, parse_module
from .federation import FederationError, MomSnapshot, Rti
from .merge import MergeRejection

_ARITY = {
    # command: (min args, max args or None)
    "create": (2, None),
    "join": (2, None),
    "mom": (1, 1),
    "reqmod": (3, 3),
    "reqmim": (1, 1),
    "handle": (2, 2),
    "publish": (3, 3),
    "subscribe": (3, 3),
    "resign": (2, 2),
    "destroy": (1, 1),
    "expect": (1, None),
}


class ScriptError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class Step:
    line: int
    command: str
    ok: bool = True
    rule_id: str = ""
    message: str = ""
    value: str = ""
    payload: bytes | None = None
    snapshot: MomSnapshot | None = None


@dataclass
class Check:
    line: int
    passed: bool
    message: str


@dataclass
class ScenarioResult:
    steps: list[Step] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)
    rti: Rti | None = None
    # every execution created, including destroyed ones, for tracing
    federations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]


def parse_script(text: str) -> list[tuple[int, list[str]]]:
    """Split a script into ``(line_number, tokens)`` commands, validating arity."""
    out = []
    for number, raw in enumerate(text.splitlines(), start=1):
        try:
            tokens = shlex.split(raw, comments=True)
        except ValueError as exc:
            raise ScriptError(number, str(exc)) from None
        if not tokens:
            continue
        cmd, args = tokens[0], tokens[1:]
        if cmd not in _ARITY:
            raise ScriptError(number, f"unknown command {cmd!r}")
        lo, hi = _ARITY[cmd]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ScriptError(number, f"wrong number of arguments for {cmd!r}")
        if cmd == "create" and "--mim" in args:
            i = args.index("--mim")
            if i + 1 >= len(args) or len(args) - 2 < 2:
                raise ScriptError(number, "create needs --mim <file> plus a name and modules")
        out.append((number, tokens))
    return out


class ScenarioRunner:
    def __init__(self, base_dir: Path, rti: Rti | None = None):
        self.base_dir = Path(base_dir)
        self.rti = rti or Rti()
        self.result = ScenarioResult(rti=self.rti)
        self._last: Step | None = None
        self._history: dict[str, list[Step]] = {}

    def _load(self, name: str):
        path = self.base_dir / name
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise _StepFailure("IO-001", f"cannot read {name}: {exc.strerror}") from None
        try:
            return parse_module(data)
        except ModuleParseError as exc:
            first = next(d for d in exc.diagnostics if d.severity is Severity.ERROR)
            raise _StepFailure(first.rule_id, f"{name}:{first}") from None

    def run(self, commands: list[tuple[int, list[str]]]) -> ScenarioResult:
        for line, tokens in commands:
            if tokens[0] == "expect":
                self._expect(line, tokens[1:])
                continue
            step = Step(line, " ".join(tokens))
            try:
                self._execute(step, tokens[0], tokens[1:])
            except _StepFailure as exc:
                step.ok, step.rule_id, step.message = False, exc.rule_id, exc.message
            except (FederationError, MergeRejection) as exc:
                step.ok, step.rule_id, step.message = False, exc.rule_id, str(exc)
            self.result.steps.append(step)
            self._history.setdefault(step.command, []).append(step)
            self._last = step
        return self.result

    def _execute(self, step: Step, cmd: str, args: list[str]) -> None:
        rti = self.rti
        if cmd == "create":
            mim = None
            if "--mim" in args:
                i = args.index("--mim")
                mim = self._load(args[i + 1])
                args = args[:i] + args[i + 2:]
            fed = rti.create_federation_execution(args[0], [self._load(a) for a in args[1:]], mim)
            self.result.federations.append(fed)
            step.value = str(fed.current_fom.generation)
            step.message = f"created {fed.name}"
        elif cmd == "join":
            federate = rti.join_federation_execution(args[0], args[1], [self._load(a) for a in args[2:]])
            step.value = str(federate.handle)
            step.message = f"joined {federate.name} as federate {federate.handle}"
        elif cmd == "mom":
            snap = rti.mom_snapshot(args[0])
            step.snapshot = snap
            step.value = ",".join(snap.fom_module_designators)
            step.message = f"modules [{step.value}] mim {snap.mim_designator}"
        elif cmd == "reqmod":
            scope = args[1]
            federate = None
            if scope.startswith("federate:"):
                federate = scope.split(":", 1)[1]
            elif scope != "federation":
                raise _StepFailure("FED-007", f"unknown scope {scope!r}")
            try:
                index = int(args[2])
            except ValueError:
                raise _StepFailure("FED-006", f"module index {args[2]!r} is not an integer") from None
            report = rti.request_module_data(args[0], index, federate)
            step.payload = report.payload
            step.value = str(len(report.payload))
            step.message = f"{report.kind.value} {report.scope}[{index}] {len(report.payload)} bytes"
        elif cmd == "reqmim":
            report = rti.request_mim_data(args[0])
            step.payload = report.payload
            step.value = str(len(report.payload))
            step.message = f"{report.kind.value} {len(report.payload)} bytes"
        elif cmd == "handle":
            step.value = str(rti.get_object_class_handle(args[0], args[1]))
            step.message = f"{args[1]} -> {step.value}"
        elif cmd in ("publish", "subscribe"):
            action = rti.publish_object_class if cmd == "publish" else rti.subscribe_object_class
            step.value = str(action(args[0], args[1], args[2]))
            step.message = f"{args[1]} {cmd}s {args[2]} ({step.value})"
        elif cmd == "resign":
            rti.resign_federate(args[0], args[1])
            step.message = f"{args[1]} resigned"
        elif cmd == "destroy":
            rti.destroy_federation_execution(args[0])
            step.message = f"destroyed {args[0]}"

    def _check(self, line: int, passed: bool, message: str) -> None:
        self.result.checks.append(Check(line, passed, message))

    def _expect(self, line: int, args: list[str]) -> None:
        step = self._last
        if step is None:
            self._check(line, False, "expect with no preceding command")
            return
        what, rest = args[0], args[1:]
        if what == "ok":
            self._check(line, step.ok, "ok" if step.ok else f"expected ok, got [{step.rule_id}] {step.message}")
        elif what == "error":
            if step.ok:
                self._check(line, False, "expected an error, command succeeded")
            elif rest and rest[0] != step.rule_id:
                self._check(line, False, f"expected error {rest[0]}, got {step.rule_id}")
            else:
                self._check(line, True, f"error {step.rule_id}")
        elif not step.ok:
            self._check(line, False, f"cannot check {what}: command failed with {step.rule_id}")
        elif what == "value":
            want = " ".join(rest)
            self._check(line, step.value == want, f"value {step.value!r}, expected {want!r}")
        elif what == "unchanged":
            earlier = [s for s in self._history[step.command][:-1] if s.ok]
            if not earlier:
                self._check(line, False, f"no earlier successful run of {step.command!r}")
            else:
                prev = earlier[-1].value
                self._check(line, prev == step.value, f"value {step.value!r}, earlier {prev!r}")
        elif what == "payload":
            if step.payload is None or not rest:
                self._check(line, False, "expect payload needs a reqmod/reqmim command and a file")
                return
            try:
                want = (self.base_dir / rest[0]).read_bytes()
            except OSError as exc:
                self._check(line, False, f"cannot read {rest[0]}: {exc.strerror}")
                return
            self._check(line, step.payload == want, f"payload equals {rest[0]}" if step.payload == want
                        else f"payload differs from {rest[0]}")
        elif what in ("designators", "mim", "fdd"):
            snap = step.snapshot
            if snap is None:
                self._check(line, False, f"expect {what} must follow a mom command")
                return
            if what == "designators":
                if rest and rest[0].startswith("federate:"):
                    name = rest[0].split(":", 1)[1]
                    got = list(snap.federate_designators.get(name, ()))
                    want = rest[1:]
                else:
                    got, want = list(snap.fom_module_designators), rest
                self._check(line, got == want, f"designators {got}, expected {want}")
            elif what == "mim":
                want = " ".join(rest)
                self._check(line, snap.mim_designator == want, f"mim {snap.mim_designator!r}, expected {want!r}")
            else:
                try:
                    expected = parse_module((self.base_dir / rest[0]).read_bytes())
                except (OSError, ModuleParseError) as exc:
                    self._check(line, False, f"cannot load expected FDD {rest[0]}: {exc}")
                    return
                try:
                    got = parse_module(snap.current_fdd)
                except ModuleParseError as exc:
                    self._check(line, False, f"HLAcurrentFDD does not parse: {exc}")
                    return
                self._check(line, got == expected, f"HLAcurrentFDD {'matches' if got == expected else 'differs from'} {rest[0]}")
        else:
            self._check(line, False, f"unknown expectation {what!r}")


class _StepFailure(Exception):
    def __init__(self, rule_id: str, message: str):
        super().__init__(message)
        self.rule_id = rule_id
        self.message = message


def run_scenario(text: str, base_dir: Path | str = ".", rti: Rti | None = None) -> ScenarioResult:
    """Parse and execute a scenario; raises :class:`ScriptError` on malformed scripts."""
    return ScenarioRunner(Path(base_dir), rti).run(parse_script(text))
