"""``fomforge`` command line: validate, merge, diff and simulate.

Exit codes: 0 success, 1 parse/validation failure, 2 merge rejection,
3 scenario assertion failure, 64 usage error.

With ``--format tsv`` every output line is one tab-separated record whose
first field names the record type (``diag``, ``class``, ``diff``, ``step``,
``check``, ``report``, ``event``).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .document import check_module, serialize_module
from .merge import MergeRejection, diff_foms, initial_fom, merge_modules
from .model import classify_module
from .scenario import ScriptError, run_scenario

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_REJECTED = 2
EXIT_ASSERTION = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _Out:
    def __init__(self, fmt: str, stream=None):
        self.fmt = fmt
        self.stream = stream or sys.stdout
        self.color = (
            fmt == "text"
            and not os.environ.get("FOMFORGE_NO_COLOR")
            and hasattr(self.stream, "isatty")
            and self.stream.isatty()
        )

    @property
    def tsv(self) -> bool:
        return self.fmt == "tsv"

    def paint(self, text: str, code: str) -> str:
        return f"\033[{code}m{text}\033[0m" if self.color else text

    def record(self, *fields) -> None:
        print("\t".join(str(f).replace("\t", " ").replace("\n", " ") for f in fields), file=self.stream)

    def line(self, text: str = "") -> None:
        print(text, file=self.stream)


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _load_all(paths: list[str], out: _Out):
    modules, failed = [], False
    for path in paths:
        try:
            data = _read(path)
        except OSError as exc:
            _emit_diag(out, path, 0, 0, "Error", "IO-001", f"cannot read file: {exc.strerror}")
            failed = True
            continue
        module, diags = check_module(data)
        for d in diags:
            _emit_diag(out, path, d.line, d.column, d.severity.value, d.rule_id, d.message)
        if module is None:
            failed = True
        else:
            modules.append(module)
    return modules, failed


def _emit_diag(out: _Out, path, line, col, severity, rule_id, message) -> None:
    if out.tsv:
        out.record("diag", path, line, col, severity, rule_id, message)
    else:
        label = out.paint(severity.lower(), "31" if severity == "Error" else "33")
        out.line(f"{path}:{line}:{col}: {label} [{rule_id}] {message}")


def cmd_validate(args, out: _Out) -> int:
    status = EXIT_OK
    for path in args.files:
        modules, failed = _load_all([path], out)
        if failed:
            status = EXIT_INVALID
            continue
        m = modules[0]
        if args.classify:
            kind = "-" if m.model_type.has_explicit_roots else classify_module(m)[0].value
            if out.tsv:
                out.record("class", path, m.name, kind)
            else:
                out.line(f"{path}: {m.name} {kind}")
        elif out.tsv:
            out.record("valid", path, m.name)
        else:
            out.line(f"{path}: {out.paint('ok', '32')}")
    return status


def _report_records(out: _Out, report) -> None:
    rows = [("added", q) for q in report.added_classes]
    rows += [("duplicate", q) for q in report.duplicate_classes_ignored]
    rows += [("resolved", q) for q in report.scaffolding_resolved]
    rows += [(f"table:{t}", n) for t, names in report.added_table_entries.items() for n in names]
    rows += [("repeated", n) for n in report.repeated_modules]
    rows += [("warning", w) for w in report.warnings]
    for kind, value in rows:
        if out.tsv:
            out.record("report", kind, value)
        else:
            out.line(f"  {kind}: {value}")


def cmd_merge(args, out: _Out) -> int:
    paths = ([args.mim] if args.mim else []) + args.files
    modules, failed = _load_all(paths, out)
    if failed:
        return EXIT_INVALID
    mim = modules.pop(0) if args.mim else None
    try:
        fom = initial_fom(mim)
        fom, report = merge_modules(fom, modules)
    except MergeRejection as exc:
        d = exc.diagnosis
        if out.tsv:
            out.record("rejected", d.module, d.element, d.rule_id, d.reason)
        else:
            out.line(f"{out.paint('rejected', '31')} [{d.rule_id}] module {d.module}, {d.element}: {d.reason}")
        return EXIT_REJECTED
    fdd = serialize_module(fom.merged_model)
    if args.output:
        Path(args.output).write_bytes(fdd)
        if not out.tsv:
            out.line(f"wrote {args.output} ({len(fom.class_names())} classes)")
        _report_records(out, report)
    else:
        sys.stdout.buffer.write(fdd)
        sys.stdout.flush()
    return EXIT_OK


def cmd_diff(args, out: _Out) -> int:
    modules, failed = _load_all([args.a, args.b], out)
    if failed:
        return EXIT_INVALID
    diff = diff_foms(modules[0], modules[1])
    for e in diff.entries:
        if out.tsv:
            out.record("diff", e.change, e.kind, e.key, e.detail)
        else:
            out.line(str(e))
    if not diff and not out.tsv:
        out.line("no differences")
    return EXIT_OK


def cmd_simulate(args, out: _Out) -> int:
    path = Path(args.script)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        _emit_diag(out, args.script, 0, 0, "Error", "IO-001", f"cannot read script: {exc}")
        return EXIT_INVALID
    try:
        result = run_scenario(text, path.parent)
    except ScriptError as exc:
        _emit_diag(out, args.script, exc.line, 1, "Error", "SCRIPT-001", str(exc))
        return EXIT_INVALID
    for step in result.steps:
        status = "ok" if step.ok else "error"
        if out.tsv:
            out.record("step", step.line, status, step.rule_id, step.command, step.message)
        else:
            tag = out.paint(status, "32" if step.ok else "33")
            extra = f" [{step.rule_id}]" if step.rule_id else ""
            out.line(f"{step.line:4d} {tag}{extra} {step.command}: {step.message}")
    for check in result.checks:
        verdict = "pass" if check.passed else "FAIL"
        if out.tsv:
            out.record("check", check.line, verdict.lower(), check.message)
        elif not check.passed:
            out.line(f"{check.line:4d} {out.paint('FAIL', '31')} {check.message}")
    if args.trace:
        for fed in result.federations:
            for event in fed.event_log:
                if out.tsv:
                    out.record("event", fed.name, event.seq, event.kind, event.subject, event.detail)
                else:
                    out.line(f"trace {fed.name} {event}")
    failures = len(result.failures)
    if not out.tsv:
        out.line(f"{len(result.checks) - failures}/{len(result.checks)} expectations passed")
    return EXIT_OK if failures == 0 else EXIT_ASSERTION


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--format", choices=("text", "tsv"), default="text", help="tsv: one tab-separated record per line"
    )
    parser = _Parser(prog="fomforge", description="Modular FOM toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", parents=[common], help="parse and check module documents")
    p.add_argument("files", nargs="+")
    p.add_argument("--classify", action="store_true", help="print Standalone/Dependent per module")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("merge", parents=[common], help="merge modules into a composite FDD")
    p.add_argument("files", nargs="+")
    p.add_argument("--mim", help="MOM and Initialization Module to use instead of the built-in one")
    p.add_argument("-o", "--output", help="write the FDD here (default: stdout)")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("diff", parents=[common], help="structured difference between two models")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("simulate", parents=[common], help="run a federation scenario script")
    p.add_argument("script")
    p.add_argument("--trace", action="store_true", help="print each federation's event log")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args, _Out(args.format))


if __name__ == "__main__":
    sys.exit(main())
