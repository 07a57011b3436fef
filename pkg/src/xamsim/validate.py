"""Independent legality checker for command traces.

Reads the dump format (one line per command: cycle kind vault bank superset
set row col) and verifies every pairwise timing constraint from first
principles. Kept free of scheduler internals so it can audit the scheduler.
"""

from dataclasses import dataclass, field

from .errors import TraceError
from .timing import TimingParams, TraceRecord

KINDS = {"P", "A", "R", "W"}


@dataclass
class Violation:
    lineno: int
    message: str

    def __str__(self):
        return f"line {self.lineno}: {self.message}"


@dataclass
class ValidationReport:
    commands: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_records(records, timing: TimingParams) -> ValidationReport:
    report = ValidationReport()
    last_prepare = {}       # (vault, bank) -> cycle
    prepare_ready = {}      # (vault, bank) -> completion cycle
    last_activate = {}      # (vault, bank) -> cycle
    activate_ready = {}     # (vault, bank, superset) -> completion cycle
    last_read = {}          # vault -> cycle
    last_write = {}         # vault -> cycle
    last_cycle = {}         # vault -> cycle (monotonicity per vault)

    def fail(lineno, message):
        report.violations.append(Violation(lineno, message))

    for lineno, rec in enumerate(records, 1):
        report.commands += 1
        if rec.kind not in KINDS:
            fail(lineno, f"unknown command kind {rec.kind!r}")
            continue
        bank_key = (rec.vault, rec.bank)
        ss_key = (rec.vault, rec.bank, rec.superset)
        if rec.cycle < last_cycle.get(rec.vault, 0):
            fail(lineno, "trace not cycle-ordered within the vault")
        last_cycle[rec.vault] = rec.cycle

        if rec.kind == "P":
            last_prepare[bank_key] = rec.cycle
            prepare_ready[bank_key] = rec.cycle + timing.t_rp
            continue

        ready = prepare_ready.get(bank_key, 0)
        if rec.cycle < ready:
            fail(lineno, f"command at {rec.cycle} inside bank preparation "
                         f"(ready at {ready})")

        if rec.kind == "A":
            prev = last_activate.get(bank_key)
            if prev is not None and rec.cycle - prev < timing.t_rrd:
                fail(lineno, f"activate-to-activate gap {rec.cycle - prev} "
                             f"< t_rrd {timing.t_rrd}")
            if bank_key in last_prepare and \
                    rec.cycle - last_prepare[bank_key] < timing.t_rp:
                fail(lineno, "activate within t_rp of the bank prepare")
            last_activate[bank_key] = rec.cycle
            activate_ready[ss_key] = rec.cycle + timing.t_ras
            continue

        # data commands need a completed activation on the superset
        done = activate_ready.get(ss_key, 0)
        if rec.cycle < done:
            fail(lineno, f"data command at {rec.cycle} before activation "
                         f"completes at {done}")
        if rec.kind == "R":
            prev = last_read.get(rec.vault)
            if prev is not None and rec.cycle - prev < timing.t_ccd_r:
                fail(lineno, f"read-to-read gap {rec.cycle - prev} "
                             f"< t_ccd_r {timing.t_ccd_r}")
            last_read[rec.vault] = rec.cycle
        else:
            prev = last_write.get(rec.vault)
            if prev is not None and rec.cycle - prev < timing.t_ccd_w:
                fail(lineno, f"write-to-write gap {rec.cycle - prev} "
                             f"< t_ccd_w {timing.t_ccd_w}")
            last_write[rec.vault] = rec.cycle
    return report


def validate_lines(lines, timing: TimingParams) -> ValidationReport:
    records = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        records.append(TraceRecord.parse(line, lineno))
    return validate_records(records, timing)


def validate_file(path, timing: TimingParams) -> ValidationReport:
    with open(path) as fh:
        return validate_lines(fh, timing)


def dump_trace(records, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(rec.line() + "\n")


def require_legal(records, timing: TimingParams) -> None:
    report = validate_records(records, timing)
    if not report.ok:
        first = report.violations[0]
        raise TraceError(f"{len(report.violations)} timing violations; first: {first}")
