"""Command interface: timing parameters, per-vault scheduling, write windows.

Commands are the repurposed quartet prepare/activate/read/write. Prepare
toggles a bank's sensing reference (RAM<->CAM) and costs tRP; activate toggles
a superset's port selector and costs tRAS; reads (and searches, which are
reads in CAM sensing) complete after tCAS+tBURST; data writes after
tCWD+tWRITE. State toggles apply at command completion. One operation is in
flight per superset at a time; read/write bus spacing is enforced per vault.
"""

import math
from dataclasses import dataclass, fields, replace
from enum import Enum

from .errors import ConfigError
from .xam import SenseRef
from .superset import PortMode

CLOCK_HZ = 3.2e9
YEAR_SECONDS = 365 * 24 * 3600  # 3.1536e7; ten years = 3.1536e8 s


@dataclass(frozen=True)
class TimingParams:
    """Interface timing in CPU cycles. Defaults are the resistive-stack row
    of the system configuration; tWRITE follows tWR."""

    t_rp: int = 8
    t_ras: int = 4
    t_rcd: int = 4
    t_cas: int = 4
    t_cwd: int = 4
    t_ccd_r: int = 1
    t_write: int = 162
    t_ccd_w: int = 162
    t_rtp: int = 1
    t_rrd: int = 1
    t_burst: int = 4
    t_mww: int = 0       # cycles per write window; 0 = unbound
    m_writes: int = 3    # writes per block budget within one window

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")
        if self.t_rcd != self.t_ras:
            raise ValueError("t_rcd must equal t_ras")
        if self.t_rrd != self.t_rtp:
            raise ValueError("t_rrd must equal t_rtp")

    @classmethod
    def rram(cls, **overrides):
        return cls(**overrides)

    @classmethod
    def cmos(cls, **overrides):
        base = dict(t_rp=8, t_ras=4, t_rcd=4, t_cas=4, t_cwd=4, t_ccd_r=1,
                    t_write=3, t_ccd_w=3, t_rtp=1, t_rrd=1, t_burst=4)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_file(cls, path) -> "TimingParams":
        """Plain key=value file, names exactly as the field names."""
        values = {}
        names = {f.name for f in fields(cls)}
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"expected key=value, got {line!r}", lineno)
                key, _, value = line.partition("=")
                key = key.strip()
                if key not in names:
                    raise ConfigError(f"unknown timing parameter {key!r}", lineno)
                try:
                    values[key] = int(value.strip())
                except ValueError:
                    raise ConfigError(f"non-integer value for {key}", lineno) from None
        return cls(**values)

    def with_window(self, t_mww: int, m_writes: int) -> "TimingParams":
        return replace(self, t_mww=t_mww, m_writes=m_writes)


def derive_tmww_seconds(t_life_seconds: float, n_w: int, m_writes: int) -> float:
    """Window length (seconds) allowing m writes per block at a lifetime target."""
    if t_life_seconds <= 0 or n_w < 1 or m_writes < 1:
        raise ValueError("lifetime target, endurance, and M must be positive")
    return m_writes * t_life_seconds / n_w


def derive_tmww(t_life_seconds: float, n_w: int, m_writes: int,
                f_clk: float = CLOCK_HZ) -> int:
    """Window length in clock cycles, rounded up."""
    return math.ceil(derive_tmww_seconds(t_life_seconds, n_w, m_writes) * f_clk)


class CommandKind(Enum):
    PREPARE = "P"
    ACTIVATE = "A"
    READ = "R"
    WRITE = "W"


@dataclass(frozen=True)
class Command:
    kind: CommandKind
    vault: int
    bank: int
    superset: int = -1
    set_id: int = -1
    row: int = -1
    col: int = -1
    issue_cycle: int = 0
    register_write: bool = False  # key/mask transfer: no cell programming


@dataclass(frozen=True)
class IssueResult:
    accept: int
    complete: int


@dataclass
class TraceRecord:
    cycle: int
    kind: str
    vault: int
    bank: int
    superset: int
    set_id: int
    row: int
    col: int

    def line(self) -> str:
        return (f"{self.cycle} {self.kind} {self.vault} {self.bank} "
                f"{self.superset} {self.set_id} {self.row} {self.col}")

    @classmethod
    def parse(cls, line: str, lineno: int = 0) -> "TraceRecord":
        parts = line.split()
        if len(parts) != 8:
            raise ConfigError("expected 8 whitespace-separated fields", lineno)
        try:
            return cls(int(parts[0]), parts[1], *(int(p) for p in parts[2:]))
        except ValueError:
            raise ConfigError("non-integer trace field", lineno) from None


class _BankState:
    __slots__ = ("sense", "ready", "last_prepare", "last_activate")

    def __init__(self):
        self.sense = SenseRef.READ          # banks power up in RAM mode
        self.ready = 0                      # prepare completion
        self.last_prepare = None
        self.last_activate = None


class _SupersetState:
    __slots__ = ("port", "activate_done", "busy_until")

    def __init__(self):
        self.port = PortMode.ROW_IN
        self.activate_done = 0
        self.busy_until = 0


class VaultScheduler:
    """Earliest-legal-cycle command scheduler for one vault.

    Deterministic: the accepted cycle is a pure function of the command
    sequence. Every accepted command is appended to the trace sink.
    """

    def __init__(self, vault_id: int, timing: TimingParams, trace=None):
        self.vault_id = vault_id
        self.timing = timing
        self.trace = trace if trace is not None else []
        self._banks: dict[int, _BankState] = {}
        self._supersets: dict[tuple[int, int], _SupersetState] = {}
        self._last_read = None
        self._last_write = None
        self._last_accept = None  # one command per cycle on the vault bus
        self.commands_issued = 0

    # -- state queries (the controller tracks modes through these) -----------

    def bank(self, bank_id: int) -> _BankState:
        return self._banks.setdefault(bank_id, _BankState())

    def superset(self, bank_id: int, ss_id: int) -> _SupersetState:
        return self._supersets.setdefault((bank_id, ss_id), _SupersetState())

    def sense_mode(self, bank_id: int) -> SenseRef:
        return self.bank(bank_id).sense

    def port_mode(self, bank_id: int, ss_id: int) -> PortMode:
        return self.superset(bank_id, ss_id).port

    # -- issue ----------------------------------------------------------------

    def earliest(self, cmd: Command) -> int:
        """Accept cycle the command would get, without mutating state."""
        t = self.timing
        bank = self.bank(cmd.bank)
        at = max(cmd.issue_cycle, 0)
        if self._last_accept is not None:
            at = max(at, self._last_accept + 1)
        if cmd.kind is CommandKind.PREPARE:
            return max(at, bank.ready)
        ss = self.superset(cmd.bank, cmd.superset)
        if cmd.kind is CommandKind.ACTIVATE:
            at = max(at, bank.ready, ss.busy_until)
            if bank.last_activate is not None:
                at = max(at, bank.last_activate + t.t_rrd)
            return at
        at = max(at, bank.ready, ss.activate_done, ss.busy_until)
        if cmd.kind is CommandKind.READ:
            if self._last_read is not None:
                at = max(at, self._last_read + t.t_ccd_r)
        else:
            if self._last_write is not None:
                at = max(at, self._last_write + t.t_ccd_w)
        return at

    def issue(self, cmd: Command) -> IssueResult:
        t = self.timing
        at = self.earliest(cmd)
        bank = self.bank(cmd.bank)

        if cmd.kind is CommandKind.PREPARE:
            bank.ready = at + t.t_rp
            bank.sense = (SenseRef.SEARCH if bank.sense is SenseRef.READ
                          else SenseRef.READ)
            bank.last_prepare = at
            complete = bank.ready
        elif cmd.kind is CommandKind.ACTIVATE:
            ss = self.superset(cmd.bank, cmd.superset)
            bank.last_activate = at
            ss.activate_done = at + t.t_ras
            ss.busy_until = ss.activate_done
            ss.port = (PortMode.COLUMN_IN if ss.port is PortMode.ROW_IN
                       else PortMode.ROW_IN)
            complete = ss.activate_done
        elif cmd.kind is CommandKind.READ:
            ss = self.superset(cmd.bank, cmd.superset)
            self._last_read = at
            complete = at + t.t_cas + t.t_burst
            ss.busy_until = complete
        elif cmd.kind is CommandKind.WRITE:
            ss = self.superset(cmd.bank, cmd.superset)
            self._last_write = at
            cost = t.t_burst if cmd.register_write else t.t_write
            complete = at + t.t_cwd + cost
            ss.busy_until = complete
        else:  # pragma: no cover
            raise ValueError(f"unknown command kind {cmd.kind}")

        self.commands_issued += 1
        self._last_accept = at
        self.trace.append(TraceRecord(at, cmd.kind.value, self.vault_id,
                                      cmd.bank, cmd.superset, cmd.set_id,
                                      cmd.row, cmd.col))
        return IssueResult(at, complete)


@dataclass(frozen=True)
class WindowDecision:
    allowed: bool
    ready_cycle: int      # when the write may proceed (== now when allowed)
    lookup_penalty: int   # extra cycles if the on-chip counter buffer missed


class WriteWindowTracker:
    """Per-superset write budget of blocks_per_superset * M per tumbling window.

    Counters live in main memory with a small on-chip buffer; a buffer miss
    charges one main-memory read latency to the decision. A zero window means
    the unbound configuration (always allow).
    """

    def __init__(self, t_mww: int, m_writes: int, blocks_per_superset: int = 512,
                 buffer_entries: int = 512, miss_penalty: int = 98):
        self.t_mww = int(t_mww)
        self.budget = blocks_per_superset * m_writes
        self.buffer_entries = buffer_entries
        self.miss_penalty = miss_penalty
        self._counts: dict[int, tuple[int, int]] = {}
        self._buffer: dict[int, None] = {}   # insertion-ordered LRU
        self.buffer_hits = 0
        self.buffer_misses = 0

    def _touch_buffer(self, key: int) -> int:
        if key in self._buffer:
            self._buffer.pop(key)
            self._buffer[key] = None
            self.buffer_hits += 1
            return 0
        self.buffer_misses += 1
        self._buffer[key] = None
        if len(self._buffer) > self.buffer_entries:
            self._buffer.pop(next(iter(self._buffer)))
        return self.miss_penalty

    def probe(self, superset_gid: int, now: int) -> WindowDecision:
        """Budget decision without touching the on-chip counter buffer."""
        if self.t_mww <= 0:
            return WindowDecision(True, now, 0)
        window = now // self.t_mww
        recorded_window, count = self._counts.get(superset_gid, (window, 0))
        if recorded_window != window:
            count = 0
        if count < self.budget:
            return WindowDecision(True, now, 0)
        return WindowDecision(False, (window + 1) * self.t_mww, 0)

    def check(self, superset_gid: int, now: int) -> WindowDecision:
        if self.t_mww <= 0:
            return WindowDecision(True, now, 0)
        penalty = self._touch_buffer(superset_gid)
        d = self.probe(superset_gid, now)
        return WindowDecision(d.allowed, d.ready_cycle, penalty)

    def commit(self, superset_gid: int, now: int) -> None:
        """Record one accepted block write at cycle `now`."""
        if self.t_mww <= 0:
            return
        window = now // self.t_mww
        recorded_window, count = self._counts.get(superset_gid, (window, 0))
        if recorded_window != window:
            count = 0
        self._counts[superset_gid] = (window, count + 1)

    def locked_until(self, superset_gid: int, now: int) -> int | None:
        """Lock expiry for a superset, without touching the counter buffer."""
        if self.t_mww <= 0:
            return None
        window = now // self.t_mww
        recorded_window, count = self._counts.get(superset_gid, (window, 0))
        if recorded_window == window and count >= self.budget:
            return (window + 1) * self.t_mww
        return None
