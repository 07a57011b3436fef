"""Off-chip main memory, the shared L3 with D/R flags, and DRAM-style banks.

Main memory is a sparse 64-byte block store behind a row-managed bank timing
model (open-row hit, closed bank, row conflict). The L3 is a 16-way LRU cache
whose lines carry the dirty flag and a read-after-install flag; evictions
emit (block, D, R) so the stack controller can install selectively.
"""

from dataclasses import dataclass, field

from .errors import AddressError

BLOCK = 64


@dataclass(frozen=True)
class DramTiming:
    """Bank timing in CPU cycles (no refresh: folded into a utilization tax)."""

    t_rcd: int = 44
    t_cas: int = 44
    t_rp: int = 44
    t_cwd: int = 61
    t_burst: int = 10

    @classmethod
    def ddr4_main(cls):
        return cls()

    @classmethod
    def inpackage_dram(cls):
        return cls(t_burst=4)


@dataclass
class MmStats:
    reads: int = 0
    writes: int = 0
    row_hits: int = 0
    row_misses: int = 0
    row_conflicts: int = 0


class MainMemory:
    """Sparse block store + per-bank open-row state machine."""

    def __init__(self, capacity: int = 32 << 30, timing: DramTiming | None = None,
                 channels: int = 2, banks_per_channel: int = 8,
                 row_bytes: int = 8192):
        self.capacity = capacity
        self.timing = timing or DramTiming.ddr4_main()
        self.channels = channels
        self.banks_per_channel = banks_per_channel
        self.row_bytes = row_bytes
        self._blocks: dict[int, bytearray] = {}
        self._open_rows: dict[tuple[int, int], int] = {}
        self._bank_ready: dict[tuple[int, int], int] = {}
        self.stats = MmStats()

    # -- functional store ------------------------------------------------------

    def _block(self, addr: int) -> bytearray:
        if addr % BLOCK:
            raise AddressError(f"unaligned block address {addr:#x}")
        if not 0 <= addr < self.capacity:
            raise AddressError(f"address {addr:#x} outside main memory")
        blk = self._blocks.get(addr)
        if blk is None:
            blk = bytearray(BLOCK)
            self._blocks[addr] = blk
        return blk

    def read_block(self, addr: int) -> bytes:
        return bytes(self._block(addr))

    def write_block(self, addr: int, data: bytes) -> None:
        if len(data) != BLOCK:
            raise AddressError("block writes are 64 bytes")
        self._block(addr)[:] = data

    def read_word(self, addr: int) -> int:
        base = addr - addr % 8
        blk = self._block(base - base % BLOCK)
        off = base % BLOCK
        return int.from_bytes(blk[off:off + 8], "little")

    def write_word(self, addr: int, value: int) -> None:
        base = addr - addr % 8
        blk = self._block(base - base % BLOCK)
        off = base % BLOCK
        blk[off:off + 8] = int(value).to_bytes(8, "little")

    def image(self) -> dict[int, bytes]:
        """Snapshot of every touched block (zero blocks included)."""
        return {a: bytes(b) for a, b in self._blocks.items()}

    # -- timing ------------------------------------------------------------------

    def _bank_of(self, addr: int) -> tuple[tuple[int, int], int]:
        block = addr // BLOCK
        channel = block % self.channels
        bank = (block // self.channels) % self.banks_per_channel
        row = addr // (self.row_bytes * self.channels * self.banks_per_channel)
        return (channel, bank), row

    def access(self, kind: str, addr: int, now: int) -> int:
        """Charge one block transfer; returns the completion cycle."""
        t = self.timing
        key, row = self._bank_of(addr)
        start = max(now, self._bank_ready.get(key, 0))
        open_row = self._open_rows.get(key)
        if open_row == row:
            self.stats.row_hits += 1
            latency = 0
        elif open_row is None:
            self.stats.row_misses += 1
            latency = t.t_rcd
        else:
            self.stats.row_conflicts += 1
            latency = t.t_rp + t.t_rcd
        self._open_rows[key] = row
        if kind == "read":
            self.stats.reads += 1
            done = start + latency + t.t_cas + t.t_burst
        else:
            self.stats.writes += 1
            done = start + latency + t.t_cwd + t.t_burst
        self._bank_ready[key] = done
        return done


@dataclass
class CacheLine:
    tag: int
    data: bytearray
    dirty: bool = False
    read_flag: bool = False


@dataclass
class Eviction:
    addr: int
    data: bytes
    dirty: bool
    read_flag: bool


@dataclass
class SetAssocCache:
    """Data-holding set-associative cache with LRU replacement.

    Used for the shared L3 (16-way) and the in-package DRAM-cache baseline.
    Lines carry the D (dirty) and R (read-after-install) flags; install
    clears both, a read hit sets R, a write hit sets D.
    """

    capacity: int = 8 << 20
    ways: int = 16
    block: int = BLOCK
    _sets: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.n_sets = self.capacity // (self.block * self.ways)
        if self.n_sets < 1:
            raise ValueError("cache smaller than one set")
        self._sets = [dict() for _ in range(self.n_sets)]  # tag -> CacheLine, LRU order
        self.hits = 0
        self.misses = 0

    def _locate(self, addr: int) -> tuple[int, int]:
        block = addr // self.block
        return block % self.n_sets, block // self.n_sets

    def lookup(self, addr: int) -> CacheLine | None:
        idx, tag = self._locate(addr)
        lines = self._sets[idx]
        line = lines.get(tag)
        if line is None:
            self.misses += 1
            return None
        self.hits += 1
        lines.pop(tag)
        lines[tag] = line  # most-recently used at the end
        return line

    def peek(self, addr: int) -> CacheLine | None:
        idx, tag = self._locate(addr)
        return self._sets[idx].get(tag)

    def install(self, addr: int, data: bytes) -> Eviction | None:
        """Insert a block (clearing D/R); returns the eviction, if any."""
        idx, tag = self._locate(addr)
        lines = self._sets[idx]
        evicted = None
        if tag in lines:
            lines.pop(tag)
        elif len(lines) >= self.ways:
            old_tag = next(iter(lines))
            old = lines.pop(old_tag)
            old_addr = (old_tag * self.n_sets + idx) * self.block
            evicted = Eviction(old_addr, bytes(old.data), old.dirty,
                               old.read_flag)
        lines[tag] = CacheLine(tag, bytearray(data))
        return evicted

    def drain(self):
        """Evict everything (end-of-run flush), LRU first per set."""
        for idx, lines in enumerate(self._sets):
            for tag, line in list(lines.items()):
                addr = (tag * self.n_sets + idx) * self.block
                yield Eviction(addr, bytes(line.data), line.dirty,
                               line.read_flag)
            lines.clear()

    def __len__(self):
        return sum(len(s) for s in self._sets)


class L3Model(SetAssocCache):
    """The shared on-die L3: 8MB, 16-way, LRU, 64B blocks, D/R flags."""

    def touch(self, kind: str, addr: int) -> CacheLine | None:
        """Read/write hit path; returns the line or None on miss."""
        line = self.lookup(addr)
        if line is not None:
            if kind == "read":
                line.read_flag = True
            else:
                line.dirty = True
        return line
