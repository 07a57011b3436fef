"""Vault controllers: flat-RAM, flat-CAM, and the hardware-managed cache.

Flat vaults are software-visible scratchpads. Flat-RAM serves reads and block
writes in RowIn RAM. Flat-CAM recognizes data writes (ColumnIn CAM), key/mask
register writes, match-pointer reads (which trigger searches), and row-mode
data reads. The cache vault pairs a CAM tag partition with RAM data banks:
512-way lookup over one tag set, counter-based replacement, and selective
installation driven by the L3 dirty/read flags.
"""

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import bits
from .address import Geometry
from .errors import AddressError, CapacityError
from .stats import Stats
from .superset import GRID, BlockLocation, PortMode, Superset
from .timing import Command, CommandKind, TimingParams, VaultScheduler, \
    WriteWindowTracker
from .xam import SenseRef

TAG_BITS = 30
VALID_ROW = 30
DIRTY_ROW = 31
TAG_HALF_BITS = 32
WAYS = 512


class VaultMode(Enum):
    FLAT_RAM = "flat_ram"
    FLAT_CAM = "flat_cam"
    CACHE = "cache"


@dataclass(frozen=True)
class VaultConfig:
    """One vault's mode and geometry-derived capacities."""

    mode: VaultMode
    banks: int = 64
    supersets_per_bank: int = 256
    sets_per_superset: int = 8
    rows_per_set: int = 64
    cam_banks: int = 0  # cache mode only

    def __post_init__(self):
        if self.mode is VaultMode.CACHE:
            ram = self.banks - self.cam_banks
            if self.cam_banks < 1 or ram < 1:
                raise CapacityError("cache mode needs both partitions")
            # each CAM bank offers sets x 2 tag halves per superset
            if self.cam_banks * self.sets_per_superset * 2 < ram:
                raise CapacityError("tag capacity below data-block capacity")


@dataclass(frozen=True)
class CamAddress:
    """Tag-side coordinates paired with a data-side (RAM) address."""

    vault: int
    bank: int        # CAM partition bank, relative to the partition
    superset: int    # same superset id as the RAM address
    set_id: int
    key_id: int      # which 32-bit tag half of a column


@dataclass(frozen=True)
class CacheTagEntry:
    tag: int
    valid: bool = False
    dirty: bool = False

    def pack(self) -> int:
        if self.tag >> TAG_BITS:
            raise AddressError(f"tag {self.tag:#x} exceeds {TAG_BITS} bits")
        return self.tag | (int(self.valid) << VALID_ROW) | (int(self.dirty) << DIRTY_ROW)

    @classmethod
    def unpack(cls, word: int) -> "CacheTagEntry":
        return cls(word & ((1 << TAG_BITS) - 1),
                   bool(word >> VALID_ROW & 1), bool(word >> DIRTY_ROW & 1))


class VaultFabric:
    """Lazily materialized supersets of one vault, kept in step with the
    scheduler's bank/superset mode state."""

    def __init__(self, geo: Geometry, scheduler: VaultScheduler):
        self.geo = geo
        self.sched = scheduler
        self.supersets: dict[tuple[int, int], Superset] = {}

    def get(self, bank: int, ss: int) -> Superset:
        key = (bank, ss)
        superset = self.supersets.get(key)
        if superset is None:
            superset = Superset(self.geo.rows_per_set, self.geo.cols_per_set,
                                sense_ref=self.sched.sense_mode(bank),
                                port_mode=self.sched.port_mode(bank, ss))
            self.supersets[key] = superset
        return superset

    def ensure_sense(self, bank: int, target: SenseRef, now: int) -> None:
        """Prepare the bank iff its sensing reference differs (minimality)."""
        if self.sched.sense_mode(bank) is target:
            return
        self.sched.issue(Command(CommandKind.PREPARE, self.sched.vault_id,
                                 bank=bank, issue_cycle=now))
        for (b, _), superset in self.supersets.items():
            if b == bank:
                superset.set_sense_ref(target)

    def ensure_port(self, bank: int, ss: int, target: PortMode, now: int) -> None:
        if self.sched.port_mode(bank, ss) is target:
            return
        self.sched.issue(Command(CommandKind.ACTIVATE, self.sched.vault_id,
                                 bank=bank, superset=ss, issue_cycle=now))
        self.get(bank, ss).port_mode = target


class VaultControllerBase:
    """Shared plumbing: scheduler, fabric, gated XAM writes, wear hooks."""

    def __init__(self, vault_id: int, geo: Geometry, timing: TimingParams,
                 window: WriteWindowTracker, stats: Stats, monitor=None,
                 trace=None):
        self.vault_id = vault_id
        self.geo = geo
        self.sched = VaultScheduler(vault_id, timing, trace)
        self.fabric = VaultFabric(geo, self.sched)
        self.window = window
        self.stats = stats
        self.monitor = monitor
        self.write_log: list[tuple[int, int]] = []  # (accept cycle, superset gid)

    # -- wear/window plumbing -----------------------------------------------------

    def _record_wear(self, bank: int, ss: int, set_id: int, index: int,
                     orientation: str, makes_dirty: bool) -> None:
        if self.monitor is not None:
            self.monitor.record_write(self.vault_id, bank, ss, set_id, index,
                                      orientation, makes_dirty)

    def gated_write(self, bank: int, ss: int, cmd: Command, blocking: bool,
                    gate: bool = True):
        """Issue a block write under the per-superset window budget.

        Blocking policy (flat modes) stalls until the window admits the
        write; otherwise a rejected write returns None and the caller
        forwards the request. The budget is re-verified at the accepted
        cycle so the committed window is exact.
        """
        gid = self.geo.superset_gid(self.vault_id, bank, ss)
        if not gate:
            res = self.sched.issue(cmd)
            self.write_log.append((res.accept, gid))
            self.stats.xam_writes += 1
            return res
        t = cmd.issue_cycle
        first = self.window.check(gid, t)
        penalty = first.lookup_penalty
        decision = first
        for _ in range(1000):
            if not decision.allowed:
                if not blocking:
                    self.stats.window_blocks += 1
                    return None
                self.stats.window_blocks += 1
                self.stats.stall_cycles += decision.ready_cycle - t
                t = decision.ready_cycle
                decision = self.window.probe(gid, t)
                continue
            candidate = replace(cmd, issue_cycle=t + penalty)
            penalty = 0
            accept = self.sched.earliest(candidate)
            verify = self.window.probe(gid, accept)
            if verify.allowed:
                res = self.sched.issue(candidate)
                self.window.commit(gid, res.accept)
                self.write_log.append((res.accept, gid))
                self.stats.xam_writes += 1
                return res
            decision = verify
            t = accept
        raise CapacityError("write window gate failed to converge")


def lowest_match(match_bits: np.ndarray) -> int | None:
    hits = np.flatnonzero(match_bits)
    return int(hits[0]) if hits.size else None


class FlatRamVault(VaultControllerBase):
    """Scratchpad vault serving software reads and writes in RowIn RAM."""

    def _decompose(self, offset: int):
        if offset < 0 or offset >= self.geo.vault_bytes:
            raise AddressError(f"offset {offset:#x} outside the vault")
        within, byte = divmod(offset, self.geo.block_bytes)
        within, row = divmod(within, self.geo.rows_per_set)
        within, set_id = divmod(within, self.geo.sets_per_superset)
        bank, ss = divmod(within, self.geo.supersets_per_bank)
        return bank, ss, set_id, row, byte

    def read(self, offset: int, now: int):
        bank, ss, set_id, row, _ = self._decompose(offset)
        self.fabric.ensure_sense(bank, SenseRef.READ, now)
        self.fabric.ensure_port(bank, ss, PortMode.ROW_IN, now)
        res = self.sched.issue(Command(
            CommandKind.READ, self.vault_id, bank=bank, superset=ss,
            set_id=set_id, row=row, issue_cycle=now))
        self.stats.xam_reads += 1
        self.stats.reads_inpackage += 1
        block = self.fabric.get(bank, ss).read_block(
            BlockLocation(set_id, row=row))
        return res.complete, bits.to_bytes(block)

    def write(self, offset: int, data: bytes, now: int):
        """Block-or-word write; sub-block writes become masked block writes."""
        bank, ss, set_id, row, byte = self._decompose(offset)
        if byte % len(data) or len(data) not in (8, 64):
            raise AddressError("writes are aligned 8-byte words or 64-byte blocks")
        block = bits.zeros(bits.BLOCK_BITS)
        mask = bits.zeros(bits.BLOCK_BITS)
        block[byte * 8:(byte + len(data)) * 8] = bits.from_bytes(data)
        mask[byte * 8:(byte + len(data)) * 8] = 1
        self.fabric.ensure_sense(bank, SenseRef.READ, now)
        self.fabric.ensure_port(bank, ss, PortMode.ROW_IN, now)
        res = self.gated_write(bank, ss, Command(
            CommandKind.WRITE, self.vault_id, bank=bank, superset=ss,
            set_id=set_id, row=row, issue_cycle=now), blocking=True)
        self.fabric.get(bank, ss).write_block(BlockLocation(set_id, row=row),
                                              block, mask)
        self._record_wear(bank, ss, set_id, row, "row", makes_dirty=False)
        return res.complete


class FlatCamVault(VaultControllerBase):
    """Scratchpad vault exposing key/mask/match registers and column search."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.key_bits = bits.zeros(bits.BLOCK_BITS)
        self.mask_bits = bits.zeros(bits.BLOCK_BITS)
        self.key_written = False
        self.version = 0
        self._loaded: dict[tuple[int, int], int] = {}  # superset -> version
        self._result = None  # (bank, ss, set_id, version, value)
        self.result_consumed = False

    def _decompose(self, offset: int):
        if offset < 0 or offset >= self.geo.vault_bytes:
            raise AddressError(f"offset {offset:#x} outside the vault")
        within, byte = divmod(offset, self.geo.block_bytes)
        within, col = divmod(within, self.geo.cols_per_set)
        within, set_id = divmod(within, self.geo.sets_per_superset)
        bank, ss = divmod(within, self.geo.supersets_per_bank)
        return bank, ss, set_id, col, byte

    # -- register writes (controller-local, no interface commands) --------------

    def write_key_word(self, lane: int, value: int, now: int) -> int:
        self.key_bits[lane * 64:(lane + 1) * 64] = bits.bitvec(value, 64)
        self.key_written = True
        self.version += 1
        return now + 1

    def write_mask_word(self, lane: int, value: int, now: int) -> int:
        self.mask_bits[lane * 64:(lane + 1) * 64] = bits.bitvec(value, 64)
        self.version += 1
        return now + 1

    # -- request types ------------------------------------------------------------

    def write_data(self, offset: int, data: bytes, now: int) -> int:
        """Populate a CAM column entry (ColumnIn CAM data write)."""
        bank, ss, set_id, col, _ = self._decompose(offset)
        if len(data) != 64:
            raise AddressError("CAM data writes are whole 512-bit columns")
        self.fabric.ensure_sense(bank, SenseRef.SEARCH, now)
        self.fabric.ensure_port(bank, ss, PortMode.COLUMN_IN, now)
        res = self.gated_write(bank, ss, Command(
            CommandKind.WRITE, self.vault_id, bank=bank, superset=ss,
            set_id=set_id, col=col, issue_cycle=now), blocking=True)
        self.fabric.get(bank, ss).write_block(
            BlockLocation(set_id, block_col=col), bits.from_bytes(data))
        self._record_wear(bank, ss, set_id, col, "col", makes_dirty=False)
        return res.complete

    def read_data(self, offset: int, now: int):
        """Row-mode read of stored CAM content."""
        bank, ss, set_id, col, _ = self._decompose(offset)
        self.fabric.ensure_sense(bank, SenseRef.READ, now)
        res = self.sched.issue(Command(
            CommandKind.READ, self.vault_id, bank=bank, superset=ss,
            set_id=set_id, col=col, issue_cycle=now))
        self.stats.xam_reads += 1
        self.stats.reads_inpackage += 1
        block = self.fabric.get(bank, ss).read_block(
            BlockLocation(set_id, block_col=col))
        return res.complete, bits.to_bytes(block)

    def read_match(self, bank: int, ss: int, set_id: int, now: int):
        """Search protocol behind a read of the match pointer."""
        self.stats.match_reads += 1
        if not self.key_written:
            self.stats.null_match_reads += 1
            return now + 1, None
        target = (bank, ss, set_id, self.version)
        if self._result is not None and self._result[:4] == target:
            self.result_consumed = True
            return now + 1, self._result[4]
        superset = self.fabric.get(bank, ss)
        complete = now
        if self._loaded.get((bank, ss)) != self.version:
            self.fabric.ensure_sense(bank, SenseRef.SEARCH, now)
            self.fabric.ensure_port(bank, ss, PortMode.ROW_IN, now)
            key_cmd = Command(CommandKind.WRITE, self.vault_id, bank=bank,
                              superset=ss, set_id=set_id, row=0,
                              issue_cycle=now, register_write=True)
            self.sched.issue(key_cmd)
            superset.load_key_mask(0, self.key_bits)
            self.stats.key_loads += 1
            mask_cmd = Command(CommandKind.WRITE, self.vault_id, bank=bank,
                               superset=ss, set_id=set_id, row=1,
                               issue_cycle=now, register_write=True)
            self.sched.issue(mask_cmd)
            superset.load_key_mask(1, self.mask_bits)
            self.stats.mask_loads += 1
            self._loaded[(bank, ss)] = self.version
        self.fabric.ensure_sense(bank, SenseRef.SEARCH, now)
        self.fabric.ensure_port(bank, ss, PortMode.COLUMN_IN, now)
        res = self.sched.issue(Command(
            CommandKind.READ, self.vault_id, bank=bank, superset=ss,
            set_id=set_id, issue_cycle=now))
        complete = res.complete
        self.stats.xam_searches += 1
        match = lowest_match(superset.search_set(set_id).reduced)
        self._result = (bank, ss, set_id, self.version, match)
        self.result_consumed = False
        return complete, match

    def search_vector(self, bank: int, ss: int, set_id: int, now: int):
        """Full per-column match matrix (used by scan-style workloads)."""
        if not self.key_written:
            self.stats.null_match_reads += 1
            return now + 1, np.zeros((GRID, self.geo.cols_per_set), np.uint8)
        superset = self.fabric.get(bank, ss)
        if self._loaded.get((bank, ss)) != self.version:
            self.fabric.ensure_sense(bank, SenseRef.SEARCH, now)
            self.fabric.ensure_port(bank, ss, PortMode.ROW_IN, now)
            self.sched.issue(Command(CommandKind.WRITE, self.vault_id,
                                     bank=bank, superset=ss, row=0,
                                     issue_cycle=now, register_write=True))
            superset.load_key_mask(0, self.key_bits)
            self.stats.key_loads += 1
            self.sched.issue(Command(CommandKind.WRITE, self.vault_id,
                                     bank=bank, superset=ss, row=1,
                                     issue_cycle=now, register_write=True))
            superset.load_key_mask(1, self.mask_bits)
            self.stats.mask_loads += 1
            self._loaded[(bank, ss)] = self.version
        self.fabric.ensure_sense(bank, SenseRef.SEARCH, now)
        self.fabric.ensure_port(bank, ss, PortMode.COLUMN_IN, now)
        res = self.sched.issue(Command(
            CommandKind.READ, self.vault_id, bank=bank, superset=ss,
            set_id=set_id, issue_cycle=now))
        self.stats.xam_searches += 1
        return res.complete, superset.search_set(set_id).per_subarray


def cache_bank_split(banks: int, cam_banks: int = 0) -> tuple[int, int]:
    """(ram_banks, cam_banks): one CAM bank per 16 unless overridden,
    capacity-checked.

    Each CAM bank offers supersets x sets x 2 tag-set halves; each half
    tracks one RAM superset's 512 ways.
    """
    cam = cam_banks if cam_banks > 0 else max(1, -(-banks // 16))
    ram = banks - cam
    if ram < 1:
        raise CapacityError("no RAM banks left for data")
    if cam * 8 * 2 < ram:
        raise CapacityError(f"{cam} CAM banks cannot tag {ram} RAM banks")
    return ram, cam


@dataclass(frozen=True)
class CacheMapping:
    """One block address translated to coordinated RAM and CAM coordinates."""

    vault: int
    ram_bank: int
    superset: int
    tag: int
    cam: CamAddress

    def index_key(self) -> tuple[int, int, int]:
        return (self.vault, self.ram_bank, self.superset)


class CacheAddressMapper:
    """Deterministic split of block addresses across the cache vaults.

    The RAM-side index is (vault, ram_bank, superset); the CAM side reuses
    the vault and superset ids and derives (bank, set, key_id) from the RAM
    bank id, with the key id taken from the most significant bits. Rotary
    offsets shift every index field bijectively.
    """

    def __init__(self, geo: Geometry, n_vaults: int, cam_banks: int = 0):
        self.geo = geo
        self.n_vaults = n_vaults
        self.ram_banks, self.cam_banks = cache_bank_split(
            geo.banks_per_vault, cam_banks)

    def capacity_blocks(self) -> int:
        return (self.n_vaults * self.ram_banks * self.geo.supersets_per_bank
                * WAYS)

    def cam_address(self, vault: int, ram_bank: int, superset: int) -> CamAddress:
        set_id = ram_bank % self.geo.sets_per_superset
        cam_bank = (ram_bank // self.geo.sets_per_superset) % self.cam_banks
        key_id = ram_bank // (self.geo.sets_per_superset * self.cam_banks)
        return CamAddress(vault, cam_bank, superset, set_id, key_id)

    def map(self, paddr: int, offsets=None) -> CacheMapping:
        if paddr % self.geo.block_bytes:
            raise AddressError(f"unaligned block address {paddr:#x}")
        block = paddr // self.geo.block_bytes
        block, superset = divmod(block, self.geo.supersets_per_bank)
        block, ram_bank = divmod(block, self.ram_banks)
        tag, vault = divmod(block, self.n_vaults)
        if tag >> TAG_BITS:
            raise AddressError(f"address {paddr:#x} exceeds the 30-bit tag range")
        if offsets is not None:
            vault = (vault + offsets.vault_off) % self.n_vaults
            ram_bank = (ram_bank + offsets.bank_off) % self.ram_banks
            superset = (superset + offsets.superset_off) % self.geo.supersets_per_bank
        cam = self.cam_address(vault, ram_bank, superset)
        if offsets is not None:
            cam = replace(cam, set_id=(cam.set_id + offsets.set_off)
                          % self.geo.sets_per_superset)
        return CacheMapping(vault, ram_bank, superset, tag, cam)

    def compose(self, vault: int, ram_bank: int, superset: int, tag: int,
                offsets=None) -> int:
        """Inverse of `map` (used to reconstruct victim addresses)."""
        if offsets is not None:
            vault = (vault - offsets.vault_off) % self.n_vaults
            ram_bank = (ram_bank - offsets.bank_off) % self.ram_banks
            superset = (superset - offsets.superset_off) % self.geo.supersets_per_bank
        block = tag
        block = block * self.n_vaults + vault
        block = block * self.ram_banks + ram_bank
        block = block * self.geo.supersets_per_bank + superset
        return block * self.geo.block_bytes


def way_location(way: int) -> tuple[int, int]:
    """Way index in [0, 512) -> (subarray/set position, column)."""
    return way // 64, way % 64


class CacheVault(VaultControllerBase):
    """Hardware-managed cache vault: CAM tag partition plus RAM data banks."""

    def __init__(self, vault_id, geo, timing, window, stats, monitor=None,
                 trace=None, main_memory=None, mapper: CacheAddressMapper = None):
        super().__init__(vault_id, geo, timing, window, stats, monitor, trace)
        self.mm = main_memory
        self.mapper = mapper
        self.ram_banks = mapper.ram_banks
        self.cam_banks = mapper.cam_banks
        self.replacement_counter = 0  # free-running, 9 bits, shared per vault
        self.replacement_log: list[tuple[int, tuple, int]] = []
        self.pending_invalid: dict[tuple, set[int]] = {}
        self._loaded_key: dict[tuple[int, int], tuple] = {}
        self._loaded_mask: dict[tuple[int, int], int] = {}

    # -- CAM helpers ------------------------------------------------------------

    def _cam_bank(self, m: CacheMapping) -> int:
        return self.ram_banks + m.cam.bank

    def _tag_column_pattern(self, entry_word: int, key_id: int):
        """512-bit search key/data and slice pattern for one tag half."""
        column = bits.zeros(64)
        column[key_id * TAG_HALF_BITS:(key_id + 1) * TAG_HALF_BITS] = \
            bits.bitvec(entry_word, TAG_HALF_BITS)
        return np.tile(column, GRID)

    def _search_mask(self, key_id: int):
        mask = bits.zeros(64)
        lo = key_id * TAG_HALF_BITS
        mask[lo:lo + TAG_BITS + 1] = 1  # tag bits + valid, dirty excluded
        return np.tile(mask, GRID)

    def _tag_search(self, m: CacheMapping, now: int):
        """Load key/mask as needed and search one tag set; returns the raw
        512-way match vector (pending-invalidate ways filtered)."""
        bank = self._cam_bank(m)
        superset = self.fabric.get(bank, m.superset)
        key_word = CacheTagEntry(m.tag, valid=True).pack()
        skey = (bank, m.superset)
        self.fabric.ensure_sense(bank, SenseRef.SEARCH, now)
        if self._loaded_key.get(skey) != (key_word, m.cam.key_id):
            self.fabric.ensure_port(bank, m.superset, PortMode.ROW_IN, now)
            self.sched.issue(Command(CommandKind.WRITE, self.vault_id,
                                     bank=bank, superset=m.superset, row=0,
                                     issue_cycle=now, register_write=True))
            superset.load_key_mask(
                0, self._tag_column_pattern(key_word, m.cam.key_id))
            self.stats.key_loads += 1
            if self._loaded_mask.get(skey) != m.cam.key_id:
                self.sched.issue(Command(CommandKind.WRITE, self.vault_id,
                                         bank=bank, superset=m.superset, row=1,
                                         issue_cycle=now, register_write=True))
                superset.load_key_mask(1, self._search_mask(m.cam.key_id))
                self.stats.mask_loads += 1
                self._loaded_mask[skey] = m.cam.key_id
            self._loaded_key[skey] = (key_word, m.cam.key_id)
        self.fabric.ensure_port(bank, m.superset, PortMode.COLUMN_IN, now)
        res = self.sched.issue(Command(CommandKind.READ, self.vault_id,
                                       bank=bank, superset=m.superset,
                                       set_id=m.cam.set_id, issue_cycle=now))
        self.stats.xam_searches += 1
        ways = self.fabric.get(bank, m.superset).search_set(
            m.cam.set_id).per_subarray.reshape(-1).copy()
        for way in self.pending_invalid.get(m.index_key(), ()):
            ways[way] = 0
        return res.complete, ways

    def _tag_write(self, m: CacheMapping, way: int, entry: CacheTagEntry,
                   now: int, mask_rows=None, gate: bool = True):
        """Masked column write of one tag half (or a slice of it)."""
        bank = self._cam_bank(m)
        sub, col = way_location(way)
        pattern = bits.zeros(bits.BLOCK_BITS)
        mask = bits.zeros(bits.BLOCK_BITS)
        lo = sub * 64 + m.cam.key_id * TAG_HALF_BITS
        word_bits = bits.bitvec(entry.pack(), TAG_HALF_BITS)
        rows = range(TAG_HALF_BITS) if mask_rows is None else mask_rows
        for r in rows:
            pattern[lo + r] = word_bits[r]
            mask[lo + r] = 1
        self.fabric.ensure_port(bank, m.superset, PortMode.COLUMN_IN, now)
        res = self.gated_write(bank, m.superset, Command(
            CommandKind.WRITE, self.vault_id, bank=bank, superset=m.superset,
            set_id=m.cam.set_id, col=col, issue_cycle=now),
            blocking=False, gate=gate)
        if res is None:
            return None
        self.fabric.get(bank, m.superset).write_block(
            BlockLocation(m.cam.set_id, block_col=col), pattern, mask)
        self._record_wear(bank, m.superset, m.cam.set_id, col, "col", False)
        return res

    def _tag_peek(self, m: CacheMapping, way: int) -> CacheTagEntry:
        bank = self._cam_bank(m)
        sub, col = way_location(way)
        superset = self.fabric.get(bank, m.superset)
        array = superset.set_arrays(m.cam.set_id)[sub]
        column = array.peek_column(col)
        lo = m.cam.key_id * TAG_HALF_BITS
        return CacheTagEntry.unpack(bits.to_int(column[lo:lo + TAG_HALF_BITS]))

    def _flag_row_read(self, m: CacheMapping, flag_row: int, now: int):
        """RAM-mode row read of the valid or dirty bits of all 512 ways."""
        bank = self._cam_bank(m)
        self.fabric.ensure_sense(bank, SenseRef.READ, now)
        res = self.sched.issue(Command(
            CommandKind.READ, self.vault_id, bank=bank, superset=m.superset,
            set_id=m.cam.set_id, row=flag_row, issue_cycle=now))
        self.stats.xam_reads += 1
        row = m.cam.key_id * TAG_HALF_BITS + flag_row
        return res.complete, self.fabric.get(bank, m.superset).read_set_row(
            m.cam.set_id, row)

    # -- data side ------------------------------------------------------------------

    def _data_read(self, m: CacheMapping, way: int, now: int):
        sub, col = way_location(way)
        self.fabric.ensure_port(m.ram_bank, m.superset, PortMode.COLUMN_IN, now)
        res = self.sched.issue(Command(
            CommandKind.READ, self.vault_id, bank=m.ram_bank,
            superset=m.superset, set_id=sub, col=col, issue_cycle=now))
        self.stats.xam_reads += 1
        block = self.fabric.get(m.ram_bank, m.superset).read_block(
            BlockLocation(sub, block_col=col))
        return res.complete, bits.to_bytes(block)

    def _data_write(self, m: CacheMapping, way: int, data: bytes, now: int,
                    makes_dirty: bool, gate: bool = True):
        sub, col = way_location(way)
        self.fabric.ensure_port(m.ram_bank, m.superset, PortMode.COLUMN_IN, now)
        res = self.gated_write(m.ram_bank, m.superset, Command(
            CommandKind.WRITE, self.vault_id, bank=m.ram_bank,
            superset=m.superset, set_id=sub, col=col, issue_cycle=now),
            blocking=False, gate=gate)
        if res is None:
            return None
        self.fabric.get(m.ram_bank, m.superset).write_block(
            BlockLocation(sub, block_col=col), bits.from_bytes(data))
        self._record_wear(m.ram_bank, m.superset, sub, col, "col", makes_dirty)
        return res

    # -- lock/pending management ----------------------------------------------------

    def _gids(self, m: CacheMapping) -> tuple[int, int]:
        ram = self.geo.superset_gid(self.vault_id, m.ram_bank, m.superset)
        cam = self.geo.superset_gid(self.vault_id, self._cam_bank(m), m.superset)
        return ram, cam

    def _locked(self, m: CacheMapping, now: int) -> bool:
        ram, cam = self._gids(m)
        return (self.window.locked_until(ram, now) is not None
                or self.window.locked_until(cam, now) is not None)

    def _apply_pending(self, m: CacheMapping, now: int) -> None:
        pending = self.pending_invalid.get(m.index_key())
        if not pending:
            return
        for way in sorted(pending):
            entry = CacheTagEntry(0, valid=False)
            res = self._tag_write(m, way, entry, now,
                                  mask_rows=[VALID_ROW, DIRTY_ROW])
            if res is None:
                return  # still locked; keep the remainder pending
            pending.discard(way)
        if not pending:
            del self.pending_invalid[m.index_key()]

    # -- the three public operations ---------------------------------------------------

    def lookup(self, m: CacheMapping, now: int):
        """512-way tag search; hit returns the data block, miss returns None."""
        self._apply_pending(m, now)
        if self._locked(m, now):
            self.stats.cache_bypasses += 1
            self.stats.cache_misses += 1
            return now, None
        done, ways = self._tag_search(m, now)
        way = lowest_match(ways)
        if way is None:
            self.stats.cache_misses += 1
            return done, None
        entry = self._tag_peek(m, way)
        if not entry.valid or entry.tag != m.tag:  # pragma: no cover - guard
            self.stats.cache_misses += 1
            return done, None
        self.stats.cache_hits += 1
        done, data = self._data_read(m, way, done)
        return done, data

    def handle_eviction(self, m: CacheMapping, data: bytes, dirty: bool,
                        read_flag: bool, now: int):
        """Selective install of an L3 eviction per the D/R rules.

        Window locks surface through the gated writes: a rejected install or
        update degrades to a forward (dirty) or drop (clean), with any stale
        cached copy queued for invalidation. Searches are reads and proceed
        regardless of locks.
        """
        if not dirty and not read_flag:
            self.stats.drops += 1
            return now, "dropped"
        self._apply_pending(m, now)
        done, ways = self._tag_search(m, now)
        way = lowest_match(ways)
        if way is not None:
            return self._update_in_place(m, way, data, dirty, done)
        if dirty and not read_flag:
            return self._reject(m, data, dirty, done)
        return self._install(m, data, dirty, done)

    def _reject(self, m, data, dirty, now):
        outcome = "forwarded" if dirty else "dropped"
        if dirty:
            self.stats.forwards += 1
            addr = self.mapper.compose(m.vault, m.ram_bank, m.superset, m.tag,
                                       offsets=self._offsets())
            self.mm.write_block(addr, data)
            now = self.mm.access("write", addr, now)
            self.stats.mm_writes += 1
        else:
            self.stats.drops += 1
        return now, outcome

    def _offsets(self):
        return self.monitor.offsets if self.monitor is not None else None

    def _update_in_place(self, m, way, data, dirty, now):
        """The evicted block is already cached: refresh or invalidate."""
        if not dirty:
            self.stats.drops += 1  # identical clean copy already present
            return now, "dropped"
        res = self._data_write(m, way, data, now, makes_dirty=True)
        if res is None:
            out = self._reject(m, data, dirty, now)
            self._queue_invalidate(m, way, now)
            return out
        entry = CacheTagEntry(m.tag, valid=True, dirty=True)
        tag_res = self._tag_write(m, way, entry, now, mask_rows=[DIRTY_ROW])
        if tag_res is None:
            self._queue_invalidate(m, way, now)
            return self._reject(m, data, dirty, now)
        self.stats.updates += 1
        return max(res.complete, tag_res.complete), "updated"

    def _queue_invalidate(self, m, way, now):
        entry = CacheTagEntry(0, valid=False)
        res = self._tag_write(m, way, entry, now,
                              mask_rows=[VALID_ROW, DIRTY_ROW])
        if res is None:
            self.pending_invalid.setdefault(m.index_key(), set()).add(way)

    def _install(self, m, data, dirty, now):
        done, valid_bits = self._flag_row_read(m, VALID_ROW, now)
        invalid = np.flatnonzero(valid_bits == 0)
        victim_writeback = None
        is_replacement = False
        if invalid.size:
            # first free way scanning circularly from the counter position
            start = self.replacement_counter % WAYS
            shifted = (invalid - start) % WAYS
            way = int(invalid[int(shifted.argmin())])
        else:
            done, dirty_bits = self._flag_row_read(m, DIRTY_ROW, done)
            way = self.replacement_counter % WAYS
            is_replacement = True
            if dirty_bits[way]:
                victim = self._tag_peek(m, way)
                done, victim_data = self._data_read(m, way, done)
                victim_writeback = (self.mapper.compose(
                    m.vault, m.ram_bank, m.superset, victim.tag,
                    offsets=self._offsets()), victim_data)
        tag_res = self._tag_write(m, way, CacheTagEntry(m.tag, True, dirty),
                                  done)
        if tag_res is None:
            return self._reject(m, data, dirty, done)
        data_res = self._data_write(m, way, data, done, makes_dirty=dirty)
        if data_res is None:
            self._queue_invalidate(m, way, done)
            return self._reject(m, data, dirty, done)
        done = max(tag_res.complete, data_res.complete)
        if is_replacement:
            self.replacement_counter = (self.replacement_counter + 1) % WAYS
            self.replacement_log.append((done, m.index_key(), way))
        if victim_writeback is not None:
            addr, victim_data = victim_writeback
            self.mm.write_block(addr, victim_data)
            self.mm.access("write", addr, done)
            self.stats.mm_writes += 1
            self.stats.writebacks += 1
        self.stats.installs += 1
        return done, "installed"

    # -- maintenance ----------------------------------------------------------------

    def flush_and_invalidate(self, now: int) -> int:
        """Write back dirty blocks, then clear every valid/dirty flag.

        Maintenance writes bypass the window gate but are still recorded as
        wear so the estimator sees them.
        """
        done = now
        for (bank, ss), superset in sorted(self.fabric.supersets.items()):
            if bank < self.ram_banks:
                continue  # data superset: flags live on the CAM side
            cam_bank_rel = bank - self.ram_banks
            for set_id in range(self.geo.sets_per_superset):
                for key_id in range(2):
                    done = self._flush_half(bank, cam_bank_rel, ss, set_id,
                                            key_id, superset, done)
        self.pending_invalid.clear()
        return done

    def _flush_half(self, bank, cam_bank_rel, ss, set_id, key_id, superset, now):
        base = key_id * TAG_HALF_BITS
        arrays = superset.set_arrays(set_id)
        valid = np.concatenate([a.peek_row(base + VALID_ROW) for a in arrays])
        if not valid.any():
            return now
        dirty = np.concatenate([a.peek_row(base + DIRTY_ROW) for a in arrays])
        self.fabric.ensure_sense(bank, SenseRef.READ, now)
        done = now
        for flag_row in (VALID_ROW, DIRTY_ROW):
            res = self.sched.issue(Command(
                CommandKind.READ, self.vault_id, bank=bank, superset=ss,
                set_id=set_id, row=base + flag_row, issue_cycle=done))
            self.stats.xam_reads += 1
            done = res.complete
        offsets = self._offsets()
        set_off = offsets.set_off if offsets is not None else 0
        derived_set = (set_id - set_off) % self.geo.sets_per_superset
        ram_bank = (key_id * self.cam_banks + cam_bank_rel) \
            * self.geo.sets_per_superset + derived_set
        # pending-invalidate ways hold stale data: main memory already has
        # the forwarded copy, so they must not be written back
        pending = self.pending_invalid.get((self.vault_id, ram_bank, ss), ())
        for way in np.flatnonzero(valid & dirty):
            if int(way) in pending:
                continue
            sub, col = way_location(int(way))
            column = arrays[sub].peek_column(col)
            entry = CacheTagEntry.unpack(
                bits.to_int(column[base:base + TAG_HALF_BITS]))
            addr = self.mapper.compose(self.vault_id, ram_bank, ss, entry.tag,
                                       offsets=self._offsets())
            res = self.sched.issue(Command(
                CommandKind.READ, self.vault_id, bank=ram_bank, superset=ss,
                set_id=sub, col=col, issue_cycle=done))
            self.stats.xam_reads += 1
            data_superset = self.fabric.get(ram_bank, ss)
            data = bits.to_bytes(data_superset.read_block(
                BlockLocation(sub, block_col=col)))
            self.mm.write_block(addr, data)
            self.mm.access("write", addr, res.complete)
            self.stats.mm_writes += 1
            self.stats.writebacks += 1
            done = res.complete
        # clear the flag rows across the whole set in one masked row write each
        self.fabric.ensure_port(bank, ss, PortMode.ROW_IN, done)
        for flag_row in (VALID_ROW, DIRTY_ROW):
            row = base + flag_row
            res = self.gated_write(bank, ss, Command(
                CommandKind.WRITE, self.vault_id, bank=bank, superset=ss,
                set_id=set_id, row=row, issue_cycle=done),
                blocking=False, gate=False)
            superset.write_block(BlockLocation(set_id, row=row),
                                 bits.zeros(bits.BLOCK_BITS))
            self._record_wear(bank, ss, set_id, row, "row", False)
            done = res.complete
        return done
