"""System assembly: core-side request routing across L3, the stack, and DRAM.

Address map (simulated physical):
  [0, mm capacity)      cacheable main-memory space (backed by the stack's
                        hardware cache when cache vaults are configured)
  FLAT_RAM_BASE + ...   flat-RAM scratchpad vaults (non-cacheable)
  FLAT_CAM_BASE + ...   flat-CAM scratchpad vaults (non-cacheable)
  SCRATCH_BASE + ...    baseline in-package scratchpad (HBM/SRAM models)
  REG_BASE + ...        per-vault key/mask/match registers

The trace grammar is one request per line: `cycle op addr size critical`
with op one of R W S KEY MASK MATCH (S is the full-vector search; MATCH
reads the match pointer).
"""

from dataclasses import dataclass, field

from .address import Geometry
from .endurance import WearMonitor
from .errors import AddressError, CapacityError, ConfigError
from .mainmem import BLOCK, DramTiming, Eviction, L3Model, MainMemory, \
    SetAssocCache
from .stats import Stats
from .timing import TimingParams, WriteWindowTracker
from .vault import CacheAddressMapper, CacheVault, FlatCamVault, \
    FlatRamVault, VaultConfig, VaultMode

FLAT_RAM_BASE = 1 << 40
FLAT_CAM_BASE = 1 << 41
SCRATCH_BASE = 1 << 42
REG_BASE = 1 << 43
REG_STRIDE = 1 << 24
MATCH_REG_OFFSET = 4096

L3_HIT_CYCLES = 30
REG_ACCESS_CYCLES = 1

OPS = ("R", "W", "S", "KEY", "MASK", "MATCH")


@dataclass
class Request:
    kind: str
    addr: int
    size: int = 8
    data: object = None          # bytes for W, int for KEY/MASK
    critical: bool = True
    cycle: int = 0

    def __post_init__(self):
        if self.kind not in OPS:
            raise ConfigError(f"unknown request op {self.kind!r}")


@dataclass
class Response:
    complete: int
    value: object = None


def format_trace_line(req: Request) -> str:
    return (f"{req.cycle} {req.kind} {req.addr:#x} {req.size} "
            f"{int(req.critical)}")


def parse_trace_line(line: str, lineno: int = 0) -> Request:
    parts = line.split()
    if len(parts) != 5:
        raise ConfigError("expected: cycle op addr size critical", lineno)
    cycle, op, addr, size, critical = parts
    if op not in OPS:
        raise ConfigError(f"unknown op {op!r}", lineno)
    try:
        return Request(kind=op, addr=int(addr, 0), size=int(size),
                       critical=bool(int(critical)), cycle=int(cycle))
    except ValueError:
        raise ConfigError("malformed numeric field", lineno) from None


def load_trace(path) -> list[Request]:
    out = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if line:
                out.append(parse_trace_line(line, lineno))
    return out


def save_trace(path, requests) -> None:
    with open(path, "w") as fh:
        for req in requests:
            fh.write(format_trace_line(req) + "\n")


@dataclass(frozen=True)
class StackConfig:
    """Vault allotment and policies for the in-package stack."""

    geometry: Geometry = field(default_factory=Geometry.desk)
    timing: TimingParams = field(default_factory=TimingParams)
    cache_vaults: int = 0
    flat_ram_vaults: int = 1
    flat_cam_vaults: int = 1
    cam_banks: int = 0  # cache partition size per vault; 0 = one per 16
    wear_leveling: bool = False
    wc_limit: int = 2**22
    dc_limit: int = 8192
    mm_capacity: int = 1 << 26

    def __post_init__(self):
        total = self.cache_vaults + self.flat_ram_vaults + self.flat_cam_vaults
        if total > self.geometry.vaults:
            raise CapacityError("vault allotment exceeds the geometry")


class StackSystem:
    """The full simulated machine with the reconfigurable stack in package."""

    def __init__(self, config: StackConfig, l3_capacity: int = 8 << 20,
                 l3_ways: int = 16):
        self.config = config
        geo = config.geometry
        self.geo = geo
        self.stats = Stats()
        self.mm = MainMemory(capacity=config.mm_capacity)
        self.l3 = L3Model(capacity=l3_capacity, ways=l3_ways)
        self.window = WriteWindowTracker(
            config.timing.t_mww, config.timing.m_writes,
            blocks_per_superset=geo.blocks_per_superset)
        self.monitor = WearMonitor(geo, wc_limit=config.wc_limit,
                                   dc_limit=config.dc_limit,
                                   rotate_enabled=config.wear_leveling)
        self.mapper = (CacheAddressMapper(geo, config.cache_vaults,
                                          config.cam_banks)
                       if config.cache_vaults else None)
        self.cache_vaults: list[CacheVault] = []
        self.flat_ram: list[FlatRamVault] = []
        self.flat_cam: list[FlatCamVault] = []
        self.vault_configs: list[VaultConfig] = []
        for _ in range(config.cache_vaults):
            self.vault_configs.append(VaultConfig(
                VaultMode.CACHE, banks=geo.banks_per_vault,
                supersets_per_bank=geo.supersets_per_bank,
                cam_banks=self.mapper.cam_banks))
        for mode, count in ((VaultMode.FLAT_RAM, config.flat_ram_vaults),
                            (VaultMode.FLAT_CAM, config.flat_cam_vaults)):
            self.vault_configs.extend(
                VaultConfig(mode, banks=geo.banks_per_vault,
                            supersets_per_bank=geo.supersets_per_bank)
                for _ in range(count))
        vid = 0
        for _ in range(config.cache_vaults):
            self.cache_vaults.append(CacheVault(
                vid, geo, config.timing, self.window, self.stats,
                monitor=self.monitor, main_memory=self.mm,
                mapper=self.mapper))
            vid += 1
        for _ in range(config.flat_ram_vaults):
            self.flat_ram.append(FlatRamVault(
                vid, geo, config.timing, self.window, self.stats,
                monitor=self.monitor))
            vid += 1
        for _ in range(config.flat_cam_vaults):
            self.flat_cam.append(FlatCamVault(
                vid, geo, config.timing, self.window, self.stats,
                monitor=self.monitor))
            vid += 1
        self._alloc_ptrs = {"flat_ram": 0, "flat_cam": 0, "scratch": 0}

    # -- allocation API -------------------------------------------------------------

    def flat_ram_malloc(self, size: int):
        return self._bump("flat_ram", FLAT_RAM_BASE,
                          len(self.flat_ram) * self.geo.vault_bytes, size)

    def flat_cam_malloc(self, size: int):
        alloc = self._bump("flat_cam", FLAT_CAM_BASE,
                           len(self.flat_cam) * self.geo.vault_bytes, size)
        vault_rel = (alloc.base - FLAT_CAM_BASE) // self.geo.vault_bytes
        return alloc.with_registers(self.cam_registers(vault_rel))

    def hbm_malloc(self, size: int):
        return self._bump("scratch", SCRATCH_BASE, 1 << 34, size)

    def _bump(self, cls: str, base: int, capacity: int, size: int):
        if size <= 0:
            raise CapacityError("allocation size must be positive")
        size = -(-size // BLOCK) * BLOCK
        ptr = self._alloc_ptrs[cls]
        if ptr + size > capacity:
            raise CapacityError(f"{cls} space exhausted")
        self._alloc_ptrs[cls] = ptr + size
        return Allocation(base + ptr, size, cls)

    def cam_registers(self, vault_rel: int) -> "CamRegisterPointers":
        base = REG_BASE + vault_rel * REG_STRIDE
        return CamRegisterPointers(key_ptr=base, mask_ptr=base + 512,
                                   match_base=base + MATCH_REG_OFFSET)

    # -- request routing --------------------------------------------------------------

    def handle(self, req: Request, now: int) -> Response:
        self.stats.requests += 1
        if req.kind in ("KEY", "MASK", "MATCH", "S") or req.addr >= REG_BASE:
            resp = self._register_op(req, now)
        elif req.addr >= SCRATCH_BASE:
            raise AddressError("scratchpad aperture is for baseline systems")
        elif req.addr >= FLAT_CAM_BASE:
            resp = self._flat_cam_data(req, now)
        elif req.addr >= FLAT_RAM_BASE:
            resp = self._flat_ram_data(req, now)
        else:
            resp = self._cacheable(req, now)
        self._maybe_rotate(resp.complete)
        return resp

    def run(self, requests) -> Stats:
        """Trace-driven simple core: a critical request blocks its issuer."""
        ready = 0
        for req in requests:
            start = max(req.cycle, ready)
            resp = self.handle(req, start)
            if req.critical:
                ready = resp.complete
            self.stats.cycles = max(self.stats.cycles, resp.complete)
        return self.stats

    # -- flat routing -------------------------------------------------------------------

    def _flat_vault(self, req_addr: int, base: int, vaults):
        offset = req_addr - base
        idx, within = divmod(offset, self.geo.vault_bytes)
        if idx >= len(vaults):
            raise AddressError(f"address {req_addr:#x} beyond the flat vaults")
        return vaults[idx], within

    def _flat_ram_data(self, req: Request, now: int) -> Response:
        vault, within = self._flat_vault(req.addr, FLAT_RAM_BASE, self.flat_ram)
        if req.kind == "R":
            self.stats.reads += 1
            done, block = vault.read(within - within % BLOCK, now)
            off = within % BLOCK
            return Response(done, block[off:off + req.size])
        if req.kind == "W":
            self.stats.writes += 1
            done = vault.write(within, bytes(req.data), now)
            return Response(done)
        raise ConfigError(f"op {req.kind} not valid in flat-RAM space")

    def _flat_cam_data(self, req: Request, now: int) -> Response:
        vault, within = self._flat_vault(req.addr, FLAT_CAM_BASE, self.flat_cam)
        if req.kind == "R":
            self.stats.reads += 1
            done, block = vault.read_data(within - within % BLOCK, now)
            off = within % BLOCK
            return Response(done, block[off:off + req.size])
        if req.kind == "W":
            self.stats.writes += 1
            done = vault.write_data(within - within % BLOCK, bytes(req.data),
                                    now)
            return Response(done)
        raise ConfigError(f"op {req.kind} not valid in flat-CAM space")

    def _register_op(self, req: Request, now: int) -> Response:
        vault_rel, within = divmod(req.addr - REG_BASE, REG_STRIDE)
        if not 0 <= vault_rel < len(self.flat_cam):
            raise AddressError(f"register address {req.addr:#x} has no vault")
        vault = self.flat_cam[vault_rel]
        if req.kind == "KEY":
            self.stats.writes += 1
            return Response(vault.write_key_word((within % 512) // 8,
                                                 int(req.data), now))
        if req.kind == "MASK":
            self.stats.writes += 1
            return Response(vault.write_mask_word(((within - 512) % 512) // 8,
                                                  int(req.data), now))
        if req.kind in ("MATCH", "S"):
            slot = (within - MATCH_REG_OFFSET) // 8
            sets = self.geo.sets_per_superset
            per_bank = self.geo.supersets_per_bank
            slot, set_id = divmod(slot, sets)
            bank, ss = divmod(slot, per_bank)
            if req.kind == "MATCH":
                self.stats.reads += 1
                done, value = vault.read_match(bank, ss, set_id, now)
            else:
                self.stats.reads += 1
                done, value = vault.search_vector(bank, ss, set_id, now)
            return Response(done, value)
        raise ConfigError(f"op {req.kind} not valid in register space")

    # -- cacheable space ----------------------------------------------------------------

    def _cacheable(self, req: Request, now: int) -> Response:
        if req.kind == "R":
            self.stats.reads += 1
        elif req.kind == "W":
            self.stats.writes += 1
        else:
            raise ConfigError(f"op {req.kind} not valid in cacheable space")
        block_addr = req.addr - req.addr % BLOCK
        kind = "read" if req.kind == "R" else "write"
        line = self.l3.touch(kind, block_addr)
        if line is not None:
            self.stats.l3_hits += 1
            done = now + L3_HIT_CYCLES
        else:
            self.stats.l3_misses += 1
            done, data = self._fill(block_addr, now)
            evicted = self.l3.install(block_addr, data)
            if evicted is not None:
                done = max(done, self._route_eviction(evicted, done))
            line = self.l3.touch(kind, block_addr)
        off = req.addr % BLOCK
        if req.kind == "R":
            return Response(done, bytes(line.data[off:off + req.size]))
        payload = bytes(req.data)
        if off + len(payload) > BLOCK:
            raise AddressError("write straddles a block boundary")
        line.data[off:off + len(payload)] = payload
        return Response(done)

    def _fill(self, block_addr: int, now: int):
        """L3 miss fill: stack cache lookup (no-allocate) or main memory."""
        if self.cache_vaults:
            if self.config.wear_leveling:
                now += 1  # address remapping pipeline stage
            m = self.mapper.map(block_addr, offsets=self._offsets())
            vault = self.cache_vaults[m.vault]
            done, data = vault.lookup(m, now)
            if data is not None:
                self.stats.reads_inpackage += 1
                return done, data
            now = done  # the miss is known only after the tag search
        data = self.mm.read_block(block_addr)
        done = self.mm.access("read", block_addr, now)
        self.stats.mm_reads += 1
        self.stats.reads_main_memory += 1
        return done, data

    def _route_eviction(self, ev: Eviction, now: int) -> int:
        if self.cache_vaults:
            if self.config.wear_leveling:
                now += 1
            m = self.mapper.map(ev.addr, offsets=self._offsets())
            vault = self.cache_vaults[m.vault]
            done, _ = vault.handle_eviction(m, ev.data, ev.dirty,
                                            ev.read_flag, now)
            return done
        if ev.dirty:
            self.mm.write_block(ev.addr, ev.data)
            self.stats.mm_writes += 1
            return self.mm.access("write", ev.addr, now)
        return now

    def _offsets(self):
        return self.monitor.offsets if self.config.wear_leveling else None

    # -- wear-leveling orchestration ----------------------------------------------------

    def _maybe_rotate(self, now: int) -> None:
        if not self.config.wear_leveling or not self.monitor.rotate_due():
            return
        for vault in self.cache_vaults:
            vault.flush_and_invalidate(now)
        self.monitor.force_rotate(now)
        self.stats.rotations += 1

    # -- draining and the transparency oracle ----------------------------------------------

    def flush(self, now: int) -> int:
        """Drain L3 through the normal eviction rules, then the stack."""
        done = now
        for ev in self.l3.drain():
            done = max(done, self._route_eviction(ev, done))
        for vault in self.cache_vaults:
            done = max(done, vault.flush_and_invalidate(done))
        return done

    def memory_image(self) -> dict[int, bytes]:
        """Observable cacheable-space image without disturbing state."""
        img = dict(self.mm.image())
        for vault in self.cache_vaults:
            for (bank, ss), superset in list(vault.fabric.supersets.items()):
                if bank < vault.ram_banks:
                    continue
                img.update(_cam_dirty_blocks(vault, bank, ss, superset,
                                             self._offsets()))
        for idx, lines in enumerate(self.l3._sets):
            for tag, line in lines.items():
                if line.dirty:
                    addr = (tag * self.l3.n_sets + idx) * BLOCK
                    img[addr] = bytes(line.data)
        return img

    def command_trace(self):
        vaults = self.cache_vaults + self.flat_ram + self.flat_cam
        records = []
        for vault in vaults:
            records.extend(vault.sched.trace)
        return records


def _cam_dirty_blocks(vault, bank, ss, superset, offsets):
    """Dirty blocks held by one CAM superset, keyed by their addresses."""
    import numpy as np

    from . import bits
    from .superset import BlockLocation
    from .vault import DIRTY_ROW, TAG_HALF_BITS, VALID_ROW, CacheTagEntry, \
        way_location

    geo = vault.geo
    out = {}
    cam_bank_rel = bank - vault.ram_banks
    set_off = offsets.set_off if offsets is not None else 0
    for set_id in range(geo.sets_per_superset):
        arrays = superset.set_arrays(set_id)
        derived_set = (set_id - set_off) % geo.sets_per_superset
        for key_id in range(2):
            base = key_id * TAG_HALF_BITS
            valid = np.concatenate([a.peek_row(base + VALID_ROW)
                                    for a in arrays])
            dirty = np.concatenate([a.peek_row(base + DIRTY_ROW)
                                    for a in arrays])
            ram_bank = (key_id * vault.cam_banks + cam_bank_rel) \
                * geo.sets_per_superset + derived_set
            pending = vault.pending_invalid.get(
                (vault.vault_id, ram_bank, ss), ())
            for way in np.flatnonzero(valid & dirty):
                if int(way) in pending:
                    continue
                sub, col = way_location(int(way))
                column = arrays[sub].peek_column(col)
                entry = CacheTagEntry.unpack(
                    bits.to_int(column[base:base + TAG_HALF_BITS]))
                addr = vault.mapper.compose(vault.vault_id, ram_bank, ss,
                                            entry.tag, offsets=offsets)
                data_ss = vault.fabric.get(ram_bank, ss)
                out[addr] = bits.to_bytes(data_ss.read_block(
                    BlockLocation(sub, block_col=col)))
    return out


@dataclass
class CamRegisterPointers:
    key_ptr: int
    mask_ptr: int
    match_base: int


@dataclass(frozen=True)
class Allocation:
    base: int
    size: int
    vault_class: str
    registers: CamRegisterPointers | None = None

    def with_registers(self, regs: CamRegisterPointers) -> "Allocation":
        return Allocation(self.base, self.size, self.vault_class, regs)

    def overlaps(self, other: "Allocation") -> bool:
        return (self.base < other.base + other.size
                and other.base < self.base + self.size)
