"""Baseline in-package configurations for apples-to-apples comparison.

Every baseline serves the same request stream and emits the same Stats block
as the stack runs. The DRAM cache models an in-package L4 with a tag access
charged as one extra DRAM access; the ideal variant drops activate,
precharge, and refresh costs. Scratchpad baselines (HBM DRAM, stacked CMOS
SRAM) serve the scratchpad aperture directly, spilling past their capacity
into main memory.
"""

from dataclasses import dataclass
from enum import Enum

from .errors import AddressError, CapacityError, ConfigError
from .mainmem import BLOCK, DramTiming, L3Model, MainMemory
from .stats import Stats
from .system import (FLAT_CAM_BASE, FLAT_RAM_BASE, L3_HIT_CYCLES, REG_BASE,
                     SCRATCH_BASE, Request, Response, StackConfig,
                     StackSystem)


class BaselineKind(Enum):
    DRAM_CACHE = "dram_cache"
    DRAM_CACHE_IDEAL = "dram_cache_ideal"
    HBM_SCRATCHPAD = "hbm_scratchpad"
    SRAM_STACK = "sram_stack"
    RRAM_FLAT = "rram_flat"


CMOS_TIMING = DramTiming(t_rcd=4, t_cas=4, t_rp=8, t_cwd=4, t_burst=4)
SRAM_STACK_CAPACITY = int(73.28 * (1 << 20))


@dataclass
class BaselineConfig:
    kind: BaselineKind
    mm_capacity: int = 1 << 26
    l3_capacity: int = 8 << 20
    l3_ways: int = 16
    l4_capacity: int = 1 << 22
    l4_ways: int = 32
    scratch_capacity: int = 1 << 30
    refresh_utilization: float = 0.95  # bandwidth left after refresh


class BaselineSystem:
    """L3 + (DRAM L4 | in-package scratchpad) + main memory."""

    def __init__(self, config: BaselineConfig):
        self.config = config
        self.kind = config.kind
        self.stats = Stats()
        self.mm = MainMemory(capacity=config.mm_capacity)
        self.l3 = L3Model(capacity=config.l3_capacity, ways=config.l3_ways)
        self.l4 = None
        self.scratch = None
        if self.kind in (BaselineKind.DRAM_CACHE, BaselineKind.DRAM_CACHE_IDEAL):
            from .mainmem import SetAssocCache
            self.l4 = SetAssocCache(capacity=config.l4_capacity,
                                    ways=config.l4_ways)
            self.l4_timing = DramTiming.inpackage_dram()
        elif self.kind is BaselineKind.HBM_SCRATCHPAD:
            self.scratch = MainMemory(capacity=config.scratch_capacity,
                                      timing=DramTiming.inpackage_dram())
        elif self.kind is BaselineKind.SRAM_STACK:
            self.scratch = MainMemory(
                capacity=min(config.scratch_capacity, SRAM_STACK_CAPACITY),
                timing=CMOS_TIMING)
        # scratchpad overflow lives in its own off-chip region
        self.spill = MainMemory(capacity=1 << 34) if self.scratch else None
        self._scratch_ptr = 0

    def hbm_malloc(self, size: int):
        """Scratchpad allocation; addresses past the device capacity spill
        to main memory by address (the working set may exceed the stack)."""
        from .system import Allocation
        if size <= 0:
            raise CapacityError("allocation size must be positive")
        size = -(-size // BLOCK) * BLOCK
        if self._scratch_ptr + size > 1 << 34:
            raise CapacityError("scratch aperture exhausted")
        base = SCRATCH_BASE + self._scratch_ptr
        self._scratch_ptr += size
        return Allocation(base, size, "scratch")

    # -- dram-cache latency model --------------------------------------------------

    def _l4_access_latency(self, now: int) -> int:
        t = self.l4_timing
        if self.kind is BaselineKind.DRAM_CACHE_IDEAL:
            # zero activate/precharge/refresh; tag lookup folded in
            return now + t.t_cas + t.t_burst
        # tag fetch charged as one extra DRAM access, then the data access
        per_access = t.t_rcd + t.t_cas + t.t_burst
        charged = int(2 * per_access / self.config.refresh_utilization)
        return now + charged

    def handle(self, req: Request, now: int) -> Response:
        self.stats.requests += 1
        if req.addr >= REG_BASE or req.kind in ("KEY", "MASK", "MATCH", "S"):
            raise ConfigError("baselines have no search registers")
        if req.addr >= SCRATCH_BASE:
            return self._scratch_access(req, now)
        if req.addr >= FLAT_RAM_BASE:
            raise AddressError("flat stack apertures need the stack system")
        return self._cacheable(req, now)

    def run(self, requests) -> Stats:
        ready = 0
        for req in requests:
            start = max(req.cycle, ready)
            resp = self.handle(req, start)
            if req.critical:
                ready = resp.complete
            self.stats.cycles = max(self.stats.cycles, resp.complete)
        return self.stats

    # -- scratchpad space ---------------------------------------------------------------

    def _scratch_access(self, req: Request, now: int) -> Response:
        if self.scratch is None:
            raise ConfigError(f"{self.kind.value} has no scratchpad aperture")
        offset = req.addr - SCRATCH_BASE
        kind = "read" if req.kind == "R" else "write"
        if offset < self.scratch.capacity:
            store, base = self.scratch, offset
            done = store.access(kind, base - base % BLOCK, now)
            if kind == "read":
                self.stats.reads += 1
                self.stats.reads_inpackage += 1
            else:
                self.stats.writes += 1
        else:
            # working set beyond the stack capacity spills to main memory
            store, base = self.spill, offset - self.scratch.capacity
            done = store.access(kind, base - base % BLOCK, now)
            if kind == "read":
                self.stats.reads += 1
                self.stats.reads_main_memory += 1
                self.stats.mm_reads += 1
            else:
                self.stats.writes += 1
                self.stats.mm_writes += 1
        if kind == "read":
            block = store.read_block(base - base % BLOCK)
            off = base % BLOCK
            return Response(done, block[off:off + req.size])
        block_base = base - base % BLOCK
        blk = bytearray(store.read_block(block_base))
        payload = bytes(req.data)
        off = base % BLOCK
        blk[off:off + len(payload)] = payload
        store.write_block(block_base, bytes(blk))
        return Response(done)

    # -- cacheable space -----------------------------------------------------------------

    def _cacheable(self, req: Request, now: int) -> Response:
        block_addr = req.addr - req.addr % BLOCK
        kind = "read" if req.kind == "R" else "write"
        if kind == "read":
            self.stats.reads += 1
        else:
            self.stats.writes += 1
        line = self.l3.touch(kind, block_addr)
        if line is not None:
            self.stats.l3_hits += 1
            done = now + L3_HIT_CYCLES
        else:
            self.stats.l3_misses += 1
            done, data = self._fill(block_addr, now)
            evicted = self.l3.install(block_addr, data)
            if evicted is not None:
                done = max(done, self._evict(evicted, done))
            line = self.l3.touch(kind, block_addr)
        off = req.addr % BLOCK
        if kind == "read":
            return Response(done, bytes(line.data[off:off + req.size]))
        payload = bytes(req.data)
        if off + len(payload) > BLOCK:
            raise AddressError("write straddles a block boundary")
        line.data[off:off + len(payload)] = payload
        return Response(done)

    def _fill(self, block_addr: int, now: int):
        if self.l4 is not None:
            line = self.l4.lookup(block_addr)
            done = self._l4_access_latency(now)
            if line is not None:
                self.stats.cache_hits += 1
                self.stats.reads_inpackage += 1
                return done, bytes(line.data)
            self.stats.cache_misses += 1
            data = self.mm.read_block(block_addr)
            done = self.mm.access("read", block_addr, done)
            self.stats.mm_reads += 1
            self.stats.reads_main_memory += 1
            evicted = self.l4.install(block_addr, data)  # allocate on fill
            self.stats.installs += 1
            if evicted is not None and evicted.dirty:
                self.mm.write_block(evicted.addr, evicted.data)
                self.mm.access("write", evicted.addr, done)
                self.stats.mm_writes += 1
                self.stats.writebacks += 1
            return done, data
        data = self.mm.read_block(block_addr)
        done = self.mm.access("read", block_addr, now)
        self.stats.mm_reads += 1
        self.stats.reads_main_memory += 1
        return done, data

    def _evict(self, ev, now: int) -> int:
        if self.l4 is not None:
            line = self.l4.peek(ev.addr)
            done = now
            if ev.dirty:
                done = self._l4_access_latency(now)
                if line is not None:
                    line.data[:] = ev.data
                    line.dirty = True
                else:
                    evicted = self.l4.install(ev.addr, ev.data)
                    self.l4.peek(ev.addr).dirty = True
                    self.stats.installs += 1
                    if evicted is not None and evicted.dirty:
                        self.mm.write_block(evicted.addr, evicted.data)
                        self.mm.access("write", evicted.addr, done)
                        self.stats.mm_writes += 1
                        self.stats.writebacks += 1
            return done
        if ev.dirty:
            self.mm.write_block(ev.addr, ev.data)
            self.stats.mm_writes += 1
            return self.mm.access("write", ev.addr, now)
        return now

    # -- draining ------------------------------------------------------------------------

    def flush(self, now: int) -> int:
        done = now
        for ev in self.l3.drain():
            done = max(done, self._evict(ev, done))
        if self.l4 is not None:
            for ev in self.l4.drain():
                if ev.dirty:
                    self.mm.write_block(ev.addr, ev.data)
                    self.stats.mm_writes += 1
                    done = max(done, self.mm.access("write", ev.addr, done))
        return done

    def memory_image(self) -> dict[int, bytes]:
        img = dict(self.mm.image())
        if self.l4 is not None:
            for idx, lines in enumerate(self.l4._sets):
                for tag, line in lines.items():
                    if line.dirty:
                        img[(tag * self.l4.n_sets + idx) * BLOCK] = bytes(line.data)
        for idx, lines in enumerate(self.l3._sets):
            for tag, line in lines.items():
                if line.dirty:
                    img[(tag * self.l3.n_sets + idx) * BLOCK] = bytes(line.data)
        return img


def make_system(kind: str, stack_config: StackConfig | None = None,
                baseline_config: BaselineConfig | None = None):
    """Factory shared by the harness: kind is a BaselineKind value or one
    of the stack modes ('flat', 'cache')."""
    if kind in ("flat", "cache"):
        return StackSystem(stack_config or StackConfig())
    if kind == BaselineKind.RRAM_FLAT.value:
        cfg = stack_config or StackConfig()
        return StackSystem(StackConfig(
            geometry=cfg.geometry, timing=cfg.timing, cache_vaults=0,
            flat_ram_vaults=cfg.flat_ram_vaults + cfg.flat_cam_vaults,
            flat_cam_vaults=0, wear_leveling=False,
            mm_capacity=cfg.mm_capacity))
    base = baseline_config or BaselineConfig(BaselineKind(kind))
    if base.kind is not BaselineKind(kind):
        base = BaselineConfig(BaselineKind(kind),
                              mm_capacity=base.mm_capacity)
    return BaselineSystem(base)


def run_baseline(kind, requests, stack_config: StackConfig | None = None,
                 baseline_config: BaselineConfig | None = None):
    """Serve a request trace through one configuration; returns its Stats."""
    kind_value = kind.value if isinstance(kind, BaselineKind) else kind
    system = make_system(kind_value, stack_config, baseline_config)
    return system.run(requests)
