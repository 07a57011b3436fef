"""Workload kernels: hopscotch hashing, zipfian key streams, string matching.

Workload results (lookup answers, match positions) are a function of the
kernel alone; the bound memory system only changes request counts and
timing. The accelerated paths land keys in the search-capable scratchpad and
replace iterative bucket reads with key-register writes and match reads; the
baseline paths stream buckets and corpus blocks through whatever memory the
system provides.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError
from .system import Request

M64 = (1 << 64) - 1


def fmix64(x: int) -> int:
    """Murmur3 64-bit finalizer (a bijective mixer)."""
    x &= M64
    x ^= x >> 33
    x = (x * 0xFF51AFD7ED558CCD) & M64
    x ^= x >> 33
    x = (x * 0xC4CEB9FE1A85EC53) & M64
    x ^= x >> 33
    return x


class Core:
    """Serializing front end: every request blocks its issuer."""

    def __init__(self, system):
        self.system = system
        self.now = 0
        self.requests = 0

    def do(self, kind, addr, size=8, data=None):
        resp = self.system.handle(Request(kind, addr, size, data,
                                          cycle=self.now), self.now)
        self.now = resp.complete
        self.requests += 1
        return resp.value


# -- zipfian key stream ------------------------------------------------------------


@dataclass
class ZipfStream:
    """YCSB-style zipfian generator over [0, n_items) with an op mix.

    Deterministic for a given seed; the closed-form sampler avoids an
    O(n)-sized table.
    """

    n_items: int
    skew: float = 0.99
    read_pct: float = 95.0
    seed: int = 1
    _state: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n, theta = self.n_items, self.skew
        zetan = float(np.sum(1.0 / np.arange(1, n + 1) ** theta))
        zeta2 = 1.0 + 0.5 ** theta
        self._state["rng"] = np.random.default_rng(self.seed)
        self._state["zetan"] = zetan
        self._state["alpha"] = 1.0 / (1.0 - theta)
        self._state["eta"] = ((1.0 - (2.0 / n) ** (1.0 - theta))
                              / (1.0 - zeta2 / zetan))

    def next_key(self) -> int:
        rng = self._state["rng"]
        u = rng.random()
        uz = u * self._state["zetan"]
        if uz < 1.0:
            return 0
        if uz < 1.0 + 0.5 ** self.skew:
            return 1
        eta, alpha = self._state["eta"], self._state["alpha"]
        return int(self.n_items * (eta * u - eta + 1.0) ** alpha)

    def ops(self, count: int):
        """Yields (is_read, key); keys are offset by one (zero is reserved
        for empty hash buckets)."""
        rng = self._state["rng"]
        for _ in range(count):
            is_read = rng.random() * 100.0 < self.read_pct
            yield is_read, self.next_key() + 1


# -- hopscotch hash table -----------------------------------------------------------


@dataclass(frozen=True)
class HashTableConfig:
    log2_size: int = 12
    window: int = 64
    read_pct: float = 95.0
    density: float = 0.5
    seed: int = 1

    def __post_init__(self):
        if self.window > 1 << self.log2_size:
            raise CapacityError("window larger than the table")

    @property
    def size(self) -> int:
        return 1 << self.log2_size

    @property
    def metadata_bytes_per_bucket(self) -> int:
        return self.window // 8


BUCKETS_PER_SET = 64


class HopscotchTable:
    """Open-addressing table keeping every key within `window` of its home.

    accelerated=True stores keys one per search column (64 buckets per set)
    and values in the paired RAM scratchpad; lookups become one key-register
    write plus one match read per covered set. The baseline keeps 16-byte
    (key, value) buckets and walks the metadata bitmap with bucket reads.
    Metadata lives in cacheable main memory in both paths.
    """

    MM_BUCKET_REGION = 16 << 20  # cacheable-space bucket arrays start here

    def __init__(self, system, config: HashTableConfig, accelerated: bool,
                 placement: str = "scratch", metadata_base: int = 0):
        self.core = Core(system)
        self.system = system
        self.config = config
        self.accelerated = accelerated
        self.placement = placement
        self.size = config.size
        self.window = config.window
        self.count = 0
        self.rehashes = 0
        self.metadata_base = metadata_base
        self._mm_bucket_ptr = self.MM_BUCKET_REGION
        if accelerated:
            self._attach_search_space()
        else:
            self.bucket_base = self._alloc_buckets()

    def _alloc_buckets(self) -> int:
        if self.placement == "flat_ram":
            return self.system.flat_ram_malloc(self.size * 16).base
        if self.placement == "mm":
            base = self._mm_bucket_ptr
            self._mm_bucket_ptr += self.size * 16
            return base
        return self.system.hbm_malloc(self.size * 16).base

    def _attach_search_space(self):
        """Allocate key columns + value words; bind the vault's registers."""
        from .system import FLAT_CAM_BASE
        self.cam = self.system.flat_cam_malloc(self.size * 64)
        self.ram = self.system.flat_ram_malloc(self.size * 8)
        self.regs = self.cam.registers
        geo = self.system.geo
        within = (self.cam.base - FLAT_CAM_BASE) % geo.vault_bytes
        if within + self.cam.size > geo.vault_bytes:
            raise CapacityError("key space must not span vaults")
        # linear set index of the allocation start inside its vault
        self._set_slot_base = within // (BUCKETS_PER_SET * 64)

    # -- metadata bitmaps (main memory, both paths) ------------------------------
    # window/8 bytes of bitmap per bucket, stored at word-aligned slots so
    # neighboring buckets never share a memory word

    @property
    def _meta_stride(self) -> int:
        return max(8, self.config.metadata_bytes_per_bucket)

    def _meta_addr(self, home: int) -> int:
        return self.metadata_base + home * self._meta_stride

    def _meta_read(self, home: int) -> int:
        value = 0
        for i in range(0, self._meta_stride, 8):
            word = self.core.do("R", self._meta_addr(home) + i, 8)
            value |= int.from_bytes(word, "little") << (i * 8)
        return value & ((1 << self.window) - 1)

    def _meta_write(self, home: int, bitmap: int) -> None:
        for i in range(0, self._meta_stride, 8):
            chunk = (bitmap >> (i * 8)) & M64
            self.core.do("W", self._meta_addr(home) + i, 8,
                         chunk.to_bytes(8, "little"))

    # -- bucket accessors --------------------------------------------------------------

    def _home(self, key: int) -> int:
        return fmix64(key) & (self.size - 1)

    def _read_key(self, bucket: int) -> int:
        if self.accelerated:
            block = self.core.do("R", self.cam.base + bucket * 64, 8)
        else:
            block = self.core.do("R", self.bucket_base + bucket * 16, 8)
        return int.from_bytes(block, "little")

    def _read_value(self, bucket: int) -> int:
        if self.accelerated:
            word = self.core.do("R", self.ram.base + bucket * 8, 8)
        else:
            word = self.core.do("R", self.bucket_base + bucket * 16 + 8, 8)
        return int.from_bytes(word, "little")

    def _write_bucket(self, bucket: int, key: int, value: int) -> None:
        if self.accelerated:
            block = bytearray(64)
            block[:8] = key.to_bytes(8, "little")
            self.core.do("W", self.cam.base + bucket * 64, 64, bytes(block))
            self.core.do("W", self.ram.base + bucket * 8, 8,
                         value.to_bytes(8, "little"))
        else:
            self.core.do("W", self.bucket_base + bucket * 16, 8,
                         key.to_bytes(8, "little"))
            self.core.do("W", self.bucket_base + bucket * 16 + 8, 8,
                         value.to_bytes(8, "little"))

    # -- search primitives ----------------------------------------------------------------

    def _arm_key(self, key: int) -> None:
        self.core.do("KEY", self.regs.key_ptr, 8, key)
        # the lane mask never changes between operations; arm it once
        if getattr(self, "_mask_armed_for", None) != self.regs.mask_ptr:
            self.core.do("MASK", self.regs.mask_ptr, 8, M64)
            self._mask_armed_for = self.regs.mask_ptr

    def _match_in_set(self, set_index: int):
        """Match read for one 64-bucket set; returns a set-relative column."""
        slot = self._set_slot_base + set_index
        return self.core.do("MATCH", self.regs.match_base + slot * 8, 8)

    def _window_sets(self, home: int):
        first = home // BUCKETS_PER_SET
        last = (home + self.window - 1) // BUCKETS_PER_SET
        total_sets = self.size // BUCKETS_PER_SET
        return [s % total_sets for s in range(first, last + 1)]

    def _in_window(self, home: int, bucket: int) -> bool:
        return (bucket - home) % self.size < self.window

    # -- operations ---------------------------------------------------------------------------

    def _locate(self, key: int):
        """Bucket index of a stored key, or None.

        The search path arms the key once and issues one match read per set
        the window spans; the baseline walks the home bucket's metadata
        bitmap with per-bucket key reads.
        """
        home = self._home(key)
        if self.accelerated:
            self._arm_key(key)
            for s in self._window_sets(home):
                col = self._match_in_set(s)
                if col is not None:
                    bucket = s * BUCKETS_PER_SET + col
                    if self._in_window(home, bucket):
                        return bucket
            return None
        bitmap = self._meta_read(home)
        for offset in range(self.window):
            if not bitmap >> offset & 1:
                continue
            bucket = (home + offset) % self.size
            if self._read_key(bucket) == key:
                return bucket
        return None

    def lookup(self, key: int):
        """Returns the value or None; requests per path differ sharply."""
        if key == 0:
            raise ValueError("key zero is the empty-bucket sentinel")
        bucket = self._locate(key)
        return None if bucket is None else self._read_value(bucket)

    def insert(self, key: int, value: int) -> bool:
        """Place or update a key; True if the table had to rehash."""
        if key == 0:
            raise ValueError("key zero is the empty-bucket sentinel")
        bucket = self._locate(key)
        if bucket is not None:
            if self.accelerated:
                self.core.do("W", self.ram.base + bucket * 8, 8,
                             value.to_bytes(8, "little"))
            else:
                self.core.do("W", self.bucket_base + bucket * 16 + 8, 8,
                             value.to_bytes(8, "little"))
            return False
        rehashed = False
        home = self._home(key)
        while not self._try_insert(home, key, value):
            self._rehash()
            home = self._home(key)
            rehashed = True
        self.count += 1
        return rehashed

    def _free_bucket_from(self, start: int):
        """First empty bucket at or after `start` (circular), else None."""
        if self.accelerated:
            self._arm_key(0)
            total_sets = self.size // BUCKETS_PER_SET
            first_set = start // BUCKETS_PER_SET
            for i in range(total_sets + 1):
                s = (first_set + i) % total_sets
                slot = self._set_slot_base + s
                matrix = self.core.do("S", self.regs.match_base + slot * 8, 8)
                cols = np.flatnonzero(matrix.all(axis=0))
                for col in cols:
                    bucket = s * BUCKETS_PER_SET + int(col)
                    if i > 0 or bucket >= start:
                        return bucket
            return None
        for probe in range(self.size):
            bucket = (start + probe) % self.size
            if self._read_key(bucket) == 0:
                return bucket
        return None

    def _try_insert(self, home: int, key: int, value: int) -> bool:
        free = self._free_bucket_from(home)
        if free is None:
            return False
        while (free - home) % self.size >= self.window:
            moved = self._hop(free)
            if moved is None:
                return False
            free = moved
        self._write_bucket(free, key, value)
        bitmap = self._meta_read(home)
        self._meta_write(home, bitmap | 1 << ((free - home) % self.size))
        return True

    def _hop(self, free: int):
        """Move some in-window key into `free`, vacating an earlier bucket."""
        for dist in range(self.window - 1, 0, -1):
            h = (free - dist) % self.size
            bitmap = self._meta_read(h)
            for offset in range(min(dist, self.window)):
                if not bitmap >> offset & 1:
                    continue
                candidate = (h + offset) % self.size
                moved_key = self._read_key(candidate)
                moved_value = self._read_value(candidate)
                self._write_bucket(free, moved_key, moved_value)
                self._write_bucket(candidate, 0, 0)
                bitmap = (bitmap & ~(1 << offset)
                          | 1 << ((free - h) % self.size))
                self._meta_write(h, bitmap)
                return candidate
        return None

    def _rehash(self) -> None:
        """Double the table within main-memory scope, then copy back in."""
        self.rehashes += 1
        if hasattr(self.system, "stats"):
            self.system.stats.rehashes += 1
        entries = []
        for bucket in range(self.size):
            k = self._read_key(bucket)
            if k:
                entries.append((k, self._read_value(bucket)))
        old_size = self.size
        self.size *= 2
        if self.accelerated:
            self._attach_search_space()
        else:
            self.bucket_base = self._alloc_buckets()
        self.metadata_base += old_size * self._meta_stride
        # wipe the new metadata region then reinsert every key
        for home in range(self.size):
            self._meta_write(home, 0)
        for k, v in entries:
            if not self._try_insert(self._home(k), k, v):
                raise CapacityError("reinsert failed after rehash")

    # -- invariants (used by the tests) ---------------------------------------------------

    def check_invariant(self) -> bool:
        """Every stored key lies within `window` of its home bucket."""
        for bucket in range(self.size):
            k = self._read_key(bucket)
            if k and not self._in_window(self._home(k), bucket):
                return False
        return True


# -- string matching ---------------------------------------------------------------


SEARCH_SPAN_BYTES = 4096  # one set: 512 slots x 64 bits of encoded data


@dataclass
class StringCorpus:
    """Corpus encoded one byte per 64-bit slot (exactly 8x the raw size).

    Words start on slot boundaries by construction, so a search key compares
    whole slots; slots pack eight per stored column, one per subarray slice.
    """

    raw: bytes

    @property
    def encoded(self) -> np.ndarray:
        return np.frombuffer(self.raw, dtype=np.uint8).astype(np.uint64)

    @property
    def encoded_bytes(self) -> int:
        return len(self.raw) * 8

    def words(self) -> list[bytes]:
        """Delimiter-separated word list (informational)."""
        return self.raw.split()


SLOTS_PER_COLUMN = 8
SLOTS_PER_SET = BUCKETS_PER_SET * SLOTS_PER_COLUMN  # 512


class StringMatcher:
    """Substring scan over the corpus via CAM search or block streaming.

    Both paths return identical byte positions. The accelerated path finds
    candidates for the pattern's first slot with one search per set (4KB of
    encoded data covered per search), verifying the remaining slots with
    reads; the baseline streams the raw corpus block by block and scans in
    the core.
    """

    def __init__(self, system, corpus: StringCorpus, accelerated: bool,
                 placement: str = "scratch"):
        self.core = Core(system)
        self.system = system
        self.corpus = corpus
        self.accelerated = accelerated
        self.searches_issued = 0
        self.max_search_coverage = 0
        if accelerated:
            self._load_encoded()
        else:
            if placement == "flat_ram":
                self.base = system.flat_ram_malloc(max(len(corpus.raw), 64)).base
            elif placement == "mm":
                self.base = 32 << 20
            else:
                self.base = system.hbm_malloc(max(len(corpus.raw), 64)).base
            self._stream_in()

    # -- corpus placement ---------------------------------------------------------

    def _load_encoded(self):
        from .system import FLAT_CAM_BASE
        slots = self.corpus.encoded
        n_cols = -(-len(slots) // SLOTS_PER_COLUMN)
        self.cam = self.system.flat_cam_malloc(max(n_cols, 1) * 64)
        self.regs = self.cam.registers
        geo = self.system.geo
        within = (self.cam.base - FLAT_CAM_BASE) % geo.vault_bytes
        self._set_slot_base = within // (BUCKETS_PER_SET * 64)
        for col in range(n_cols):
            chunk = slots[col * SLOTS_PER_COLUMN:(col + 1) * SLOTS_PER_COLUMN]
            block = bytearray(64)
            for lane, slot in enumerate(chunk):
                block[lane * 8:(lane + 1) * 8] = int(slot).to_bytes(8, "little")
            self.core.do("W", self.cam.base + col * 64, 64, bytes(block))

    def _stream_in(self):
        raw = self.corpus.raw
        for off in range(0, len(raw), 64):
            chunk = raw[off:off + 64]
            self.core.do("W", self.base + off, 64,
                         chunk + bytes(64 - len(chunk)))

    # -- the two scan paths ------------------------------------------------------------

    def find(self, pattern: bytes) -> list[int]:
        if not pattern:
            raise ValueError("empty pattern")
        if self.accelerated:
            return self._find_search(pattern)
        return self._find_stream(pattern)

    def _find_stream(self, pattern: bytes) -> list[int]:
        raw = self.corpus.raw
        data = bytearray()
        for off in range(0, len(raw), 64):
            data += self.core.do("R", self.base + off, 64)
        data = bytes(data[:len(raw)])
        out, start = [], 0
        while True:
            hit = data.find(pattern, start)
            if hit < 0:
                return out
            out.append(hit)
            start = hit + 1

    def _slot_value(self, index: int, cache: dict) -> int:
        col = index // SLOTS_PER_COLUMN
        if col not in cache:
            block = self.core.do("R", self.cam.base + col * 64, 64)
            cache[col] = block
        lane = index % SLOTS_PER_COLUMN
        return int.from_bytes(cache[col][lane * 8:(lane + 1) * 8], "little")

    def _slot_bitmap(self, value: int, n_slots: int) -> np.ndarray:
        """Search every set for one slot value; returns a per-slot hit map."""
        for lane in range(SLOTS_PER_COLUMN):
            self.core.do("KEY", self.regs.key_ptr + lane * 8, 8, value)
        if not getattr(self, "_mask_armed", False):
            for lane in range(SLOTS_PER_COLUMN):
                self.core.do("MASK", self.regs.mask_ptr + lane * 8, 8, M64)
            self._mask_armed = True
        bitmap = np.zeros(n_slots, dtype=bool)
        n_sets = -(-n_slots // SLOTS_PER_SET)
        for s in range(n_sets):
            slot_addr = self.regs.match_base + (self._set_slot_base + s) * 8
            matrix = self.core.do("S", slot_addr, 8)
            self.searches_issued += 1
            covered = min(SLOTS_PER_SET, n_slots - s * SLOTS_PER_SET)
            self.max_search_coverage = max(self.max_search_coverage,
                                           covered * 8)
            lanes, cols = np.nonzero(matrix)
            idx = s * SLOTS_PER_SET + cols * SLOTS_PER_COLUMN + lanes
            bitmap[idx[idx < n_slots]] = True
        return bitmap

    def _find_search(self, pattern: bytes) -> list[int]:
        """Broadcast searches for the leading slots, intersect the shifted
        hit maps, then verify any remaining slots with reads."""
        n_slots = len(self.corpus.raw)
        searched = min(len(pattern), 2)
        survivors = self._slot_bitmap(pattern[0], n_slots)
        for j in range(1, searched):
            shifted = np.zeros(n_slots, dtype=bool)
            hits = self._slot_bitmap(pattern[j], n_slots)
            shifted[:n_slots - j] = hits[j:]
            survivors &= shifted
        out = []
        cache: dict = {}
        for idx in np.flatnonzero(survivors):
            idx = int(idx)
            if idx + len(pattern) > n_slots:
                continue
            if all(self._slot_value(idx + k, cache) == pattern[k]
                   for k in range(searched, len(pattern))):
                out.append(idx)
        return out
