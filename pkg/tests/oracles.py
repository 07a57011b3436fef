"""Independent software oracles used by the test suite.

These mirror the documented policies in plain dict/list structures with no
dependence on the simulator's fabric, scheduler, or address plumbing, so a
bug on either side shows up as a divergence.
"""

from dataclasses import dataclass, field

WAYS = 512
BLOCK = 64


@dataclass
class RefWay:
    tag: int = 0
    valid: bool = False
    dirty: bool = False
    data: bytes = b"\x00" * BLOCK


@dataclass
class ReferenceCache512:
    """512-way set-associative cache with the counter replacement policy and
    the selective-install rules, one instance per vault."""

    main: dict = field(default_factory=dict)  # block addr -> bytes
    sets: dict = field(default_factory=dict)  # index key -> list[RefWay]
    counter: int = 0
    hits: int = 0
    misses: int = 0
    outcomes: list = field(default_factory=list)

    def _ways(self, index):
        if index not in self.sets:
            self.sets[index] = [RefWay() for _ in range(WAYS)]
        return self.sets[index]

    def _mm_read(self, addr):
        return self.main.get(addr, b"\x00" * BLOCK)

    def lookup(self, index, tag, addr):
        ways = self._ways(index)
        for way in ways:
            if way.valid and way.tag == tag:
                self.hits += 1
                return way.data
        self.misses += 1
        return None

    def handle_eviction(self, index, tag, addr, data, dirty, read_flag):
        if not dirty and not read_flag:
            self.outcomes.append("dropped")
            return
        ways = self._ways(index)
        present = next((w for w in ways if w.valid and w.tag == tag), None)
        if present is not None:
            if not dirty:
                self.outcomes.append("dropped")
                return
            present.data = bytes(data)
            present.dirty = True
            self.outcomes.append("updated")
            return
        if dirty and not read_flag:
            self.main[addr] = bytes(data)
            self.outcomes.append("forwarded")
            return
        # install: first invalid way scanning circularly from the counter,
        # else the counter way is the victim (writeback if dirty)
        invalid = [i for i, w in enumerate(ways) if not w.valid]
        if invalid:
            start = self.counter % WAYS
            way_idx = min(invalid, key=lambda i: (i - start) % WAYS)
        else:
            way_idx = self.counter % WAYS
            victim = ways[way_idx]
            if victim.dirty:
                self.main[self.compose(index, victim.tag)] = victim.data
            self.counter = (self.counter + 1) % WAYS
        ways[way_idx] = RefWay(tag=tag, valid=True, dirty=dirty,
                               data=bytes(data))
        self.outcomes.append("installed")

    # populated by the test with the mapper's compose function
    compose = None


class FlatImage:
    """Flat memory semantics: every read returns the last write."""

    def __init__(self):
        self.blocks: dict[int, bytes] = {}

    def write(self, addr: int, data: bytes):
        base = addr - addr % BLOCK
        blk = bytearray(self.blocks.get(base, b"\x00" * BLOCK))
        blk[addr % BLOCK:addr % BLOCK + len(data)] = data
        self.blocks[base] = bytes(blk)

    def read(self, addr: int, size: int) -> bytes:
        base = addr - addr % BLOCK
        blk = self.blocks.get(base, b"\x00" * BLOCK)
        off = addr % BLOCK
        return bytes(blk[off:off + size])

    def image(self) -> dict[int, bytes]:
        return dict(self.blocks)
