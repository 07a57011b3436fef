"""Run statistics: one flat counter block shared by every configuration."""

from dataclasses import dataclass, fields

# per-operation energy for the 2R reconfigurable array, nJ
XAM_READ_NJ = 0.0215
XAM_WRITE_NJ = 0.652
XAM_SEARCH_NJ = 0.0263


@dataclass
class Stats:
    cycles: int = 0
    requests: int = 0
    reads: int = 0
    writes: int = 0
    match_reads: int = 0
    null_match_reads: int = 0
    key_loads: int = 0
    mask_loads: int = 0
    xam_reads: int = 0
    xam_writes: int = 0
    xam_searches: int = 0
    mm_reads: int = 0
    mm_writes: int = 0
    l3_hits: int = 0
    l3_misses: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    cache_bypasses: int = 0
    installs: int = 0
    updates: int = 0
    forwards: int = 0
    drops: int = 0
    writebacks: int = 0
    reads_inpackage: int = 0
    reads_main_memory: int = 0
    stall_cycles: int = 0
    window_blocks: int = 0
    rotations: int = 0
    rehashes: int = 0

    def energy_nj(self) -> float:
        return (self.xam_reads * XAM_READ_NJ
                + self.xam_writes * XAM_WRITE_NJ
                + self.xam_searches * XAM_SEARCH_NJ)

    def rows(self) -> list[tuple[str, float]]:
        out = [(f.name, getattr(self, f.name)) for f in fields(self)]
        out.append(("energy_nj", self.energy_nj()))
        return out
