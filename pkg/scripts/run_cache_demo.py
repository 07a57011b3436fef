#!/usr/bin/env python3
"""Cache-mode comparison: the resistive stack's hardware cache against the
DRAM-cache baselines on one zipfian block stream, with and without the write
window (M sweep)."""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from xamsim.address import Geometry
from xamsim.baselines import BaselineConfig, BaselineKind, BaselineSystem
from xamsim.mainmem import BLOCK
from xamsim.system import Request, StackConfig, StackSystem
from xamsim.timing import CLOCK_HZ, YEAR_SECONDS, TimingParams, derive_tmww


def zipf_trace(n, universe, seed, write_pct):
    rng = np.random.default_rng(seed)
    ranks = np.arange(1, universe + 1, dtype=np.float64)
    probs = ranks ** -0.99
    probs /= probs.sum()
    blocks = rng.choice(universe, size=n, p=probs)
    writes = rng.integers(0, 100, size=n) < write_pct
    out = []
    for b, w in zip(blocks, writes):
        addr = int(b) * BLOCK
        if w:
            out.append(Request("W", addr, 64, int(b).to_bytes(8, "little") * 8))
        else:
            out.append(Request("R", addr, 64))
    return out


def stack_run(trace, m_writes, wear):
    geo = Geometry.desk(vaults=2, banks_per_vault=8, supersets_per_bank=4)
    t_mww = 0
    if m_writes:
        t_mww = derive_tmww(10 * YEAR_SECONDS, 10**8, m_writes, CLOCK_HZ)
    cfg = StackConfig(geometry=geo,
                      timing=TimingParams(t_mww=t_mww,
                                          m_writes=max(m_writes, 1)),
                      cache_vaults=2, flat_ram_vaults=0, flat_cam_vaults=0,
                      wear_leveling=wear, wc_limit=1 << 18)
    system = StackSystem(cfg, l3_capacity=64 << 10)
    system.run(trace)
    return system


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--requests", type=int, default=20000)
    ap.add_argument("--universe", type=int, default=1 << 15)
    ap.add_argument("--write-pct", type=float, default=30)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    trace = zipf_trace(args.requests, args.universe, args.seed,
                       args.write_pct)
    print("config,cycles,hits,misses,installs,forwards,rotations,energy_nj")
    for m in (0, 1, 2, 3, 4):
        label = "unbound" if m == 0 else f"M={m}"
        system = stack_run(trace, m, wear=(m == 3))
        s = system.stats
        print(f"stack-{label},{s.cycles},{s.cache_hits},{s.cache_misses},"
              f"{s.installs},{s.forwards},{s.rotations},"
              f"{s.energy_nj():.1f}")
    for kind in ("dram_cache", "dram_cache_ideal"):
        base = BaselineSystem(BaselineConfig(BaselineKind(kind),
                                             l3_capacity=64 << 10))
        base.run(trace)
        s = base.stats
        print(f"{kind},{s.cycles},{s.cache_hits},{s.cache_misses},"
              f"{s.installs},0,0,0.0")


if __name__ == "__main__":
    main()
