#!/usr/bin/env python3
"""Hashing sensitivity sweep: window x table size, search path vs baselines.

Prints one CSV row per (memory, window, log2_size) with cycles, request
counts, and energy, mirroring the figure grids of the evaluation."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from xamsim.address import Geometry
from xamsim.baselines import BaselineConfig, BaselineKind, BaselineSystem
from xamsim.system import StackConfig, StackSystem
from xamsim.timing import TimingParams
from xamsim.workloads import HashTableConfig, HopscotchTable, ZipfStream

MEMORIES = ("flat", "rram_flat", "hbm_scratchpad", "sram_stack")


def build_system(memory):
    geo = Geometry.desk(vaults=2, banks_per_vault=4, supersets_per_bank=16)
    if memory == "flat":
        return StackSystem(StackConfig(geometry=geo, timing=TimingParams())), True, "scratch"
    if memory == "rram_flat":
        cfg = StackConfig(geometry=geo, timing=TimingParams(),
                          flat_ram_vaults=2, flat_cam_vaults=0)
        return StackSystem(cfg), False, "flat_ram"
    return BaselineSystem(BaselineConfig(BaselineKind(memory))), False, "scratch"


def run_one(memory, window, log2_size, ops, read_pct, seed):
    system, accelerated, placement = build_system(memory)
    cfg = HashTableConfig(log2_size=log2_size, window=window,
                          read_pct=read_pct, density=0.5, seed=seed)
    table = HopscotchTable(system, cfg, accelerated, placement)
    prefill = int(cfg.density * cfg.size)
    for k in range(1, prefill + 1):
        table.insert(k, k * 3 + 1)
    stream = ZipfStream(n_items=prefill, read_pct=read_pct, seed=seed)
    for is_read, key in stream.ops(ops):
        if is_read:
            table.lookup(key)
        else:
            table.insert(key, key)
    return table.core.now, table.core.requests, system.stats.energy_nj()


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ops", type=int, default=2000)
    ap.add_argument("--read-pct", type=float, default=95.0)
    ap.add_argument("--windows", default="32,64,128")
    ap.add_argument("--sizes", default="9,10,11")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    print("memory,window,log2_size,cycles,requests,energy_nj")
    for memory in MEMORIES:
        for window in (int(w) for w in args.windows.split(",")):
            for log2_size in (int(s) for s in args.sizes.split(",")):
                cycles, requests, energy = run_one(
                    memory, window, log2_size, args.ops, args.read_pct,
                    args.seed)
                print(f"{memory},{window},{log2_size},{cycles},"
                      f"{requests},{energy:.3f}")


if __name__ == "__main__":
    main()
