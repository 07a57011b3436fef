#!/usr/bin/env python3
"""String-match comparison: broadcast CAM search vs block streaming."""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from xamsim.address import Geometry
from xamsim.system import StackConfig, StackSystem
from xamsim.timing import TimingParams
from xamsim.workloads import StringCorpus, StringMatcher


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--corpus-kb", type=int, default=256)
    ap.add_argument("--patterns", default=None,
                    help="comma-separated; defaults to corpus words")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    words = [bytes(rng.integers(97, 123, int(rng.integers(3, 9)))
                   .astype("uint8")) for _ in range(300)]
    size = args.corpus_kb << 10
    raw = b" ".join(words[int(i)] for i in
                    rng.integers(0, 300, size // 5))[:size]
    raw += bytes(size - len(raw))
    corpus = StringCorpus(raw)

    geo = Geometry.desk(vaults=2, banks_per_vault=8, supersets_per_bank=32)
    fast_sys = StackSystem(StackConfig(geometry=geo, timing=TimingParams()))
    slow_sys = StackSystem(StackConfig(geometry=geo, timing=TimingParams(),
                                       flat_ram_vaults=2, flat_cam_vaults=0))
    fast = StringMatcher(fast_sys, corpus, accelerated=True)
    slow = StringMatcher(slow_sys, corpus, accelerated=False,
                         placement="flat_ram")
    print(f"corpus {len(raw)} bytes raw, {corpus.encoded_bytes} encoded (8x)")
    print("pattern,matches,search_requests,search_cycles,"
          "stream_requests,stream_cycles")
    if args.patterns:
        patterns = [t.encode() for t in args.patterns.split(",")]
    else:
        patterns = [words[11], words[42], b"qzqzq"]
    for p in patterns:
        token = p.decode()
        f0, s0 = fast.core.requests, slow.core.requests
        c0, d0 = fast.core.now, slow.core.now
        hits_fast = fast.find(p)
        hits_slow = slow.find(p)
        assert hits_fast == hits_slow
        print(f"{token},{len(hits_fast)},{fast.core.requests - f0},"
              f"{fast.core.now - c0},{slow.core.requests - s0},"
              f"{slow.core.now - d0}")


if __name__ == "__main__":
    main()
