"""Experiment orchestration: sectioned configs, runners, CSV + manifest."""

import configparser
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .address import Geometry
from .baselines import BaselineConfig, BaselineKind, BaselineSystem, \
    make_system
from .errors import ConfigError
from .mainmem import BLOCK
from .system import Request, StackConfig, StackSystem, load_trace
from .timing import CLOCK_HZ, YEAR_SECONDS, TimingParams, derive_tmww
from .workloads import (Core, HashTableConfig, HopscotchTable, StringCorpus,
                        StringMatcher, ZipfStream)

STACK_KINDS = ("flat", "cache", "rram_flat")
BASELINE_KINDS = tuple(k.value for k in BaselineKind if k.value != "rram_flat")
WORKLOADS = ("hashing", "stringmatch", "zipf_cache", "trace")


@dataclass
class ExperimentConfig:
    workload: str
    memory: str
    seed: int
    geometry: Geometry
    timing: TimingParams
    stack: StackConfig
    sections: dict

    @property
    def accelerated(self) -> bool:
        return self.memory == "flat"


def _getint(section, key, default):
    return int(section.get(key, default))


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config {path}")
    try:
        exp = parser["experiment"]
    except KeyError:
        raise ConfigError("missing [experiment] section") from None
    workload = exp.get("workload", "hashing")
    memory = exp.get("memory", "flat")
    if workload not in WORKLOADS:
        raise ConfigError(f"unknown workload {workload!r}")
    if memory not in STACK_KINDS + BASELINE_KINDS:
        raise ConfigError(f"unknown memory kind {memory!r}")
    seed = _getint(exp, "seed", 1)

    geo_sec = parser["geometry"] if parser.has_section("geometry") else {}
    geometry = Geometry.desk(
        vaults=_getint(geo_sec, "vaults", 2),
        banks_per_vault=_getint(geo_sec, "banks_per_vault", 4),
        supersets_per_bank=_getint(geo_sec, "supersets_per_bank", 8))

    timing_kwargs = {}
    if parser.has_section("timing"):
        for key, value in parser["timing"].items():
            try:
                timing_kwargs[key] = int(value)
            except ValueError:
                raise ConfigError(f"non-integer timing value for {key}") from None

    stack_sec = parser["stack"] if parser.has_section("stack") else {}
    m_writes = _getint(stack_sec, "m_writes", 0)
    n_w = _getint(stack_sec, "n_w", 10**8)
    years = float(stack_sec.get("target_lifetime_years", 0) or 0)
    t_mww = 0
    if m_writes > 0 and years > 0:
        t_mww = derive_tmww(years * YEAR_SECONDS, n_w, m_writes, CLOCK_HZ)
    timing = TimingParams(t_mww=t_mww, m_writes=max(m_writes, 1),
                          **timing_kwargs)
    wear = stack_sec.get("wear_leveling", "off") in ("on", "true", "1")
    stack = StackConfig(
        geometry=geometry, timing=timing,
        cache_vaults=_getint(stack_sec, "cache_vaults",
                             2 if memory == "cache" else 0),
        flat_ram_vaults=_getint(stack_sec, "flat_ram_vaults",
                                0 if memory == "cache" else 1),
        flat_cam_vaults=_getint(stack_sec, "flat_cam_vaults",
                                0 if memory == "cache" else 1),
        cam_banks=_getint(stack_sec, "cam_banks", 0),
        wear_leveling=wear,
        wc_limit=_getint(stack_sec, "wc_limit", 2**22),
        dc_limit=_getint(stack_sec, "dc_limit", 8192),
        mm_capacity=_getint(stack_sec, "mm_capacity_mb", 64) << 20)

    sections = {name: dict(parser[name]) for name in parser.sections()}
    return ExperimentConfig(workload, memory, seed, geometry, timing, stack,
                            sections)


def build_system(cfg: ExperimentConfig):
    if cfg.memory in STACK_KINDS:
        return make_system(cfg.memory, stack_config=cfg.stack)
    base = BaselineConfig(BaselineKind(cfg.memory),
                          mm_capacity=cfg.stack.mm_capacity)
    return BaselineSystem(base)


def _placement_for(memory: str) -> str:
    if memory == "rram_flat":
        return "flat_ram"
    if memory in ("dram_cache", "dram_cache_ideal", "cache"):
        return "mm"
    return "scratch"


# -- runners ------------------------------------------------------------------------


def run_hashing(cfg: ExperimentConfig, system):
    sec = cfg.sections.get("hashing", {})
    table_cfg = HashTableConfig(
        log2_size=int(sec.get("log2_size", 12)),
        window=int(sec.get("window", 64)),
        read_pct=float(sec.get("read_pct", 95)),
        density=float(sec.get("density", 0.5)),
        seed=cfg.seed)
    ops = int(sec.get("ops", 5000))
    skew = float(sec.get("zipf_skew", 0.99))
    table = HopscotchTable(system, table_cfg, accelerated=cfg.accelerated,
                           placement=_placement_for(cfg.memory))
    prefill = int(table_cfg.density * table_cfg.size)
    for k in range(1, prefill + 1):
        table.insert(k, k * 3 + 1)
    stream = ZipfStream(n_items=max(prefill, 1), skew=skew,
                        read_pct=table_cfg.read_pct, seed=cfg.seed)
    digest = hashlib.sha256()
    found = 0
    for is_read, key in stream.ops(ops):
        if is_read:
            value = table.lookup(key)
            found += value is not None
            digest.update(str(value).encode())
        else:
            table.insert(key, key * 5 + 7)
    extra = {
        "workload_ops": ops,
        "lookups_found": found,
        "result_digest": digest.hexdigest()[:16],
        "table_rehashes": table.rehashes,
        "workload_requests": table.core.requests,
    }
    return table.core.now, extra


def run_stringmatch(cfg: ExperimentConfig, system):
    sec = cfg.sections.get("stringmatch", {})
    corpus_bytes = int(sec.get("corpus_bytes", 1 << 16))
    n_patterns = int(sec.get("pattern_count", 4))
    rng = np.random.default_rng(cfg.seed)
    words = [bytes(rng.integers(97, 123, int(rng.integers(3, 9))).astype("uint8"))
             for _ in range(200)]
    raw = b" ".join(words[int(i)] for i in
                    rng.integers(0, len(words), corpus_bytes // 6))[:corpus_bytes]
    raw = raw + bytes(corpus_bytes - len(raw))
    corpus = StringCorpus(raw)
    matcher = StringMatcher(system, corpus, accelerated=cfg.accelerated,
                            placement=_placement_for(cfg.memory))
    patterns = [bytes(words[int(i)]) for i in rng.integers(0, len(words),
                                                           n_patterns)]
    digest = hashlib.sha256()
    total = 0
    for p in patterns:
        positions = matcher.find(p)
        total += len(positions)
        digest.update(p)
        digest.update(json.dumps(positions).encode())
    extra = {
        "workload_ops": len(patterns),
        "matches_found": total,
        "result_digest": digest.hexdigest()[:16],
        "searches_issued": matcher.searches_issued,
        "encoded_bytes": corpus.encoded_bytes,
        "workload_requests": matcher.core.requests,
    }
    return matcher.core.now, extra


def run_zipf_cache(cfg: ExperimentConfig, system):
    sec = cfg.sections.get("zipf_cache", {})
    n = int(sec.get("requests", 10000))
    universe = int(sec.get("universe_blocks", 1 << 15))
    write_pct = float(sec.get("write_pct", 30))
    stream = ZipfStream(n_items=universe, read_pct=100 - write_pct,
                        seed=cfg.seed)
    core = Core(system)
    digest = hashlib.sha256()
    for is_read, key in stream.ops(n):
        addr = (key - 1) * BLOCK
        if is_read:
            value = core.do("R", addr, 8)
            digest.update(value)
        else:
            core.do("W", addr, 8, int(key).to_bytes(8, "little"))
    extra = {
        "workload_ops": n,
        "result_digest": digest.hexdigest()[:16],
        "workload_requests": core.requests,
    }
    return core.now, extra


def run_trace(cfg: ExperimentConfig, system):
    sec = cfg.sections.get("trace", {})
    path = sec.get("path")
    if not path:
        raise ConfigError("[trace] section needs a path")
    requests = load_trace(path)
    for req in requests:
        if req.kind == "W" and req.data is None:
            req.data = bytes(req.size)
    system.run(requests)
    return system.stats.cycles, {"workload_ops": len(requests),
                                 "workload_requests": len(requests),
                                 "result_digest": "trace"}


RUNNERS = {"hashing": run_hashing, "stringmatch": run_stringmatch,
           "zipf_cache": run_zipf_cache, "trace": run_trace}


# -- csv/manifest emission --------------------------------------------------------------


def stats_csv(system, cycles: int, extra: dict) -> str:
    lines = ["counter,value"]
    rows = dict(system.stats.rows())
    rows["cycles"] = max(rows.get("cycles", 0), cycles)
    for name, value in rows.items():
        lines.append(f"{name},{value}")
    for name in sorted(extra):
        lines.append(f"{name},{extra[name]}")
    return "\n".join(lines) + "\n"


def run_experiment(config_path, out_dir=None):
    cfg = load_config(config_path)
    system = build_system(cfg)
    cycles, extra = RUNNERS[cfg.workload](cfg, system)
    csv_text = stats_csv(system, cycles, extra)
    manifest = {
        "config": str(config_path),
        "config_sha256": hashlib.sha256(
            Path(config_path).read_bytes()).hexdigest(),
        "seed": cfg.seed,
        "workload": cfg.workload,
        "memory": cfg.memory,
        "version": __version__,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        stem = Path(config_path).stem
        (out / f"{stem}.csv").write_text(csv_text)
        (out / f"{stem}.manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        if hasattr(system, "command_trace"):
            from .validate import dump_trace
            dump_trace(system.command_trace(), out / f"{stem}.cmdtrace")
    return csv_text, manifest, system


def run_sweep(config_path, out_dir, windows=(32, 64, 128),
              log2_sizes=(10, 11, 12)):
    """Grid sweep over (window, log2_size); one CSV row per combination."""
    rows = ["window,log2_size,cycles,requests,xam_searches,energy_nj,"
            "result_digest"]
    for window in windows:
        for log2_size in log2_sizes:
            cfg = load_config(config_path)
            hash_sec = cfg.sections.setdefault("hashing", {})
            hash_sec["window"] = str(window)
            hash_sec["log2_size"] = str(log2_size)
            system = build_system(cfg)
            cycles, extra = run_hashing(cfg, system)
            rows.append(
                f"{window},{log2_size},{cycles},"
                f"{extra['workload_requests']},{system.stats.xam_searches},"
                f"{system.stats.energy_nj()},{extra['result_digest']}")
    text = "\n".join(rows) + "\n"
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{Path(config_path).stem}.sweep.csv").write_text(text)
    return text
