"""Wear monitoring, rotary wear leveling, and snapshot-based lifetime estimation.

The monitor counts block writes, tracks per-superset written/dirty flags in
the SWT, and fires a rotate when writes look concentrated (WR), or the write
or dirty counters hit their limits. A rotate flushes dirty cache contents,
resets the counters, and advances the modular address offsets by the fixed
increments bank+1, set+3, superset+7, and vault+5 on every 8th rotate.

Wear is recorded as per-(superset, set) row/column write-event histograms.
A row-write event touches every column of its row and a column-write event
every row of its column, so the per-cell wear of cell (r, c) in one set is
bounded by row_events[r] + col_events[c]; the bound is exact for full-mask
block writes, which dominate traffic. The estimator replays the recorded
epochs forever, advancing offsets each rotation, until some cell crosses the
endurance limit.
"""

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .address import Geometry
from .errors import EstimationError
from .timing import CLOCK_HZ, YEAR_SECONDS
from .xam import DeviceParams

ROTATE_INCREMENTS = {"bank": 1, "set": 3, "vault": 5, "superset": 7}
VAULT_ROTATE_PERIOD = 8  # vault offset advances every 8th rotate

WC_LIMIT_DEFAULT = 2**22
DC_LIMIT_DEFAULT = 8192


@dataclass
class SwtEntry:
    """Superset write table entry: written and dirty flags for one epoch."""

    written: bool = False
    dirty: bool = False


@dataclass
class WearCounters:
    write_count: int = 0
    superset_count: int = 0
    dirty_count: int = 0
    wc_limit: int = WC_LIMIT_DEFAULT
    dc_limit: int = DC_LIMIT_DEFAULT


@dataclass(frozen=True)
class AddressOffsets:
    """Modular offsets applied to vault/bank/superset/set ids."""

    vault_off: int = 0
    bank_off: int = 0
    superset_off: int = 0
    set_off: int = 0
    rotate_count: int = 0

    @property
    def vault_rotate_pending(self) -> int:
        return self.rotate_count % VAULT_ROTATE_PERIOD

    def advanced(self, geo: Geometry) -> "AddressOffsets":
        """Offsets after one rotate."""
        count = self.rotate_count + 1
        vault_off = self.vault_off
        if count % VAULT_ROTATE_PERIOD == 0:
            vault_off = (vault_off + ROTATE_INCREMENTS["vault"]) % geo.vaults
        return AddressOffsets(
            vault_off=vault_off,
            bank_off=(self.bank_off + ROTATE_INCREMENTS["bank"]) % geo.banks_per_vault,
            superset_off=(self.superset_off + ROTATE_INCREMENTS["superset"])
            % geo.supersets_per_bank,
            set_off=(self.set_off + ROTATE_INCREMENTS["set"]) % geo.sets_per_superset,
            rotate_count=count,
        )

    def field_tuple(self) -> tuple[int, int, int, int]:
        return (self.vault_off, self.bank_off, self.superset_off, self.set_off)


def remap_fields(vault: int, bank: int, superset: int, set_id: int,
                 offsets: AddressOffsets, geo: Geometry) -> tuple[int, int, int, int]:
    """Bijective modular shift of the rotated coordinate fields."""
    return ((vault + offsets.vault_off) % geo.vaults,
            (bank + offsets.bank_off) % geo.banks_per_vault,
            (superset + offsets.superset_off) % geo.supersets_per_bank,
            (set_id + offsets.set_off) % geo.sets_per_superset)


def remap(addr, offsets: AddressOffsets, geo: Geometry):
    """Remap a PhysicalAddress; rows/columns within a set are untouched."""
    vault, bank, superset, set_id = remap_fields(
        addr.vault, addr.bank, addr.superset, addr.set_id, offsets, geo)
    return replace(addr, vault=vault, bank=bank, superset=superset,
                   set_id=set_id)


def msb_index(x: int) -> int:
    """Index of the most significant set bit; -1 for zero."""
    return x.bit_length() - 1


def wr_flag(counters: WearCounters) -> int:
    """1 when writes are ~512x the touched supersets (concentrated wear)."""
    if counters.superset_count == 0:
        return 0
    return int(msb_index(counters.write_count)
               >= msb_index(counters.superset_count) + 9)


@dataclass
class WearSnapshot:
    """Write-event histograms for one inter-rotation epoch.

    `row_events`/`col_events` map (vault, bank, superset) to arrays of shape
    (sets_per_superset, 64): counts of row-write and column-write events.
    """

    epoch: int
    duration_cycles: int
    offsets: AddressOffsets
    row_events: dict = field(default_factory=dict)
    col_events: dict = field(default_factory=dict)

    def total_events(self) -> int:
        total = 0
        for hist in self.row_events.values():
            total += int(hist.sum())
        for hist in self.col_events.values():
            total += int(hist.sum())
        return total


class WearMonitor:
    """Stack-level write monitor driving the rotate signal and snapshots."""

    def __init__(self, geo: Geometry, wc_limit: int = WC_LIMIT_DEFAULT,
                 dc_limit: int = DC_LIMIT_DEFAULT, rotate_enabled: bool = True):
        self.geo = geo
        self.counters = WearCounters(wc_limit=wc_limit, dc_limit=dc_limit)
        self.offsets = AddressOffsets()
        self.rotate_enabled = rotate_enabled
        self.swt: dict[int, SwtEntry] = {}
        self.snapshots: list[WearSnapshot] = []
        self.rotations = 0
        self._epoch_start = 0
        self._epoch_row: dict = {}
        self._epoch_col: dict = {}

    # -- recording ------------------------------------------------------------

    def record_write(self, vault: int, bank: int, superset: int, set_id: int,
                     index: int, orientation: str, makes_dirty: bool) -> None:
        """Account one scheduled block write at its physical coordinates."""
        gid = self.geo.superset_gid(vault, bank, superset)
        c = self.counters
        c.write_count += 1
        entry = self.swt.setdefault(gid, SwtEntry())
        if not entry.written:
            entry.written = True
            c.superset_count += 1
        if makes_dirty and not entry.dirty:
            entry.dirty = True
            c.dirty_count += 1
        key = (vault, bank, superset)
        if orientation == "row":
            hists, width = self._epoch_row, self.geo.rows_per_set
        else:
            hists, width = self._epoch_col, self.geo.cols_per_set
        hist = hists.get(key)
        if hist is None:
            hist = np.zeros((self.geo.sets_per_superset, width), dtype=np.int64)
            hists[key] = hist
        hist[set_id, index] += 1

    def dirty_supersets(self) -> list[int]:
        return [gid for gid, e in self.swt.items() if e.dirty]

    # -- rotation ----------------------------------------------------------------

    def rotate_due(self) -> bool:
        c = self.counters
        return bool(wr_flag(c) or c.write_count >= c.wc_limit
                    or c.dirty_count >= c.dc_limit)

    def maybe_rotate(self, now: int, flush=None) -> bool:
        """Rotate if a trigger fired. `flush` is called with the dirty
        superset gids before state is reset (the controller moves dirty
        blocks to main memory and invalidates cached contents)."""
        if not self.rotate_enabled or not self.rotate_due():
            return False
        self.force_rotate(now, flush)
        return True

    def force_rotate(self, now: int, flush=None) -> None:
        if flush is not None:
            flush(self.dirty_supersets())
        self.close_epoch(now)
        self.swt.clear()
        self.counters = WearCounters(wc_limit=self.counters.wc_limit,
                                     dc_limit=self.counters.dc_limit)
        self.offsets = self.offsets.advanced(self.geo)
        self.rotations += 1

    def close_epoch(self, now: int) -> None:
        """Snapshot the current epoch's histograms (also used at end of run)."""
        snap = WearSnapshot(
            epoch=len(self.snapshots),
            duration_cycles=max(now - self._epoch_start, 0),
            offsets=self.offsets,
            row_events={k: v.copy() for k, v in self._epoch_row.items()},
            col_events={k: v.copy() for k, v in self._epoch_col.items()},
        )
        self.snapshots.append(snap)
        self._epoch_row.clear()
        self._epoch_col.clear()
        self._epoch_start = now

    def finish(self, now: int) -> None:
        """Close a trailing partial epoch if it recorded any writes."""
        if self._epoch_row or self._epoch_col:
            self.close_epoch(now)


# -- snapshot file io -----------------------------------------------------------


def write_snapshots(path, geo: Geometry, device: DeviceParams,
                    snapshots: list[WearSnapshot], f_clk: float = CLOCK_HZ,
                    rotate_enabled: bool = True) -> None:
    """JSON-lines file: a self-describing header, then one record per
    (epoch, superset) carrying per-set row/column event counts."""
    with open(path, "w") as fh:
        header = {
            "kind": "wear-snapshots",
            "version": 1,
            "f_clk": f_clk,
            "rotate_enabled": rotate_enabled,
            "geometry": {
                "vaults": geo.vaults,
                "banks_per_vault": geo.banks_per_vault,
                "supersets_per_bank": geo.supersets_per_bank,
                "sets_per_superset": geo.sets_per_superset,
                "rows_per_set": geo.rows_per_set,
                "cols_per_set": geo.cols_per_set,
            },
            "device": {"r_low": device.r_low, "r_high": device.r_high,
                       "v_read": device.v_read, "n_w": device.n_w},
        }
        fh.write(json.dumps(header) + "\n")
        for snap in snapshots:
            meta = {"epoch": snap.epoch,
                    "duration_cycles": snap.duration_cycles,
                    "offsets": list(snap.offsets.field_tuple()),
                    "rotate_count": snap.offsets.rotate_count}
            fh.write(json.dumps(meta) + "\n")
            keys = sorted(set(snap.row_events) | set(snap.col_events))
            for key in keys:
                vault, bank, superset = key
                zero = np.zeros((geo.sets_per_superset, geo.rows_per_set),
                                dtype=np.int64)
                rec = {"epoch": snap.epoch, "vault": vault, "bank": bank,
                       "superset": superset,
                       "rows": snap.row_events.get(key, zero).tolist(),
                       "cols": snap.col_events.get(key, zero).tolist()}
                fh.write(json.dumps(rec) + "\n")


def read_snapshots(path):
    """Returns (geometry, device, f_clk, rotate_enabled, snapshots)."""
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "wear-snapshots":
            raise EstimationError("not a wear-snapshot file")
        g = header["geometry"]
        geo = Geometry(vaults=g["vaults"], banks_per_vault=g["banks_per_vault"],
                       supersets_per_bank=g["supersets_per_bank"],
                       sets_per_superset=g["sets_per_superset"],
                       rows_per_set=g["rows_per_set"],
                       cols_per_set=g["cols_per_set"])
        d = header["device"]
        device = DeviceParams(r_low=d["r_low"], r_high=d["r_high"],
                              v_read=d["v_read"], n_w=d["n_w"])
        snaps: dict[int, WearSnapshot] = {}
        for raw in fh:
            rec = json.loads(raw)
            epoch = rec["epoch"]
            if "duration_cycles" in rec:
                off = rec.get("offsets", [0, 0, 0, 0])
                snaps[epoch] = WearSnapshot(
                    epoch=epoch, duration_cycles=rec["duration_cycles"],
                    offsets=AddressOffsets(off[0], off[1], off[2], off[3],
                                           rec.get("rotate_count", 0)))
            else:
                snap = snaps[epoch]
                key = (rec["vault"], rec["bank"], rec["superset"])
                snap.row_events[key] = np.array(rec["rows"], dtype=np.int64)
                snap.col_events[key] = np.array(rec["cols"], dtype=np.int64)
    ordered = [snaps[e] for e in sorted(snaps)]
    return geo, device, header["f_clk"], header["rotate_enabled"], ordered


# -- lifetime estimation ------------------------------------------------------------


@dataclass(frozen=True)
class LifetimeReport:
    seconds: float
    years: float
    ideal_seconds: float
    ideal_years: float
    limiting_cell: tuple  # (vault, bank, superset, set, row, col)
    epochs_replayed: float


def _epoch_grid(snap: WearSnapshot, geo: Geometry) -> np.ndarray:
    """Dense per-cell wear bound for one epoch.

    Shape (vaults, banks, supersets, sets, rows, cols); entry = row_events[r]
    + col_events[c] for its (superset, set)."""
    shape = (geo.vaults, geo.banks_per_vault, geo.supersets_per_bank,
             geo.sets_per_superset, geo.rows_per_set, geo.cols_per_set)
    grid = np.zeros(shape, dtype=np.float64)
    for (v, b, s), hist in snap.row_events.items():
        grid[v, b, s] += hist[:, :, None]
    for (v, b, s), hist in snap.col_events.items():
        grid[v, b, s] += hist[:, None, :]
    return grid


def _roll_fields(grid: np.ndarray, base: AddressOffsets, now: AddressOffsets,
                 geo: Geometry) -> np.ndarray:
    """Shift an epoch grid from its recorded offsets to the replay offsets."""
    dv = (now.vault_off - base.vault_off) % geo.vaults
    db = (now.bank_off - base.bank_off) % geo.banks_per_vault
    ds = (now.superset_off - base.superset_off) % geo.supersets_per_bank
    dk = (now.set_off - base.set_off) % geo.sets_per_superset
    if dv == db == ds == dk == 0:
        return grid
    return np.roll(grid, shift=(dv, db, ds, dk), axis=(0, 1, 2, 3))


def estimate_lifetime(snapshots: list[WearSnapshot], device: DeviceParams,
                      geo: Geometry, f_clk: float = CLOCK_HZ,
                      rotate_enabled: bool = True,
                      max_period_epochs: int = 100_000) -> LifetimeReport:
    """Replay the recorded epochs forever until a cell exceeds the endurance.

    Rotation (when enabled) advances the offsets after every replayed epoch,
    exactly as the monitor does, so the wear pattern walks the address space.
    Full offset orbits are accumulated once and multiplied, which makes
    endurance limits of 1e8+ tractable.
    """
    snapshots = [s for s in snapshots if s.duration_cycles > 0 or
                 s.row_events or s.col_events]
    if not snapshots:
        raise EstimationError("no recorded epochs")
    total_cells = geo.total_supersets * geo.cells_per_superset
    if total_cells > 5e7:
        raise EstimationError(
            f"geometry too large for dense replay ({total_cells:.2e} cells); "
            "estimate on a desk-scale configuration")
    n_rec = len(snapshots)
    grids = [_epoch_grid(s, geo) for s in snapshots]
    durations = [s.duration_cycles / f_clk for s in snapshots]
    total_events = sum(s.total_events() for s in snapshots)
    total_seconds = sum(durations)
    if total_seconds <= 0:
        raise EstimationError("recorded epochs have zero duration")

    # ideal bound: perfectly even distribution of the observed write rate
    cells_per_write = 8 * geo.rows_per_set  # a block write programs one
    # column (or row) across the 8 subarrays of a set
    if total_events == 0:
        inf = math.inf
        return LifetimeReport(inf, inf, inf, inf, (0,) * 6, 0.0)
    write_rate = total_events * cells_per_write / total_seconds
    ideal_seconds = device.n_w * total_cells / write_rate

    # replay period: epochs until (offsets, vault-rotate phase, epoch) recurs
    offsets = snapshots[-1].offsets  # replay continues after the recording
    state = (offsets.field_tuple(), offsets.vault_rotate_pending)
    start_state = state
    period_grid = np.zeros_like(grids[0])
    period_seconds = 0.0
    period_epochs = 0
    periodic = False
    ptr = 0
    while True:
        period_grid += _roll_fields(grids[ptr], snapshots[ptr].offsets,
                                    offsets, geo)
        period_seconds += durations[ptr]
        period_epochs += 1
        if rotate_enabled:
            offsets = offsets.advanced(geo)
        ptr = (ptr + 1) % n_rec
        state = (offsets.field_tuple(), offsets.vault_rotate_pending)
        if ptr == 0 and state == start_state:
            periodic = True
            break
        if period_epochs >= max_period_epochs:
            break
    if not periodic:
        raise EstimationError("offset orbit did not close; raise "
                              "max_period_epochs or shrink the recording")

    t_max = period_grid.max()
    if t_max <= 0:
        inf = math.inf
        return LifetimeReport(inf, inf, ideal_seconds,
                              ideal_seconds / YEAR_SECONDS, (0,) * 6, 0.0)

    full_periods = max(0, int((device.n_w - 1) // t_max))
    acc = period_grid * full_periods
    elapsed = period_seconds * full_periods
    epochs_done = float(full_periods * period_epochs)

    # walk epoch by epoch until the first cell crosses n_w
    offsets = snapshots[-1].offsets
    ptr = 0
    guard = 0
    while True:
        inc = _roll_fields(grids[ptr], snapshots[ptr].offsets, offsets, geo)
        after = acc + inc
        if after.max() >= device.n_w:
            # earliest crossing within the epoch, assuming uniform write pacing
            crossing = (after >= device.n_w) & (inc > 0)
            fractions = np.full(after.shape, np.inf)
            fractions[crossing] = (device.n_w - acc[crossing]) / inc[crossing]
            cell = np.unravel_index(int(fractions.argmin()), fractions.shape)
            fraction = min(max(float(fractions[cell]), 0.0), 1.0)
            elapsed += fraction * durations[ptr]
            epochs_done += fraction
            return LifetimeReport(elapsed, elapsed / YEAR_SECONDS,
                                  ideal_seconds, ideal_seconds / YEAR_SECONDS,
                                  tuple(int(x) for x in cell), epochs_done)
        acc += inc
        elapsed += durations[ptr]
        epochs_done += 1
        if rotate_enabled:
            offsets = offsets.advanced(geo)
        ptr = (ptr + 1) % n_rec
        guard += 1
        if guard > 2 * period_epochs + n_rec + 8:
            raise EstimationError("replay failed to converge")


def estimate_from_file(path) -> LifetimeReport:
    geo, device, f_clk, rotate_enabled, snaps = read_snapshots(path)
    return estimate_lifetime(snaps, device, geo, f_clk, rotate_enabled)
