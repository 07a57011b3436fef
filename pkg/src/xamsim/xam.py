"""Functional and endurance-accounting model of one reconfigurable RAM/CAM array.

An array is a grid of differential 2R cells. Each cell stores one bit as a
resistor pair; bit 1 develops a near-V_R divider voltage on a row read and
bit 0 a near-ground voltage. Writes are two-step (all masked 0s programmed,
then all masked 1s); both resistors of every masked cell see the write
voltage, so each masked cell counts exactly one endurance event per write
regardless of its prior value.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import bits
from .errors import AddressError, MarginError, ModeError


class SenseRef(Enum):
    """Sensing reference selection: row reads vs column-match searches."""

    READ = "read"
    SEARCH = "search"


@dataclass(frozen=True)
class DeviceParams:
    """Cell-level electrical and endurance parameters."""

    r_low: float = 300e3
    r_high: float = 1e9
    v_read: float = 1.0
    n_w: int = 10**8

    def __post_init__(self):
        if self.r_low <= 0 or self.r_high <= 0:
            raise ValueError("resistances must be positive")
        if self.r_low > self.r_high:
            raise ValueError("r_low must not exceed r_high")
        if self.v_read <= 0:
            raise ValueError("read voltage must be positive")
        if self.n_w < 1:
            raise ValueError("write endurance must be at least 1")

    @property
    def ref_read(self) -> float:
        return self.v_read / 2.0

    def divider_voltage(self, bit: int) -> float:
        """Row-read line voltage developed by a stored bit."""
        l, h = self.r_low, self.r_high
        r_bar = h if bit else l
        return r_bar / (l + h) * self.v_read


@dataclass(frozen=True)
class XamCell:
    """Snapshot view of one cell: stored bit and cumulative write events."""

    bit: int
    writes: int


@dataclass(frozen=True)
class WriteReport:
    cells_programmed: int
    zeros_programmed: int
    ones_programmed: int


@dataclass(frozen=True)
class MarginReport:
    """Per-column search voltages and the valid sensing-reference band."""

    voltages: np.ndarray
    v_all_match: float
    v_single_mismatch: float
    ref_search: float

    @property
    def window(self) -> tuple[float, float]:
        return (self.v_single_mismatch, self.v_all_match)


class XamArray:
    """One rows-by-cols grid of 2R cells with a per-array sensing mode."""

    def __init__(self, rows: int = 64, cols: int = 64,
                 sense_ref: SenseRef = SenseRef.READ):
        if rows < 1 or cols < 1:
            raise ValueError("array dimensions must be positive")
        self.rows = rows
        self.cols = cols
        self.sense_ref = sense_ref
        self._bits = np.zeros((rows, cols), dtype=np.uint8)
        self._writes = np.zeros((rows, cols), dtype=np.int32)

    # -- state inspection -------------------------------------------------

    def cell(self, row: int, col: int) -> XamCell:
        self._check_row(row)
        self._check_col(col)
        return XamCell(int(self._bits[row, col]), int(self._writes[row, col]))

    def peek_row(self, row: int) -> np.ndarray:
        """Raw row bits without sensing-mode semantics (fabric/oracle use)."""
        self._check_row(row)
        return self._bits[row].copy()

    def peek_column(self, col: int) -> np.ndarray:
        self._check_col(col)
        return self._bits[:, col].copy()

    @property
    def total_writes(self) -> int:
        return int(self._writes.sum())

    def write_counts(self) -> np.ndarray:
        return self._writes.copy()

    # -- operations --------------------------------------------------------

    def write_row(self, row: int, data, mask=None) -> WriteReport:
        """Program masked cells of one row; two-step 0s-then-1s accounting."""
        self._check_row(row)
        data = bits.as_bits(data, self.cols)
        mask = bits.ones(self.cols) if mask is None else bits.as_bits(mask, self.cols)
        sel = mask.astype(bool)
        self._bits[row, sel] = data[sel]
        self._writes[row, sel] += 1
        return self._report(data, mask)

    def write_column(self, col: int, data, mask=None) -> WriteReport:
        self._check_col(col)
        data = bits.as_bits(data, self.rows)
        mask = bits.ones(self.rows) if mask is None else bits.as_bits(mask, self.rows)
        sel = mask.astype(bool)
        self._bits[sel, col] = data[sel]
        self._writes[sel, col] += 1
        return self._report(data, mask)

    def read_row(self, row: int) -> np.ndarray:
        if self.sense_ref is not SenseRef.READ:
            raise ModeError("row read requires the read sensing reference")
        self._check_row(row)
        return self._bits[row].copy()

    def search_columns(self, key, mask) -> np.ndarray:
        """Match line per column: 1 iff every masked row bit equals the key.

        An all-zero mask is a vacuous predicate and matches every column.
        Searches never change endurance counts.
        """
        if self.sense_ref is not SenseRef.SEARCH:
            raise ModeError("column search requires the search sensing reference")
        key = bits.as_bits(key, self.rows)
        mask = bits.as_bits(mask, self.rows)
        agree = (self._bits == key[:, None]) | ~mask.astype(bool)[:, None]
        return agree.all(axis=0).astype(np.uint8)

    # -- analog model --------------------------------------------------------

    def read_voltages(self, row: int, params: DeviceParams) -> np.ndarray:
        """Divider voltage developed on each vertical line for a row read."""
        self._check_row(row)
        v1 = params.divider_voltage(1)
        v0 = params.divider_voltage(0)
        return np.where(self._bits[row] == 1, v1, v0)

    def search_voltages(self, key, mask, params: DeviceParams) -> np.ndarray:
        """Match-line voltage per column for a masked search.

        Each masked cell ties its low resistor to V_R on a bit match and to
        ground on a mismatch; the match line settles at the parallel divider
        V_R * ((n-k)H + kL) / (n(L+H)) for k mismatches among n masked rows.
        """
        key = bits.as_bits(key, self.rows)
        mask = bits.as_bits(mask, self.rows)
        n = int(mask.sum())
        if n < 1:
            raise MarginError("search sensing requires at least one masked row")
        sel = mask.astype(bool)
        mismatches = (self._bits[sel] != key[sel, None]).sum(axis=0)
        l, h = params.r_low, params.r_high
        return params.v_read * ((n - mismatches) * h + mismatches * l) / (n * (l + h))

    def sensing_margin(self, key, mask, params: DeviceParams) -> MarginReport:
        """Per-column voltages plus the valid reference band for this search.

        The band is open: any reference strictly between the single-mismatch
        and all-match levels classifies every column correctly. The chosen
        reference is the geometric midpoint of the band.
        """
        if params.r_low >= params.r_high:
            raise MarginError("degenerate device: no sensing window")
        mask_arr = bits.as_bits(mask, self.rows)
        n = int(mask_arr.sum())
        if n < 1:
            raise MarginError("search sensing requires at least one masked row")
        voltages = self.search_voltages(key, mask_arr, params)
        l, h = params.r_low, params.r_high
        v_match = h / (l + h) * params.v_read
        v_miss = ((n - 1) * h + l) / (n * (l + h)) * params.v_read
        ref_s = float(np.sqrt(v_match * v_miss))
        return MarginReport(voltages, v_match, v_miss, ref_s)

    # -- internals -----------------------------------------------------------

    @staticmethod
    def _report(data: np.ndarray, mask: np.ndarray) -> WriteReport:
        programmed = int(mask.sum())
        ones = int((mask & data).sum())
        return WriteReport(programmed, programmed - ones, ones)

    def _check_row(self, row: int):
        if not 0 <= row < self.rows:
            raise AddressError(f"row {row} out of range [0, {self.rows})")

    def _check_col(self, col: int):
        if not 0 <= col < self.cols:
            raise AddressError(f"column {col} out of range [0, {self.cols})")
