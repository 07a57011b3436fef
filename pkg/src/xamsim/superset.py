"""The 8x8 diagonal superset fabric.

Subarray (i, j) belongs to set k = (j - i) mod 8, so each set owns one
subarray per grid row and a block access touches exactly the 8 subarrays of
one set. A 512-bit block splits into eight 64-bit slices; slice s goes to the
set's subarray s (in select_set order), slice bit b to row/column bit b.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import bits
from .errors import AddressError, ModeError
from .xam import SenseRef, WriteReport, XamArray

GRID = 8
SLICE_BITS = 64


class PortMode(Enum):
    """Port-selector orientation: data enters along rows or columns."""

    ROW_IN = "row_in"
    COLUMN_IN = "column_in"


@dataclass(frozen=True)
class BlockLocation:
    """Block coordinates inside a superset.

    ColumnIn accesses use (set_id, block_col); RowIn accesses use
    (set_id, row). A block occupies the same column (or row) index in all 8
    subarrays of its set.
    """

    set_id: int
    block_col: int = 0
    row: int = 0


@dataclass(frozen=True)
class SetSearchResult:
    """Raw per-subarray match lines and their per-column conjunction."""

    per_subarray: np.ndarray  # shape (8, cols)
    reduced: np.ndarray       # shape (cols,)


def select_set(set_id: int) -> list[tuple[int, int]]:
    """Grid coordinates of the 8 subarrays forming one diagonal set."""
    if not 0 <= set_id < GRID:
        raise AddressError(f"set {set_id} out of range [0, {GRID})")
    return [(i, (set_id + i) % GRID) for i in range(GRID)]


class Superset:
    """One superset: 64 subarrays, a port selector, and shared buffers."""

    def __init__(self, rows: int = 64, cols: int = 64,
                 sense_ref: SenseRef = SenseRef.READ,
                 port_mode: PortMode = PortMode.ROW_IN):
        self.rows = rows
        self.cols = cols
        self.port_mode = port_mode
        self.arrays = [[XamArray(rows, cols, sense_ref) for _ in range(GRID)]
                       for _ in range(GRID)]
        self.data_buf = bits.zeros(bits.BLOCK_BITS)
        self.key_buf = bits.zeros(bits.BLOCK_BITS)
        self.mask_buf = bits.zeros(bits.BLOCK_BITS)

    # -- mode control ---------------------------------------------------------

    @property
    def sense_ref(self) -> SenseRef:
        return self.arrays[0][0].sense_ref

    def set_sense_ref(self, ref: SenseRef):
        for row in self.arrays:
            for array in row:
                array.sense_ref = ref

    def toggle_port(self):
        self.port_mode = (PortMode.COLUMN_IN if self.port_mode is PortMode.ROW_IN
                          else PortMode.ROW_IN)

    def set_arrays(self, set_id: int) -> list[XamArray]:
        return [self.arrays[i][j] for i, j in select_set(set_id)]

    # -- block access -----------------------------------------------------------

    def write_block(self, loc: BlockLocation, block, mask=None) -> WriteReport:
        """Write a 512-bit block to one set, orientation per the port mode."""
        block = bits.as_bits(block, bits.BLOCK_BITS)
        mask = (bits.ones(bits.BLOCK_BITS) if mask is None
                else bits.as_bits(mask, bits.BLOCK_BITS))
        self.data_buf = block.copy()
        programmed = zeros = ones = 0
        for s, array in enumerate(self.set_arrays(loc.set_id)):
            lo = s * SLICE_BITS
            data_s = block[lo:lo + SLICE_BITS]
            mask_s = mask[lo:lo + SLICE_BITS]
            if self.port_mode is PortMode.COLUMN_IN:
                rep = array.write_column(loc.block_col, data_s, mask_s)
            else:
                rep = array.write_row(loc.row, data_s, mask_s)
            programmed += rep.cells_programmed
            zeros += rep.zeros_programmed
            ones += rep.ones_programmed
        return WriteReport(programmed, zeros, ones)

    def read_block(self, loc: BlockLocation) -> np.ndarray:
        """Stored block for the current orientation; no endurance change."""
        if self.sense_ref is not SenseRef.READ:
            raise ModeError("block read requires the read sensing reference")
        out = bits.zeros(bits.BLOCK_BITS)
        for s, array in enumerate(self.set_arrays(loc.set_id)):
            if self.port_mode is PortMode.COLUMN_IN:
                piece = array.peek_column(loc.block_col)
            else:
                piece = array.peek_row(loc.row)
            out[s * SLICE_BITS:(s + 1) * SLICE_BITS] = piece
        return out

    def read_set_row(self, set_id: int, row: int) -> np.ndarray:
        """Row `row` of each subarray of a set, concatenated to 512 bits."""
        if self.sense_ref is not SenseRef.READ:
            raise ModeError("row read requires the read sensing reference")
        out = bits.zeros(bits.BLOCK_BITS)
        for s, array in enumerate(self.set_arrays(set_id)):
            out[s * SLICE_BITS:(s + 1) * SLICE_BITS] = array.read_row(row)
        return out

    # -- CAM access ----------------------------------------------------------

    def load_key_mask(self, row_address: int, payload) -> None:
        """Arm the key (even row address) or mask (odd) register.

        Only meaningful with the bank in CAM sensing; in RAM sensing the
        caller is expected to treat the access as a normal row write
        (see `row_write_passthrough`). Arrays are never written here.
        """
        payload = bits.as_bits(payload, bits.BLOCK_BITS)
        if row_address % 2 == 0:
            self.key_buf = payload.copy()
        else:
            self.mask_buf = payload.copy()

    def row_write_passthrough(self, row_address: int, payload, mask=None) -> WriteReport:
        """RAM-mode fallback for a RowIn write addressed at (set, row)."""
        rows_per_set = self.rows
        set_id, row = divmod(row_address, rows_per_set)
        return self.write_block(BlockLocation(set_id, row=row), payload, mask)

    def search_set(self, set_id: int) -> SetSearchResult:
        """Search one set's columns against the armed key/mask buffers.

        A 512-bit entry matches only if all eight slices match, so the
        set-level vector is the AND across subarrays; the raw per-subarray
        lines are also returned for narrower-than-block matching.
        """
        if self.sense_ref is not SenseRef.SEARCH:
            raise ModeError("set search requires the search sensing reference")
        per = np.zeros((GRID, self.cols), dtype=np.uint8)
        for s, array in enumerate(self.set_arrays(set_id)):
            lo = s * SLICE_BITS
            per[s] = array.search_columns(self.key_buf[lo:lo + SLICE_BITS],
                                          self.mask_buf[lo:lo + SLICE_BITS])
        return SetSearchResult(per, per.all(axis=0).astype(np.uint8))

    # -- accounting ------------------------------------------------------------

    @property
    def total_writes(self) -> int:
        return sum(a.total_writes for row in self.arrays for a in row)
