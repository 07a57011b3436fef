"""Geometry and physical-address decomposition for the stacked memory.

Addresses decompose little-endian: byte offset within the 64B block, then the
block index within a set (column in ColumnIn storage, row in RowIn storage),
set, superset, bank, vault. Mixed-radix divmod keeps every field bijective for
arbitrary (including non-power-of-two) dimension sizes, which the rotary
remapping relies on.
"""

from dataclasses import dataclass

from .errors import AddressError

BLOCK_BYTES = 64


@dataclass(frozen=True)
class Geometry:
    """Stack dimensions. Defaults follow the full configuration; tests use
    the desk-scale variant."""

    vaults: int = 8
    banks_per_vault: int = 64
    supersets_per_bank: int = 256
    sets_per_superset: int = 8
    rows_per_set: int = 64
    cols_per_set: int = 64
    block_bytes: int = BLOCK_BYTES

    @classmethod
    def desk(cls, vaults=2, banks_per_vault=4, supersets_per_bank=8):
        return cls(vaults=vaults, banks_per_vault=banks_per_vault,
                   supersets_per_bank=supersets_per_bank)

    @property
    def blocks_per_superset(self) -> int:
        return self.sets_per_superset * self.cols_per_set

    @property
    def superset_bytes(self) -> int:
        return self.blocks_per_superset * self.block_bytes

    @property
    def bank_bytes(self) -> int:
        return self.supersets_per_bank * self.superset_bytes

    @property
    def vault_bytes(self) -> int:
        return self.banks_per_vault * self.bank_bytes

    @property
    def total_bytes(self) -> int:
        return self.vaults * self.vault_bytes

    @property
    def total_supersets(self) -> int:
        return self.vaults * self.banks_per_vault * self.supersets_per_bank

    @property
    def cells_per_superset(self) -> int:
        # 64 subarrays of rows x cols cells
        return 64 * self.rows_per_set * self.cols_per_set

    def superset_gid(self, vault: int, bank: int, superset: int) -> int:
        return (vault * self.banks_per_vault + bank) * self.supersets_per_bank + superset


@dataclass(frozen=True)
class PhysicalAddress:
    """Decomposed coordinates of one block-aligned location."""

    vault: int
    bank: int
    superset: int
    set_id: int
    index: int      # block index within the set (column or row)
    offset: int = 0  # byte offset within the block

    def block_key(self) -> tuple:
        return (self.vault, self.bank, self.superset, self.set_id, self.index)


def decompose(byte_addr: int, geo: Geometry) -> PhysicalAddress:
    if byte_addr < 0 or byte_addr >= geo.total_bytes:
        raise AddressError(f"address {byte_addr:#x} outside the stack")
    offset = byte_addr % geo.block_bytes
    block = byte_addr // geo.block_bytes
    block, index = divmod(block, geo.cols_per_set)
    block, set_id = divmod(block, geo.sets_per_superset)
    block, superset = divmod(block, geo.supersets_per_bank)
    vault, bank = divmod(block, geo.banks_per_vault)
    return PhysicalAddress(vault, bank, superset, set_id, index, offset)


def compose(addr: PhysicalAddress, geo: Geometry) -> int:
    block = addr.vault
    block = block * geo.banks_per_vault + addr.bank
    block = block * geo.supersets_per_bank + addr.superset
    block = block * geo.sets_per_superset + addr.set_id
    block = block * geo.cols_per_set + addr.index
    return block * geo.block_bytes + addr.offset
