"""Bit-vector helpers.

All bit vectors in the simulator are numpy uint8 arrays of 0/1 values,
least-significant bit first. Blocks are 512 bits (64 bytes), words 64 bits.
"""

import numpy as np

WORD_BITS = 64
BLOCK_BITS = 512
BLOCK_BYTES = BLOCK_BITS // 8
WORDS_PER_BLOCK = BLOCK_BITS // WORD_BITS


def zeros(width: int) -> np.ndarray:
    return np.zeros(width, dtype=np.uint8)


def ones(width: int) -> np.ndarray:
    return np.ones(width, dtype=np.uint8)


def bitvec(value: int, width: int) -> np.ndarray:
    """Encode an unsigned integer as a width-bit vector, LSB first."""
    if value < 0:
        raise ValueError("bit vectors encode unsigned values")
    if value >> width:
        raise ValueError(f"value {value:#x} does not fit in {width} bits")
    out = np.empty(width, dtype=np.uint8)
    for i in range(width):
        out[i] = (value >> i) & 1
    return out


def to_int(bits: np.ndarray) -> int:
    value = 0
    for i, b in enumerate(bits):
        if b:
            value |= 1 << i
    return value


def from_bytes(data: bytes) -> np.ndarray:
    """Per-byte LSB-first expansion, byte 0 occupying bits 0..7."""
    raw = np.frombuffer(bytes(data), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")


def to_bytes(bits: np.ndarray) -> bytes:
    if len(bits) % 8:
        raise ValueError("bit vector length must be a multiple of 8")
    return np.packbits(bits.astype(np.uint8), bitorder="little").tobytes()


def word_to_block(word: int, lane: int = 0) -> np.ndarray:
    """Place one 64-bit word into lane `lane` of an otherwise-zero block."""
    block = zeros(BLOCK_BITS)
    block[lane * WORD_BITS:(lane + 1) * WORD_BITS] = bitvec(word, WORD_BITS)
    return block


def block_word(block: np.ndarray, lane: int) -> int:
    return to_int(block[lane * WORD_BITS:(lane + 1) * WORD_BITS])


def as_bits(value, width: int) -> np.ndarray:
    """Coerce an int or array-like into a width-bit vector."""
    if isinstance(value, (int, np.integer)):
        return bitvec(int(value), width)
    arr = np.asarray(value, dtype=np.uint8)
    if arr.shape != (width,):
        raise ValueError(f"expected {width} bits, got shape {arr.shape}")
    if arr.max(initial=0) > 1:
        raise ValueError("bit vectors may only contain 0/1")
    return arr
