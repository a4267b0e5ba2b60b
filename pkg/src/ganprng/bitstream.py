"""
Turning generator output into bits, and bits into files.

Words are 16-bit unsigned integers; each expands to 16 bits, most significant
bit first.  The ASCII format is one ``'0'``/``'1'`` byte per bit with no
separators, which is what the NIST STS reads in ASCII mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ParseError, RejectedInputError

WORD_BITS = 16
WORD_MAX = 2**16 - 1
_WHITESPACE = frozenset(b" \t\r\n\f\v")


@dataclass
class BitStream:
    """Ordered bits stored as a ``uint8`` array of 0/1 values."""

    bits: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8).ravel()

    @property
    def bit_count(self) -> int:
        return int(self.bits.size)

    def __len__(self):
        return self.bit_count

    def __getitem__(self, item):
        if isinstance(item, slice):
            return BitStream(self.bits[item], self.provenance)
        return int(self.bits[item])

    def __eq__(self, other):
        if not isinstance(other, BitStream):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    @classmethod
    def from_string(cls, text: str, provenance: str = "") -> "BitStream":
        return cls(np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0"), provenance)

    def to_string(self) -> str:
        return (self.bits + ord("0")).tobytes().decode("ascii")


def quantize(values) -> np.ndarray:
    """Round to the nearest integer (halves away from zero) and clamp to 65535.

    Raises :class:`RejectedInputError` for anything outside ``[0, 65536)``.
    """
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)) or np.any(values < 0) or np.any(values >= 2**16):
        raise RejectedInputError("values to quantize must lie in [0, 65536)")
    # every value is non-negative, so floor(x + 0.5) rounds halves away from zero
    return np.minimum(np.floor(values + 0.5), WORD_MAX).astype(np.uint16)


def to_bits(words, provenance: str = "") -> BitStream:
    """Expand 16-bit words MSB-first, in row-major order."""
    words = np.asarray(words)
    if words.size and (words.min() < 0 or words.max() > WORD_MAX):
        raise RejectedInputError("words must be 16-bit unsigned integers")
    big_endian = np.ascontiguousarray(words, dtype=">u2").ravel()
    return BitStream(np.unpackbits(big_endian.view(np.uint8)), provenance)


def write_ascii_bits(stream: BitStream, path) -> None:
    Path(path).write_bytes((stream.bits + ord("0")).tobytes())


def write_ascii_bit_chunks(chunks: Iterable[BitStream], path) -> int:
    """Write consecutive streams to one ASCII bit file; returns the bit count."""
    total = 0
    with open(path, "wb") as fh:
        for chunk in chunks:
            fh.write((chunk.bits + ord("0")).tobytes())
            total += chunk.bit_count
    return total


def parse_ascii_bits(data: bytes, provenance: str = "") -> BitStream:
    raw = np.frombuffer(data, dtype=np.uint8)
    is_bit = (raw == ord("0")) | (raw == ord("1"))
    if not is_bit.all():
        is_space = np.isin(raw, np.fromiter(_WHITESPACE, dtype=np.uint8))
        bad = np.flatnonzero(~(is_bit | is_space))
        if bad.size:
            offset = int(bad[0])
            raise ParseError(
                f"invalid byte {bytes([raw[offset]])!r} at offset {offset}", offset=offset
            )
        raw = raw[is_bit]
    return BitStream(raw - ord("0"), provenance)


def read_ascii_bits(path) -> BitStream:
    """Read a file of ``'0'``/``'1'`` characters; whitespace is skipped."""
    return parse_ascii_bits(Path(path).read_bytes(), provenance=str(path))


def grid_pbm(stream: BitStream, width: int, height: int) -> str:
    """Plain PBM (P1) text of the first ``width*height`` bits, row-major; 1 is black."""
    if width < 1 or height < 1:
        raise RejectedInputError("grid dimensions must be positive")
    needed = width * height
    if stream.bit_count < needed:
        raise RejectedInputError(f"grid needs {needed} bits, stream has {stream.bit_count}")
    raster = stream.bits[:needed].reshape(height, width) + ord("0")
    lines = [f"P1\n{width} {height}"]
    for row in raster:
        text = row.tobytes().decode("ascii")
        # PBM readers expect lines of at most 70 characters
        lines.extend(text[i : i + 70] for i in range(0, width, 70))
    return "\n".join(lines) + "\n"


def visualize_grid(stream: BitStream, width: int, height: int, path) -> None:
    Path(path).write_text(grid_pbm(stream, width, height), encoding="ascii")


def read_pbm(path) -> np.ndarray:
    """Parse a P1 file back into a ``(height, width)`` uint8 array."""
    text = Path(path).read_text(encoding="ascii")
    tokens = [ln.split("#", 1)[0] for ln in text.splitlines()]
    body = " ".join(tokens).split()
    if not body or body[0] != "P1":
        raise ParseError("not a plain PBM file", offset=0)
    width, height = int(body[1]), int(body[2])
    digits = "".join(body[3:])
    if len(digits) != width * height or set(digits) - {"0", "1"}:
        raise ParseError("PBM raster does not match its header")
    return (np.frombuffer(digits.encode(), dtype=np.uint8) - ord("0")).reshape(height, width)


def byte_entropy(stream: BitStream) -> float:
    """Shannon entropy (bits/symbol) of non-overlapping 8-bit blocks, in [0, 8]."""
    n_bytes = stream.bit_count // 8
    if n_bytes == 0:
        raise RejectedInputError("byte entropy needs at least 8 bits")
    symbols = np.packbits(stream.bits[: 8 * n_bytes])
    counts = np.bincount(symbols, minlength=256)
    p = counts[counts > 0] / n_bytes
    return float(max(0.0, -(p * np.log2(p)).sum()))
