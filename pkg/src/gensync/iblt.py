"""Invertible Bloom lookup table: insert/erase, subtraction and peeling.

Cells carry a signed count, a 64-bit XOR key accumulator and a 64-bit XOR
accumulator of a check hash of each key. Hashing is partitioned: hash j
maps a key into partition j of ``m/k`` cells, guaranteeing k distinct
cells per key.
"""

from __future__ import annotations

import math
import struct

from .errors import IncompatibleSketchError, PeelError
from .hashing import MASK64, derive_seed, keyed_hash

_CELL = struct.Struct(">iQQ")
_HEADER = struct.Struct(">IBQ")

_CHECK_INDEX = 0xC0


def cell_count(expected_diffs: int, hedge: float, num_hashes: int) -> int:
    """Table size: ceil(hedge * expected_diffs) rounded up to a multiple of k."""
    if expected_diffs < 1:
        raise ValueError("expected_diffs must be positive")
    if hedge < 1.0:
        raise ValueError("hedge must be at least 1.0")
    return num_hashes * math.ceil(hedge * expected_diffs / num_hashes)


class Iblt:
    def __init__(self, num_cells: int, num_hashes: int, seed: int):
        if num_hashes < 2:
            raise ValueError("need at least 2 hashes")
        if num_cells < num_hashes or num_cells % num_hashes != 0:
            raise ValueError("cell count must be a positive multiple of num_hashes")
        self.num_cells = num_cells
        self.num_hashes = num_hashes
        self.seed = seed & MASK64
        self.counts = [0] * num_cells
        self.key_sums = [0] * num_cells
        self.hash_sums = [0] * num_cells
        self._partition = num_cells // num_hashes
        self._row_seeds = [derive_seed(self.seed, j) for j in range(num_hashes)]
        self._check_seed = derive_seed(self.seed, _CHECK_INDEX)

    def _cells_for(self, key: int):
        part = self._partition
        return [
            j * part + keyed_hash(self._row_seeds[j], key) % part
            for j in range(self.num_hashes)
        ]

    def check_hash(self, key: int) -> int:
        return keyed_hash(self._check_seed, key)

    def _apply(self, key: int, delta: int):
        chk = self.check_hash(key)
        for idx in self._cells_for(key):
            self.counts[idx] += delta
            self.key_sums[idx] ^= key
            self.hash_sums[idx] ^= chk

    def insert(self, key: int) -> None:
        self._apply(key, +1)

    def erase(self, key: int) -> None:
        self._apply(key, -1)

    def is_empty(self) -> bool:
        return (
            not any(self.counts)
            and not any(self.key_sums)
            and not any(self.hash_sums)
        )

    def subtract(self, other: Iblt) -> Iblt:
        """Cell-wise difference; common insertions cancel exactly."""
        if (
            self.num_cells != other.num_cells
            or self.num_hashes != other.num_hashes
            or self.seed != other.seed
        ):
            raise IncompatibleSketchError("tables disagree on size, hash count or seed")
        out = Iblt(self.num_cells, self.num_hashes, self.seed)
        out.counts = [a - b for a, b in zip(self.counts, other.counts)]
        out.key_sums = [a ^ b for a, b in zip(self.key_sums, other.key_sums)]
        out.hash_sums = [a ^ b for a, b in zip(self.hash_sums, other.hash_sums)]
        return out

    def peel(self):
        """Decode a subtraction result into (positive, negative) key sets.

        Positive keys come from the minuend's side, negative from the
        subtrahend's. Raises PeelError when no pure cell remains but the
        table is nonempty (undersized table or a check-hash collision).
        """
        counts = list(self.counts)
        keys = list(self.key_sums)
        hashes = list(self.hash_sums)
        positive: set[int] = set()
        negative: set[int] = set()

        queue = [i for i in range(self.num_cells) if counts[i] in (-1, 1)]
        while queue:
            idx = queue.pop()
            sign = counts[idx]
            if sign not in (-1, 1):
                continue
            key = keys[idx]
            if hashes[idx] != self.check_hash(key):
                continue  # impure cell that merely looks pure
            if sign == 1:
                positive.add(key)
            else:
                negative.add(key)
            chk = self.check_hash(key)
            for j in self._cells_for(key):
                counts[j] -= sign
                keys[j] ^= key
                hashes[j] ^= chk
                if counts[j] in (-1, 1):
                    queue.append(j)

        if any(counts) or any(keys) or any(hashes):
            raise PeelError("no pure cell remains but the table is nonempty")
        return positive, negative

    def to_bytes(self) -> bytes:
        out = bytearray(_HEADER.pack(self.num_cells, self.num_hashes, self.seed))
        for c, k, h in zip(self.counts, self.key_sums, self.hash_sums):
            out += _CELL.pack(c, k, h)
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> Iblt:
        m, k, seed = _HEADER.unpack_from(data, 0)
        table = cls(m, k, seed)
        off = _HEADER.size
        for i in range(m):
            c, key, chk = _CELL.unpack_from(data, off)
            table.counts[i] = c
            table.key_sums[i] = key
            table.hash_sums[i] = chk
            off += _CELL.size
        return table

    def __eq__(self, other):
        return (
            isinstance(other, Iblt)
            and self.num_cells == other.num_cells
            and self.num_hashes == other.num_hashes
            and self.seed == other.seed
            and self.counts == other.counts
            and self.key_sums == other.key_sums
            and self.hash_sums == other.hash_sums
        )


def build_table(elements, num_cells: int, num_hashes: int, seed: int) -> Iblt:
    table = Iblt(num_cells, num_hashes, seed)
    for e in elements:
        table.insert(e)
    return table
