"""Sparse voxel store: an open-addressing hash table keyed by packed voxel coordinates.

Each record accumulates the weighted sum ``sum(w * d)`` and the weight sum
``sum(w)``. Folding contributions this way is commutative and associative,
so shards and permuted integration orders merge to the same field.
"""

from __future__ import annotations

import numba as nb
import numpy as np

EMPTY = -1
COORD_BITS = 21
COORD_OFFSET = 1 << (COORD_BITS - 1)
COORD_MASK = (1 << COORD_BITS) - 1
MAX_LOAD = 0.6


@nb.njit(cache=True, inline="always")
def pack(ix, iy, iz):
    return ((ix + COORD_OFFSET) << (2 * COORD_BITS)) | ((iy + COORD_OFFSET) << COORD_BITS) | (iz + COORD_OFFSET)


def unpack(keys: np.ndarray) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64)
    return np.column_stack(
        [
            ((keys >> (2 * COORD_BITS)) & COORD_MASK) - COORD_OFFSET,
            ((keys >> COORD_BITS) & COORD_MASK) - COORD_OFFSET,
            (keys & COORD_MASK) - COORD_OFFSET,
        ]
    ).astype(np.int64)


def pack_array(ijk: np.ndarray) -> np.ndarray:
    ijk = np.asarray(ijk, dtype=np.int64).reshape(-1, 3)
    if np.any(np.abs(ijk) >= COORD_OFFSET):
        raise OverflowError("voxel coordinate outside the addressable range")
    return (
        ((ijk[:, 0] + COORD_OFFSET) << (2 * COORD_BITS))
        | ((ijk[:, 1] + COORD_OFFSET) << COORD_BITS)
        | (ijk[:, 2] + COORD_OFFSET)
    )


@nb.njit(cache=True, inline="always")
def _hash(key, mask):
    x = np.uint64(key)
    x ^= x >> np.uint64(33)
    x *= np.uint64(0xFF51AFD7ED558CCD)
    x ^= x >> np.uint64(33)
    return np.int64(x & np.uint64(mask))


@nb.njit(cache=True, inline="always")
def find_slot(keys, key):
    """Slot holding ``key`` or the empty slot where it would go."""
    mask = keys.shape[0] - 1
    h = _hash(key, mask)
    while keys[h] != EMPTY and keys[h] != key:
        h = (h + 1) & mask
    return h


@nb.njit(cache=True)
def _rehash(keys, wd, w, new_cap):
    nk = np.full(new_cap, EMPTY, dtype=np.int64)
    nwd = np.zeros(new_cap)
    nw = np.zeros(new_cap)
    for s in range(keys.shape[0]):
        k = keys[s]
        if k != EMPTY:
            t = find_slot(nk, k)
            nk[t] = k
            nwd[t] = wd[s]
            nw[t] = w[s]
    return nk, nwd, nw


@nb.njit(cache=True)
def _lookup(keys, wd, w, query):
    n = query.shape[0]
    out_wd = np.zeros(n)
    out_w = np.zeros(n)
    for i in range(n):
        s = find_slot(keys, query[i])
        if keys[s] != EMPTY:
            out_wd[i] = wd[s]
            out_w[i] = w[s]
    return out_wd, out_w


@nb.njit(cache=True)
def _accumulate(keys, wd, w, count, add_keys, add_wd, add_w, start, limit):
    """Fold records into the table until it would exceed ``limit`` entries."""
    for i in range(start, add_keys.shape[0]):
        if count >= limit:
            return i, count
        s = find_slot(keys, add_keys[i])
        if keys[s] == EMPTY:
            keys[s] = add_keys[i]
            count += 1
        wd[s] += add_wd[i]
        w[s] += add_w[i]
    return add_keys.shape[0], count


class VoxelStore:
    """Hash map from integer voxel coordinate to (sum w*d, sum w)."""

    def __init__(self, capacity: int = 1 << 16):
        cap = 1
        while cap < capacity:
            cap <<= 1
        self.keys = np.full(cap, EMPTY, dtype=np.int64)
        self.wd = np.zeros(cap)
        self.w = np.zeros(cap)
        self.count = 0

    def __len__(self) -> int:
        return self.count

    @property
    def capacity(self) -> int:
        return len(self.keys)

    @property
    def limit(self) -> int:
        return int(self.capacity * MAX_LOAD)

    def reserve(self, extra: int) -> None:
        need = self.count + extra
        if need <= self.limit:
            return
        cap = self.capacity
        while int(cap * MAX_LOAD) < need:
            cap <<= 1
        self.keys, self.wd, self.w = _rehash(self.keys, self.wd, self.w, cap)

    def grow(self) -> None:
        self.keys, self.wd, self.w = _rehash(self.keys, self.wd, self.w, self.capacity * 2)

    def add(self, keys: np.ndarray, wd: np.ndarray, w: np.ndarray) -> None:
        keys = np.ascontiguousarray(keys, dtype=np.int64)
        wd = np.ascontiguousarray(wd, dtype=np.float64)
        w = np.ascontiguousarray(w, dtype=np.float64)
        i = 0
        while i < len(keys):
            i, self.count = _accumulate(self.keys, self.wd, self.w, self.count, keys, wd, w, i, self.limit)
            if i < len(keys):
                self.grow()

    def lookup(self, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _lookup(self.keys, self.wd, self.w, np.ascontiguousarray(keys, dtype=np.int64))

    def items(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(keys, sum w*d, sum w) of all stored records, sorted by key."""
        used = np.flatnonzero(self.keys != EMPTY)
        keys = self.keys[used]
        order = np.argsort(keys, kind="stable")
        used = used[order]
        return self.keys[used], self.wd[used], self.w[used]
