"""Grid domain: the unit cube split into N^dim cells of side 1/N."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

# Desk-scale defaults: memory and runtime stay interactive below these.
MAX_N = {3: 128, 4: 32}


@dataclass(frozen=True)
class GridSpec:
    """Unit cube partitioned into N^dim cells, N a power of two.

    The cell width 1/N plays the role of the tube thickness; since N is
    a power of two the width is an exact binary float, which keeps the
    geometry predicates free of representation noise.
    """

    dim: int
    N: int
    allow_large: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.dim not in (3, 4):
            raise ValueError(f"dim must be 3 or 4, got {self.dim}")
        if self.N < 4 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 4, got {self.N}")
        if not self.allow_large and self.N > MAX_N[self.dim]:
            raise ValueError(
                f"N = {self.N} exceeds the desk-scale cap {MAX_N[self.dim]} "
                f"for dim {self.dim}; pass allow_large=True to override")

    @property
    def delta(self) -> Fraction:
        return Fraction(1, self.N)

    @property
    def delta_float(self) -> float:
        return 1.0 / self.N

    @property
    def cell_count(self) -> int:
        return self.N ** self.dim

    def cell_volume(self) -> Fraction:
        return self.delta ** self.dim


def pack_cells(coords: np.ndarray, N: int) -> np.ndarray:
    """Mixed-radix encode integer cell coordinates (k, dim) to int64."""
    key = coords[:, 0].astype(np.int64)
    for i in range(1, coords.shape[1]):
        key = key * N + coords[:, i]
    return key


def unpack_cells(keys: np.ndarray, N: int, dim: int) -> np.ndarray:
    """Inverse of pack_cells; returns (k, dim) int64 coordinates."""
    out = np.empty((len(keys), dim), dtype=np.int64)
    rest = keys.astype(np.int64)
    for i in range(dim - 1, -1, -1):
        rest, out[:, i] = np.divmod(rest, N)
    return out


def cell_centers(keys: np.ndarray, spec: GridSpec) -> np.ndarray:
    """Float centers of the given packed cells."""
    coords = unpack_cells(keys, spec.N, spec.dim)
    return (coords + 0.5) * spec.delta_float


def ceil_root(n: int, q: int) -> int:
    """Smallest integer L with L**q >= n (exact integer arithmetic)."""
    if n <= 0:
        return 0
    if q == 1:
        return n
    L = max(1, round(n ** (1.0 / q)))
    while L ** q >= n:
        L -= 1
    while L ** q < n:
        L += 1
    return L


def window_length(N: int, eps1: Fraction) -> int:
    """Whole-cell window length ceil(N^(1 - eps1)) for rational eps1.

    Computed exactly: with eps1 = p/q the value is the ceiling of the
    q-th root of N^(q-p).
    """
    eps1 = Fraction(eps1)
    if not 0 < eps1 < 1:
        raise ValueError(f"eps1 must lie in (0, 1), got {eps1}")
    p, q = eps1.numerator, eps1.denominator
    power = N ** (q - p)
    root = ceil_root(power, q)
    return root
