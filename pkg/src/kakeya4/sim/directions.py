"""Separated direction nets on the unit sphere.

Directions are line-like (a tube and its reverse coincide), so vectors
are folded to a canonical hemisphere and angular distance between two
directions u, v means arccos |u . v|. A net is built by greedy packing:
walk a seeded low-discrepancy candidate stream and accept a candidate
iff it is separated from everything accepted so far. A spatial hash on
chord-length buckets keeps each acceptance test local.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist

import numpy as np

# Cardinality bracket constants recorded for the auto-sized stream:
# |net| in [LOWER_C, UPPER_C] * delta^(1-dim).
LOWER_C = Fraction(1, 8)
UPPER_C = 8
# Auto stream length: CANDIDATE_C * delta^(1-dim) candidates.
CANDIDATE_C = 2

_INV_CDF = NormalDist().inv_cdf


def canonical_direction(vec: np.ndarray) -> np.ndarray:
    """Unit vector with the first nonzero coordinate positive."""
    v = np.asarray(vec, dtype=np.float64)
    norm = math.sqrt(float(v @ v))
    if norm == 0:
        raise ValueError("zero direction vector")
    v = v / norm
    for x in v:
        if abs(x) > 1e-12:
            if x < 0:
                v = -v
            break
    return v


def line_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Angular distance between the lines spanned by u and v."""
    return math.acos(min(1.0, abs(float(np.dot(u, v)))))


def _generalized_golden(d: int) -> float:
    """Positive root of x^(d+1) = x + 1 (drives the Kronecker stream)."""
    x = 1.5
    for _ in range(64):
        x = (1 + x) ** (1 / (d + 1))
    return x


def kronecker_lattice(dim: int, count: int, seed: int) -> np.ndarray:
    """Low-discrepancy points in [0,1)^dim from the generalized-golden
    additive recurrence. The seed only shifts the lattice offset."""
    phi = _generalized_golden(dim)
    alpha = np.array([phi ** -(i + 1) for i in range(dim)])
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD17EC7]))
    offset = rng.random(dim)
    k = np.arange(1, count + 1, dtype=np.float64)
    return (offset[None, :] + k[:, None] * alpha[None, :]) % 1.0


def kronecker_stream(dim: int, count: int, seed: int) -> np.ndarray:
    """Quasi-uniform unit vectors: a Kronecker lattice in [0,1)^dim mapped
    through the normal quantile per coordinate and normalized."""
    u = kronecker_lattice(dim, count, seed)
    np.clip(u, 1e-12, 1 - 1e-12, out=u)
    z = np.empty_like(u)
    flat_u = u.ravel()
    flat_z = z.ravel()
    for i in range(flat_u.size):
        flat_z[i] = _INV_CDF(flat_u[i])
    norms = np.sqrt(np.einsum("ij,ij->i", z, z))
    norms[norms == 0] = 1.0
    points = z / norms[:, None]
    # fold to the canonical hemisphere
    for row in points:
        for x in row:
            if abs(x) > 1e-12:
                if x < 0:
                    row *= -1
                break
    return points


@dataclass
class DirectionNet:
    """Separated directions with the separation certificate recorded."""

    dim: int
    delta: Fraction
    points: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.points[i]

    def min_separation(self) -> float:
        """Exhaustive smallest pairwise line angle (quadratic cost; meant
        for small nets and spot checks)."""
        best = math.pi / 2
        pts = self.points
        for i in range(len(pts)):
            dots = np.abs(pts[i + 1:] @ pts[i])
            if len(dots):
                best = min(best, math.acos(min(1.0, float(dots.max()))))
        return best

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "delta": str(self.delta),
            "size": len(self.points),
            "meta": dict(self.meta),
        }


def greedy_pack(candidates: np.ndarray, min_angle: float) -> np.ndarray:
    """Indices of greedily accepted candidates, pairwise separated by at
    least min_angle in line angle.

    Hash buckets have side min_angle in chord length; a violating pair is
    within chord min_angle, hence within one bucket step per coordinate.
    Both sign copies of each accepted vector are inserted so the fold
    seam (near-antipodal canonical pairs) stays covered.
    """
    cos_thresh = math.cos(min_angle)
    cos2 = cos_thresh * cos_thresh
    inv_cell = 1.0 / min_angle
    buckets: dict[tuple, list[int]] = {}
    accepted: list[int] = []
    pts = candidates
    dim = pts.shape[1]
    stencil = np.array(np.meshgrid(*([[-1, 0, 1]] * dim),
                                   indexing="ij")).reshape(dim, -1).T

    def bucket_of(v) -> tuple:
        return tuple(int(math.floor(x * inv_cell)) for x in v)

    for idx in range(len(pts)):
        v = pts[idx]
        home = bucket_of(v)
        ok = True
        for off in stencil:
            near = buckets.get(tuple(home[i] + off[i] for i in range(dim)))
            if not near:
                continue
            for j in near:
                d = float(pts[j] @ v)
                if d * d > cos2:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            accepted.append(idx)
            for signed in (v, -v):
                buckets.setdefault(bucket_of(signed), []).append(idx)
    return np.array(accepted, dtype=np.int64)


_NET_CACHE: dict[tuple, DirectionNet] = {}


def clear_net_cache() -> None:
    _NET_CACHE.clear()


def build_direction_net(dim: int, N: int, seed: int,
                        candidates: int | None = None) -> DirectionNet:
    """Greedy separated net at separation 1/N from a seeded stream.

    With candidates = None the stream length is CANDIDATE_C * N^(dim-1)
    and the cardinality bracket [LOWER_C, UPPER_C] * N^(dim-1) is
    asserted; an explicit candidate count skips the bracket (used for
    tiny nets in tests and for degenerate single-direction nets).
    """
    if N < 4:
        raise ValueError(f"N must be >= 4, got {N}")
    key = (dim, N, seed, candidates)
    cached = _NET_CACHE.get(key)
    if cached is not None:
        return cached
    delta = Fraction(1, N)
    auto = candidates is None
    count = CANDIDATE_C * N ** (dim - 1) if auto else candidates
    stream = kronecker_stream(dim, count, seed)
    min_angle = (1.0 / N) * (1 - 1e-9)
    chosen = greedy_pack(stream, min_angle)
    points = stream[chosen].copy()
    points.setflags(write=False)
    size = len(points)
    if auto:
        scale = N ** (dim - 1)
        low = LOWER_C * scale
        high = UPPER_C * scale
        if not low <= size <= high:
            raise RuntimeError(
                f"direction net size {size} outside the recorded bracket "
                f"[{low}, {high}] at dim {dim}, N {N}")
    net = DirectionNet(dim, delta, points, {
        "seed": seed,
        "candidates": count,
        "accepted": size,
        "min_angle": min_angle,
        "bracket": [str(LOWER_C), str(UPPER_C)],
    })
    _NET_CACHE[key] = net
    return net
