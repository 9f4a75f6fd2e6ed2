"""Rasterized tubes: the grid cells within one cell-width of a unit
axis segment.

Convention (fixed everywhere, constants recorded): a cell belongs to the
tube iff its center lies within closed distance delta of the axis
segment of length 1 centered at the anchor. Rasterization samples the
axis at spacing delta/2 and examines the one-ring of cells around each
sample; a center within delta of the segment is within 1.25*delta of
some sample, so its cell index differs from the sample's by at most one
per coordinate and the stencil provably catches every qualifying cell.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridSpec, pack_cells

# Cell-count bracket constants per dimension (closed-delta convention).
# An interior axis-parallel tube through a grid vertex meets exactly
# 2^(dim-1) one-ring columns per slab (4N cells in dim 3, 8N in dim 4),
# and near-diagonal interior tubes exceed that: brute-force worst cases
# are 5.5N (dim 3, N = 4) and 11N (dim 4, N = 4), decaying toward the
# axis-parallel ratio as N grows. The recorded upper constants leave a
# margin of half a unit above those worst cases.
COUNT_LOWER = {3: lambda N: N // 2, 4: lambda N: N // 2}
COUNT_UPPER = {3: lambda N: 6 * N, 4: lambda N: 12 * N}

# absolute slack on squared distances, absorbing float dust at the
# closed boundary (delta^2 >= 2^-14 at desk scales, so this is tiny)
DIST2_GUARD = 1e-12


class EmptyTube(ValueError):
    """The axis segment does not meet the unit cube in any cell."""


class RasterizationError(RuntimeError):
    """A rasterized tube violated the recorded cell-count bracket."""


@dataclass(frozen=True)
class Tube:
    """A rasterized tube: canonical direction, anchor (segment midpoint),
    and the sorted packed cells."""

    spec: GridSpec
    direction: np.ndarray
    anchor: np.ndarray
    cells: np.ndarray
    net_index: int = -1
    meta: dict = field(default_factory=dict, compare=False)

    def __len__(self) -> int:
        return len(self.cells)


def _stencil(dim: int) -> np.ndarray:
    grids = np.meshgrid(*([[-1, 0, 1]] * dim), indexing="ij")
    return np.array(grids).reshape(dim, -1).T.astype(np.int64)


_STENCILS = {3: _stencil(3), 4: _stencil(4)}


# tubes per vectorized chunk; small enough that the per-chunk candidate
# arrays stay cache-resident (empirically fastest in the 8..32 range)
_BATCH = 16


def _canonicalize_rows(directions: np.ndarray) -> np.ndarray:
    """Vectorized canonical_direction: unit rows, first nonzero
    coordinate positive. Accumulations run left-to-right per row so the
    result does not depend on how rows are batched."""
    d = np.array(directions, dtype=np.float64)
    norm2 = d[:, 0] * d[:, 0]
    for i in range(1, d.shape[1]):
        norm2 += d[:, i] * d[:, i]
    if np.any(norm2 == 0):
        raise ValueError("zero direction vector")
    d /= np.sqrt(norm2)[:, None]
    lead = np.take_along_axis(
        d, np.argmax(np.abs(d) > 1e-12, axis=1)[:, None], axis=1)[:, 0]
    d[lead < 0] *= -1.0
    return d


def _row_dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Per-row dot product with fixed left-to-right accumulation."""
    acc = u[:, 0] * v[:, 0]
    for i in range(1, u.shape[1]):
        acc += u[:, i] * v[:, i]
    return acc


def rasterize_batch(spec: GridSpec, directions, anchors,
                    net_indices=None) -> list["Tube"]:
    """Rasterize many tubes at once; the semantics of rasterize_tube,
    amortizing array overhead across the family."""
    dirs = np.asarray(directions, dtype=np.float64)
    ancs = np.asarray(anchors, dtype=np.float64)
    if dirs.ndim != 2 or dirs.shape[1] != spec.dim:
        raise ValueError(f"directions must be (k, {spec.dim})")
    if ancs.shape != dirs.shape:
        raise ValueError("anchors must match directions in shape")
    if net_indices is None:
        net_indices = np.full(len(dirs), -1, dtype=np.int64)
    out: list[Tube] = []
    for lo in range(0, len(dirs), _BATCH):
        hi = min(lo + _BATCH, len(dirs))
        out.extend(_rasterize_chunk(spec, dirs[lo:hi], ancs[lo:hi],
                                    net_indices[lo:hi]))
    return out


def _rasterize_chunk(spec: GridSpec, dirs, ancs, idxs) -> list["Tube"]:
    N = spec.N
    dim = spec.dim
    delta = spec.delta_float
    B = len(dirs)
    d = _canonicalize_rows(dirs)
    start = ancs - 0.5 * d

    ts = np.arange(2 * N + 1, dtype=np.float64) * (delta / 2.0)
    # Candidate cull before the expensive unique/pack stages. A center
    # within delta of the segment lies within sqrt(delta^2 + (delta/4)^2)
    # of the nearest sample (samples are delta/2 apart and include both
    # endpoints), and because centers sit mid-cell, any center that close
    # to a sample is inside the sample's 1-ring. So dropping candidates
    # with ball2 > delta^2 * 17/16 never loses a qualifying cell; the
    # exact segment-distance test below still decides membership.
    ball_cap = delta * delta * (17.0 / 16.0) + 1e-11
    stencil = _STENCILS[dim]
    K = len(stencil)
    cands = []
    mask = None
    ball2 = None
    for i in range(dim):
        s_i = start[:, None, i] + ts[None, :] * d[:, None, i]
        cand_i = (np.floor(s_i * N).astype(np.int64)[:, :, None]
                  + stencil[None, None, :, i])
        ok = (cand_i >= 0) & (cand_i < N)
        mask = ok if mask is None else (mask & ok)
        w_i = (cand_i + 0.5) * delta - s_i[:, :, None]
        term = w_i * w_i
        ball2 = term if ball2 is None else (ball2 + term)
        cands.append(cand_i)
    mask &= ball2 <= ball_cap

    per_cell = N ** dim
    tube_ids = np.broadcast_to(
        np.arange(B, dtype=np.int64)[:, None, None], mask.shape)[mask]
    flat = np.stack([c[mask] for c in cands], axis=1)
    keys = tube_ids * per_cell + pack_cells(flat, N)
    keys = np.unique(keys)

    tids = keys // per_cell
    cell_keys = keys % per_cell
    coords = np.empty((len(keys), dim), dtype=np.int64)
    rest = cell_keys.copy()
    for i in range(dim - 1, -1, -1):
        rest, coords[:, i] = np.divmod(rest, N)
    centers = (coords + 0.5) * delta

    w = centers - start[tids]
    t = np.clip(_row_dot(w, d[tids]), 0.0, 1.0)
    closest = start[tids] + t[:, None] * d[tids]
    diff = centers - closest
    dist2 = _row_dot(diff, diff)
    keep = dist2 <= delta * delta + DIST2_GUARD
    tids = tids[keep]
    cell_keys = cell_keys[keep]

    low = COUNT_LOWER[dim](N)
    high = COUNT_UPPER[dim](N)
    bounds = np.searchsorted(tids, np.arange(B + 1))
    tubes = []
    for b in range(B):
        cells = np.ascontiguousarray(cell_keys[bounds[b]:bounds[b + 1]])
        count = len(cells)
        if count == 0:
            raise EmptyTube(
                f"axis segment misses the unit cube (tube {b} of chunk)")
        if not low <= count <= high:
            raise RasterizationError(
                f"tube cell count {count} outside [{low}, {high}] at dim "
                f"{dim}, N {N} (direction {d[b].tolist()})")
        cells.setflags(write=False)
        tubes.append(Tube(spec, d[b], ancs[b].copy(), cells, int(idxs[b]),
                          {"count": count, "bracket": [low, high]}))
    return tubes


def rasterize_tube(spec: GridSpec, direction, anchor,
                   net_index: int = -1) -> Tube:
    """Cells whose centers lie within delta of the length-1 segment
    centered at `anchor` with direction `direction`.

    The direction is canonicalized first (first nonzero coordinate
    positive), so a tube and its reverse rasterize to the identical cell
    list, exactly. Single-tube front of rasterize_batch; batching is an
    amortization, never a semantic change.
    """
    a = np.asarray(anchor, dtype=np.float64)
    if a.shape != (spec.dim,):
        raise ValueError(f"anchor must have {spec.dim} coordinates")
    d = np.asarray(direction, dtype=np.float64)
    if d.shape != (spec.dim,):
        raise ValueError(f"direction must have {spec.dim} coordinates")
    return rasterize_batch(spec, d[None, :], a[None, :],
                           np.array([net_index], dtype=np.int64))[0]


def axis_projections(tube: Tube, cells: np.ndarray) -> np.ndarray:
    """Projection of each packed cell's center onto the tube direction."""
    spec = tube.spec
    coords = np.empty((len(cells), spec.dim), dtype=np.int64)
    rest = cells.astype(np.int64)
    for i in range(spec.dim - 1, -1, -1):
        rest, coords[:, i] = np.divmod(rest, spec.N)
    centers = (coords + 0.5) * spec.delta_float
    return centers @ tube.direction


def tube_axis_order(tube: Tube) -> np.ndarray:
    """Indices sorting the tube's cells along its axis.

    Projection ties are broken by packed cell id so shadings and window
    checks walk the cells in one deterministic order. Memoized on the
    tube (cells are immutable).
    """
    order = tube.meta.get("axis_order")
    if order is None:
        proj = axis_projections(tube, tube.cells)
        order = np.lexsort((tube.cells, proj))
        order.setflags(write=False)
        tube.meta["axis_order"] = order
    return order
