"""Named tube-family generators and the shaded-family container.

Generators (all deterministic per seed):

* bush: every tube passes through the exact cube center.
* hairbrush: every tube's anchor sits on one spine tube.
* plany_slab: directions within angle rho of a fixed 2-plane, anchors
  near that plane, so the whole union lives in a rho-slab.
* random: independent anchors in the central subcube, one tube per net
  direction.
* single: one axis-parallel tube through the center (its own
  one-direction net), the degenerate baseline for scaling fits.

Anchors always stay in the central region of the cube so every segment
keeps a long interior chord and the rasterization cell-count bracket
holds. Families are born fully shaded; shading generators replace the
shading afterward.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .directions import (DirectionNet, build_direction_net,
                         canonical_direction, kronecker_lattice)
from .grid import GridSpec
from .tubes import Tube, rasterize_batch, rasterize_tube


class Infeasible(ValueError):
    """The requested family cannot be packed from the available net."""


@dataclass(frozen=True)
class ShadedTube:
    """A tube with a chosen sub-collection of its cells."""

    tube: Tube
    shading: np.ndarray

    def __post_init__(self):
        if len(self.shading) > len(self.tube.cells):
            raise ValueError("shading larger than the tube")

    @property
    def density(self) -> Fraction:
        return Fraction(len(self.shading), len(self.tube.cells))


@dataclass
class ShadedFamily:
    """A family of shaded tubes with its provenance recorded."""

    spec: GridSpec
    tubes: list[ShadedTube]
    seed: int
    net: DirectionNet
    generator: dict = field(default_factory=dict)
    shading: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.tubes)

    def per_direction_counts(self) -> Counter:
        return Counter(st.tube.net_index for st in self.tubes)

    @property
    def m_parallel(self) -> int:
        counts = self.per_direction_counts()
        return max(counts.values()) if counts else 0

    def mass(self) -> Fraction:
        """Normalized direction count delta^(dim-1) * #tubes."""
        return self.spec.delta ** (self.spec.dim - 1) * len(self.tubes)

    def describe(self) -> dict:
        return {
            "dim": self.spec.dim,
            "N": self.spec.N,
            "seed": self.seed,
            "tubes": len(self.tubes),
            "net_size": len(self.net),
            "m_parallel": self.m_parallel,
            "generator": dict(self.generator),
            "shading": dict(self.shading),
        }


_ORTHO_SEEDS = {
    # fixed oblique vectors whose Gram-Schmidt frame defines the slab
    # plane; scale-independent so slab families nest across N
    3: (np.array([1.0, 0.37, -0.21]), np.array([-0.29, 1.0, 0.31])),
    4: (np.array([1.0, 0.37, -0.21, 0.13]),
        np.array([-0.29, 1.0, 0.31, -0.17])),
}


def slab_plane(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the fixed plane used by plany_slab."""
    raw1, raw2 = _ORTHO_SEEDS[dim]
    v1 = raw1 / math.sqrt(float(raw1 @ raw1))
    v2 = raw2 - float(raw2 @ v1) * v1
    v2 = v2 / math.sqrt(float(v2 @ v2))
    return v1, v2


def _perp_norms(points: np.ndarray, v1: np.ndarray,
                v2: np.ndarray) -> np.ndarray:
    perp = points - np.outer(points @ v1, v1) - np.outer(points @ v2, v2)
    return np.sqrt(np.einsum("ij,ij->i", perp, perp))


def _assign_directions(available: np.ndarray, count: int, m: int,
                       what: str) -> list[int]:
    n_av = len(available)
    if n_av == 0:
        raise Infeasible(f"{what}: no directions available")
    if count > n_av * m:
        raise Infeasible(
            f"{what}: requested {count} tubes exceeds {n_av} directions "
            f"x m = {m}")
    return [int(available[j % n_av]) for j in range(count)]


def _perp_frame(direction: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the hyperplane perpendicular to direction."""
    dim = len(direction)
    basis = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        v = e - float(e @ direction) * direction
        for b in basis:
            v = v - float(v @ b) * b
        n = math.sqrt(float(v @ v))
        if n > 1e-9:
            basis.append(v / n)
        if len(basis) == dim - 1:
            break
    return np.array(basis)


def _copy_offset(direction: np.ndarray, copy_index: int,
                 delta: float) -> np.ndarray:
    """Small perpendicular shift distinguishing same-direction copies."""
    if copy_index == 0:
        return np.zeros_like(direction)
    frame = _perp_frame(direction)
    k = (copy_index - 1) % len(frame)
    return frame[k] * (delta / 3.0) * (1 + (copy_index - 1) // len(frame))


def _generator_bush(spec: GridSpec, net: DirectionNet, seed: int,
                    params: dict):
    count = params.get("count") or len(net)
    m = params.get("m", 1)
    order = _assign_directions(np.arange(len(net)), count, m, "bush")
    center = np.full(spec.dim, 0.5)
    out = []
    seen: Counter = Counter()
    for idx in order:
        off = _copy_offset(net[idx], seen[idx], spec.delta_float)
        seen[idx] += 1
        out.append((idx, center + off))
    return out, {"count": count, "m": m}


def _generator_hairbrush(spec: GridSpec, net: DirectionNet, seed: int,
                         params: dict):
    count = params.get("count") or len(net)
    m = params.get("m", 1)
    e0 = np.zeros(spec.dim)
    e0[0] = 1.0
    spine_idx = int(np.argmax(np.abs(net.points @ e0)))
    spine_dir = net[spine_idx]
    center = np.full(spec.dim, 0.5)
    order = _assign_directions(np.arange(len(net)), count, m, "hairbrush")
    phi = (1 + math.sqrt(5)) / 2
    out = []
    seen: Counter = Counter()
    for j, idx in enumerate(order):
        # |t| <= 0.3 keeps every anchor deep enough inside the cube that
        # the clipped segment stays long and the cell-count bracket holds
        t = ((j * (phi - 1)) % 1.0 - 0.5) * 0.6
        anchor = center + t * spine_dir
        off = _copy_offset(net[idx], seen[idx], spec.delta_float)
        seen[idx] += 1
        out.append((idx, anchor + off))
    return out, {"count": count, "m": m, "spine_index": spine_idx}


def _generator_plany_slab(spec: GridSpec, net: DirectionNet, seed: int,
                          params: dict):
    rho = params.get("rho")
    # accepts 0.25, "0.25", or "1/4" like the shading parameters
    rho = (4 * spec.delta_float if rho is None
           else float(Fraction(str(rho))))
    if not spec.delta_float <= rho <= 0.5:
        raise Infeasible(f"plany_slab: rho = {rho} outside [delta, 1/2]")
    m = params.get("m", 1)
    v1, v2 = slab_plane(spec.dim)
    in_slab = np.nonzero(_perp_norms(net.points, v1, v2)
                         <= math.sin(rho))[0]
    count = params.get("count") or len(in_slab)
    order = _assign_directions(in_slab, count, m, "plany_slab")
    center = np.full(spec.dim, 0.5)
    knobs = kronecker_lattice(spec.dim, len(order), seed + 13)
    perp = _perp_frame_cached_plane(spec.dim, v1, v2)
    out = []
    seen: Counter = Counter()
    perp_scale = min(rho, 0.2)
    for j, idx in enumerate(order):
        u = knobs[j]
        anchor = (center
                  + ((u[0] - 0.5) * 0.4) * v1
                  + ((u[1] - 0.5) * 0.4) * v2)
        for k, b in enumerate(perp):
            anchor = anchor + ((u[2 + k] - 0.5) * perp_scale) * b
        off = _copy_offset(net[idx], seen[idx], spec.delta_float)
        seen[idx] += 1
        out.append((idx, anchor + off))
    return out, {"count": count, "m": m, "rho": rho,
                 "directions_in_slab": int(len(in_slab))}


_PLANE_PERP_CACHE: dict = {}


def _perp_frame_cached_plane(dim: int, v1: np.ndarray,
                             v2: np.ndarray) -> np.ndarray:
    key = dim
    if key not in _PLANE_PERP_CACHE:
        basis = []
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = 1.0
            v = e - float(e @ v1) * v1 - float(e @ v2) * v2
            for b in basis:
                v = v - float(v @ b) * b
            n = math.sqrt(float(v @ v))
            if n > 1e-9:
                basis.append(v / n)
            if len(basis) == dim - 2:
                break
        _PLANE_PERP_CACHE[key] = np.array(basis)
    return _PLANE_PERP_CACHE[key]


def _generator_random(spec: GridSpec, net: DirectionNet, seed: int,
                      params: dict):
    count = params.get("count") or len(net)
    m = params.get("m", 1)
    order = _assign_directions(np.arange(len(net)), count, m, "random")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 41]))
    anchors = 0.25 + 0.5 * rng.random((len(order), spec.dim))
    placed = [(idx, anchors[j]) for j, idx in enumerate(order)]
    return placed, {"count": count, "m": m}


_GENERATORS = {
    "bush": _generator_bush,
    "hairbrush": _generator_hairbrush,
    "plany_slab": _generator_plany_slab,
    "random": _generator_random,
}

_FAMILY_CACHE: dict = {}


def clear_family_cache() -> None:
    _FAMILY_CACHE.clear()


def _params_key(params: dict) -> str:
    return json.dumps({k: str(v) for k, v in sorted(params.items())})


def make_family(spec: GridSpec, config: dict, seed: int) -> ShadedFamily:
    """Build a fully shaded family from {"name": ..., "params": {...}}.

    Tube rasterization is cached per (spec, generator, seed) so several
    shadings of one configuration share the geometry.
    """
    name = config.get("name")
    params = dict(config.get("params") or {})
    if name == "single":
        return _make_single(spec, seed)
    if name not in _GENERATORS:
        raise Infeasible(f"unknown generator {name!r}")
    key = (spec.dim, spec.N, seed, name, _params_key(params))
    cached = _FAMILY_CACHE.get(key)
    if cached is None:
        net = build_direction_net(spec.dim, spec.N, seed)
        placed, resolved = _GENERATORS[name](spec, net, seed, params)
        idxs = np.array([idx for idx, _ in placed], dtype=np.int64)
        anchors = np.array([anchor for _, anchor in placed],
                           dtype=np.float64)
        tubes = rasterize_batch(spec, net.points[idxs], anchors, idxs)
        _FAMILY_CACHE[key] = (net, tubes, resolved)
    net, tubes, resolved = _FAMILY_CACHE[key]
    shaded = [ShadedTube(t, t.cells) for t in tubes]
    return ShadedFamily(spec, shaded, seed, net,
                        generator={"name": name, "params": dict(resolved)},
                        shading={"kind": "full", "params": {}})


def _make_single(spec: GridSpec, seed: int) -> ShadedFamily:
    direction = np.zeros(spec.dim)
    direction[0] = 1.0
    direction = canonical_direction(direction)
    points = direction[None, :].copy()
    points.setflags(write=False)
    net = DirectionNet(spec.dim, spec.delta, points,
                       {"degenerate": True, "seed": seed})
    tube = rasterize_tube(spec, direction, np.full(spec.dim, 0.5),
                          net_index=0)
    return ShadedFamily(spec, [ShadedTube(tube, tube.cells)], seed, net,
                        generator={"name": "single", "params": {}},
                        shading={"kind": "full", "params": {}})
