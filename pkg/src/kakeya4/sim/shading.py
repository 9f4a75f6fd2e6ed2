"""Shading generators: choose the used sub-collection of each tube.

Kinds:

* full: the whole tube.
* random(lam): each cell kept independently with probability lam,
  seeded per tube.
* two_ends(lam, eps1): the tube's cells in axis order are cut into
  consecutive windows of ceil(N^(1-eps1)) cells and a lam-fraction of
  every window is kept, spread evenly inside it. Mass is spread along
  the whole tube, the non-concentrated regime.
* one_end(lam, eps1): the requested lam-fraction is packed into the
  first axis window, capped at the window capacity (the cap and the
  achieved density are recorded). Mass concentrates at one end, the
  regime the window checks must flag.

Every generator is deterministic given (family seed, kind, params).
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .families import ShadedFamily, ShadedTube
from .grid import window_length
from .tubes import tube_axis_order


def as_fraction(value, what: str) -> Fraction:
    """Exact rational from int, str, Fraction, or decimal-literal float."""
    try:
        if isinstance(value, float):
            return Fraction(str(value))
        return Fraction(value)
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise ValueError(f"{what}: not a rational value: {value!r}") from exc


def _density_params(params: dict) -> tuple[Fraction, Fraction]:
    lam = as_fraction(params.get("lam", 1), "lam")
    if not 0 < lam <= 1:
        raise ValueError(f"lam must lie in (0, 1], got {lam}")
    eps1 = as_fraction(params.get("eps1", Fraction(1, 2)), "eps1")
    if not 0 < eps1 < 1:
        raise ValueError(f"eps1 must lie in (0, 1), got {eps1}")
    return lam, eps1


def _shade_full(family: ShadedFamily, params: dict):
    shaded = [ShadedTube(st.tube, st.tube.cells) for st in family.tubes]
    return shaded, {}


def _shade_random(family: ShadedFamily, params: dict):
    lam, _ = _density_params(params)
    rate = float(lam)
    shaded = []
    for i, st in enumerate(family.tubes):
        rng = np.random.default_rng(
            np.random.SeedSequence([family.seed, 977, i]))
        mask = rng.random(len(st.tube.cells)) < rate
        keep = st.tube.cells[mask]
        keep.setflags(write=False)
        shaded.append(ShadedTube(st.tube, keep))
    return shaded, {"lam": str(lam)}


def _even_window_picks(n: int, L: int, lam: Fraction) -> np.ndarray:
    """Indices into an n-cell axis order: cut into consecutive windows
    of L cells and take ceil(lam * size) evenly spread per window."""
    sizes = np.full(-(-n // L), L, dtype=np.int64)
    if n % L:
        sizes[-1] = n % L
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    p, q = lam.numerator, lam.denominator
    take = -((-sizes * p) // q)
    within = np.arange(int(take.sum()), dtype=np.int64)
    within -= np.repeat(np.concatenate(([0], np.cumsum(take)[:-1])), take)
    return (np.repeat(starts, take)
            + (within * np.repeat(sizes, take)) // np.repeat(take, take))


def _shade_two_ends(family: ShadedFamily, params: dict):
    lam, eps1 = _density_params(params)
    L = window_length(family.spec.N, eps1)
    shaded = []
    for st in family.tubes:
        cells = st.tube.cells
        order = tube_axis_order(st.tube)
        picks = _even_window_picks(len(cells), L, lam)
        keep = np.sort(cells[order[picks]])
        keep.setflags(write=False)
        shaded.append(ShadedTube(st.tube, keep))
    return shaded, {"lam": str(lam), "eps1": str(eps1), "window_cells": L}


def _shade_one_end(family: ShadedFamily, params: dict):
    lam, eps1 = _density_params(params)
    L = window_length(family.spec.N, eps1)
    shaded = []
    capped = 0
    for st in family.tubes:
        cells = st.tube.cells
        order = tube_axis_order(st.tube)
        want = math.ceil(lam * len(cells))
        take = min(want, L)
        if take < want:
            capped += 1
        keep = np.sort(cells[order[:take]])
        keep.setflags(write=False)
        shaded.append(ShadedTube(st.tube, keep))
    meta = {"lam": str(lam), "eps1": str(eps1), "window_cells": L,
            "capped_tubes": capped}
    return shaded, meta


_SHADERS = {
    "full": _shade_full,
    "random": _shade_random,
    "two_ends": _shade_two_ends,
    "one_end": _shade_one_end,
}


def make_shading(family: ShadedFamily, kind: str,
                 params: dict | None = None) -> ShadedFamily:
    """Re-shade a family; tubes and net are shared, shading is replaced."""
    if kind not in _SHADERS:
        raise ValueError(
            f"unknown shading kind {kind!r}; expected one of "
            f"{sorted(_SHADERS)}")
    params = dict(params or {})
    shaded, meta = _SHADERS[kind](family, params)
    achieved = sum(st.density for st in shaded) / len(shaded)
    meta["achieved_density"] = str(achieved)
    return ShadedFamily(family.spec, shaded, family.seed, family.net,
                        generator=dict(family.generator),
                        shading={"kind": kind, "params": meta})
