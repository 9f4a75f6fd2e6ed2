"""Structural checks on shaded families.

Every check returns a quantitative report dict, never a bare boolean:
thresholds are recorded next to the measured values so a report can be
re-judged later under a different constant. Cell sampling, where used,
is deterministic (evenly spaced in the sorted distinct-cell list).
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .families import ShadedFamily
from .grid import window_length
from .shading import as_fraction
from .stats import family_cell_counts
from .tubes import tube_axis_order


def _even_sample(n: int, cap: int) -> np.ndarray:
    if n <= cap:
        return np.arange(n, dtype=np.int64)
    return (np.arange(cap, dtype=np.int64) * n) // cap


def _shaded_mask_in_axis_order(st) -> np.ndarray:
    """Boolean array over the tube's axis-ordered cells: shaded or not."""
    cells = st.tube.cells
    mask = np.zeros(len(cells), dtype=bool)
    if len(st.shading):
        mask[np.searchsorted(cells, st.shading)] = True
    return mask[tube_axis_order(st.tube)]


def two_ends_report(family: ShadedFamily, params: dict) -> dict:
    """Max sliding-window shading fraction per tube.

    Window = L consecutive cells in axis order, L = ceil(N^(1-eps1)),
    slid cell-by-cell. Ratio near 1 means the shading concentrates at
    one spot; small ratios mean it is spread (the two-ends regime).
    """
    eps1 = as_fraction(params.get("eps1", Fraction(1, 2)), "eps1")
    L = window_length(family.spec.N, eps1)
    delta = float(family.spec.delta)
    ratios: list[Fraction] = []
    skipped = 0
    for st in family.tubes:
        total = len(st.shading)
        if total == 0:
            skipped += 1
            continue
        arr = _shaded_mask_in_axis_order(st).astype(np.int64)
        if len(arr) <= L:
            ratios.append(Fraction(1))
            continue
        cs = np.concatenate(([0], np.cumsum(arr)))
        window_sums = cs[L:] - cs[:-L]
        ratios.append(Fraction(int(window_sums.max()), total))
    if not ratios:
        raise ValueError("two_ends check: every tube has an empty shading")
    max_ratio = max(ratios)
    mean_ratio = sum(ratios, Fraction(0)) / len(ratios)
    spread_reference = 4 * delta ** (float(eps1) / 2)
    c_value = float(max_ratio) / delta ** float(eps1)
    return {
        "check": "two_ends",
        "eps1": str(eps1),
        "window_cells": L,
        "tubes_scored": len(ratios),
        "tubes_skipped": skipped,
        "max_ratio": str(max_ratio),
        "max_ratio_float": float(max_ratio),
        "mean_ratio_float": float(mean_ratio),
        "spread_reference": spread_reference,
        "c_value": c_value,
        "passes_spread": bool(float(max_ratio) <= spread_reference),
        "concentrated": bool(float(max_ratio) >= 0.9),
    }


def _cell_incidence_index(family: ShadedFamily):
    """Sorted (cell, tube-direction-index) incidence arrays."""
    cells = []
    dirs = []
    for st in family.tubes:
        if len(st.shading):
            cells.append(st.shading)
            dirs.append(np.full(len(st.shading), st.tube.net_index,
                                dtype=np.int64))
    if not cells:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    cells = np.concatenate(cells)
    dirs = np.concatenate(dirs)
    order = np.argsort(cells, kind="stable")
    return cells[order], dirs[order]


def plany_report(family: ShadedFamily, params: dict) -> dict:
    """Angle of incident directions to the per-cell best-fit 2-plane.

    The plane is the top-2 eigenspace of the direction second-moment
    matrix; the cell's score is the largest principal angle of any of
    its directions to that plane. Reports the fraction of sampled cells
    scoring at or below the threshold (default rho + delta).
    """
    delta = float(family.spec.delta)
    rho = params.get("rho")
    if rho is None:
        rho = family.generator.get("params", {}).get("rho", 4 * delta)
    rho = float(rho)
    threshold = float(params.get("threshold", rho + delta))
    max_cells = int(params.get("max_cells", 4096))
    inc_cells, inc_dirs = _cell_incidence_index(family)
    distinct, _ = family_cell_counts(family)
    sample = distinct[_even_sample(len(distinct), max_cells)]
    lo = np.searchsorted(inc_cells, sample, side="left")
    hi = np.searchsorted(inc_cells, sample, side="right")
    points = family.net.points
    angles = np.zeros(len(sample))
    for i in range(len(sample)):
        idx = np.unique(inc_dirs[lo[i]:hi[i]])
        if len(idx) <= 2:
            continue
        dirs = points[idx]
        moment = dirs.T @ dirs
        _, vecs = np.linalg.eigh(moment)
        plane = vecs[:, -2:]
        residual = dirs - (dirs @ plane) @ plane.T
        sines = np.sqrt(np.einsum("ij,ij->i", residual, residual))
        angles[i] = math.asin(min(1.0, float(sines.max())))
    within = int((angles <= threshold + 1e-12).sum())
    return {
        "check": "plany",
        "rho": rho,
        "threshold": threshold,
        "cells_scored": len(sample),
        "fraction_within": within / len(sample) if len(sample) else 1.0,
        "max_angle": float(angles.max()) if len(sample) else 0.0,
        "mean_angle": float(angles.mean()) if len(sample) else 0.0,
    }


def robust_transversality_report(family: ShadedFamily,
                                 params: dict) -> dict:
    """Per-cell direction-cap counts against r^eps1 * mu at dyadic radii.

    For each sampled cell and each incident direction, counts incident
    tubes whose direction lies within angle r, and compares against
    r^eps1 times the family's average multiplicity.
    """
    eps1 = float(as_fraction(params.get("eps1", Fraction(1, 2)), "eps1"))
    max_cells = int(params.get("max_cells", 1024))
    max_dirs = int(params.get("max_dirs", 256))
    spec = family.spec
    inc_cells, inc_dirs = _cell_incidence_index(family)
    distinct, counts = family_cell_counts(family)
    if len(distinct) == 0:
        raise ValueError("robust transversality check: empty shading")
    mu = float(Fraction(int(counts.sum()), len(distinct)))
    sample_idx = _even_sample(len(distinct), max_cells)
    sample = distinct[sample_idx]
    lo = np.searchsorted(inc_cells, sample, side="left")
    hi = np.searchsorted(inc_cells, sample, side="right")
    points = family.net.points
    radii = [spec.delta_float * (1 << k)
             for k in range(spec.N.bit_length())
             if spec.delta_float * (1 << k) <= 1.0]
    per_radius = np.zeros(len(radii))
    for i in range(len(sample)):
        idx, weights = np.unique(inc_dirs[lo[i]:hi[i]], return_counts=True)
        if len(idx) > max_dirs:
            keep = _even_sample(len(idx), max_dirs)
            idx, weights = idx[keep], weights[keep]
        dirs = points[idx]
        gram = np.abs(dirs @ dirs.T)
        for k, r in enumerate(radii):
            cap_counts = (gram >= math.cos(min(r, math.pi / 2))) @ weights
            ratio = float(cap_counts.max()) / (r ** eps1 * mu)
            per_radius[k] = max(per_radius[k], ratio)
    return {
        "check": "robust_transversality",
        "eps1": eps1,
        "mu": mu,
        "cells_scored": len(sample),
        "radii": [{"r": r, "max_ratio": float(per_radius[k])}
                  for k, r in enumerate(radii)],
        "max_ratio": float(per_radius.max()),
    }


def m_parallel_report(family: ShadedFamily, params: dict) -> dict:
    counts = family.per_direction_counts()
    return {
        "check": "m_parallel",
        "m_parallel": family.m_parallel,
        "directions_used": len(counts),
        "tube_count": len(family.tubes),
    }


_CHECKS = {
    "two_ends": two_ends_report,
    "plany": plany_report,
    "robust_transversality": robust_transversality_report,
    "m_parallel": m_parallel_report,
}


def available_checks() -> tuple:
    return tuple(sorted(_CHECKS))


def check_structure(family: ShadedFamily, which: str,
                    params: dict | None = None) -> dict:
    if which not in _CHECKS:
        raise ValueError(f"unknown check {which!r}; expected one of "
                         f"{sorted(_CHECKS)}")
    return _CHECKS[which](family, dict(params or {}))
