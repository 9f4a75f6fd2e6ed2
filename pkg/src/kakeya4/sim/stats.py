"""Exact incidence statistics for shaded families.

Everything countable is kept as integers and exact rationals; floats
appear only in serialized convenience fields. The double-counting
identity (total shaded cell incidences = sum of cell multiplicities)
is recomputed and asserted on every call, not trusted.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .families import ShadedFamily


@dataclass(frozen=True)
class IncidenceStats:
    """Aggregate exact statistics of one shaded family."""

    dim: int
    N: int
    delta: Fraction
    tube_count: int
    total_shaded: int
    distinct_cells: int
    volume: Fraction
    lambda_density: Fraction
    mu: Fraction
    mass: Fraction
    m_parallel: int
    histogram: dict

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "N": self.N,
            "delta": str(self.delta),
            "tube_count": self.tube_count,
            "total_shaded": self.total_shaded,
            "distinct_cells": self.distinct_cells,
            "volume": str(self.volume),
            "volume_float": float(self.volume),
            "lambda": str(self.lambda_density),
            "lambda_float": float(self.lambda_density),
            "mu": str(self.mu),
            "mu_float": float(self.mu),
            "mass": str(self.mass),
            "mass_float": float(self.mass),
            "m_parallel": self.m_parallel,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


def family_cell_counts(family: ShadedFamily):
    """Distinct shaded cells and their integer multiplicities."""
    parts = [st.shading for st in family.tubes if len(st.shading)]
    if not parts:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    cells, counts = np.unique(np.concatenate(parts), return_counts=True)
    return cells, counts


def family_stats(family: ShadedFamily) -> IncidenceStats:
    if not family.tubes:
        raise ValueError("empty family")
    spec = family.spec
    total = sum(len(st.shading) for st in family.tubes)
    cells, counts = family_cell_counts(family)
    if int(counts.sum()) != total:
        raise RuntimeError(
            f"double-counting identity broken: incidences {total} != "
            f"multiplicity sum {int(counts.sum())}")
    distinct = len(cells)
    lam = sum((st.density for st in family.tubes),
              Fraction(0)) / len(family.tubes)
    mu = Fraction(total, distinct) if distinct else Fraction(0)
    hist_counts = np.bincount(counts) if distinct else np.empty(0, np.int64)
    histogram = {int(k): int(v) for k, v in enumerate(hist_counts) if v}
    return IncidenceStats(
        dim=spec.dim,
        N=spec.N,
        delta=spec.delta,
        tube_count=len(family.tubes),
        total_shaded=total,
        distinct_cells=distinct,
        volume=distinct * spec.cell_volume(),
        lambda_density=lam,
        mu=mu,
        mass=family.mass(),
        m_parallel=family.m_parallel,
        histogram=histogram,
    )
