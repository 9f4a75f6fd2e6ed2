"""Experiments: margins against the proved bounds and scaling fits.

The volume bounds are never re-typed here; their exponents are read
back from the replayed derivation so the simulator and the calculus
cannot drift apart. Margins are additive in natural-log units:

    margin = ln(volume) - ln(bound instantiated at this family)

A nonnegative margin means the family satisfies the bound with room to
spare; small negatives are absorbed by the constants the discrete
model drops.
"""

from __future__ import annotations

import csv
import math
from fractions import Fraction
from functools import lru_cache

from ..derivations import TEStatement, derive_lemma_incidence
from ..quadratic import QuadraticNumber
from .families import make_family
from .grid import GridSpec
from .shading import make_shading
from .stats import IncidenceStats, family_stats
from .checks import check_structure

WOLFF_TE = TEStatement(3, 2, Fraction(1, 2))


def _as_float(x) -> float:
    if isinstance(x, QuadraticNumber):
        return float(x.approximate(20))
    return float(x)


@lru_cache(maxsize=1)
def lemma_exponents() -> dict:
    """Exponents of the replayed incidence volume bound.

    Returns {"lam", "delta", "mass", "m"} mapped to exact Fractions,
    read from the final step of the incidence derivation.
    """
    bound = derive_lemma_incidence().bound("volume_bound_m_parallel")
    rhs = bound.rhs
    return {name: rhs.get(name) for name in ("lam", "delta", "mass", "m")}


def verify_bound(stats: IncidenceStats, te: TEStatement, *,
                 m_exponent: Fraction = Fraction(0),
                 m_value: int | None = None,
                 slack: float = 0.0) -> dict:
    """Additive log-margin of a dim-4 family against a volume bound.

    The bound is lam^a * delta^(4-d) * mass^b, optionally times
    m^m_exponent for bounds refined by parallel multiplicity.
    """
    if stats.dim != 4:
        raise ValueError("volume bounds are stated in dimension 4")
    if stats.volume <= 0 or stats.lambda_density <= 0 or stats.mass <= 0:
        return {"degenerate": True,
                "reason": "empty shading or empty family"}
    a = _as_float(te.a)
    b = _as_float(te.b)
    d = _as_float(te.d)
    m = stats.m_parallel if m_value is None else m_value
    ln_bound = (a * math.log(float(stats.lambda_density))
                + (4 - d) * math.log(float(stats.delta))
                + b * math.log(float(stats.mass))
                + float(m_exponent) * math.log(m))
    margin = math.log(float(stats.volume)) - ln_bound
    return {
        "te": {"d": str(te.d), "a": str(te.a), "b": str(te.b)},
        "m_exponent": str(Fraction(m_exponent)),
        "m_value": m,
        "lambda": float(stats.lambda_density),
        "mass": float(stats.mass),
        "volume": float(stats.volume),
        "margin": margin,
        "slack": slack,
        "passes": bool(margin >= -slack - 1e-12),
    }


def lemma_margin(stats: IncidenceStats, m_value: int | None = None) -> dict:
    """Margin against the incidence lemma's volume bound, exponents
    taken verbatim from the replayed derivation."""
    exps = lemma_exponents()
    te = TEStatement(4 - exps["delta"], exps["lam"], exps["mass"])
    report = verify_bound(stats, te, m_exponent=exps["m"], m_value=m_value)
    report["source"] = "incidence-volume-bound"
    return report


STANDARD_GENERATORS = (
    ("bush", {}),
    ("hairbrush", {}),
    ("plany_slab", {}),
    ("random", {}),
)

STANDARD_SHADINGS = (
    ("full", {}),
    ("random", {"lam": "1/4"}),
    ("two_ends", {"lam": "1/4", "eps1": "1/2"}),
    ("one_end", {"lam": "1/4", "eps1": "1/2"}),
)


def standard_suite(spec: GridSpec, seed: int, *,
                   checks: tuple = ("two_ends",)) -> list[dict]:
    """The 4 x 4 generator-by-shading grid with stats, margins, checks.

    Tube geometry is built once per generator (the family cache) and
    re-shaded; margins are attached in dimension 4.
    """
    records = []
    for gen_name, gen_params in STANDARD_GENERATORS:
        base = make_family(spec, {"name": gen_name, "params": gen_params},
                           seed)
        for kind, sh_params in STANDARD_SHADINGS:
            fam = make_shading(base, kind, sh_params)
            stats = family_stats(fam)
            record = {
                "generator": fam.generator,
                "shading": fam.shading,
                "stats": stats.to_dict(),
            }
            if spec.dim == 4:
                record["margins"] = {
                    "wolff_te": verify_bound(stats, WOLFF_TE, slack=0.5),
                    "incidence_lemma": lemma_margin(stats),
                }
            record["checks"] = {name: check_structure(fam, name)
                                for name in checks}
            records.append(record)
    return records


def _fit_slope(xs: list[float], ys: list[float]):
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    if sxx == 0:
        return None
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    return sxy / sxx


def scaling_experiment(dim: int, N_list: list[int], generator: dict,
                       seed: int, shading: dict | None = None) -> dict:
    """Re-instantiate one configuration across scales and fit d-hat.

    Fits ln(volume) against ln(delta); with volume ~ delta^(dim - d)
    the estimate is d_hat = dim - slope. Margins are attached per scale
    in dimension 4.
    """
    if len(N_list) < 3:
        raise ValueError("scaling fit needs at least 3 scales")
    if len(set(N_list)) != len(N_list):
        raise ValueError("N_list has repeated scales")
    shading = shading or {"kind": "full", "params": {}}
    rows = []
    for N in sorted(N_list):
        spec = GridSpec(dim, N)
        fam = make_family(spec, generator, seed)
        fam = make_shading(fam, shading["kind"],
                           shading.get("params") or {})
        stats = family_stats(fam)
        row = {
            "N": N,
            "delta": str(stats.delta),
            "delta_float": float(stats.delta),
            "tubes": stats.tube_count,
            "lambda": float(stats.lambda_density),
            "mu": float(stats.mu),
            "volume": float(stats.volume),
            "volume_exact": str(stats.volume),
        }
        if dim == 4:
            row["margin_wolff_te"] = verify_bound(stats, WOLFF_TE,
                                                  slack=0.5)["margin"]
            row["margin_incidence_lemma"] = lemma_margin(stats)["margin"]
        rows.append(row)
    report = {
        "dim": dim,
        "seed": seed,
        "generator": generator,
        "shading": shading,
        "rows": rows,
        "degenerate": False,
    }
    if any(r["volume"] == 0.0 for r in rows):
        report["degenerate"] = True
        report["reason"] = "zero volume at some scale"
        report["d_hat"] = None
        return report
    xs = [math.log(r["delta_float"]) for r in rows]
    ys = [math.log(r["volume"]) for r in rows]
    slope = _fit_slope(xs, ys)
    if slope is None:
        report["degenerate"] = True
        report["reason"] = "zero variance in ln(delta)"
        report["d_hat"] = None
        return report
    report["slope"] = slope
    report["d_hat"] = dim - slope
    return report


SCALE_CSV_COLUMNS = ("delta", "N", "tubes", "lambda", "mu", "volume",
                     "margin_wolff_te", "margin_incidence_lemma")


def _fmt_csv(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


def suite_csv_rows(report: dict) -> list[list[str]]:
    """CSV rows (header first) for a scaling report, one row per scale."""
    rows = [list(SCALE_CSV_COLUMNS)]
    for r in report["rows"]:
        values = dict(r)
        values["delta"] = r["delta_float"]
        rows.append([_fmt_csv(values.get(c)) for c in SCALE_CSV_COLUMNS])
    return rows


def write_csv(path, rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
