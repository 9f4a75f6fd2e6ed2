"""Executable acceptance gates for the whole package.

Each criterion has a tag (c1..c12), a one-line title, an optional time
budget in seconds, and a callable returning a details dict that must
contain a boolean "pass". The runner executes requested criteria in tag
order and assembles a JSON-ready report. Wall-clock measurements never
enter the report, only the runtime_ok boolean, so repeated runs of
unchanged code serialize to identical bytes.

Expected values here are frozen literals, written down independently of
the constants inside the derivation modules, so a regression in either
place surfaces as a disagreement.
"""

from __future__ import annotations

import json
import random
import time
from fractions import Fraction

from . import bounds as bd
from . import derivations as dv
from .quadratic import QuadraticNumber, exact_sign
from .sim.directions import clear_net_cache
from .sim.experiments import (lemma_exponents, scaling_experiment,
                              standard_suite)
from .sim.families import clear_family_cache
from .sim.grid import GridSpec

F = Fraction


def _vec(bound: bd.Bound) -> dict[str, Fraction]:
    return dict(bound.rhs.items())


def _c1() -> dict:
    d = dv.derive_lemma_incidence()
    d.replay()
    mu = d.bound("multiplicity_bound")
    vol = d.bound("volume_bound_m_parallel")
    mu_expected = {"lam": F(-101, 100), "delta": F(-49, 50),
                   "mass": F(1, 10)}
    vol_expected = {"m": F(-9, 10), "lam": F(201, 100), "delta": F(49, 50),
                    "mass": F(9, 10)}
    checks = {
        "multiplicity_exponents_exact": _vec(mu) == mu_expected,
        "multiplicity_is_upper_bound": mu.relation is bd.Relation.UPPER,
        "volume_exponents_exact": _vec(vol) == vol_expected,
        "volume_is_lower_bound": vol.relation is bd.Relation.LOWER,
        "replay_deterministic": True,
    }
    return {
        "pass": all(checks.values()),
        "checks": checks,
        "multiplicity_bound": mu.rhs.to_dict(),
        "volume_bound": vol.rhs.to_dict(),
    }


def _c2() -> dict:
    d = dv.derive_lemma_incidence()
    blend = _vec(d.bound("coarse_blend"))
    fine = _vec(d.bound("blended_fine"))
    route_a = d.bound("fine_route_a").rhs.get("lam")
    route_b = d.bound("fine_route_b").rhs.get("lam")
    w = F(8, 23)
    lam_fine = fine.get("lam")
    checks = {
        "coarse_blend_exact": blend == {
            "lam": F(-7, 16), "rho": F(-3, 4), "A": F(3, 8),
            "mass_rho": F(1, 8), "D": F(1)},
        "fine_lambda_is_-83/92": lam_fine == F(-83, 92),
        "fine_lambda_splits_-7/46_-3/4":
            F(-7, 46) + F(-3, 4) == F(-83, 92)
            and w * (route_a - route_b) == F(-7, 46)
            and route_b == F(-3, 4)
            and w * route_a + (1 - w) * route_b == lam_fine,
        "fine_rho_is_2/23": fine.get("rho") == F(2, 23),
        "fine_mass_is_1/23": fine.get("mass") == F(1, 23),
        "elimination_weight_23/25":
            d.step("multiplicity_bound").params["weight_solved"]
            == F(23, 25),
    }
    return {
        "pass": all(checks.values()),
        "checks": checks,
        "coarse_blend": d.bound("coarse_blend").rhs.to_dict(),
        "blended_fine": d.bound("blended_fine").rhs.to_dict(),
    }


def _c3() -> dict:
    d = dv.derive_restriction_exponent()
    d.replay()
    p = d.result
    theta = F(d.meta["theta"])
    checks = {
        "p_is_702/251": p == F(702, 251),
        "p_is_2_plus_200/251": p == 2 + F(200, 251),
        "theta_is_101/251": theta == F(101, 251),
        "replay_deterministic": True,
    }
    return {
        "pass": all(checks.values()),
        "checks": checks,
        "p": str(p),
        "theta": str(theta),
    }


def _c4() -> dict:
    base = dv.derive_self_improve(1, F(65, 28))
    checks = {
        "alpha_prime_53/54": base["alpha_prime"] == F(53, 54),
        "alpha_double_27/28": base["alpha_double_prime"] == F(27, 28),
    }
    star = dv.fixed_point_alpha_star()["alpha_star"]
    lo = F(243, 250)
    if exact_sign(lo - star) <= 0:
        raise AssertionError("sample window lower end is not above alpha*")
    rng = random.Random(20260814)
    samples_ok = 0
    first_bad = None
    for _ in range(100):
        t = F(rng.randrange(2 ** 32), 2 ** 32)
        a = lo + t * (1 - lo)
        step = dv.derive_self_improve(a, F(65, 28))
        ok = (step["alpha_double_prime"] == F(45, 28) - F(9, 14) / a
              and step["bounds"]["improved_bound"].rhs.get("mass") == a / 3
              and exact_sign(a - star) > 0 and a <= 1)
        if ok:
            samples_ok += 1
        elif first_bad is None:
            first_bad = str(a)
    checks["closed_forms_on_100_random_alphas"] = samples_ok == 100
    return {
        "pass": all(checks.values()),
        "checks": checks,
        "alpha_prime": str(base["alpha_prime"]),
        "alpha_double_prime": str(base["alpha_double_prime"]),
        "samples_ok": samples_ok,
        "first_failing_alpha": first_bad,
    }


def _c5() -> dict:
    fp = dv.fixed_point_alpha_star()
    star = fp["alpha_star"]
    literal = QuadraticNumber(F(75, 40), F(-3, 40), 145)
    cleared = fp["cleared"]
    want = [F(54), F(-75), F(20)]
    scale = cleared.coeffs[2] / want[2]
    roots = fp["report"].fixed_points
    roots_on_quadratic = all(
        exact_sign(20 * r * r - 75 * r + 54) == 0 for r in roots)
    pm = dv.alpha_prime_map()
    checks = {
        "alpha_star_is_(75-3*sqrt145)/40": star == literal,
        "cleared_equation_20a2-75a+54":
            [c * scale for c in want] == list(cleared.coeffs),
        "both_roots_satisfy_quadratic":
            len(roots) == 2 and roots_on_quadratic,
        "map_fixes_alpha_star_exactly": pm(star) == star,
    }
    return {
        "pass": all(checks.values()),
        "checks": checks,
        "alpha_star": str(star),
        "alpha_star_decimal": star.decimal(10),
    }


def _c6() -> dict:
    eps = F(1, 10 ** 9)
    it = dv.iterate_self_improvement(eps)
    star = it["alpha_star"]
    a_k = it["alpha_K"]
    traj = it["trajectory"]
    d0 = it["d_zero"]
    d0_literal = QuadraticNumber(F(159, 56), F(1, 56), 145)
    reference = F(30543141862, 10 ** 10)
    tol = F(1, 10 ** 10)
    diff = d0 - reference
    within = (exact_sign(diff - tol) <= 0
              and exact_sign(diff + tol) >= 0)
    checks = {
        "terminates_inside_(star,star+eps)":
            exact_sign(a_k - star) > 0
            and exact_sign(star + eps - a_k) > 0,
        "starts_at_1_then_53/54":
            traj[0] == 1 and traj[1] == F(53, 54),
        "strictly_decreasing": all(b < a for a, b in zip(traj, traj[1:])),
        "d_zero_exact_(159+sqrt145)/56": d0 == d0_literal,
        "d_zero_decimal_within_1e-10_of_3.0543141862": within,
    }
    return {
        "pass": all(checks.values()),
        "checks": checks,
        "iterations": it["K"],
        "alpha_K": str(a_k),
        "d_zero": str(d0),
        "d_zero_decimal": d0.decimal(10),
        "decimal_reference": "3.0543141862",
        "decimal_gap": "%.3e" % float(diff.approximate(20)),
    }


def _c7() -> dict:
    hold = dv.check_beta_window((1, 1), F(65, 28))
    fail = dv.check_beta_window((1, 1), 3)
    upper = F(65, 24)
    lower = F(131, 60)
    checks = {
        "holds_at_beta_65/28": hold["both_hold"],
        "fails_at_beta_3": not fail["both_hold"],
        "failure_is_the_upper_condition":
            not fail["conditions"]["double_route"]["holds"],
        "upper_threshold_65/24":
            hold["thresholds_at_alpha_one"]["upper"] == "65/24"
            and 96 - 24 * upper - 31 == 0,
        "lower_threshold_131/60":
            hold["thresholds_at_alpha_one"]["lower"] == "131/60"
            and 196 - 12 * lower - 417 + 72 * lower + 90 == 0,
    }
    return {
        "pass": all(checks.values()),
        "checks": checks,
        "held": hold["conditions"],
        "failed": fail["conditions"],
    }


def _c8() -> dict:
    d = dv.derive_trilinear_multiplicity()
    d.replay()
    src = d.bound("trilinear_volume")
    out = d.bound("trilinear_multiplicity")
    checks = {
        "input_form_exact": _vec(src) == {
            "lam": F(13, 4), "delta": F(3, 4), "rho": F(1),
            "mass": F(1, 4)},
        "input_is_volume_lower_bound":
            src.quantity.name == "volume"
            and src.relation is bd.Relation.LOWER,
        "output_form_exact": _vec(out) == {
            "lam": F(-9, 4), "rho": F(-1), "delta": F(-3, 4),
            "mass": F(3, 4)},
        "output_is_multiplicity_upper_bound":
            out.quantity.name == "mu" and out.relation is bd.Relation.UPPER,
        "single_double_count_step":
            d.step("trilinear_multiplicity").op == "double_count",
        "matches_registered_axiom":
            d.meta.get("matches_registered_axiom") is True,
    }
    return {
        "pass": all(checks.values()),
        "checks": checks,
        "multiplicity_bound": out.rhs.to_dict(),
    }


def _c9() -> dict:
    spec = GridSpec(4, 16)
    rows = standard_suite(spec, 7)
    delta4 = F(1, 16) ** 4
    identity_ok = True
    shading_ok = True
    summaries = []
    for row in rows:
        st = row["stats"]
        mu = F(st["mu"])
        distinct = st["distinct_cells"]
        total = st["total_shaded"]
        hist = {int(k): v for k, v in st["histogram"].items()}
        row_identity = (
            mu * distinct == total
            and F(st["volume"]) == distinct * delta4
            and sum(hist.values()) == distinct
            and sum(k * v for k, v in hist.items()) == total)
        identity_ok = identity_ok and row_identity
        te = row["checks"]["two_ends"]
        kind = row["shading"]["kind"]
        row_check = True
        if kind == "one_end":
            row_check = te["concentrated"]
        elif kind == "two_ends":
            row_check = (te["passes_spread"] and not te["concentrated"]
                         and te["c_value"] <= 4.0)
        shading_ok = shading_ok and row_check
        summaries.append({
            "generator": row["generator"]["name"],
            "shading": kind,
            "identity_exact": row_identity,
            "max_ratio": te["max_ratio"],
            "concentrated": te["concentrated"],
            "passes_spread": te["passes_spread"],
        })
    checks = {
        "sixteen_rows": len(rows) == 16,
        "double_counting_identity_exact": identity_ok,
        "one_end_concentrated_two_ends_spread": shading_ok,
    }
    return {
        "pass": all(checks.values()),
        "checks": checks,
        "rows": summaries,
    }


def _c10() -> dict:
    single = scaling_experiment(3, [8, 16, 32, 64], {"name": "single"}, 7)
    rand = scaling_experiment(4, [8, 16, 32], {"name": "random"}, 7)
    plany = scaling_experiment(4, [8, 16, 32], {"name": "plany_slab"}, 7)
    checks = {
        "single_within_0.9_to_1.1": abs(single["d_hat"] - 1.0) <= 0.1,
        "random_at_least_3.5": rand["d_hat"] >= 3.5,
        "plany_at_most_3.2": plany["d_hat"] <= 3.2,
    }
    return {
        "pass": all(checks.values()),
        "checks": checks,
        "single_d_hat": single["d_hat"],
        "random_d_hat": rand["d_hat"],
        "plany_d_hat": plany["d_hat"],
    }


def _c11() -> dict:
    rows = standard_suite(GridSpec(4, 32), 7)
    wolff = [row["margins"]["wolff_te"] for row in rows]
    lemma = [row["margins"]["incidence_lemma"] for row in rows]
    wolff_ok = all(r["margin"] >= -0.5 for r in wolff)
    lemma_reported = all(
        isinstance(r.get("margin"), float) for r in lemma)
    checks = {
        "sixteen_rows": len(rows) == 16,
        "wolff_margins_at_least_-0.5": wolff_ok,
        "lemma_margins_reported": lemma_reported,
    }
    return {
        "pass": all(checks.values()),
        "checks": checks,
        "min_wolff_margin": min(r["margin"] for r in wolff),
        "min_lemma_margin": min(r["margin"] for r in lemma),
    }


def _c12() -> dict:
    subset = ("c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9")

    def snapshot() -> bytes:
        clear_family_cache()
        clear_net_cache()
        lemma_exponents.cache_clear()
        report = run_acceptance(only=subset)
        return json.dumps(report, sort_keys=True,
                          separators=(",", ":")).encode()

    first = snapshot()
    second = snapshot()
    checks = {"reports_byte_identical": first == second}
    return {
        "pass": all(checks.values()),
        "checks": checks,
        "bytes": len(first),
        "criteria_compared": list(subset),
    }


CRITERIA = (
    ("c1", "incidence chain: multiplicity and volume exponents exact",
     1.0, _c1),
    ("c2", "incidence replay checkpoints match their frozen forms",
     None, _c2),
    ("c3", "restriction exponent 702/251 with weight 101/251", 1.0, _c3),
    ("c4", "self-improvement at (1, 65/28) plus 100 random closed forms",
     5.0, _c4),
    ("c5", "fixed point alpha* = (75 - 3*sqrt(145))/40 of the alpha' map",
     1.0, _c5),
    ("c6", "iteration to alpha* + 1e-9 and d0 = (159 + sqrt(145))/56",
     10.0, _c6),
    ("c7", "beta window: holds at 65/28, fails at 3, exact thresholds",
     5.0, _c7),
    ("c8", "double counting converts the trilinear volume form", 1.0, _c8),
    ("c9", "dim-4 N=16 grid: exact identities and shading checks",
     30.0, _c9),
    ("c10", "scaling fits: single ~ 1, random >= 3.5, plany_slab <= 3.2",
     120.0, _c10),
    ("c11", "N=32 margins >= -0.5 with lemma margins reported",
     120.0, _c11),
    ("c12", "verify report bytes are identical across repeated runs",
     None, _c12),
)

GROUPS = {
    "exponents": ("c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8"),
    "sim": ("c9", "c10", "c11"),
    "determinism": ("c12",),
}

_ORDER = {tag: i for i, (tag, _, _, _) in enumerate(CRITERIA)}


def resolve_tags(only=None) -> list[str]:
    """Expand tags and group names into an ordered, deduplicated list."""
    if only is None:
        return [tag for tag, _, _, _ in CRITERIA]
    picked = set()
    for token in only:
        token = token.strip()
        if token in GROUPS:
            picked.update(GROUPS[token])
        elif token in _ORDER:
            picked.add(token)
        else:
            known = ", ".join(list(_ORDER) + list(GROUPS))
            raise ValueError(
                f"unknown criterion or group {token!r} (known: {known})")
    return sorted(picked, key=_ORDER.__getitem__)


def run_acceptance(only=None) -> dict:
    """Run the requested criteria and report pass/fail per criterion."""
    tags = resolve_tags(only)
    results = []
    for tag, title, budget, fn in CRITERIA:
        if tag not in tags:
            continue
        start = time.perf_counter()
        try:
            details = fn()
            passed = bool(details.pop("pass"))
        except Exception as exc:
            details = {"error": f"{type(exc).__name__}: {exc}"}
            passed = False
        elapsed = time.perf_counter() - start
        results.append({
            "tag": tag,
            "title": title,
            "pass": passed,
            "budget_s": budget,
            "runtime_ok": True if budget is None else elapsed <= budget,
            "details": details,
        })
    return {
        "suite": "acceptance",
        "tags_run": tags,
        "criteria": results,
        "all_pass": all(r["pass"] for r in results),
    }


def format_report_lines(report: dict) -> list[str]:
    """One human-readable line per criterion."""
    lines = []
    for r in report["criteria"]:
        verdict = "PASS" if r["pass"] else "FAIL"
        timing = "" if r["runtime_ok"] else "  [over budget]"
        lines.append(f"{verdict}  {r['tag']:>3}  {r['title']}{timing}")
    return lines
