"""Property and oracle tests for the one-monomial power-bound calculus.

Expected exponent vectors are recomputed in plain dict arithmetic inside
each test, never read back from the module under test.
"""

import json
import random
from fractions import Fraction as F

import pytest

from kakeya4.bounds import (Bound, CalculusError, DirectionUnsound,
                            ExponentVector, Loss, NoSolution, Relation,
                            UnknownSymbol, WeightOutOfRange, compose,
                            double_count, drop_bounded, eliminate,
                            get_symbol, interpolate, lower, monomial,
                            registered_symbols, relabel, relax,
                            solve_weight, substitute_rescale, upper)

# symbols safe to use as free knobs in the property loops
NAMES = ("lam", "delta", "rho", "A", "mass", "m", "h", "R")


def random_vec(rng, names=NAMES, spread=6):
    entries = {}
    for name in names:
        if rng.random() < 0.6:
            entries[name] = F(rng.randint(-spread, spread),
                              rng.randint(1, spread))
    return entries


def vec_as_dict(ev: ExponentVector) -> dict:
    return {name: exp for name, exp in ev.items()}


# --- registry and vectors -------------------------------------------------


def test_symbol_registry_roundtrip():
    lam = get_symbol("lam")
    assert lam.name == "lam"
    assert lam is get_symbol("lam")
    assert any(s.name == "volume" for s in registered_symbols())
    with pytest.raises(UnknownSymbol):
        get_symbol("no_such_symbol")


def test_vector_rejects_unregistered_names():
    with pytest.raises(UnknownSymbol):
        ExponentVector({"bogus": 1})


def test_vector_multiplication_adds_exponents():
    rng = random.Random(101)
    for _ in range(200):
        d1, d2 = random_vec(rng), random_vec(rng)
        prod = ExponentVector(d1) * ExponentVector(d2)
        want = {n: d1.get(n, F(0)) + d2.get(n, F(0))
                for n in set(d1) | set(d2)}
        want = {n: e for n, e in want.items() if e != 0}
        assert vec_as_dict(prod) == want


def test_vector_power_scales_and_drops_zero():
    v = monomial(lam=F(-3, 4), delta=2)
    assert vec_as_dict(v ** F(1, 2)) == {"lam": F(-3, 8), "delta": 1}
    assert len(v ** 0) == 0
    assert vec_as_dict(v ** -1) == {"lam": F(3, 4), "delta": -2}


def test_vector_equality_ignores_entry_order():
    a = ExponentVector({"lam": 1, "delta": 2})
    b = ExponentVector({"delta": 2, "lam": 1})
    assert a == b and hash(a) == hash(b)
    assert a != a * monomial(rho=1)


def test_vector_serialization_strings():
    v = monomial(lam=F(-101, 100), mass=F(1, 10))
    assert v.to_dict() == {"lam": "-101/100", "mass": "1/10"}


# --- interpolation and weight solving --------------------------------------


def test_interpolate_convex_combination_property():
    rng = random.Random(202)
    for _ in range(200):
        d1, d2 = random_vec(rng), random_vec(rng)
        t = F(rng.randint(0, 12), 12)
        b1 = upper("mu", Loss.POLYLOG, **d1)
        b2 = upper("mu", Loss.EPS_POWER, **d2)
        out = interpolate(b1, b2, t)
        for name in set(d1) | set(d2):
            want = t * d1.get(name, F(0)) + (1 - t) * d2.get(name, F(0))
            assert out.rhs.get(name) == want
        assert out.loss is Loss.EPS_POWER
        assert out.relation is Relation.UPPER


def test_interpolate_frozen_example():
    b1 = upper("mu", lam=-2, delta=-1)
    b2 = upper("mu", lam=-1)
    out = interpolate(b1, b2, F(1, 3))
    assert vec_as_dict(out.rhs) == {"lam": F(-4, 3), "delta": F(-1, 3)}


def test_interpolate_rejects_weight_outside_unit_interval():
    b1, b2 = upper("mu", lam=-2), upper("mu", lam=-1)
    with pytest.raises(WeightOutOfRange):
        interpolate(b1, b2, F(3, 2))
    with pytest.raises(WeightOutOfRange):
        interpolate(b1, b2, F(-1, 5))


def test_interpolate_rejects_mixed_directions():
    with pytest.raises(DirectionUnsound):
        interpolate(upper("mu", lam=-1), lower("mu", lam=-2), F(1, 2))
    with pytest.raises(CalculusError):
        interpolate(upper("mu", lam=-1), upper("volume", lam=1), F(1, 2))


def test_solve_weight_recovers_planted_weight():
    rng = random.Random(303)
    solved = 0
    for _ in range(200):
        d1, d2 = random_vec(rng), random_vec(rng)
        sym = rng.choice(NAMES)
        e1, e2 = d1.get(sym, F(0)), d2.get(sym, F(0))
        b1, b2 = upper("mu", **d1), upper("mu", **d2)
        t_true = F(rng.randint(0, 24), 24)
        target = t_true * e1 + (1 - t_true) * e2
        if e1 == e2:
            with pytest.raises(NoSolution):
                solve_weight(b1, b2, sym, target)
            continue
        assert solve_weight(b1, b2, sym, target) == t_true
        solved += 1
    assert solved > 100


def test_solve_weight_reports_unreachable_target():
    b1 = upper("mu", lam=-1)
    b2 = upper("mu", lam=-3)
    # hitting lam^0 would need t = 3/2
    with pytest.raises(WeightOutOfRange):
        solve_weight(b1, b2, "lam", 0)


def test_eliminate_removes_symbol_and_matches_interpolation():
    rng = random.Random(404)
    for _ in range(100):
        d1, d2 = random_vec(rng), random_vec(rng)
        d1["rho"] = F(rng.randint(1, 8), 3)
        d2["rho"] = F(-rng.randint(1, 8), 5)
        b1, b2 = upper("mu", **d1), upper("mu", **d2)
        t, out = eliminate(b1, b2, "rho")
        assert "rho" not in out.rhs
        assert out.rhs == interpolate(b1, b2, t).rhs


# --- composition and rewriting ---------------------------------------------


def test_compose_multiplies_out():
    rng = random.Random(505)
    inner_names = tuple(n for n in NAMES if n != "A")
    for _ in range(200):
        d_out = random_vec(rng)
        d_in = random_vec(rng, names=inner_names)
        exp = F(rng.randint(1, 5), rng.randint(1, 3))
        d_out["A"] = exp
        outer = upper("mu", **d_out)
        inner = upper("A", **d_in)
        out = compose(outer, inner)
        assert "A" not in out.rhs
        for name in set(d_out) | set(d_in):
            if name == "A":
                continue
            want = d_out.get(name, F(0)) + exp * d_in.get(name, F(0))
            assert out.rhs.get(name) == want, name


def test_compose_requires_positive_occurrence():
    outer = upper("mu", A=-1, lam=-2)
    inner = upper("A", rho=1)
    with pytest.raises(DirectionUnsound):
        compose(outer, inner)


def test_compose_direction_mismatch_raises():
    outer = upper("mu", A=1)
    inner = lower("A", rho=1)
    with pytest.raises(DirectionUnsound):
        compose(outer, inner)


def test_compose_missing_quantity_is_identity():
    outer = upper("mu", lam=-1)
    inner = upper("A", rho=1)
    assert compose(outer, inner) is outer


def test_substitute_rescale_rewrites_every_occurrence():
    b = upper("mu", h=F(-101, 150), lam=-1)
    out = substitute_rescale(b, "h", {"R": F(1, 2)})
    assert vec_as_dict(out.rhs) == {"R": F(-101, 300), "lam": -1}


def test_substitute_rescale_self_mention_is_simultaneous():
    # h -> h * R: the h exponent must survive unchanged, not recurse
    b = upper("mu", h=2, lam=-1)
    out = substitute_rescale(b, "h", {"h": 1, "R": 1})
    assert vec_as_dict(out.rhs) == {"h": 2, "R": 2, "lam": -1}


def test_substitute_rescale_cannot_touch_the_quantity():
    b = upper("mu", lam=-1)
    with pytest.raises(CalculusError):
        substitute_rescale(b, "mu", {"lam": 1})


def test_relabel_changes_quantity_only():
    b = upper("mu", Loss.POLYLOG, lam=-1)
    out = relabel(b, "mu_rho")
    assert out.quantity.name == "mu_rho"
    assert out.rhs == b.rhs and out.loss is b.loss


# --- domain-aware weakening ------------------------------------------------


def test_drop_bounded_upper_needs_factor_at_most_one():
    # lam <= 1, so lam^2 <= 1 may be dropped from an upper bound
    b = upper("mu", lam=2, delta=-1)
    assert vec_as_dict(drop_bounded(b, "lam").rhs) == {"delta": -1}
    # lam^-2 >= 1 may not
    with pytest.raises(DirectionUnsound):
        drop_bounded(upper("mu", lam=-2), "lam")
    # h >= 1, so h^-1 <= 1 may be dropped
    b2 = upper("mu", h=-1, lam=-1)
    assert vec_as_dict(drop_bounded(b2, "h").rhs) == {"lam": -1}


def test_drop_bounded_lower_direction_flips_the_table():
    assert "lam" not in drop_bounded(lower("volume", lam=-2), "lam").rhs
    with pytest.raises(DirectionUnsound):
        drop_bounded(lower("volume", lam=2), "lam")


def test_drop_bounded_absent_symbol_raises():
    with pytest.raises(CalculusError):
        drop_bounded(upper("mu", lam=1), "rho")


def test_relax_moves_toward_weaker_exponent_only():
    b = upper("mu", lam=-1, delta=-1)
    out = relax(b, "lam", -2)
    assert vec_as_dict(out.rhs) == {"lam": -2, "delta": -1}
    # the relaxed bound is implied: old rhs <= new rhs whenever lam <= 1
    with pytest.raises(DirectionUnsound):
        relax(b, "lam", F(-1, 2))
    with pytest.raises(CalculusError):
        relax(b, "lam", -1)


def test_relax_to_zero_removes_symbol():
    b = upper("mu", lam=1, delta=-1)
    assert "lam" not in relax(b, "lam", 0).rhs


# --- double counting -------------------------------------------------------


def test_double_count_exact_involution():
    rng = random.Random(606)
    for _ in range(100):
        d = random_vec(rng)
        b = lower("volume", Loss.EPS_POWER, **d)
        mu_bound = double_count(b)
        assert mu_bound.quantity.name == "mu"
        assert mu_bound.relation is Relation.UPPER
        back = double_count(mu_bound)
        assert back.quantity == b.quantity
        assert back.relation is b.relation
        assert back.rhs == b.rhs
        assert back.loss is b.loss


def test_double_count_frozen_example():
    b = lower("volume", lam=2, delta=1, mass=F(1, 2))
    out = double_count(b)
    assert vec_as_dict(out.rhs) == {"lam": -1, "delta": -1,
                                    "mass": F(1, 2)}


def test_double_count_rejects_wrong_shape():
    with pytest.raises(CalculusError):
        double_count(upper("volume", lam=1))
    with pytest.raises(CalculusError):
        double_count(lower("mu", lam=1))


def test_double_count_custom_mass_monomial():
    b = lower("volume", lam=2, mass_rho=F(1, 4))
    out = double_count(b, mass_monomial={"lam": 1, "mass_rho": 1})
    assert vec_as_dict(out.rhs) == {"lam": -1, "mass_rho": F(3, 4)}


# --- serialization ----------------------------------------------------------


def test_bound_dict_roundtrip_through_json():
    rng = random.Random(707)
    for _ in range(50):
        b = Bound(get_symbol("mu"), Relation.UPPER,
                  ExponentVector(random_vec(rng)),
                  rng.choice(list(Loss)), ("tag-a", "tag-b"))
        data = json.loads(json.dumps(b.to_dict()))
        back = Bound.from_dict(data)
        assert back == b


def test_loss_ordering_is_total():
    assert Loss.SHARP < Loss.POLYLOG < Loss.EPS_POWER
    assert max(Loss.SHARP, Loss.EPS_POWER) is Loss.EPS_POWER
