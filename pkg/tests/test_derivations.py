"""Oracle tests for the recorded derivation chains.

Every frozen exponent vector below was worked out by hand with plain
fraction arithmetic before being written down; the tests recompute the
key combinations independently instead of trusting module constants.
"""

import dataclasses
import json
import random
from fractions import Fraction as F

import pytest

import kakeya4.derivations as dv
from kakeya4.bounds import Loss, Relation, upper
from kakeya4.quadratic import QuadraticNumber, exact_sign


def rhs_dict(bound):
    return {name: exp for name, exp in bound.rhs.items()}


# hand-checked waypoints of the incidence chain
COARSE_BLEND = {"lam": F(-7, 16), "rho": F(-3, 4), "A": F(3, 8),
                "mass_rho": F(1, 8), "D": F(1)}
FINE_ROUTE_A = {"lam": F(-19, 16), "rho": F(1, 4), "delta": F(-1),
                "mass": F(1, 8)}
FINE_ROUTE_B = {"lam": F(-3, 4), "delta": F(-1), "A": F(-1, 2)}
BLENDED_FINE = {"lam": F(-83, 92), "rho": F(2, 23), "delta": F(-1),
                "mass": F(1, 23)}
MULTIPLICITY = {"lam": F(-101, 100), "delta": F(-49, 50), "mass": F(1, 10)}
VOLUME_M = {"m": F(-9, 10), "lam": F(201, 100), "delta": F(49, 50),
            "mass": F(9, 10)}


# --- incidence chain ---------------------------------------------------------


def test_incidence_chain_waypoints_are_exact():
    d = dv.derive_lemma_incidence()
    assert rhs_dict(d.bound("coarse_blend")) == COARSE_BLEND
    assert rhs_dict(d.bound("fine_route_a")) == FINE_ROUTE_A
    assert rhs_dict(d.bound("fine_route_b")) == FINE_ROUTE_B
    assert rhs_dict(d.bound("blended_fine")) == BLENDED_FINE
    assert rhs_dict(d.bound("multiplicity_bound")) == MULTIPLICITY
    assert rhs_dict(d.bound("volume_bound_m_parallel")) == VOLUME_M
    assert d.bound("multiplicity_bound").relation is Relation.UPPER
    assert d.bound("volume_bound_m_parallel").relation is Relation.LOWER


def test_checkpoint_registry_matches_hand_values():
    waypoints = {
        "coarse_blend": COARSE_BLEND,
        "fine_route_a": FINE_ROUTE_A,
        "fine_route_b": FINE_ROUTE_B,
        "blended_fine": BLENDED_FINE,
        "multiplicity_bound": MULTIPLICITY,
        "volume_bound_m_parallel": VOLUME_M,
    }
    for label, want in waypoints.items():
        got = {k: F(v) for k, v in dv.CHECKPOINTS[label].items()}
        assert got == want, label


def test_route_blend_is_the_recorded_convex_combination():
    # raw blend at weight 8/23 on route a, then A dropped (A >= 1 with a
    # negative power on an upper bound)
    w = F(8, 23)
    names = set(FINE_ROUTE_A) | set(FINE_ROUTE_B)
    mixed = {n: w * FINE_ROUTE_A.get(n, F(0))
             + (1 - w) * FINE_ROUTE_B.get(n, F(0)) for n in names}
    assert mixed == {"lam": F(-83, 92), "delta": F(-1), "rho": F(2, 23),
                     "A": F(-15, 46), "mass": F(1, 23)}
    del mixed["A"]
    assert mixed == BLENDED_FINE
    d = dv.derive_lemma_incidence()
    raw = d.step("blended_fine_raw")
    assert raw.op == "interpolate"
    assert raw.inputs == ("fine_route_a", "fine_route_b")
    assert F(raw.params["weight"]) == dv.BLEND_WEIGHT_FINE == w
    assert d.step("blended_fine").op == "drop_bounded"


def test_elimination_weight_and_exponents_by_hand():
    d = dv.derive_lemma_incidence()
    step = d.step("multiplicity_bound")
    assert step.op == "eliminate"
    assert step.inputs == ("blended_fine", "trilinear")
    assert F(step.params["weight_solved"]) == F(23, 25)
    assert dv.ELIMINATION_WEIGHT == F(23, 25)
    # recompute the rho-killing combination with raw arithmetic
    trilinear = {"lam": F(-9, 4), "rho": F(-1), "delta": F(-3, 4),
                 "mass": F(3, 4)}
    w = F(2, 23) / (F(2, 23) + 1)          # solves w*(2/23) + (1-w)*(-1) = 0
    t = 1 - w                              # weight on blended_fine
    assert t == F(23, 25)
    combo = {}
    for n in set(BLENDED_FINE) | set(trilinear):
        e = t * BLENDED_FINE.get(n, F(0)) + (1 - t) * trilinear.get(n, F(0))
        if e != 0:
            combo[n] = e
    assert combo == MULTIPLICITY
    assert "rho" not in d.bound("multiplicity_bound").rhs


def test_volume_bound_is_double_count_of_m_refined_multiplicity():
    # apply the multiplicity bound to a 1-parallel refinement carrying
    # mass/m, multiply back by the m parallel copies, then swap by
    # double counting: all in plain dict arithmetic
    refined = dict(MULTIPLICITY)
    refined["m"] = 1 - refined["mass"]
    flipped = {n: -e for n, e in refined.items()}
    want = {n: flipped.get(n, F(0)) + {"lam": F(1), "mass": F(1)}.get(n, F(0))
            for n in set(flipped) | {"lam", "mass"}}
    want = {n: e for n, e in want.items() if e != 0}
    assert want == VOLUME_M


def test_incidence_chain_replays_bit_identically():
    d = dv.derive_lemma_incidence()
    replayed = d.replay()
    assert [s.output for s in replayed.steps] == [s.output for s in d.steps]


def test_tampered_step_is_caught_by_replay():
    d = dv.derive_lemma_incidence()
    victim = d.step("blended_fine")
    forged = upper("mu", Loss.EPS_POWER, lam=F(-84, 92), rho=F(2, 23),
                   delta=-1, mass=F(1, 23))
    hacked = dataclasses.replace(victim, output=forged)
    steps = [hacked if s.label == "blended_fine" else s for s in d.steps]
    broken = dv.Derivation(d.name, steps, d.result, d.meta)
    with pytest.raises(dv.ReplayMismatch):
        broken.replay()


def test_step_indices_and_anchors():
    for make in (dv.derive_lemma_incidence, dv.derive_restriction_exponent,
                 dv.derive_trilinear_multiplicity):
        d = make()
        assert [s.index for s in d.steps] == list(range(len(d.steps)))
        assert all(s.anchor for s in d.steps)


def test_derivation_serializes_through_json():
    d = dv.derive_lemma_incidence()
    data = json.loads(json.dumps(d.to_dict()))
    assert data["name"] == d.name
    assert len(data["steps"]) == len(d.steps)
    looked_up = next(s for s in data["steps"]
                     if s["label"] == "multiplicity_bound")
    assert looked_up["output"]["rhs"] == {"lam": "-101/100",
                                          "delta": "-49/50", "mass": "1/10"}


# --- trilinear conversion ----------------------------------------------------


def test_trilinear_multiplicity_is_double_counted_volume():
    d = dv.derive_trilinear_multiplicity()
    vol = rhs_dict(d.bound("trilinear_volume"))
    assert vol == {"lam": F(13, 4), "delta": F(3, 4), "rho": F(1),
                   "mass": F(1, 4)}
    got = rhs_dict(d.bound("trilinear_multiplicity"))
    want = {n: -e for n, e in vol.items()}
    want["lam"] += 1
    want["mass"] += 1
    assert got == {n: e for n, e in want.items() if e != 0}
    assert got == {"lam": F(-9, 4), "rho": F(-1), "delta": F(-3, 4),
                   "mass": F(3, 4)}
    d.replay()


# --- restriction exponent ----------------------------------------------------


def test_restriction_weight_kills_the_lam_R_power():
    # endpoint routes: lam^(-101/150) R^(-101/150) and lam^1 R^1; the
    # weight theta on the second cancels the power exactly
    theta = F(101, 150) / (1 + F(101, 150))
    assert theta == F(101, 251)
    assert theta * 1 + (1 - theta) * F(-101, 150) == 0
    d = dv.derive_restriction_exponent()
    assert F(d.meta["theta"]) == theta
    assert F(d.meta["p"]) == F(702, 251) == 2 + F(200, 251)
    assert d.meta["p_split"] == "2 + 200/251"
    assert dv.RESTRICTION_P == F(702, 251)
    d.replay()


# --- self-improvement --------------------------------------------------------


def alpha_prime_closed(a: F) -> F:
    return (54 + 33 * a - 34 * a * a) / (108 - 54 * a)


def alpha_double_closed(a: F) -> F:
    return (45 * a - 18) / (28 * a)


def test_self_improve_base_point():
    r = dv.derive_self_improve(F(1), F(65, 28))
    assert r["alpha_prime"] == F(53, 54)
    assert r["alpha_double_prime"] == F(27, 28)
    assert r["valid"] == {"double_route": True, "prime_route": True}
    assert r["bounds"]["improved_bound"].rhs.get("mass") == F(1, 3)
    assert r["te_statements"]["prime"] is not None
    assert r["te_statements"]["double"] is not None
    r["derivation"].replay()


def test_self_improve_matches_closed_forms_on_random_inputs():
    rng = random.Random(20260814)
    lo = F(973, 1000)
    for _ in range(100):
        t = F(rng.randrange(2 ** 32), 2 ** 32)
        a = lo + t * (1 - lo)
        r = dv.derive_self_improve(a, F(65, 28))
        assert r["alpha_prime"] == alpha_prime_closed(a)
        assert r["alpha_double_prime"] == alpha_double_closed(a)
        assert r["bounds"]["improved_bound"].rhs.get("mass") == a / 3


def test_closed_form_maps_agree_with_module_maps():
    pm, dm = dv.alpha_prime_map(), dv.alpha_double_map()
    for a in (F(1), F(99, 100), F(49, 50), F(39, 40)):
        assert pm(a) == alpha_prime_closed(a)
        assert dm(a) == alpha_double_closed(a)
    dv.closed_form_consistency([F(1), F(99, 100), F(975, 1000)])


def test_fixed_point_is_the_quadratic_root():
    out = dv.fixed_point_alpha_star()
    star = out["alpha_star"]
    assert star == QuadraticNumber(F(75, 40), F(-3, 40), 145)
    # verify the defining equation in exact field arithmetic
    assert 20 * star * star - 75 * star + 54 == QuadraticNumber(0)
    assert dv.alpha_prime_map()(star) == star
    # alpha* is an attractor target strictly below 1
    assert exact_sign(1 - star) > 0
    assert exact_sign(star - F(97, 100)) > 0


def test_d_zero_closed_form():
    star = dv.fixed_point_alpha_star()["alpha_star"]
    by_hand = 4 - (45 * star - 18) / (28 * star)
    d0 = dv.d_zero()
    assert d0 == by_hand
    assert d0 == QuadraticNumber(F(159, 56), F(1, 56), 145)
    assert d0.decimal(10) == "3.054314189"


def test_iteration_reaches_the_eps_neighborhood():
    eps = F(1, 10 ** 6)
    it = dv.iterate_self_improvement(eps)
    star = it["alpha_star"]
    traj = it["trajectory"]
    assert it["strictly_decreasing"]
    assert traj[0] == 1
    assert len(traj) == it["K"]
    assert traj[-1] == it["alpha_K"]
    gap = it["alpha_K"] - star
    assert exact_sign(gap) > 0
    assert exact_sign(eps - gap) > 0
    # every iterate stays strictly above the fixed point
    for a in traj:
        assert exact_sign(a - star) > 0
    lim = it["te_statements"]["limit"]
    assert lim.d_slack == eps
    maximal = it["te_statements"]["maximal"]
    assert maximal.d == dv.d_zero()
    assert maximal.b == 1


def test_iteration_rounding_keeps_denominators_bounded():
    it = dv.iterate_self_improvement(F(1, 10 ** 6), denominator_bits=64)
    assert it["rounded_steps"] > 0
    for a in it["trajectory"]:
        assert a.denominator.bit_length() <= 65


def test_beta_window_verdicts():
    ok = dv.check_beta_window((F(243, 250), F(1)), F(65, 28))
    assert ok["both_hold"]
    assert ok["conditions"]["double_route"]["witness_alpha"] is None
    bad = dv.check_beta_window((F(243, 250), F(1)), F(3))
    assert not bad["both_hold"]
    assert not bad["conditions"]["double_route"]["holds"]
    assert bad["conditions"]["double_route"]["witness_alpha"] is not None
    # thresholds recomputed from the cleared linear/quadratic forms
    assert F(ok["thresholds_at_alpha_one"]["upper"]) == F(96 - 31, 24)
    assert F(ok["thresholds_at_alpha_one"]["lower"]) == F(417 - 196 - 90, 60)
    with pytest.raises(ValueError):
        dv.check_beta_window((F(1), F(1, 2)), F(65, 28))


def test_te_statement_validation_and_mu_form():
    te = dv.TEStatement(3, 2, F(1, 2))
    form = te.mu_form()
    assert rhs_dict(form) == {"lam": F(-1), "delta": F(-1), "mass": F(1, 2)}
    assert form.relation is Relation.UPPER
    scaled = te.mu_form(scale={"delta": 1, "rho": -1})
    assert rhs_dict(scaled) == {"lam": F(-1), "delta": F(-1), "rho": F(1),
                                "mass": F(1, 2)}
    with pytest.raises(ValueError):
        dv.TEStatement(5, 1, 1)
    with pytest.raises(ValueError):
        dv.TEStatement(3, -1, 1)
    with pytest.raises(ValueError):
        dv.TEStatement(3, 1, 1, d_slack=F(-1, 10))
