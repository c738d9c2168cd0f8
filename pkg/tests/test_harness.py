import json
import math

import numpy as np
import pytest

from ncfa import harness
from ncfa.algebra import element, matrix_algebra, matrix_unit, trace_product
from ncfa.harness import (
    HypothesisError,
    LazyFamilies,
    RatioReport,
    reports_to_csv,
    run_theorem,
    verify_js,
    verify_khinchine,
    verify_explicit_bounds,
    verify_modular,
    verify_rosenthal,
)
from ncfa.independence import Ensemble, build_tensor_family
from ncfa.rearrangement import singular_value_function
from ncfa.spaces import ZE, Cap, Lp, Orlicz, Sum, make_Mpq, norm, power_function, tlog_function

KINDS = ["classical", "gue_like", "fermionic"]


def sq_l2(x):
    return trace_product(x.H, x).real


def fams(kind, K=3, n=2, trials=10, seed=0, **kw):
    return LazyFamilies(Ensemble(kind, K, n, seed, **kw), trials)


# rosenthal ---------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_rosenthal_p2_ratio_is_one_half(kind):
    # both right-hand terms equal ||sum x_k||_2 at p = 2
    rep = verify_rosenthal(fams(kind), 2)
    assert rep.ratio_min == pytest.approx(0.5, rel=1e-9)
    assert rep.ratio_max == pytest.approx(0.5, rel=1e-9)


@pytest.mark.parametrize("p", [2, 3, 4, 6])
def test_rosenthal_single_summand(p):
    rep = verify_rosenthal(fams("gue_like", K=1, n=3), p)
    for lhs, rhs, fam in zip(rep.lhs, rep.rhs, fams("gue_like", K=1, n=3)):
        mu = singular_value_function(fam.embedded[0])
        assert lhs == pytest.approx(norm(Lp(p), mu))
        assert rhs == pytest.approx(norm(Lp(p), mu) + norm(Lp(2), mu))
    assert 0.5 <= rep.ratio_min <= rep.ratio_max <= 1.0


def test_rosenthal_rejects_small_p():
    with pytest.raises(HypothesisError):
        verify_rosenthal(fams("classical"), 1.5)
    with pytest.raises(HypothesisError):
        verify_rosenthal(fams("classical"), math.inf)


def test_rosenthal_needs_mean_zero():
    with pytest.raises(HypothesisError):
        verify_rosenthal(fams("classical", mean_zero=False), 4)


def test_rosenthal_seed_stability():
    gms = [run_theorem("rosenthal", Ensemble("classical", 6, 2, seed), 60, p=4)[0].ratio_geomean for seed in range(3)]
    assert max(gms) / min(gms) < 1.2


# js ----------------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_js_l2_identity(kind):
    rep = verify_js(fams(kind, K=4), Lp(2))
    for lhs, fam in zip(rep.lhs, fams(kind, K=4)):
        assert lhs**2 == pytest.approx(math.fsum(sq_l2(x) for x in fam.embedded), rel=1e-9)
    for rhs, fam in zip(rep.rhs, fams(kind, K=4)):
        assert rhs >= norm(Sum(1, 2), fam.direct_sum().mu()) - 1e-12
    assert rep.surrogate_flags == ["holmstedt:L1+L2"]


@pytest.mark.parametrize("K", [1, 2, 3, 5])
def test_js_positive_projections_closed_form(K):
    alg = matrix_algebra(2)
    fam = build_tensor_family([(alg, matrix_unit(alg, 0, 0))] * K)
    rep = verify_js(fam, Lp(3), form="Z1")
    # sum of K independent Bernoulli(1/2) projections is Binomial(K, 1/2)
    third = sum(math.comb(K, j) * j**3 for j in range(K + 1)) / 2**K
    assert rep.lhs[0] == pytest.approx(third ** (1 / 3), rel=1e-12)
    # mu(X) = 1 on (0, K/2): Lp(3) of the head plus the L1 norm
    assert rep.rhs[0] == pytest.approx(min(1.0, K / 2) ** (1 / 3) + K / 2, rel=1e-12)
    assert rep.surrogate_flags == []


@pytest.mark.parametrize("kind", KINDS)
def test_js_single_positive_summand(kind):
    rep = verify_js(fams(kind, K=1, positive=True), Lp(3), form="Z1")
    assert rep.ratio_max <= 1 + 1e-12


def test_js_positivity_enforced():
    with pytest.raises(HypothesisError):
        verify_js(fams("gue_like"), Lp(3), form="Z1")


def test_js_directions_and_exploratory():
    up = verify_js(fams("classical"), Lp(3), "upper")
    low = verify_js(fams("classical"), Lp(3), "lower")
    assert up.lhs == low.rhs and up.rhs == low.lhs
    assert verify_js(fams("classical"), Lp(1)).exploratory
    assert not up.exploratory
    with pytest.raises(ValueError):
        verify_js(fams("classical"), Lp(3), "sideways")


# khinchine ---------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_khinchine_l2_ratio_one(kind):
    rep = verify_khinchine(fams(kind, K=4), Lp(2))
    assert rep.ratio_min == pytest.approx(1, abs=1e-9) and rep.ratio_max == pytest.approx(1, abs=1e-9)


def test_khinchine_rank_one_negative_control():
    rep = run_theorem("khinchine", Ensemble("rank_one", 4, 4), 1, spec=Lp(4), pair="adjoint")[0]
    assert rep.ratio_min == pytest.approx(math.sqrt(2), abs=1e-10)
    with pytest.raises(HypothesisError):
        run_theorem("khinchine", Ensemble("rank_one", 4, 4), 1, spec=Lp(4))


def test_khinchine_fermionic_lp3_stable():
    gms = [verify_khinchine(fams("fermionic", K=4, seed=s, trials=30), Lp(3)).ratio_geomean for s in range(3)]
    assert all(math.isfinite(g) for g in gms)
    assert max(gms) / min(gms) < 2


@pytest.mark.parametrize("spec", [Lp(1), Lp(math.inf), Cap(1, 2), Sum(2, math.inf), ZE(Lp(2), 2)])
def test_khinchine_rejects_endpoints(spec):
    with pytest.raises(HypothesisError):
        verify_khinchine(fams("classical"), spec)


def test_khinchine_accepts_orlicz():
    rep = verify_khinchine(fams("gue_like"), Orlicz(make_Mpq(2, 4)))
    assert math.isfinite(rep.spread)


# modular -----------------------------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_modular_square_reduces_to_l2(kind):
    rep = verify_modular(fams(kind, K=4), power_function(2), "mean_zero")
    for lhs, fam in zip(rep.lhs, fams(kind, K=4)):
        assert lhs == pytest.approx(math.fsum(sq_l2(x) for x in fam.embedded), rel=1e-9)


def test_modular_single_positive_diagonal_closed_form():
    alg = matrix_algebra(3)
    d = np.array([2.5, 0.5, 0.0])
    fam = build_tensor_family([(alg, element(alg, [np.diag(d)], True))])
    M = make_Mpq(2, 4)
    rep = verify_modular(fam, M, "positive")
    # mu(x_0) has total length 2/3 < 1, so the head is the whole moment
    head = sum(float(M(np.array([v]))[0]) / 3 for v in d)
    tail = float(M(np.array([d.sum() / 3]))[0])
    assert rep.rhs[0] == pytest.approx(head + tail, rel=1e-12)
    assert rep.lhs[0] == pytest.approx(head, rel=1e-12)


def test_modular_variants_and_hypotheses():
    phi = tlog_function(2, 1)
    for variant in ("positive", "mean_zero", "khinchine"):
        ens = Ensemble("gue_like", 3, 2, positive=(variant == "positive"))
        rep = verify_modular(LazyFamilies(ens, 5), phi, variant)
        assert math.isfinite(rep.spread)
    with pytest.raises(HypothesisError):
        verify_modular(fams("classical"), power_function(1), "mean_zero")
    with pytest.raises(HypothesisError):
        verify_modular(fams("classical"), make_Mpq(2, 4), "positive")
    with pytest.raises(ValueError):
        verify_modular(fams("classical"), make_Mpq(2, 4), "other")


# explicit-constant bounds --------------------------------------------


@pytest.mark.parametrize("kind", KINDS)
def test_bounds_bounds_pass(kind):
    reps = verify_explicit_bounds(fams(kind, K=3, trials=10))
    ids = [(r.theorem_id, tuple(r.params.values())) for r in reps]
    assert ids == [
        ("symmetrization", (2.0,)), ("symmetrization", (4.0,)), ("symmetrization", (8.0,)),
        ("dyadic-moment", (1,)), ("dyadic-moment", (2,)), ("dyadic-moment", (3,)),
        ("column-contraction", (2.0,)), ("column-contraction", (4.0,)), ("column-contraction", (8.0,)),
    ]
    assert all(r.passed for r in reps)
    n1 = reps[3]
    assert n1.ratio_max <= 1 + 1e-9


def test_bounds_single_summand_rademacher_equality():
    rep = verify_explicit_bounds(fams("gue_like", K=1, n=3), q_list=(4,))[0]
    assert rep.lhs == pytest.approx(rep.rhs, rel=1e-12)


def test_bounds_fermionic_q4_many_seeds():
    reps = verify_explicit_bounds(fams("fermionic", K=3, trials=100), q_list=(4,))
    r41 = reps[0]
    assert all(2 * b - a >= -1e-9 for a, b in zip(r41.lhs, r41.rhs))


def test_bounds_hard_failures_are_reported(monkeypatch):
    monkeypatch.setattr(harness, "HARD_ATOL", -100.0)
    reps = verify_explicit_bounds(fams("classical", trials=2), q_list=(2,))
    assert reps[0].hard_failures and not reps[0].passed
    assert reps[0].hard_failures[0].startswith("trial 0:")


# reports -----------------------------------------------------------------


def test_report_statistics_and_exclusions():
    rep = RatioReport("t", "Lp(2)", {"kind": "x", "K": 1, "n": 1, "seed": 0, "trials": 4},
                      lhs=[1.0, 0.0, 2.0, 3.0], rhs=[2.0, 0.0, 2.0, 0.0])
    assert rep.ratios == [0.5, None, 1.0, math.inf]
    assert rep.ratio_min == 0.5 and rep.ratio_max == math.inf and rep.ratio_geomean == math.inf
    doc = rep.to_json()
    assert doc["ratio_max"] == "inf"
    json.dumps(doc, allow_nan=False)
    with pytest.raises(ValueError):
        RatioReport("t", "s", {}, lhs=[1.0], rhs=[])


def test_zero_family_is_excluded():
    alg = matrix_algebra(2)
    fam = build_tensor_family([(alg, element(alg, [np.zeros((2, 2))], True))] * 2)
    rep = verify_rosenthal([fam, fam], 4)
    assert rep.excluded == [0, 1] and rep.ratio_min is None and rep.ratio_geomean is None


@pytest.mark.parametrize("kind", KINDS)
def test_geomean_between_extremes(kind):
    rep = verify_js(fams(kind, trials=20), Lp(3))
    assert rep.ratio_min <= rep.ratio_geomean <= rep.ratio_max


@pytest.mark.parametrize("kind", KINDS)
def test_norm_checks_are_scale_invariant(kind):
    alpha = 3.7
    base = [fams(kind, K=3)[i] for i in range(5)]
    scaled = [f.scaled(alpha) for f in base]
    checks = [
        lambda fs: [verify_rosenthal(fs, 4)],
        lambda fs: [verify_js(fs, Lp(3))],
        lambda fs: [verify_khinchine(fs, Lp(1.5))],
        lambda fs: verify_explicit_bounds(fs),
    ]
    for check in checks:
        for r0, r1 in zip(check(base), check(scaled)):
            assert np.allclose(np.array(r1.lhs), alpha * np.array(r0.lhs), rtol=1e-9)
            assert np.allclose(r1.ratios, r0.ratios, rtol=1e-9)


def test_reports_are_deterministic_across_threads(monkeypatch):
    ens = Ensemble("gue_like", 3, 2, seed=11)
    monkeypatch.setenv("NCFA_THREADS", "1")
    a = [r.to_json() for r in run_theorem("bounds", ens, 12)]
    monkeypatch.setenv("NCFA_THREADS", "3")
    b = [r.to_json() for r in run_theorem("bounds", ens, 12)]
    assert json.dumps(a) == json.dumps(b)


def test_csv_rows():
    rep = run_theorem("khinchine", Ensemble("fermionic", 3, seed=2), 4, spec=Lp(3))[0]
    text = reports_to_csv([rep])
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(harness.CSV_FIELDS)
    assert len(lines) == 5
    assert lines[1].startswith("khinchine,Lp(3) [pair=sum],fermionic,3,2,2,0,")


def test_run_theorem_switches_to_positive_ensemble():
    rep = run_theorem("modular", Ensemble("classical", 2, 2), 3, phi=make_Mpq(2, 4), variant="positive")[0]
    assert rep.ensemble["positive"] is True
    with pytest.raises(ValueError):
        run_theorem("nope", Ensemble("classical", 2, 2), 3)
