import math

import numpy as np
import pytest

from bergwehrl.bounds import (EQUALITY, HOLDS, VIOLATED, EuclideanAnnulus, GeodesicBall, Superlevel,
                              check_entropy, check_faber_krahn, check_mixture, check_pointwise, check_wehrl,
                              classify, closed_form_identities, wehrl_entropy)
from bergwehrl.geometry import Point
from bergwehrl.probes import ConvexProbe
from bergwehrl.quadrature import Estimate, McConfig
from bergwehrl.space import CoherentState, MixedState, PolyFunction, SpaceParams, expand_coherent, random_poly

CFG = McConfig(100_000, seed=0, strata=64)
P12 = SpaceParams(1, 2.0)
SQUARE = ConvexProbe.parse("power:2")

# frozen oracle values (mpmath quadrature in t = |z|^2, dm = dt / (1-t)^2 at N=1, alpha=2)
WEHRL_SQ_Z = 2 / 15          # int (2t(1-t)^2)^2 dm for f = z / sqrt(0.5)
MIXTURE_SQ = 0.2             # 1/4 int (1+2t)^2 (1-t)^2 dt
ENTROPY_Z = 2.8068528194400547  # -int u ln u dm for f = z / sqrt(0.5)
FK_Z_BALL1 = 0.25            # int_{t<1/2} 2t dt


def z_unit():
    return PolyFunction.monomial(P12, (1,)).normalized()


def test_classify_rules():
    assert classify(Estimate(1.0, 0.01, 10), 1.0, True) == EQUALITY
    assert classify(Estimate(1.0, 0.01, 10), 1.0, False) == HOLDS
    assert classify(Estimate(1.1, 0.01, 10), 1.0, True) == VIOLATED
    assert classify(Estimate(0.5, 0.01, 10), 1.0, True) == HOLDS
    # the relative floor 1e-3 |rhs| applies even to exact lhs values
    assert classify(Estimate.exact(1.0005), 1.0, True) == EQUALITY


def test_report_json_fields():
    rep = check_pointwise(z_unit(), 2000, CFG)
    d = rep.to_dict()
    for key in ("check", "params", "probe", "lhs", "rhs", "margin", "sigmas", "verdict", "seed"):
        assert key in d
    assert d["margin"] == pytest.approx(d["rhs"] - d["lhs"]["mean"])


def test_pointwise_examples():
    cs = check_pointwise(CoherentState(P12, Point(0.5)), 5000, CFG)
    assert cs.verdict == EQUALITY and cs.lhs.mean == pytest.approx(1.0, abs=1e-9)
    z = check_pointwise(PolyFunction.monomial(P12, (1,)), 5000, CFG)
    assert z.verdict == HOLDS and z.lhs.mean == pytest.approx(4 / 27, rel=1e-9) and z.rhs == 0.5
    zero = check_pointwise(PolyFunction(P12, {}), 100, CFG)
    assert zero.lhs.mean == 0.0 and zero.verdict == EQUALITY


def test_wehrl_examples():
    rep = check_wehrl(CoherentState(P12, Point(0.3 - 0.4j), theta=0.7), SQUARE, CFG)
    assert rep.verdict == EQUALITY
    rep = check_wehrl(z_unit(), SQUARE, CFG)
    assert rep.verdict == HOLDS and abs(rep.lhs.mean - WEHRL_SQ_Z) < 4 * rep.lhs.stderr
    for params in (P12, SpaceParams(2, 3.0), SpaceParams(3, 5.5)):
        rep = check_wehrl(PolyFunction.constant(params), ConvexProbe.parse("power:1"), CFG)
        assert rep.margin == pytest.approx(0.0, abs=1e-12) and rep.verdict == EQUALITY


def test_wehrl_renormalizes_and_flags_exploratory():
    f = 3.0 * z_unit()
    rep = check_wehrl(f, SQUARE, CFG)
    assert rep.extras["renormalized_from"] == pytest.approx(9.0)
    assert not rep.extras["exploratory"]
    rep = check_wehrl(PolyFunction.constant(SpaceParams(1, 2.5)), SQUARE, McConfig(20_000, 0, 16))
    assert rep.extras["exploratory"]


def test_phase_leaves_lhs_unchanged():
    f = random_poly(SpaceParams(2, 3.0), 4, np.random.default_rng(4))
    a = check_wehrl(f, SQUARE, CFG)
    b = check_wehrl(np.exp(2.1j) * f, SQUARE, CFG)
    assert b.lhs.mean == pytest.approx(a.lhs.mean, rel=1e-12)
    assert b.lhs.stderr == pytest.approx(a.lhs.stderr, rel=1e-9)


def test_affine_probe_zero_margin_for_random_functions():
    rng = np.random.default_rng(9)
    for params in (P12, SpaceParams(2, 3.0)):
        f = random_poly(params, 5, rng)
        rep = check_wehrl(f, ConvexProbe.parse("power:1"), CFG)
        assert abs(rep.margin) <= 1e-12 and rep.verdict == EQUALITY


def test_mixture_examples():
    m = MixedState(np.array([0.5, 0.5]), [PolyFunction.constant(P12), z_unit()])
    rep = check_mixture(m, SQUARE, CFG)
    assert rep.verdict == HOLDS and rep.sigmas > 3
    assert abs(rep.lhs.mean - MIXTURE_SQ) < 4 * rep.lhs.stderr
    assert rep.extras["convexity"]["ok"] and rep.extras["convexity"]["gap"] > 0
    # a pure state is a rank-one mixture with the same lhs
    pure = check_mixture(z_unit(), SQUARE, CFG)
    assert pure.lhs.mean == pytest.approx(check_wehrl(z_unit(), SQUARE, CFG).lhs.mean, rel=1e-13)
    proj = check_mixture(MixedState(np.array([1.0]), [expand_coherent(CoherentState(P12, Point(0.3j)), 40)]),
                         SQUARE, CFG)
    assert proj.verdict == EQUALITY
    assert check_mixture(CoherentState(P12, Point(0.2)), SQUARE, CFG).verdict == EQUALITY


def test_faber_krahn_examples():
    one = PolyFunction.constant(P12)
    rep = check_faber_krahn(one, GeodesicBall(Point(0j), 1.0), CFG)
    assert rep.rhs == 0.5 and rep.verdict == EQUALITY
    ann = EuclideanAnnulus.with_measure(0.25, 1.0, 1)
    assert ann.measure_in(1) == pytest.approx(1.0)
    rep = check_faber_krahn(one, ann, CFG)
    # J(1.25) - J(0.25) = 0.3556 for the ground state
    assert rep.verdict == HOLDS and rep.sigmas > 3
    assert abs(rep.lhs.mean - (1.25 / 2.25 - 0.2)) < 4 * rep.lhs.stderr
    rep = check_faber_krahn(z_unit(), GeodesicBall(Point(0j), 1.0), CFG)
    assert rep.verdict == HOLDS and abs(rep.lhs.mean - FK_Z_BALL1) < 4 * rep.lhs.stderr


def test_faber_krahn_coherent_ball_and_superlevel():
    cs = CoherentState(P12, Point(-0.4 + 0.2j))
    assert check_faber_krahn(cs, GeodesicBall(cs.z0, 0.7), CFG).verdict == EQUALITY
    assert check_faber_krahn(cs, Superlevel(cs, 0.3), CFG).verdict == EQUALITY
    off = check_faber_krahn(cs, GeodesicBall(Point(0.4), 0.7), CFG)
    assert off.verdict == HOLDS


def test_faber_krahn_rejects_bad_sets():
    with pytest.raises(ValueError):
        GeodesicBall(Point(0j), math.inf)
    with pytest.raises(ValueError):
        EuclideanAnnulus(0.5, 0.4)
    with pytest.raises(ValueError):
        check_faber_krahn(PolyFunction.constant(P12), GeodesicBall(Point([0j, 0j]), 1.0), CFG)


def test_entropy_examples():
    cs = CoherentState(P12, Point(0.1))
    rep = check_entropy(cs, CFG)
    assert rep.verdict == EQUALITY and rep.extras["entropy_bound"] == pytest.approx(2.0, abs=1e-12)
    e = wehrl_entropy(z_unit(), CFG)
    assert abs(e.mean - ENTROPY_Z) < 4 * e.stderr and e.mean > 2
    assert check_entropy(z_unit(), CFG).verdict == HOLDS


@pytest.mark.parametrize("params", [SpaceParams(1, 2.0), SpaceParams(2, 3.0), SpaceParams(3, 4.5),
                                    SpaceParams(1, 1.2), SpaceParams(2, 2.3)], ids=str)
def test_closed_form_identities(params):
    rows = closed_form_identities(params)
    assert rows and all(r["ok"] for r in rows), [r for r in rows if not r["ok"]]


def test_rerun_on_violation(monkeypatch):
    # force a violation by lying about the sharp constant; the check must repeat at 4x samples
    import bergwehrl.bounds as b
    monkeypatch.setattr(b, "theorem_a_rhs", lambda probe, params: 0.0)
    rep = b.check_wehrl(z_unit(), SQUARE, McConfig(4000, 0, 16))
    assert rep.verdict == VIOLATED
    assert rep.extras["rerun"]["n_samples"] == 4000 and rep.lhs.n == 16000


@pytest.mark.parametrize("n,r1,r2", [(1, 0.0, 0.5), (1, 0.3, 0.9), (2, 0.2, 0.7), (3, 0.5, 0.95)])
def test_annulus_measure_matches_radial_quadrature(n, r1, r2):
    from scipy.integrate import quad

    val, _ = quad(lambda r: 2 * n * r ** (2 * n - 1) * (1 - r * r) ** (-n - 1), r1, r2, epsabs=0, epsrel=1e-13)
    assert EuclideanAnnulus(r1, r2).measure_in(n) == pytest.approx(val, rel=1e-11)
