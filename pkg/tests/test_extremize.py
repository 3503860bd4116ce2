import numpy as np
import pytest

from bergwehrl.extremize import (GRAD_CHECK_TOL, GradientCheckError, SaaProblem, ascend, coherence_diagnostic,
                                 is_coherent, saa_maximize)
from bergwehrl.geometry import Point
from bergwehrl.probes import ConvexProbe
from bergwehrl.quadrature import McConfig, normalizing_constant
from bergwehrl.space import CoherentState, PolyFunction, SpaceParams, random_poly

P12 = SpaceParams(1, 2.0)
SMALL = McConfig(2000, seed=0, strata=16, orbit=8)


def test_coherence_diagnostic():
    cs = CoherentState(P12, Point(0.3 + 0.3j))
    d = coherence_diagnostic(cs, McConfig(5000, seed=0))
    assert is_coherent(d)
    assert np.allclose(d["z0_fit"], [[0.3, 0.3]], atol=1e-6)
    d = coherence_diagnostic(PolyFunction.monomial(P12, (1,)).normalized(), McConfig(5000, seed=0))
    assert not is_coherent(d) and d["sup_u"] == pytest.approx(8 / 27, rel=1e-8)
    with pytest.raises(ValueError):
        coherence_diagnostic(PolyFunction.monomial(P12, (1,)), McConfig(5000, seed=0))


@pytest.mark.parametrize("probe", ["power:1.5", "power:2", "hinge:0.3", "xlogx"])
@pytest.mark.parametrize("params", [P12, SpaceParams(2, 3.0)], ids=str)
def test_gradient_matches_finite_differences(probe, params):
    prob = SaaProblem(params, ConvexProbe.parse(probe), 3, SMALL)
    rng = np.random.default_rng(0)
    a = rng.standard_normal(prob.dim) + 1j * rng.standard_normal(prob.dim)
    a /= np.linalg.norm(a)
    assert prob.gradient_check(a) <= GRAD_CHECK_TOL


def test_whitened_roundtrip_and_value():
    prob = SaaProblem(P12, ConvexProbe.parse("power:2"), 4, SMALL)
    f = random_poly(P12, 4, np.random.default_rng(1))
    a = prob.from_function(f)
    g = prob.to_function(a)
    assert all(abs(g.coeffs[m] - c) < 1e-12 for m, c in f.coeffs.items())
    assert prob.value(a) == pytest.approx(prob.estimate_at(a).mean, rel=1e-12)


def test_monotone_ascent():
    prob = SaaProblem(P12, ConvexProbe.parse("power:2"), 3, SMALL)
    a0 = prob.from_function(random_poly(P12, 3, np.random.default_rng(2)))
    out = ascend(prob, a0, max_iter=200, trace=True)
    assert all(b >= a for a, b in zip(out["trace"], out["trace"][1:]))


def test_affine_probe_terminates_immediately():
    prob = SaaProblem(P12, ConvexProbe.parse("power:1"), 4, SMALL)
    rep = saa_maximize(prob, restarts=2, seed=0)
    assert all(r["iterations"] == 0 and r["status"] == "converged" for r in rep.restarts)
    assert rep.fresh_value.mean == pytest.approx(1 / normalizing_constant(P12), rel=1e-12)


def test_degree_zero_is_ground_state():
    prob = SaaProblem(SpaceParams(2, 3.0), ConvexProbe.parse("power:2"), 0, SMALL)
    rep = saa_maximize(prob, restarts=2, seed=0)
    assert rep.best.degree == 0
    assert abs(rep.fresh_value.mean - rep.rhs) < 1e-3
    assert rep.diagnostic["overlap"] == pytest.approx(1.0, abs=1e-12)


def test_small_problem_finds_coherent_optimum_and_respects_bound():
    prob = SaaProblem(P12, ConvexProbe.parse("power:2"), 2, SMALL)
    rep = saa_maximize(prob, restarts=2, seed=3)
    assert rep.gradient_gate_ok and rep.bound_ok
    assert rep.diagnostic["overlap"] > 0.99
    d = rep.to_dict()
    assert d["best_index"] in range(3) and len(d["restarts"]) == 3
    assert [r["start"] for r in d["restarts"]] == ["random", "random", "coherent"]


def test_gradient_gate_is_enforced(monkeypatch):
    prob = SaaProblem(P12, ConvexProbe.parse("power:2"), 2, SMALL)
    monkeypatch.setattr(prob, "gradient_check", lambda a, h=1e-6: 1.0)
    with pytest.raises(GradientCheckError):
        saa_maximize(prob, restarts=1)


def test_report_is_deterministic():
    prob = SaaProblem(P12, ConvexProbe.parse("hinge:0.3"), 2, SMALL)
    a = saa_maximize(prob, restarts=1, seed=5).to_dict()
    b = saa_maximize(prob, restarts=1, seed=5).to_dict()
    assert a == b
