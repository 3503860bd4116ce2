"""Numerical checks of the sharp inequalities for Husimi functions.

Every check is phrased as ``lhs <= rhs``: lhs is an estimate with a standard
error, rhs a deterministic sharp constant.  The verdict compares the margin
rhs - lhs with the band max(3 stderr, 1e-3 |rhs|):

* ``violated-beyond-3σ`` if the margin is below minus the band,
* ``equality-band`` if the margin lies inside the band and the extremal
  configuration is present (a coherent state, or an affine probe),
* ``holds`` otherwise.

A violation is never reported from one run alone: the check is repeated with
four times as many samples and the larger run decides.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .extremize import coherence_diagnostic, is_coherent
from .geometry import BallSpec, Point, measure_of_euclidean_ball, radius_from_measure
from .probes import ConvexProbe
from .quadrature import (Estimate, McConfig, draw_samples, entropy_lower_bound, estimate, husimi_terms,
                         integrate_probe, j_prime, j_second, j_value, probe_terms, radial_reduced,
                         theorem_a_rhs)
from .rearrange import LevelProfile
from .space import (CoherentState, Function, MixedState, PolyFunction, SpaceParams, function_norm_sq,
                    log_husimi, maximize_husimi, monomial_norm_sq, normalizing_constant)

log = logging.getLogger(__name__)

HOLDS = "holds"
EQUALITY = "equality-band"
VIOLATED = "violated-beyond-3σ"
VERDICTS = (HOLDS, EQUALITY, VIOLATED)

RERUN_FACTOR = 4
REL_BAND = 1e-3


# --- sets ------------------------------------------------------------------------------------------


@dataclass(frozen=True)
class GeodesicBall:
    center: Point
    measure: float

    def __post_init__(self):
        if not (math.isfinite(self.measure) and self.measure >= 0):
            raise ValueError(f"set measure must be finite and nonnegative, got {self.measure}")

    def contains(self, z: np.ndarray) -> np.ndarray:
        return BallSpec(self.center, self.measure).contains(z)

    def to_dict(self) -> dict:
        return {"variant": "geodesic_ball", "center": [[c.real, c.imag] for c in self.center.coords],
                "measure": self.measure}


@dataclass(frozen=True)
class EuclideanAnnulus:
    """{r1 <= |z| < r2}; its invariant measure is a difference of two centered-ball measures."""

    r1: float
    r2: float

    def __post_init__(self):
        if not 0.0 <= self.r1 < self.r2 < 1.0:
            raise ValueError(f"need 0 <= r1 < r2 < 1, got r1={self.r1}, r2={self.r2}")

    def measure_in(self, n: int) -> float:
        return measure_of_euclidean_ball(self.r2, n) - measure_of_euclidean_ball(self.r1, n)

    @classmethod
    def with_measure(cls, inner_measure: float, measure: float, n: int) -> "EuclideanAnnulus":
        """Annulus of invariant measure ``measure`` whose hole has measure ``inner_measure``."""
        if not (inner_measure > 0 and measure > 0):
            raise ValueError("hole and annulus measures must be positive")
        return cls(radius_from_measure(inner_measure, n)[1], radius_from_measure(inner_measure + measure, n)[1])

    def contains(self, z: np.ndarray) -> np.ndarray:
        r2 = np.sum(np.abs(z) ** 2, axis=1)
        return (r2 >= self.r1 ** 2) & (r2 < self.r2 ** 2)

    def to_dict(self) -> dict:
        return {"variant": "euclidean_annulus", "r1": self.r1, "r2": self.r2}


@dataclass(frozen=True)
class Superlevel:
    """{u_g > t} for a function g; its measure is estimated from the samples."""

    of: Function
    level: float

    def __post_init__(self):
        if not self.level > 0:
            raise ValueError(f"superlevel sets need a positive level, got {self.level}")

    def to_dict(self) -> dict:
        from .space import to_document
        return {"variant": "superlevel", "of": to_document(self.of), "level": self.level}


SetSpec = Union[GeodesicBall, EuclideanAnnulus, Superlevel]


# --- reports ---------------------------------------------------------------------------------------


@dataclass
class CheckReport:
    check: str
    params: SpaceParams
    probe: str | None
    lhs: Estimate
    rhs: float
    verdict: str
    seed: int | None
    extras: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs.mean

    @property
    def sigmas(self) -> float | None:
        """Margin in units of the standard error; ``None`` when lhs is exact."""
        if self.lhs.stderr > 0:
            return self.margin / self.lhs.stderr
        return None

    @property
    def violated(self) -> bool:
        return self.verdict == VIOLATED

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "params": self.params.to_dict(),
            "probe": self.probe,
            "lhs": self.lhs.to_dict(),
            "rhs": self.rhs,
            "margin": self.margin,
            "sigmas": self.sigmas,
            "verdict": self.verdict,
            "seed": self.seed,
            **self.extras,
        }


def band(lhs: Estimate, rhs: float) -> float:
    return max(3.0 * lhs.stderr, REL_BAND * abs(rhs))


def classify(lhs: Estimate, rhs: float, equality_allowed: bool) -> str:
    margin = rhs - lhs.mean
    b = band(lhs, rhs)
    if margin < -b:
        return VIOLATED
    if abs(margin) <= b and equality_allowed:
        return EQUALITY
    return HOLDS


def _with_rerun(run: Callable[[McConfig], CheckReport], cfg: McConfig) -> CheckReport:
    first = run(cfg)
    if not first.violated:
        return first
    log.warning("%s violated at %d samples (margin %.3g); repeating with %dx samples",
                first.check, cfg.n_samples, first.margin, RERUN_FACTOR)
    second = run(cfg.scaled(RERUN_FACTOR))
    second.extras["rerun"] = {"n_samples": cfg.n_samples, "lhs": first.lhs.to_dict(), "verdict": first.verdict}
    return second


def _unit(f: Function) -> tuple[Function, float]:
    """Return f scaled to unit norm and the norm it had."""
    nsq = function_norm_sq(f)
    if not nsq > 0:
        raise ValueError("the zero function cannot be normalized")
    if isinstance(f, PolyFunction) and abs(nsq - 1.0) > 1e-12:
        return f.normalized(), nsq
    if isinstance(f, PolyFunction) or abs(nsq - 1.0) <= 1e-12:
        return f, nsq
    raise ValueError(f"cannot renormalize {type(f).__name__}")


def _common_extras(f: Function, nsq: float) -> dict:
    return {"exploratory": f.params.wehrl_k is None, "renormalized_from": None if abs(nsq - 1) <= 1e-12 else nsq}


def _diagnostic(f: Function, samples) -> dict | None:
    if isinstance(f, MixedState):
        if f.rank != 1:
            return None
        f = f.states[0]
    return coherence_diagnostic(f, samples=samples)


# --- checks ----------------------------------------------------------------------------------------


def check_pointwise(f: Function, grid_size: int = 20_000, cfg: McConfig | None = None) -> CheckReport:
    """sup u_f <= ||f||^2, with equality exactly for multiples of coherent states.

    lhs is the largest sampled value polished by local ascent; it is deterministic,
    so it carries no standard error.
    """
    cfg = cfg or McConfig()
    params = f.params
    rhs = function_norm_sq(f)
    samples = draw_samples(params, McConfig(grid_size, cfg.seed, min(cfg.strata, grid_size // 2), cfg.workers))
    logu = log_husimi(f, samples.points, samples.log_omr)
    sampled = float(np.exp(np.max(logu))) if np.isfinite(np.max(logu)) else 0.0
    if rhs == 0.0:
        top, sup = None, 0.0
    else:
        top = samples.points[np.argsort(-logu, kind="stable")[:50]]
        if isinstance(f, CoherentState):
            top = np.vstack([f.z0.array[None, :], top])
        sup, _ = maximize_husimi(f, top)
        sup = max(sup, sampled)
    lhs = Estimate.exact(sup)
    extras = {"exploratory": params.wehrl_k is None, "sampled_max": sampled, "grid_size": grid_size}
    return CheckReport("pointwise", params, None, lhs, rhs, classify(lhs, rhs, True), cfg.seed, extras)


def check_wehrl(f: Function, probe: ConvexProbe, cfg: McConfig | None = None) -> CheckReport:
    """int Phi(u_f) dm <= int Phi(u_1) dm for unit f."""
    cfg = cfg or McConfig()
    g, nsq = _unit(f)
    rhs = theorem_a_rhs(probe, g.params)

    def run(c: McConfig) -> CheckReport:
        samples = draw_samples(g.params, c)
        lhs = integrate_probe(g, probe, samples)
        diag = _diagnostic(g, samples)
        allowed = probe.is_affine or (diag is not None and is_coherent(diag))
        extras = {**_common_extras(g, nsq), "coherence": diag}
        return CheckReport("wehrl", g.params, probe.label, lhs, rhs, classify(lhs, rhs, allowed), c.seed, extras)

    return _with_rerun(run, cfg)


def check_mixture(state: MixedState | Function, probe: ConvexProbe, cfg: McConfig | None = None) -> CheckReport:
    """int Phi(sum_i w_i u_i) dm <= int Phi(u_1) dm, plus the convexity step
    int Phi(sum w_i u_i) dm <= sum_i w_i int Phi(u_i) dm.

    A pure state is accepted as a rank-one mixture and gives the same lhs as
    ``check_wehrl``.
    """
    cfg = cfg or McConfig()
    if not isinstance(state, MixedState):
        g, _ = _unit(state)
        state = MixedState(np.array([1.0]), [g]) if isinstance(g, PolyFunction) else None
        if state is None:
            rep = check_wehrl(g, probe, cfg)
            rep.check = "mixture"
            rep.extras["convexity"] = {"lhs": rep.lhs.to_dict(), "bound": rep.lhs.to_dict(), "ok": True}
            return rep
    params = state.params
    rhs = theorem_a_rhs(probe, params)

    def run(c: McConfig) -> CheckReport:
        samples = draw_samples(params, c)
        lhs = integrate_probe(state, probe, samples)
        # sum_i w_i Phi(u_i) - Phi(sum_i w_i u_i) >= 0 pointwise; estimate it on the same samples
        vals, off = probe_terms(state, probe, samples)
        comp = np.zeros_like(vals)
        comp_off = 0.0
        for w, psi in zip(state.weights, state.states):
            v, o = probe_terms(psi, probe, samples)
            comp += w * v
            comp_off += w * o
        split = estimate(comp - vals, samples)
        gap = split.mean + comp_off - off
        gap = float(gap)
        conv_ok = gap >= -max(3.0 * split.stderr, 1e-12)
        diag = _diagnostic(state, samples)
        allowed = probe.is_affine or (diag is not None and is_coherent(diag))
        extras = {"exploratory": params.wehrl_k is None, "rank": state.rank, "coherence": diag,
                  "convexity": {"gap": gap, "stderr": split.stderr, "ok": bool(conv_ok)}}
        verdict = classify(lhs, rhs, allowed)
        if not conv_ok:
            verdict = VIOLATED
        return CheckReport("mixture", params, probe.label, lhs, rhs, verdict, c.seed, extras)

    return _with_rerun(run, cfg)


def _centered_at(ball: GeodesicBall, z0: Point, tol: float = 1e-6) -> bool:
    return float(np.linalg.norm(ball.center.array - z0.array)) <= tol


def check_faber_krahn(f: Function, E: SetSpec, cfg: McConfig | None = None) -> CheckReport:
    """int_E u_f dm <= J(m(E)) for unit f."""
    cfg = cfg or McConfig()
    g, nsq = _unit(f)
    params = g.params
    if isinstance(E, (GeodesicBall, EuclideanAnnulus)):
        if isinstance(E, GeodesicBall) and E.center.dim != params.n:
            raise ValueError("set and function live in different dimensions")
        s = E.measure if isinstance(E, GeodesicBall) else E.measure_in(params.n)
        if not math.isfinite(s):
            raise ValueError(f"set measure is not finite: {s}")

    def run(c: McConfig) -> CheckReport:
        samples = draw_samples(params, c)
        _, mass = husimi_terms(g, samples)
        extra: dict = {}
        if isinstance(E, Superlevel):
            prof_of = LevelProfile(E.of, c, samples)
            m_est = prof_of.mu(E.level)
            measure = m_est.mean
            mask = prof_of.u > E.level
            extra["measure_stderr"] = m_est.stderr
        else:
            measure = s
            mask = E.contains(samples.points)
        lhs = estimate(np.where(mask, mass, 0.0), samples)
        rhs = j_value(measure, params)
        diag = _diagnostic(g, samples)
        allowed = False
        if diag is not None and is_coherent(diag):
            z0 = Point([complex(a, b) for a, b in diag["z0_fit"]])
            if isinstance(E, GeodesicBall):
                allowed = _centered_at(E, z0)
            elif isinstance(E, Superlevel):
                allowed = E.of is g or E.of == g or (isinstance(E.of, CoherentState)
                                                      and float(np.linalg.norm(E.of.z0.array - z0.array)) <= 1e-6)
            else:
                allowed = False
        extras = {**_common_extras(g, nsq), "set": E.to_dict(), "measure": measure, "coherence": diag, **extra}
        return CheckReport("faber-krahn", params, None, lhs, rhs, classify(lhs, rhs, allowed), c.seed, extras)

    return _with_rerun(run, cfg)


XLOGX = ConvexProbe("xlogx")


def wehrl_entropy(f: Function, cfg: McConfig | None = None) -> Estimate:
    """-int u_f ln u_f dm for unit f."""
    g, _ = _unit(f)
    est = integrate_probe(g, XLOGX, draw_samples(g.params, cfg or McConfig()))
    return Estimate(-est.mean, est.stderr, est.n)


def check_entropy(f: Function, cfg: McConfig | None = None) -> CheckReport:
    """Entropy lower bound, phrased as int u ln u dm <= -bound so the verdict logic is shared."""
    rep = check_wehrl(f, XLOGX, cfg)
    rep.check = "entropy"
    rep.extras["entropy"] = -rep.lhs.mean
    rep.extras["entropy_bound"] = entropy_lower_bound(rep.params)
    return rep


# --- closed-form cross-checks ----------------------------------------------------------------------


def closed_form_identities(params: SpaceParams) -> list[dict]:
    """Deterministic identities tying quadrature, J and the space normalization together.

    Each row is {name, value, expected, error, tol, ok}.
    """
    c = normalizing_constant(params)
    rows = []

    def add(name, value, expected, tol, relative=True):
        err = abs(value - expected) / (abs(expected) if relative and expected else 1.0)
        rows.append({"name": name, "value": float(value), "expected": float(expected),
                     "error": float(err), "tol": tol, "ok": bool(err <= tol)})

    add("c_alpha * rhs(power:1) = 1", c * theorem_a_rhs(ConvexProbe("power", 1.0), params), 1.0, 1e-9)
    add("j_prime(0) = 1", j_prime(0.0, params), 1.0, 1e-12)
    # 1 - c J(s) is c times the tail int_s^inf (1 + s^(1/N))^-alpha ds <= c s^(1 - alpha/N) / (alpha/N - 1)
    big, ratio = 1e12, params.alpha / params.n
    tail = c * big ** (1.0 - ratio) / (ratio - 1.0)
    add("0 <= 1 - c_alpha J(s) <= tail bound at s=1e12", 1.0 - c * j_value(big, params), 0.5 * tail,
        0.5 * tail * (1 + 1e-9) + 1e-15, relative=False)
    # J(s) is int_{|z|<r} (1-|z|^2)^alpha dm for the centered ball of measure s
    for s in (0.1, 1.0, 10.0):
        r = radius_from_measure(s, params.n)[1]
        direct = radial_reduced(lambda t, lw: np.where(t < r * r, 1.0, 0.0), params, t_breaks=(r * r,))
        add(f"J({s:g}) = ball integral of ground state", j_value(s, params), direct, 1e-9)
        h = 1e-5 * s
        fd = (j_value(s + h, params) - j_value(s - h, params)) / (2 * h)
        add(f"J'({s:g}) by central difference", fd, j_prime(s, params), 1e-6)
        fd2 = (j_prime(s + h, params) - j_prime(s - h, params)) / (2 * h)
        add(f"J''({s:g}) by central difference", fd2, j_second(s, params), 1e-5)
    add("entropy bound = -rhs(xlogx)", entropy_lower_bound(params),
        -theorem_a_rhs(ConvexProbe("xlogx"), params), 1e-12)
    if params.n == 1:
        a = params.alpha
        add("entropy bound (N=1) = alpha/(alpha-1)^2", entropy_lower_bound(params), a / (a - 1) ** 2, 1e-9)
    # ||z_1||^2 from the monomial formula vs. radial quadrature of |z_1|^2 = |z|^2 / N
    add("||z_1||^2 by quadrature", monomial_norm_sq((1,) + (0,) * (params.n - 1), params),
        c * radial_reduced(lambda t, lw: t / params.n, params), 1e-9)
    return rows
