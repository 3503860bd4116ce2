"""Integration against the invariant measure dm on B_N.

Two routes are provided.  Radial integrands go through a graded composite
Gauss-Legendre rule after the substitutions t = r^2 and 1 - t = x^gamma; general
integrands go through importance-sampled Monte Carlo with |z|^2 ~ Beta(N, alpha - N)
and a uniform direction, which turns int F dm into E[F (1-|z|^2)^-alpha] / c_alpha.

Sample i is generated from a Philox stream keyed by the seed with the block index
in the counter, so a sample set depends only on (seed, n_samples, strata) and never
on how many workers produced it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import betainc, betaincc, betaincinv

from .probes import ConvexProbe
from .space import Function, SpaceParams, abs2, function_norm_sq, log_husimi, normalizing_constant

BLOCK = 8192
DEFAULT_SAMPLES = 200_000
DEFAULT_NODES = 256


class IntegrationError(RuntimeError):
    """A Monte Carlo integrand produced a non-finite value."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class DivergenceError(ArithmeticError):
    """A radial integral kept growing under refinement towards the boundary."""


@dataclass(frozen=True)
class McConfig:
    n_samples: int = DEFAULT_SAMPLES
    seed: int = 0
    strata: int = 0  # 0: plain sampling; K > 0: K equal-probability radial strata
    workers: int = 1
    orbit: int = 1  # each draw z is used at the K points exp(2 pi i j / K) z

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("need at least two samples")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.strata < 0 or (self.strata and self.n_samples < 2 * self.strata):
            raise ValueError("need at least two samples per stratum")
        if self.orbit < 1:
            raise ValueError("orbit size must be a positive integer")

    def scaled(self, factor: int) -> "McConfig":
        return McConfig(self.n_samples * factor, self.seed, self.strata, self.workers, self.orbit)

    def to_dict(self) -> dict:
        return {"n_samples": self.n_samples, "seed": self.seed, "strata": self.strata, "orbit": self.orbit}


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n}

    @classmethod
    def exact(cls, value: float) -> "Estimate":
        return cls(float(value), 0.0, 0)


@dataclass(frozen=True)
class SampleSet:
    """Points drawn from the radial Beta proposal, with log(1 - |z|^2) kept exactly.

    With ``orbit = K`` the points come in consecutive groups of K phase rotations of
    one independent draw; a group counts as a single sample for error estimates.
    """

    params: SpaceParams
    points: np.ndarray
    log_omr: np.ndarray
    strata: int
    orbit: int = 1

    @property
    def n(self) -> int:
        """Number of independent draws."""
        return len(self.log_omr) // self.orbit

    @property
    def labels(self) -> np.ndarray | None:
        """Stratum of every draw (not of every point)."""
        return np.arange(self.n) % self.strata if self.strata else None

    def point_weights(self) -> np.ndarray:
        """Weight of each point in the estimator mean; sums to one."""
        if self.strata:
            cnt = np.bincount(self.labels, minlength=self.strata)
            w = 1.0 / (self.strata * cnt[self.labels])
        else:
            w = np.full(self.n, 1.0 / self.n)
        return np.repeat(w / self.orbit, self.orbit)

    def inverse_proposal(self) -> np.ndarray:
        """(1 - |z|^2)^-alpha / c_alpha, the factor turning F into an unbiased dm-integrand."""
        c = normalizing_constant(self.params)
        with np.errstate(over="ignore"):
            return np.exp(-self.params.alpha * self.log_omr) / c


def _block(params: SpaceParams, seed: int, strata: int, b: int, size: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, b, 0]))
    u = rng.random(size)
    g = rng.standard_normal((size, 2 * params.n))
    if strata:
        k = (b * BLOCK + np.arange(size)) % strata
        u = (k + u) / strata
    # w = 1 - |z|^2 ~ Beta(alpha - N, N)
    w = betaincinv(params.alpha - params.n, params.n, u)
    w = np.clip(w, np.finfo(float).tiny, 1.0)
    d = g[:, : params.n] + 1j * g[:, params.n :]
    d /= np.linalg.norm(d, axis=1)[:, None]
    z = np.sqrt(np.maximum(1.0 - w, 0.0))[:, None] * d
    return z, np.log(w)


_SAMPLE_CACHE: dict = {}
_SAMPLE_CACHE_SIZE = 16


def draw_samples(params: SpaceParams, cfg: McConfig) -> SampleSet:
    """Sample set for ``cfg``; identical for every worker count."""
    key = (params, cfg.n_samples, cfg.seed, cfg.strata, cfg.orbit)
    hit = _SAMPLE_CACHE.get(key)
    if hit is not None:
        return hit
    nblocks = -(-cfg.n_samples // BLOCK)
    jobs = [(b, min(BLOCK, cfg.n_samples - b * BLOCK)) for b in range(nblocks)]

    def run(job):
        return _block(params, cfg.seed, cfg.strata, *job)

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(job) for job in jobs]
    z = np.concatenate([p[0] for p in parts])
    lw = np.concatenate([p[1] for p in parts])
    if cfg.orbit > 1:
        rot = np.exp(2j * np.pi * np.arange(cfg.orbit) / cfg.orbit)
        z = (z[:, None, :] * rot[None, :, None]).reshape(-1, params.n)
        lw = np.repeat(lw, cfg.orbit)
    z.flags.writeable = False
    lw.flags.writeable = False
    out = SampleSet(params, z, lw, cfg.strata, cfg.orbit)
    if len(_SAMPLE_CACHE) >= _SAMPLE_CACHE_SIZE:
        _SAMPLE_CACHE.pop(next(iter(_SAMPLE_CACHE)))
    _SAMPLE_CACHE[key] = out
    return out


def estimate(values: np.ndarray, samples: SampleSet) -> Estimate:
    """Mean and standard error of per-sample integrand values (stratum-aware)."""
    values = np.asarray(values, dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.argmax(bad))
        raise IntegrationError(f"non-finite integrand value {values[i]} at z={samples.points[i]}",
                               samples.points[i])
    if samples.orbit > 1:
        values = values.reshape(-1, samples.orbit).mean(axis=1)
    n = len(values)
    if not samples.strata:
        if n < 2:
            return Estimate(float(values.mean()), 0.0, n)
        return Estimate(float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(n)), n)
    k = samples.strata
    lab = samples.labels
    cnt = np.bincount(lab, minlength=k).astype(float)
    s1 = np.bincount(lab, weights=values, minlength=k)
    means = s1 / cnt
    dev = values - means[lab]
    var = np.bincount(lab, weights=dev * dev, minlength=k) / (cnt - 1)
    mean = float(np.mean(means))
    stderr = float(math.sqrt(max(np.sum(var / cnt), 0.0)) / k)
    return Estimate(mean, stderr, n)


def mc_integrate_invariant(F: Callable[[np.ndarray], np.ndarray], params: SpaceParams,
                           cfg: McConfig | None = None) -> Estimate:
    """Monte Carlo estimate of int_{B_N} F dm; ``F`` maps an (n, N) complex array to n values."""
    cfg = cfg or McConfig()
    samples = draw_samples(params, cfg)
    fv = np.asarray(F(samples.points), dtype=float)
    with np.errstate(invalid="ignore"):
        vals = np.where(fv == 0.0, 0.0, fv * samples.inverse_proposal())
    return estimate(vals, samples)


def husimi_terms(f: Function, samples: SampleSet) -> tuple[np.ndarray, np.ndarray]:
    """(log u_f, u_f-contribution) per sample.

    The contribution u_f (1-|z|^2)^-alpha / c_alpha equals |f|^2 / c_alpha and is
    bounded, which is what makes Phi(u_f) integrands well behaved under the proposal.
    """
    c = normalizing_constant(f.params)
    logu = log_husimi(f, samples.points, samples.log_omr)
    return logu, abs2(f, samples.points) / c


def probe_terms(f: Function, probe: ConvexProbe, samples: SampleSet, control: bool = True) -> tuple[np.ndarray, float]:
    """Per-sample integrand values and exact offset whose estimate is int Phi(u_f) dm.

    With ``control`` the identity int u_f dm = ||f||^2 / c_alpha is used as a control
    variate with coefficient Phi(1); affine probes then carry no sampling error at all.
    """
    logu, mass = husimi_terms(f, samples)
    with np.errstate(invalid="ignore"):
        ratio = np.where(mass > 0, probe.ratio_from_log(logu), 0.0)
    if not control:
        return ratio * mass, 0.0
    lam = probe.slope
    return (ratio - lam) * mass, lam * function_norm_sq(f) / normalizing_constant(f.params)


def integrate_probe(f: Function, probe: ConvexProbe, samples: SampleSet, control: bool = True) -> Estimate:
    """Estimate of int Phi(u_f) dm on a fixed sample set."""
    values, offset = probe_terms(f, probe, samples, control)
    est = estimate(values, samples)
    return Estimate(est.mean + offset, est.stderr, est.n)


# --- deterministic radial quadrature ------------------------------------------------------------


@lru_cache(maxsize=None)
def _gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    return x, w


def _graded_panels(levels: int, sigma: float, breaks: Sequence[float]) -> np.ndarray:
    left = [0.5 * sigma**k for k in range(levels)]
    right = [1.0 - 0.5 * sigma**k for k in range(1, levels)]
    pts = sorted(set([0.0, 1.0] + left + right + [b for b in breaks if 0.0 < b < 1.0]))
    return np.array(pts)


def _composite(h: Callable[[np.ndarray], np.ndarray], edges: np.ndarray, m: int) -> float:
    x, w = _gauss_legendre(m)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    vals = h(nodes.ravel()).reshape(nodes.shape)
    return math.fsum((0.5 * (b - a) * vals * w[None, :]).ravel())


def radial_reduced(H: Callable[[np.ndarray, np.ndarray], np.ndarray], params: SpaceParams,
                   nodes: int = DEFAULT_NODES, t_breaks: Sequence[float] = (),
                   levels: int = 24, sigma: float = 0.25) -> float:
    """int_{B_N} (1-|z|^2)^alpha H dm for H given as H(t, log(1-t)) with t = |z|^2.

    Equals N int_0^1 H t^(N-1) (1-t)^(alpha-N-1) dt.  For alpha - N < 1 the
    substitution 1 - t = x^(1/(alpha-N)) flattens the weight; either way the
    panels are graded geometrically towards both endpoints.
    """
    n, beta = params.n, params.alpha - params.n
    gamma = 1.0 / beta if beta < 1.0 else 1.0
    per_panel = max(8, nodes // 16)

    def integrand(x):
        log_w = gamma * np.log(x)
        t = -np.expm1(log_w)
        with np.errstate(divide="ignore", invalid="ignore"):
            hv = np.asarray(H(t, log_w), dtype=float)
            body = n * gamma * hv * t ** (n - 1) * x ** (gamma * beta - 1.0)
        return np.where(hv == 0.0, 0.0, body)

    xb = [(1.0 - tb) ** (1.0 / gamma) for tb in t_breaks]
    coarse = _composite(integrand, _graded_panels(levels, sigma, xb), per_panel)
    fine = _composite(integrand, _graded_panels(2 * levels, sigma, xb), per_panel)
    if not (math.isfinite(coarse) and math.isfinite(fine)) or abs(fine - coarse) > 1e-6 * max(1.0, abs(fine)):
        raise DivergenceError(f"radial integral does not settle under refinement ({coarse!r} -> {fine!r})")
    return fine


def radial_integrate(g: Callable[[np.ndarray], np.ndarray], params: SpaceParams,
                     nodes: int = DEFAULT_NODES) -> float:
    """2N int_0^1 g(r) r^(2N-1) (1-r^2)^(-N-1) dr, i.e. int_{B_N} g(|z|) dm."""
    a = params.alpha

    def H(t, log_w):
        gv = np.asarray(g(np.sqrt(t)), dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            return np.where(gv == 0.0, 0.0, gv * np.exp(-a * log_w))

    return radial_reduced(H, params, nodes)


def theorem_a_rhs(probe: ConvexProbe, params: SpaceParams, nodes: int = DEFAULT_NODES) -> float:
    """Sharp constant int_{B_N} Phi((1-|z|^2)^alpha) dm, attained by coherent states."""
    a = params.alpha
    breaks = []
    if probe.kind == "hinge":
        breaks.append(1.0 - probe.param ** (1.0 / a))
    return radial_reduced(lambda t, log_w: probe.ratio_from_log(a * log_w), params, nodes, breaks)


def entropy_lower_bound(params: SpaceParams) -> float:
    """Smallest possible Wehrl entropy -int u ln u dm over unit vectors."""
    return -theorem_a_rhs(ConvexProbe("xlogx"), params)


def _q(s: float, n: int) -> float:
    if s < 0:
        raise ValueError(f"measure must be nonnegative, got {s}")
    return s ** (1.0 / n)


def j_value(s: float, params: SpaceParams) -> float:
    """J(s) = int_{B_s} (1-|z|^2)^alpha dm for the centered ball of measure s.

    In the variable t = |z|^2 this is an incomplete Beta integral:
    J(s) = I_{t_s}(N, alpha - N) / c_alpha with t_s = q / (1 + q), q = s^(1/N).
    """
    n, a = params.n, params.alpha
    q = _q(s, n)
    c = normalizing_constant(params)
    if n == 1:
        return -math.expm1((1.0 - a) * math.log1p(s)) / (a - 1.0)
    if q <= 1.0:
        return float(betainc(n, a - n, q / (1.0 + q))) / c
    return float(betaincc(a - n, n, 1.0 / (1.0 + q))) / c


def j_prime(s: float, params: SpaceParams) -> float:
    """J'(s) = (1 + s^(1/N))^(-alpha)."""
    return (1.0 + _q(s, params.n)) ** (-params.alpha)


def j_second(s: float, params: SpaceParams) -> float:
    """J''(s) = -alpha s J'(s) / (N s^((2N-1)/N) + N s^2)."""
    n, a = params.n, params.alpha
    if s == 0:
        return -a if n == 1 else -math.inf
    return -a * s * j_prime(s, params) / (n * s ** ((2 * n - 1) / n) + n * s * s)
