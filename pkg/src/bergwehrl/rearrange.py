"""Distribution function, decreasing rearrangement and superlevel integrals of u_f.

All quantities of one function are estimated from a single shared sample set: the
samples are sorted by u_f once, and the running sum of their dm-weights is the
empirical distribution function.  Being a cumulative sum of positive weights it is
exactly monotone, so no extra regularisation pass is needed and the rearrangement
is its exact generalized inverse.
"""

from __future__ import annotations

import csv
import math
import warnings
from typing import Iterable, Sequence, TextIO

import numpy as np

from .quadrature import Estimate, McConfig, SampleSet, draw_samples, estimate, husimi_terms
from .space import Function, function_norm_sq, maximize_husimi

T_MIN = 1e-8


class CoverageWarning(UserWarning):
    """The requested measure lies beyond the levels resolved by the sample set."""


class LevelProfile:
    """Sampled level structure of u_f: mu(t), u*(s) and I(s) = int_{u_f > u*(s)} u_f dm."""

    def __init__(self, f: Function, cfg: McConfig | None = None, samples: SampleSet | None = None,
                 t_min: float = T_MIN):
        self.f = f
        self.cfg = cfg or McConfig()
        self.samples = samples if samples is not None else draw_samples(f.params, self.cfg)
        self.t_min = t_min
        s = self.samples
        self.log_u, self.mass = husimi_terms(f, s)
        with np.errstate(over="ignore"):
            self.u = np.exp(self.log_u)
        # per-sample estimator weight (1/n, or 1/(K n_k) under stratification)
        self._omega = s.point_weights()
        self._order = np.argsort(-self.log_u, kind="stable")
        keep = self._order[self.u[self._order] > t_min]
        self._u_sorted = self.u[keep]
        dm = self.mass[keep] / self._u_sorted  # (1 - |z|^2)^-alpha / c_alpha
        self._cum_mu = np.cumsum(dm * self._omega[keep])
        self._sup: tuple[float, np.ndarray] | None = None

    # -- distribution function -------------------------------------------------------------

    def _dm_indicator(self, t: float) -> np.ndarray:
        inside = self.u > t
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(inside, self.mass / np.where(inside, self.u, 1.0), 0.0)

    def mu(self, t: float) -> Estimate:
        """Invariant measure of {u_f > t}."""
        if not t > 0:
            raise ValueError(f"level must be positive, got {t}")
        return estimate(self._dm_indicator(t), self.samples)

    def sup(self) -> tuple[float, np.ndarray]:
        """(max u_f, argmax) from the best samples plus local ascent."""
        if self._sup is None:
            top = self.samples.points[self._order[:50]]
            self._sup = maximize_husimi(self.f, top)
        return self._sup

    def u_star(self, s: float) -> float:
        """Decreasing rearrangement: sup{t : mu(t) > s}; u*(0) is the polished maximum."""
        if s < 0:
            raise ValueError(f"measure must be nonnegative, got {s}")
        if s == 0:
            return self.sup()[0]
        k = int(np.searchsorted(self._cum_mu, s, side="right"))
        if k >= len(self._cum_mu):
            warnings.warn(f"measure {s:g} exceeds the resolved range (levels down to {self.t_min:g})",
                          CoverageWarning, stacklevel=2)
            return self.t_min
        return float(self._u_sorted[k])

    def superlevel_integral(self, s: float) -> Estimate:
        """I(s) = int_{u_f > u*(s)} u_f dm."""
        if s < 0:
            raise ValueError(f"measure must be nonnegative, got {s}")
        if s == 0:
            return Estimate(0.0, 0.0, self.samples.n)
        t = self.u_star(s)
        return estimate(np.where(self.u > t, self.mass, 0.0), self.samples)

    def set_integral(self, mask: np.ndarray) -> Estimate:
        """int_E u_f dm for E given by a boolean mask over the sample points."""
        return estimate(np.where(mask, self.mass, 0.0), self.samples)

    # -- export --------------------------------------------------------------------------------

    def table(self, levels: Iterable[float]) -> list[tuple[float, float, float]]:
        rows = []
        for t in levels:
            e = self.mu(t)
            rows.append((float(t), e.mean, e.stderr))
        return rows

    def write_csv(self, fh: TextIO, levels: Iterable[float]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mu", "stderr"])
        for t, m, e in self.table(levels):
            w.writerow([repr(t), repr(m), repr(e)])


def mu(f: Function, t: float, cfg: McConfig | None = None) -> Estimate:
    return LevelProfile(f, cfg).mu(t)


def u_star(f: Function, s: float, cfg: McConfig | None = None) -> float:
    return LevelProfile(f, cfg).u_star(s)


def superlevel_integral(f: Function, s: float, cfg: McConfig | None = None) -> Estimate:
    return LevelProfile(f, cfg).superlevel_integral(s)


def li_su_diagnostic(f: Function, t_grid: Sequence[float], cfg: McConfig | None = None,
                     profile: LevelProfile | None = None) -> list[tuple[float, float, float]]:
    """Rows (t, g(t), stderr of g) for g(t) = t^(1/alpha) (mu(t)^(1/N) + 1).

    For unit-norm f this g is expected to be nonincreasing in t on (0, max u_f).
    """
    if abs(function_norm_sq(f) - 1.0) > 1e-9:
        raise ValueError("the diagnostic is defined for unit-norm functions")
    prof = profile or LevelProfile(f, cfg)
    n, a = f.params.n, f.params.alpha
    rows = []
    for t in t_grid:
        if not 0 < t < 1:
            raise ValueError(f"levels must lie in (0, 1), got {t}")
        e = prof.mu(t)
        scale = t ** (1.0 / a)
        g = scale * (e.mean ** (1.0 / n) + 1.0)
        sg = scale * e.mean ** (1.0 / n - 1.0) * e.stderr / n if e.mean > 0 else 0.0
        rows.append((float(t), float(g), float(sg)))
    return rows


def is_nonincreasing(rows: Sequence[tuple[float, float, float]], nsigma: float = 3.0) -> bool:
    """Check that g does not increase with t beyond ``nsigma`` combined standard errors."""
    ordered = sorted(rows)
    for (t0, g0, s0), (t1, g1, s1) in zip(ordered, ordered[1:]):
        if g1 - g0 > nsigma * math.hypot(s0, s1):
            return False
    return True
