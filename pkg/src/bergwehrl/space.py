"""Weighted Bergman spaces on the unit ball: parameters, functions and exact monomial calculus.

Inner products are conjugate-linear in the first argument,
<f, g> = c_alpha * int conj(f) g (1 - |z|^2)^alpha dm, and the monomials z^m are
orthogonal with ||z^m||^2 = m! Gamma(alpha) / Gamma(alpha + |m|).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from .geometry import Point, as_points

DEFAULT_DEGREE_CAP = 24


@dataclass(frozen=True)
class SpaceParams:
    """Dimension ``n`` and weight ``alpha > n`` of the space A_alpha on B_n."""

    n: int
    alpha: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "alpha", float(self.alpha))
        if not (math.isfinite(self.alpha) and self.alpha > self.n):
            raise ValueError(f"need alpha > N, got alpha={self.alpha}, N={self.n}")

    @classmethod
    def from_k(cls, n: int, k: int) -> "SpaceParams":
        """Space carrying the k-th discrete series representation of SU(n, 1)."""
        if int(k) != k or k < 1:
            raise ValueError(f"k must be a positive integer, got {k}")
        return cls(n, (n + 1) * int(k))

    @property
    def c_alpha(self) -> float:
        return normalizing_constant(self)

    @property
    def wehrl_k(self) -> int | None:
        """k with alpha = (N + 1) k, or None when alpha is not of that form."""
        k = self.alpha / (self.n + 1)
        return int(round(k)) if abs(k - round(k)) < 1e-12 and round(k) >= 1 else None

    def to_dict(self) -> dict:
        return {"n": self.n, "alpha": self.alpha}


def normalizing_constant(params: SpaceParams) -> float:
    """c_alpha = Gamma(alpha) / (N! Gamma(alpha - N))."""
    a, n = params.alpha, params.n
    return math.exp(gammaln(a) - gammaln(n + 1) - gammaln(a - n))


def monomial_norm_sq(m: Sequence[int], params: SpaceParams) -> float:
    """||z^m||^2 = m! Gamma(alpha) / Gamma(alpha + |m|)."""
    m = tuple(int(k) for k in m)
    if len(m) != params.n or min(m) < 0:
        raise ValueError(f"invalid multi-index {m} for N={params.n}")
    deg = sum(m)
    log_fact = sum(gammaln(k + 1) for k in m)
    return math.exp(log_fact + gammaln(params.alpha) - gammaln(params.alpha + deg))


@lru_cache(maxsize=None)
def multi_indices(n: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices of length ``n`` with total degree <= ``degree``, graded then lexicographic."""
    out = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(n), d):
            m = [0] * n
            for i in combo:
                m[i] += 1
            out.append(tuple(m))
    # combinations_with_replacement walks (0,0,..) first; keep a stable, readable order
    return tuple(sorted(out, key=lambda m: (sum(m), tuple(-k for k in m))))


def monomial_matrix(indices: Sequence[tuple[int, ...]], z: np.ndarray) -> np.ndarray:
    """Matrix of z^m values, shape (n_points, len(indices))."""
    z = np.asarray(z, dtype=complex)
    if not indices:
        return np.zeros((z.shape[0], 0), dtype=complex)
    top = max(max(m) for m in indices)
    powers = np.ones((top + 1,) + z.shape, dtype=complex)
    for k in range(1, top + 1):
        powers[k] = powers[k - 1] * z
    idx = np.asarray(indices, dtype=np.intp)
    out = powers[idx[:, 0], :, 0]
    for i in range(1, idx.shape[1]):
        out = out * powers[idx[:, i], :, i]
    return np.ascontiguousarray(out.T)


def _clean_index(m, n: int) -> tuple[int, ...]:
    m = tuple(int(k) for k in m)
    if len(m) != n or any(k < 0 for k in m):
        raise ValueError(f"invalid multi-index {m} for N={n}")
    return m


class PolyFunction:
    """Holomorphic polynomial sum_m c_m z^m stored as a sparse map multi-index -> coefficient."""

    def __init__(self, params: SpaceParams, coeffs: Mapping, degree_cap: int = DEFAULT_DEGREE_CAP):
        self.params = params
        clean: dict[tuple[int, ...], complex] = {}
        for m, c in coeffs.items():
            m = _clean_index(m, params.n)
            c = complex(c)
            if not (math.isfinite(c.real) and math.isfinite(c.imag)):
                raise ValueError(f"non-finite coefficient at {m}")
            if c != 0:
                clean[m] = clean.get(m, 0j) + c
        self.coeffs = {m: c for m, c in sorted(clean.items(), key=lambda kv: (sum(kv[0]), kv[0])) if c != 0}
        if self.degree > degree_cap:
            raise ValueError(f"degree {self.degree} exceeds the cap {degree_cap}")

    @classmethod
    def constant(cls, params: SpaceParams, value: complex = 1.0) -> "PolyFunction":
        return cls(params, {(0,) * params.n: value})

    @classmethod
    def monomial(cls, params: SpaceParams, m: Sequence[int], coeff: complex = 1.0) -> "PolyFunction":
        return cls(params, {tuple(m): coeff})

    @property
    def degree(self) -> int:
        return max((sum(m) for m in self.coeffs), default=0)

    @property
    def norm_sq(self) -> float:
        return inner_product(self, self).real

    def normalized(self) -> "PolyFunction":
        nrm = math.sqrt(self.norm_sq)
        if nrm == 0:
            raise ValueError("cannot normalize the zero function")
        return self / nrm

    def _combine(self, other: "PolyFunction", sign: float) -> "PolyFunction":
        if other.params != self.params:
            raise ValueError("functions live in different spaces")
        out = dict(self.coeffs)
        for m, c in other.coeffs.items():
            out[m] = out.get(m, 0j) + sign * c
        return PolyFunction(self.params, out, degree_cap=max(self.degree, other.degree, DEFAULT_DEGREE_CAP))

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, scalar):
        return PolyFunction(self.params, {m: c * scalar for m, c in self.coeffs.items()},
                            degree_cap=max(self.degree, DEFAULT_DEGREE_CAP))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)

    def __neg__(self):
        return self * -1.0

    def __eq__(self, other):
        return isinstance(other, PolyFunction) and self.params == other.params and self.coeffs == other.coeffs

    def __repr__(self):
        terms = " + ".join(f"({c:.6g})z^{m}" for m, c in self.coeffs.items()) or "0"
        return f"PolyFunction(N={self.params.n}, alpha={self.params.alpha:g}: {terms})"

    def coefficient_vector(self, indices: Sequence[tuple[int, ...]]) -> np.ndarray:
        return np.array([self.coeffs.get(m, 0j) for m in indices], dtype=complex)


@dataclass(frozen=True)
class CoherentState:
    """The unit vector exp(i theta) phi_{z0}; ``z0 = 0`` is the constant function 1."""

    params: SpaceParams
    z0: Point
    theta: float = 0.0

    def __post_init__(self):
        if not isinstance(self.z0, Point):
            object.__setattr__(self, "z0", Point(self.z0))
        if self.z0.dim != self.params.n:
            raise ValueError(f"center has dimension {self.z0.dim}, space has N={self.params.n}")

    @property
    def norm_sq(self) -> float:
        return 1.0


@dataclass
class MixedState:
    """Density operator sum_i w_i |psi_i><psi_i| with orthonormal polynomial ``states``."""

    weights: np.ndarray
    states: list = field(default_factory=list)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != len(self.states) or len(w) == 0:
            raise ValueError("need one positive weight per state")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError(f"weights must be positive, got {w}")
        params = self.states[0].params
        if any(s.params != params for s in self.states):
            raise ValueError("states live in different spaces")
        gram = gram_matrix(self.states)
        off = np.max(np.abs(gram - np.eye(len(self.states))))
        if off > 1e-6:
            raise ValueError(f"states are not orthonormal (Gram deviation {off:.3g})")
        if off > 1e-12:
            self.states = gram_schmidt(self.states)
        self.weights = w / math.fsum(w)

    @property
    def params(self) -> SpaceParams:
        return self.states[0].params

    @property
    def norm_sq(self) -> float:
        # trace of the density operator
        return 1.0

    @property
    def rank(self) -> int:
        return len(self.states)


Function = Union[PolyFunction, CoherentState, MixedState]


def inner_product(f: PolyFunction, g: PolyFunction) -> complex:
    """Exact <f, g>, conjugate-linear in ``f``."""
    if f.params != g.params:
        raise ValueError("functions live in different spaces")
    small, large = (f.coeffs, g.coeffs) if len(f.coeffs) <= len(g.coeffs) else (g.coeffs, f.coeffs)
    terms = []
    for m in small:
        if m in large:
            terms.append(np.conj(f.coeffs[m]) * g.coeffs[m] * monomial_norm_sq(m, f.params))
    return complex(sum(terms, 0j))


def gram_matrix(fs: Sequence[PolyFunction]) -> np.ndarray:
    k = len(fs)
    g = np.empty((k, k), dtype=complex)
    for i in range(k):
        for j in range(k):
            g[i, j] = inner_product(fs[i], fs[j])
    return g


class RankDeficientError(ValueError):
    """Raised by :func:`gram_schmidt` with ``index`` of the first dependent input."""

    def __init__(self, index: int, det: float):
        super().__init__(f"input {index} is linearly dependent on the preceding ones (Gram determinant {det:.3g})")
        self.index = index


def gram_schmidt(fs: Sequence[PolyFunction], tol: float = 1e-12) -> list[PolyFunction]:
    """Orthonormalize with exact inner products (modified Gram-Schmidt, one re-pass)."""
    out: list[PolyFunction] = []
    det = 1.0
    for idx, f in enumerate(fs):
        nrm0 = math.sqrt(f.norm_sq)
        if nrm0 == 0:
            raise RankDeficientError(idx, 0.0)
        v = f / nrm0
        for _ in range(2):
            for q in out:
                v = v - q * inner_product(q, v)
        res = v.norm_sq
        det *= res
        if det <= tol:
            raise RankDeficientError(idx, det)
        out.append(v / math.sqrt(res))
    return out


# --- pointwise evaluation -------------------------------------------------------------------


def _points(f: Function, z) -> tuple[np.ndarray, bool]:
    single = isinstance(z, Point) or np.ndim(z) <= 1
    return as_points(z, f.params.n), single


def _coherent_values(cs: CoherentState, z: np.ndarray) -> np.ndarray:
    a = cs.params.alpha
    z0 = cs.z0.array
    base = 1.0 - z @ np.conj(z0)
    return np.exp(1j * cs.theta) * (1.0 - cs.z0.norm_sq) ** (a / 2) * base ** (-a)


def evaluate(f: PolyFunction | CoherentState, z):
    """Pointwise value f(z); ``z`` may be a Point, a coordinate vector or an (n, N) array."""
    pts, single = _points(f, z)
    if isinstance(f, CoherentState):
        vals = _coherent_values(f, pts)
    elif isinstance(f, PolyFunction):
        idx = list(f.coeffs)
        vals = monomial_matrix(idx, pts) @ f.coefficient_vector(idx) if idx else np.zeros(len(pts), complex)
    else:
        raise TypeError(f"cannot evaluate {type(f).__name__} pointwise; use husimi")
    return complex(vals[0]) if single else vals


def kernel_eval(w: Point, z: Point, params: SpaceParams) -> complex:
    """Reproducing kernel K_w(z) = (1 - <z, w>)^(-alpha), principal branch."""
    base = 1.0 - np.sum(as_points(z, params.n)[0] * np.conj(as_points(w, params.n)[0]))
    return complex(base ** (-params.alpha))


def abs2(f: Function, z: np.ndarray) -> np.ndarray:
    """|f(z)|^2, or sum_i w_i |psi_i(z)|^2 for a mixed state, on an (n, N) array."""
    if isinstance(f, MixedState):
        out = np.zeros(len(z))
        for w, psi in zip(f.weights, f.states):
            out += w * np.abs(evaluate(psi, z)) ** 2
        return out
    return np.abs(evaluate(f, z)) ** 2


def log_husimi(f: Function, z: np.ndarray, log_omr: np.ndarray | None = None) -> np.ndarray:
    """log u_f(z); ``log_omr`` optionally supplies an accurate log(1 - |z|^2)."""
    if log_omr is None:
        log_omr = np.log1p(-np.sum(np.abs(z) ** 2, axis=1))
    a = f.params.alpha
    if isinstance(f, CoherentState):
        x = z @ np.conj(f.z0.array)
        return a * (math.log1p(-f.z0.norm_sq) + log_omr - 2.0 * np.log(np.abs(1.0 - x)))
    with np.errstate(divide="ignore"):
        return np.log(abs2(f, z)) + a * log_omr


def husimi(f: Function, z):
    """u_f(z) = |f(z)|^2 (1 - |z|^2)^alpha, or the mixture sum_i w_i u_{psi_i}(z)."""
    pts, single = _points(f, z)
    vals = np.exp(log_husimi(f, pts))
    return float(vals[0]) if single else vals


def function_norm_sq(f: Function) -> float:
    return float(f.norm_sq)


def function_degree(f: Function) -> int | None:
    if isinstance(f, PolyFunction):
        return f.degree
    if isinstance(f, MixedState):
        return max(s.degree for s in f.states)
    return None


def expand_coherent(cs: CoherentState, degree: int) -> PolyFunction:
    """Taylor polynomial of exp(i theta) phi_{z0} about 0 up to total degree ``degree``.

    Coefficient of z^m is e^{i theta} (1-|z0|^2)^{alpha/2} (alpha)_{|m|} / m! conj(z0)^m.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    p = cs.params
    a = p.alpha
    conj0 = np.conj(cs.z0.array)
    pref = np.exp(1j * cs.theta) * (1.0 - cs.z0.norm_sq) ** (a / 2)
    coeffs = {}
    for m in multi_indices(p.n, degree):
        mono = np.prod([conj0[i] ** k for i, k in enumerate(m)]) if any(m) else 1.0
        if mono == 0:
            continue
        log_mag = gammaln(a + sum(m)) - gammaln(a) - sum(gammaln(k + 1) for k in m)
        coeffs[m] = pref * math.exp(log_mag) * mono
    return PolyFunction(p, coeffs, degree_cap=max(degree, DEFAULT_DEGREE_CAP))


def coherent_overlap(cs: CoherentState, f: Function, extra_degree: int = 10) -> float:
    """|<phi_{z0}, f>|^2, by exact monomial calculus against a truncated expansion.

    For two coherent states the closed form (1 - |Upsilon_a(b)|^2)^alpha is used.
    """
    if isinstance(f, CoherentState):
        a, b = cs.z0.array, f.z0.array
        num = (1.0 - cs.z0.norm_sq) * (1.0 - f.z0.norm_sq)
        return float((num / abs(1.0 - np.vdot(a, b)) ** 2) ** cs.params.alpha)
    if isinstance(f, MixedState):
        return float(sum(w * coherent_overlap(cs, psi, extra_degree) for w, psi in zip(f.weights, f.states)))
    trunc = expand_coherent(cs, f.degree + extra_degree)
    return float(abs(inner_product(trunc, f)) ** 2)


def maximize_husimi(f: Function, starts: np.ndarray, polish: int = 5) -> tuple[float, np.ndarray]:
    """Largest u_f found by local ascent from the best ``polish`` rows of ``starts``.

    Ascent runs in the unconstrained chart z = y / sqrt(1 + |y|^2).
    """
    n = f.params.n
    starts = np.asarray(starts, dtype=complex).reshape(-1, n)
    logu = log_husimi(f, starts)
    order = np.argsort(-logu, kind="stable")
    best_val, best_z = -np.inf, starts[order[0]] if len(starts) else np.zeros(n, complex)
    if len(starts):
        best_val = float(logu[order[0]])
    if not np.isfinite(best_val):
        return 0.0, best_z

    def to_z(y):
        c = y[:n] + 1j * y[n:]
        return c / math.sqrt(1.0 + float(np.real(np.vdot(c, c))))

    def objective(y):
        z = to_z(y)[None, :]
        val = log_husimi(f, z)[0]
        return -val if np.isfinite(val) else 1e300

    for i in order[:polish]:
        z = starts[i]
        y0c = z / math.sqrt(max(1.0 - float(np.real(np.vdot(z, z))), 1e-300))
        y0 = np.concatenate([y0c.real, y0c.imag])
        res = minimize(objective, y0, method="BFGS", options={"gtol": 1e-12, "maxiter": 400})
        if -res.fun > best_val:
            best_val, best_z = float(-res.fun), to_z(res.x)
    return math.exp(best_val), best_z


def random_poly(params: SpaceParams, degree: int, rng: np.random.Generator) -> PolyFunction:
    """Unit-norm polynomial with independent standard complex Gaussian coordinates in the orthonormal monomial basis."""
    idx = multi_indices(params.n, degree)
    g = np.array([monomial_norm_sq(m, params) for m in idx])
    a = (rng.standard_normal(len(idx)) + 1j * rng.standard_normal(len(idx))) / math.sqrt(2)
    a /= np.linalg.norm(a)
    return PolyFunction(params, dict(zip(idx, a / np.sqrt(g))))


def random_mixed(params: SpaceParams, rank: int, degree: int, rng: np.random.Generator) -> MixedState:
    states = gram_schmidt([random_poly(params, degree, rng) for _ in range(rank)])
    w = rng.uniform(0.1, 1.0, size=rank)
    return MixedState(w / w.sum(), states)


# --- JSON documents ---------------------------------------------------------------------------


def _cx(c: complex) -> list[float]:
    return [float(c.real), float(c.imag)]


def _poly_body(f: PolyFunction) -> list:
    return [[list(m), _cx(c)] for m, c in f.coeffs.items()]


def to_document(f: Function) -> dict:
    """JSON-ready document; complex numbers are [re, im] pairs."""
    doc: dict = {"params": f.params.to_dict()}
    if isinstance(f, PolyFunction):
        doc.update(kind="poly", coeffs=_poly_body(f))
    elif isinstance(f, CoherentState):
        doc.update(kind="coherent", z0=[_cx(c) for c in f.z0.coords], theta=float(f.theta))
    elif isinstance(f, MixedState):
        doc.update(kind="mixed", weights=[float(w) for w in f.weights], states=[_poly_body(s) for s in f.states])
    else:
        raise TypeError(f"cannot serialize {type(f).__name__}")
    return doc


def _poly_from_body(params: SpaceParams, body: Iterable) -> PolyFunction:
    coeffs = {tuple(m): complex(re, im) for m, (re, im) in body}
    cap = max([sum(m) for m in coeffs] + [DEFAULT_DEGREE_CAP])
    return PolyFunction(params, coeffs, degree_cap=cap)


def from_document(doc: Mapping) -> Function:
    params = SpaceParams(doc["params"]["n"], doc["params"]["alpha"])
    kind = doc["kind"]
    if kind == "poly":
        return _poly_from_body(params, doc["coeffs"])
    if kind == "coherent":
        return CoherentState(params, Point([complex(re, im) for re, im in doc["z0"]]), doc.get("theta", 0.0))
    if kind == "mixed":
        states = [_poly_from_body(params, body) for body in doc["states"]]
        m = MixedState.__new__(MixedState)
        m.weights = np.asarray(doc["weights"], dtype=float)
        m.states = states
        # weights and states were validated when the document was written; keep them bit-exact
        gram = gram_matrix(states)
        if np.max(np.abs(gram - np.eye(len(states)))) > 1e-6 or np.any(m.weights <= 0):
            raise ValueError("mixed-state document is not a valid density operator")
        return m
    raise ValueError(f"unknown function kind {kind!r}")


def dumps(f: Function) -> str:
    return json.dumps(to_document(f))


def loads(text: str) -> Function:
    return from_document(json.loads(text))
