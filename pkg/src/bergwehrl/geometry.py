"""Points of the complex unit ball, Moebius automorphisms and geodesic-ball measures.

Everything here works on the Hermitian structure of C^N with
<z, w> = sum_k z_k conj(w_k).  Array routines accept stacks of points with
shape (n, N); the :class:`Point` wrapper is the validated scalar form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

#: largest admissible squared norm of a point inside the ball
BOUNDARY_TOL = 1e-14


@dataclass(frozen=True)
class Point:
    """An immutable point of the open unit ball B_N."""

    coords: tuple[complex, ...]

    def __init__(self, coords: Iterable[complex] | complex):
        if np.isscalar(coords):
            coords = (coords,)
        values = tuple(complex(c) for c in coords)
        if not values:
            raise ValueError("a point needs at least one coordinate")
        if not all(math.isfinite(c.real) and math.isfinite(c.imag) for c in values):
            raise ValueError(f"non-finite coordinates {values}")
        object.__setattr__(self, "coords", values)
        if self.norm_sq > 1.0 - BOUNDARY_TOL:
            raise ValueError(f"point {values} is not inside the unit ball (|z|^2 = {self.norm_sq!r})")

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def norm_sq(self) -> float:
        return math.fsum(c.real * c.real + c.imag * c.imag for c in self.coords)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=complex)

    @classmethod
    def origin(cls, n: int) -> "Point":
        return cls((0j,) * n)

    def __len__(self) -> int:
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)


def as_points(z, dim: int | None = None) -> np.ndarray:
    """Coerce a Point, a coordinate sequence or an (n, N) array to a complex (n, N) array."""
    if isinstance(z, Point):
        arr = z.array[None, :]
    else:
        arr = np.asarray(z, dtype=complex)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr[None, :] if dim is None or arr.shape[0] == dim else arr[:, None]
    if dim is not None and arr.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got {arr.shape[1]}")
    return arr


def hermitian_inner(z: Point | Sequence[complex], w: Point | Sequence[complex]) -> complex:
    """Return sum_k z_k conj(w_k)."""
    zz = np.asarray(list(z), dtype=complex)
    ww = np.asarray(list(w), dtype=complex)
    if zz.shape != ww.shape:
        raise ValueError(f"dimension mismatch: {zz.shape[0]} vs {ww.shape[0]}")
    return complex(np.sum(zz * np.conj(ww)))


def mobius_array(z0: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Vectorised involutive automorphism exchanging ``z0`` and the origin.

    ``z0`` has shape (N,), ``z`` shape (n, N).  ``z0 = 0`` gives the identity.
    """
    z0 = np.asarray(z0, dtype=complex)
    z = np.asarray(z, dtype=complex)
    a2 = float(np.real(np.vdot(z0, z0)))
    if a2 == 0.0:
        return z.copy()
    zdot = z @ np.conj(z0)  # <z, z0>
    proj = (zdot / a2)[:, None] * z0[None, :]
    num = z0[None, :] - proj - math.sqrt(1.0 - a2) * (z - proj)
    return num / (1.0 - zdot)[:, None]


def mobius(z0: Point, z: Point) -> Point:
    """Apply the automorphism of B_N that swaps ``z0`` and 0 to the point ``z``."""
    if z0.dim != z.dim:
        raise ValueError(f"dimension mismatch: {z0.dim} vs {z.dim}")
    out = mobius_array(z0.array, z.array[None, :])[0]
    # the image of an interior point is interior; rounding can only touch 1 - 1e-14 for inputs that close
    return Point(out)


def invariant_density(z: Point) -> float:
    """Density (1 - |z|^2)^-(N+1) of the invariant measure against normalized volume."""
    return (1.0 - z.norm_sq) ** (-(z.dim + 1))


def ball_measure_from_radius(rho: float, n: int) -> float:
    """Invariant measure sinh(rho)^(2N) of a geodesic ball of hyperbolic radius ``rho``."""
    if rho < 0:
        raise ValueError(f"hyperbolic radius must be nonnegative, got {rho}")
    return math.sinh(rho) ** (2 * n)


def radius_from_measure(s: float, n: int) -> tuple[float, float]:
    """Return (hyperbolic radius, Euclidean radius) of a centered ball of invariant measure ``s``."""
    if s < 0:
        raise ValueError(f"measure must be nonnegative, got {s}")
    q = s ** (1.0 / (2 * n))
    return math.asinh(q), q / math.sqrt(1.0 + q * q)


def measure_of_euclidean_ball(r: float, n: int) -> float:
    """Invariant measure of the centered Euclidean ball {|z| < r}: (r^2 / (1 - r^2))^N."""
    if not 0.0 <= r < 1.0:
        raise ValueError(f"radius must lie in [0, 1), got {r}")
    return (r * r / (1.0 - r * r)) ** n


@dataclass(frozen=True)
class BallSpec:
    """Geodesic ball {z : |mobius(center, z)| < tanh(rho)} of invariant measure ``measure_s``."""

    center: Point
    measure_s: float

    def __post_init__(self):
        if not (self.measure_s >= 0 and math.isfinite(self.measure_s)):
            raise ValueError(f"ball measure must be finite and nonnegative, got {self.measure_s}")

    @property
    def hyperbolic_radius(self) -> float:
        return radius_from_measure(self.measure_s, self.center.dim)[0]

    @property
    def euclidean_radius(self) -> float:
        return radius_from_measure(self.measure_s, self.center.dim)[1]

    def contains(self, z: np.ndarray) -> np.ndarray:
        z = as_points(z, self.center.dim)
        w = mobius_array(self.center.array, z)
        r = self.euclidean_radius
        return np.sum(np.abs(w) ** 2, axis=1) < r * r
