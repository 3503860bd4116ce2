"""Catalog of convex test functions Phi on [0, 1] with Phi(0) = 0."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConvexProbe:
    """A convex Phi:[0,1] -> R with Phi(0) = 0.

    ``kind`` is one of ``"power"`` (Phi(s) = s**p, p >= 1), ``"hinge"``
    (Phi(s) = max(s - t, 0), 0 < t < 1) or ``"xlogx"`` (Phi(s) = s ln s).
    """

    kind: str
    param: float | None = None

    def __post_init__(self):
        if self.kind == "power":
            if self.param is None or not self.param >= 1.0:
                raise ValueError(f"power probe needs exponent p >= 1, got {self.param}")
            object.__setattr__(self, "param", float(self.param))
        elif self.kind == "hinge":
            if self.param is None or not 0.0 < self.param < 1.0:
                raise ValueError(f"hinge threshold must lie in (0, 1), got {self.param}")
            object.__setattr__(self, "param", float(self.param))
        elif self.kind == "xlogx":
            object.__setattr__(self, "param", None)
        else:
            raise ValueError(f"unknown probe kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "ConvexProbe":
        """Parse ``power:<p>``, ``hinge:<t>`` or ``xlogx``."""
        head, _, tail = text.strip().partition(":")
        if head == "xlogx":
            if tail:
                raise ValueError("xlogx takes no parameter")
            return cls("xlogx")
        if head in ("power", "hinge"):
            try:
                return cls(head, float(tail))
            except ValueError as exc:
                raise ValueError(f"bad probe spec {text!r}: {exc}") from None
        raise ValueError(f"unknown probe spec {text!r}")

    @property
    def label(self) -> str:
        if self.kind == "xlogx":
            return "xlogx"
        return f"{self.kind}:{self.param:g}"

    @property
    def is_affine(self) -> bool:
        return self.kind == "power" and self.param == 1.0

    @property
    def slope(self) -> float:
        """Chord slope Phi(1) - Phi(0); the coefficient of the exact linear control variate."""
        return float(self.phi(1.0))

    def phi(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "power":
            return s**self.param
        if self.kind == "hinge":
            return np.maximum(s - self.param, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(s > 0, s * np.log(np.where(s > 0, s, 1.0)), 0.0)

    def dphi(self, s):
        """Right derivative of Phi (``-inf`` at 0 for xlogx)."""
        s = np.asarray(s, dtype=float)
        if self.kind == "power":
            p = self.param
            return p * s ** (p - 1.0) if p != 1.0 else np.ones_like(s)
        if self.kind == "hinge":
            return (s >= self.param).astype(float)
        with np.errstate(divide="ignore"):
            return np.log(s) + 1.0

    def ratio_from_log(self, log_s):
        """Phi(s) / s evaluated from log s, robust where s underflows."""
        log_s = np.asarray(log_s, dtype=float)
        if self.kind == "power":
            if self.param == 1.0:
                return np.ones_like(log_s)
            return np.exp((self.param - 1.0) * log_s)
        if self.kind == "hinge":
            lt = np.log(self.param)
            above = log_s > lt
            return np.where(above, -np.expm1(lt - np.where(above, log_s, lt)), 0.0)
        return log_s.copy()

    def dphi_from_log(self, log_s):
        log_s = np.asarray(log_s, dtype=float)
        if self.kind == "power":
            if self.param == 1.0:
                return np.ones_like(log_s)
            return self.param * np.exp((self.param - 1.0) * log_s)
        if self.kind == "hinge":
            return (log_s >= np.log(self.param)).astype(float)
        return log_s + 1.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "param": self.param}
