"""Multiplicative noise coefficients h(t, u) and their envelope functions.

Every model provides the coefficient ``h``, the growth envelope ``gamma``
(|h|^2 <= gamma |u|^2), the dissipation envelope ``rho``
(|h u|^2 >= rho |u|^4) and the long-time constants ``gamma0``, ``rho0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NotFinite


def _rational_factor(t):
    t2 = np.asarray(t, dtype=float) ** 2
    return (2 + t2) / (1 + t2)


@dataclass(frozen=True)
class NoiseModel:
    kind: str
    alpha: float = 0.0
    gamma0: float = 0.0
    rho0: float = 0.0
    # custom models only
    h_fn: Callable | None = field(default=None, compare=False, repr=False)
    gamma_fn: Callable | None = field(default=None, compare=False, repr=False)
    rho_fn: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "rational", "custom"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.gamma0 < 0 or self.rho0 < 0:
            raise ValueError("gamma0 and rho0 must be nonnegative")
        if self.kind == "custom" and self.h_fn is None:
            raise ValueError("custom noise needs h_fn")

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls) -> "NoiseModel":
        return cls("zero")

    @classmethod
    def linear(cls, alpha: float) -> "NoiseModel":
        a2 = float(alpha) * float(alpha)
        return cls("linear", alpha=float(alpha), gamma0=a2, rho0=a2)

    @classmethod
    def rational(cls, gamma0: float = 64.0, rho0: float = 1.0) -> "NoiseModel":
        return cls("rational", gamma0=gamma0, rho0=rho0)

    @classmethod
    def custom(cls, h, gamma, rho, gamma0, rho0) -> "NoiseModel":
        return cls("custom", gamma0=gamma0, rho0=rho0, h_fn=h, gamma_fn=gamma, rho_fn=rho)

    # -- evaluation ---------------------------------------------------------
    def h(self, t, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(u)
        if self.kind == "linear":
            return self.alpha * u
        return self.ratio(t, u) * u if self.kind == "rational" else np.asarray(self.h_fn(t, u), dtype=float)

    def ratio(self, t, u):
        """``h(t, u) / u`` extended continuously to ``u = 0``."""
        u = np.asarray(u, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(u)
        if self.kind == "linear":
            return np.full_like(u, self.alpha)
        if self.kind == "rational":
            u2 = u * u
            return _rational_factor(t) * (1 + u2) / (2 + u2)
        # custom: secant slope, with a tiny probe at u = 0
        probe = np.where(u == 0, 1e-8, u)
        return np.asarray(self.h_fn(t, probe), dtype=float) / probe

    def gamma(self, t):
        if self.kind == "zero":
            return np.zeros_like(np.asarray(t, dtype=float))
        if self.kind == "linear":
            return np.full_like(np.asarray(t, dtype=float), self.alpha**2)
        if self.kind == "rational":
            return 16 * _rational_factor(t) ** 2
        return np.asarray(self.gamma_fn(t), dtype=float)

    def rho(self, t):
        if self.kind == "zero":
            return np.zeros_like(np.asarray(t, dtype=float))
        if self.kind == "linear":
            return np.full_like(np.asarray(t, dtype=float), self.alpha**2)
        if self.kind == "rational":
            return (_rational_factor(t) / 2) ** 2
        return np.asarray(self.rho_fn(t), dtype=float)

    # -- config round trip -------------------------------------------------
    def to_dict(self) -> dict:
        if self.kind == "linear":
            return {"kind": "linear", "alpha": self.alpha}
        if self.kind == "rational":
            return {"kind": "rational", "gamma0": self.gamma0, "rho0": self.rho0}
        if self.kind == "zero":
            return {"kind": "zero"}
        raise ValueError("custom noise models are not serializable")

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        kind = d.get("kind")
        if kind == "linear":
            return cls.linear(float(d["alpha"]))
        if kind == "rational":
            return cls.rational(float(d.get("gamma0", 64.0)), float(d.get("rho0", 1.0)))
        if kind == "zero":
            return cls.zero()
        raise ValueError(f"unknown noise kind {kind!r}")

    @classmethod
    def parse(cls, text: str) -> "NoiseModel":
        """Parse ``zero``, ``rational`` or ``linear:alpha=3.0`` style strings."""
        kind, _, rest = text.partition(":")
        params = {}
        for item in filter(None, rest.split(",")):
            key, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"malformed noise parameter {item!r}")
            params[key.strip()] = float(value)
        return cls.from_dict({"kind": kind.strip(), **params})


def eval_h(model: NoiseModel, t: float, u):
    return model.h(t, u)


@dataclass
class HypothesisReport:
    h0_max: float  # max |h(t, 0)|
    h1_worst: float  # max of |h|^2 - gamma |u|^2, should be <= 0
    h1_where: tuple
    h2_worst: float  # max of rho |u|^4 - |h u|^2, should be <= 0
    h2_where: tuple
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_hypotheses(model: NoiseModel, ts, us, rtol: float = 1e-12, gamma=None, rho=None) -> HypothesisReport:
    """Worst-case violations of h(t,0)=0 and the two envelope bounds on a sample grid.

    ``gamma`` / ``rho`` override the model's envelopes (callables of t).
    A sample counts as a violation when it exceeds zero by more than
    ``rtol`` times the magnitude of the compared terms.
    """
    gamma = model.gamma if gamma is None else gamma
    rho = model.rho if rho is None else rho
    T, U = np.meshgrid(np.asarray(ts, dtype=float), np.asarray(us, dtype=float), indexing="ij")
    hv = model.h(T, U)
    g = np.broadcast_to(np.asarray(gamma(T), dtype=float), T.shape)
    r = np.broadcast_to(np.asarray(rho(T), dtype=float), T.shape)
    h0 = np.abs(model.h(np.asarray(ts, dtype=float), np.zeros(len(ts))))

    a1, b1 = hv**2, g * U**2
    e1 = a1 - b1
    nz = U != 0
    a2, b2 = r * U**4, (hv * U) ** 2
    e2 = np.where(nz, a2 - b2, -np.inf)
    violations = []
    bad1 = e1 > rtol * np.maximum(a1, b1)
    bad2 = nz & (e2 > rtol * np.maximum(a2, b2))
    for i, j in zip(*np.nonzero(bad1)):
        violations.append(("H1", float(T[i, j]), float(U[i, j]), float(e1[i, j])))
    for i, j in zip(*np.nonzero(bad2)):
        violations.append(("H2", float(T[i, j]), float(U[i, j]), float(e2[i, j])))
    for t, v in zip(ts, h0):
        if v != 0:
            violations.append(("H0", float(t), 0.0, float(v)))
    i1 = np.unravel_index(np.argmax(e1), e1.shape)
    i2 = np.unravel_index(np.argmax(e2), e2.shape)
    return HypothesisReport(
        h0_max=float(h0.max(initial=0.0)),
        h1_worst=float(e1[i1]),
        h1_where=(float(T[i1]), float(U[i1])),
        h2_worst=float(e2[i2]),
        h2_where=(float(T[i2]), float(U[i2])),
        violations=violations,
    )


def cesaro_estimate(f: Callable, T: float, steps: int = 10_000) -> float:
    """Composite-trapezoid value of (1/T) * integral_0^T f."""
    if not T > 0:
        raise ValueError("T must be positive")
    if steps < 10:
        raise ValueError("need at least 10 steps")
    t = np.linspace(0.0, T, steps + 1)
    try:
        vals = np.broadcast_to(np.asarray(f(t), dtype=float), t.shape)
    except (TypeError, ValueError):
        vals = np.array([float(f(s)) for s in t])
    if not np.all(np.isfinite(vals)):
        raise NotFinite("integrand returned NaN or Inf")
    w = np.ones(steps + 1)
    w[0] = w[-1] = 0.5
    return math.fsum(w * vals) / math.fsum(w)
