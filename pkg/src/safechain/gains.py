"""Strictly increasing time-varying gain functions and their calculus.

Three families are supported, all positive at t=0, strictly increasing and
with an unbounded integral:

    linear        1 + t
    polynomial    (1 + t)**p,        p >= 1
    exponential   a * exp(alpha*t),  a > 0, alpha > 0

The barrier cascade consumes the gain raised to level-dependent powers, so
alongside plain evaluation this module provides the exact derivative and
integral of ``gain(t)**power`` and a short Taylor expansion of it in the time
offset (used by the jet-based cascade evaluator).

The blow-up family gain0/(T - t) is deliberately not constructible: it is
singular at t = T, which rules it out for persistent (unbounded-horizon)
safety.  Configuration parsing rejects it by name.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_FAMILIES = ("linear", "polynomial", "exponential")

# Names under which the singular finite-horizon gain is commonly requested.
_REJECTED_FAMILIES = ("prescribed", "prescribed_time", "blowup", "singular")


def _check_time(t):
    t = float(t)
    if t < 0.0:
        raise ValueError(f"time must be >= 0, got {t}")
    return t


def _gen_binom(q: float, k: int) -> float:
    """Generalized binomial coefficient C(q, k) for real q."""
    out = 1.0
    for j in range(k):
        out *= (q - j) / (j + 1)
    return out


@dataclass(frozen=True)
class GainFunction:
    """One member of the time-varying gain family.

    Use the ``linear()``, ``polynomial(p)`` and ``exponential(a, alpha)``
    constructors rather than filling fields by hand.
    """

    family: str
    p: float = 1.0
    a: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ConfigError(f"unknown gain family {self.family!r}")
        if self.family == "polynomial" and not self.p >= 1.0:
            raise ConfigError(f"polynomial gain requires p >= 1, got {self.p}")
        if self.family == "exponential" and not (self.a > 0.0 and self.alpha > 0.0):
            raise ConfigError(
                f"exponential gain requires a > 0 and alpha > 0, got a={self.a}, alpha={self.alpha}"
            )

    # -- constructors ------------------------------------------------------

    @classmethod
    def linear(cls) -> "GainFunction":
        return cls("linear")

    @classmethod
    def polynomial(cls, p: float) -> "GainFunction":
        return cls("polynomial", p=float(p))

    @classmethod
    def exponential(cls, a: float, alpha: float) -> "GainFunction":
        return cls("exponential", a=float(a), alpha=float(alpha))

    @classmethod
    def from_config(cls, cfg: dict) -> "GainFunction":
        """Build from a JSON config block like ``{"family": "polynomial", "p": 2.0}``."""
        if not isinstance(cfg, dict) or "family" not in cfg:
            raise ConfigError(f"gain config must be an object with a 'family' key, got {cfg!r}")
        family = cfg["family"]
        if family in _REJECTED_FAMILIES:
            raise ConfigError(
                f"gain family {family!r} is singular at its terminal time and is not "
                "supported; persistent safety needs a gain that is finite for all t"
            )
        extra = set(cfg) - {"family", "p", "a", "alpha"}
        if extra:
            raise ConfigError(f"unknown gain config keys: {sorted(extra)}")
        try:
            if family == "linear":
                return cls.linear()
            if family == "polynomial":
                return cls.polynomial(cfg["p"])
            if family == "exponential":
                return cls.exponential(cfg["a"], cfg["alpha"])
        except KeyError as exc:
            raise ConfigError(f"gain family {family!r} is missing parameter {exc}") from exc
        raise ConfigError(f"unknown gain family {family!r}")

    def to_config(self) -> dict:
        if self.family == "linear":
            return {"family": "linear"}
        if self.family == "polynomial":
            return {"family": "polynomial", "p": self.p}
        return {"family": "exponential", "a": self.a, "alpha": self.alpha}

    # -- evaluation --------------------------------------------------------

    def value(self, t: float) -> float:
        """Gain value at time t >= 0; always > 0."""
        t = _check_time(t)
        if self.family == "linear":
            return 1.0 + t
        if self.family == "polynomial":
            return (1.0 + t) ** self.p
        return self.a * math.exp(self.alpha * t)

    def rate(self, t: float) -> float:
        """Time derivative of the gain at t."""
        t = _check_time(t)
        if self.family == "linear":
            return 1.0
        if self.family == "polynomial":
            return self.p * (1.0 + t) ** (self.p - 1.0)
        return self.a * self.alpha * math.exp(self.alpha * t)

    def power_derivative(self, t: float, power: float) -> float:
        """d/dt of value(t)**power (chain rule, exact)."""
        t = _check_time(t)
        return float(power) * self.value(t) ** (float(power) - 1.0) * self.rate(t)

    def power_integral(self, t0: float, t: float, power: float) -> float:
        """Integral of value(s)**power over [t0, t], in closed form.

        All shipped families admit antiderivatives; ``simpson_power_integral``
        exists as an independent quadrature cross-check (and as the fallback
        any future family without a closed form would use).
        """
        t0 = _check_time(t0)
        t = float(t)
        if t < t0:
            raise ValueError(f"integration interval is empty or reversed: [{t0}, {t}]")
        power = float(power)
        if power < 1.0:
            raise ValueError(f"power must be >= 1, got {power}")
        if self.family in ("linear", "polynomial"):
            q = power if self.family == "linear" else self.p * power
            return ((1.0 + t) ** (q + 1.0) - (1.0 + t0) ** (q + 1.0)) / (q + 1.0)
        rate = self.alpha * power
        return self.a**power * (math.exp(rate * t) - math.exp(rate * t0)) / rate

    def power_series(self, t: float, power: float, order: int) -> np.ndarray:
        """Taylor coefficients of value(t + tau)**power in tau, orders 0..order."""
        t = _check_time(t)
        power = float(power)
        c = np.empty(order + 1)
        if self.family in ("linear", "polynomial"):
            q = power if self.family == "linear" else self.p * power
            base = 1.0 + t
            for k in range(order + 1):
                c[k] = _gen_binom(q, k) * base ** (q - k)
        else:
            rate = self.alpha * power
            lead = self.a**power * math.exp(rate * t)
            fact = 1.0
            for k in range(order + 1):
                c[k] = lead * rate**k / fact
                fact *= k + 1
        return c


def upsilon_eval(g: GainFunction, t: float) -> float:
    """Gain value at time t (strictly positive, strictly increasing in t)."""
    return g.value(t)


def upsilon_power_derivative(g: GainFunction, t: float, theta_k: float) -> float:
    """Exact d/dt of g(t)**theta_k."""
    return g.power_derivative(t, theta_k)


def upsilon_power_integral(g: GainFunction, t0: float, t: float, power: float) -> float:
    """Exact integral of g(s)**power over [t0, t]."""
    return g.power_integral(t0, t, power)


def simpson_power_integral(g: GainFunction, t0: float, t: float, power: float) -> float:
    """Composite-Simpson quadrature of g(s)**power with step <= 1e-3*(t - t0).

    Independent of the closed forms above; used to cross-check them.
    """
    t0 = _check_time(t0)
    t = float(t)
    if t < t0:
        raise ValueError(f"integration interval is empty or reversed: [{t0}, {t}]")
    if t == t0:
        return 0.0
    panels = 1000  # step = (t - t0)/1000 <= 1e-3*(t - t0)
    s = np.linspace(t0, t, 2 * panels + 1)
    f = np.array([g.value(si) ** power for si in s])
    h = (t - t0) / (2 * panels)
    return h / 3.0 * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-1:2].sum())
