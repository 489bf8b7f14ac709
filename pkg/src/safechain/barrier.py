"""Recursive time-varying barrier cascade for integrator chains.

A base barrier h1 of relative degree n is turned into a relative-degree-one
barrier by the recursion

    h_i = rho_{i-1} * gain(t)**(theta*(i-1)) * h_{i-1}
          + (d/dt) h_{i-1} - margin_{i-1},          i = 2..n,

where the total derivative runs along the chain dynamics (augmented with the
disturbance estimates in observer mode) and margin_{i-1} is the smooth
majorant of ||grad h_{i-1}|| * ||w_hat_{i-1}|| from ``smooth_bound``.  The
final constraint handed to the safety filter is

    drift + Lg . v - lambda_n + rho_n * gain(t)**(theta*n) * h_n >= 0.

Everything is evaluated with jet arithmetic, which is exact for the
polynomial barriers shipped here (no finite differencing anywhere).

Supported margin placements: a margin at level 1 for chains up to n = 3, and
additionally a final-constraint margin (level n) for n <= 2.  Margins at
intermediate levels of longer chains would need third-order state derivatives
of h1, which the jet seeds do not carry; configurations that would silently
return inexact numbers are rejected instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import AssumptionViolation, ConfigError, UnsafeInitialState
from .gains import GainFunction
from .jets import Jet, chain_state_jets
from .safety_filter import worst_case_margin

_MODES = ("nominal", "worst_case", "observer")
_GRAD_TOL = 1e-12
_RHO_FLOOR = 1e-2


def smooth_bound(grad_h, w_hat, mu: float) -> float:
    """Smooth majorant ||g||^2/(4*mu) + mu*||w||^2 of ||g||*||w||.

    Replaces the nonsmooth robustness margin so the cascade stays
    differentiable; by the AM-GM inequality it always dominates the product
    of norms, with equality exactly when ||g|| = 2*mu*||w||.
    """
    mu = float(mu)
    if mu <= 0.0:
        raise ValueError(f"mu must be > 0, got {mu}")
    g2 = float(np.asarray(grad_h, dtype=float).ravel() @ np.asarray(grad_h, dtype=float).ravel())
    w2 = float(np.asarray(w_hat, dtype=float).ravel() @ np.asarray(w_hat, dtype=float).ravel())
    return g2 / (4.0 * mu) + mu * w2


def select_initial_gain(level: int, h_prev0: float, Lf_h_prev0: float,
                        Lambda_prev0: float, upsilon_t0: float, theta: float,
                        margin: float) -> float:
    """Smallest admissible gain for barrier level ``level`` (2..n), with slack.

    The returned gain makes h_level strictly positive at the initial state:
    it exceeds the critical value (-Lf + Lambda) / (gain0**(theta*(level-1)) * h_prev0)
    by the relative ``margin``, and is floored at 1e-2 when the critical value
    is nonpositive.
    """
    h_prev0 = float(h_prev0)
    if h_prev0 <= 0.0:
        raise UnsafeInitialState(
            f"previous barrier level is not positive at t0 (h = {h_prev0})"
        )
    if float(Lambda_prev0) < 0.0:
        raise ValueError(f"Lambda_prev0 must be >= 0, got {Lambda_prev0}")
    if float(margin) < 0.0:
        raise ValueError(f"margin must be >= 0, got {margin}")
    if not float(upsilon_t0) > 0.0:
        raise ValueError(f"upsilon_t0 must be > 0, got {upsilon_t0}")
    power = float(theta) * (int(level) - 1)
    bound = max(0.0, (-float(Lf_h_prev0) + float(Lambda_prev0))
                / (float(upsilon_t0) ** power * h_prev0))
    return max(_RHO_FLOOR, bound * (1.0 + float(margin)))


@dataclass(frozen=True)
class CascadeEvaluation:
    """Everything the safety filter needs at one state and time."""

    h_values: np.ndarray      # h_1..h_n
    grad_hn: np.ndarray       # d h_n / d phi, full chain gradient
    drift: float              # input-independent part of the h_n rate
    Lg_hn: np.ndarray         # coefficient of the virtual input in the h_n rate
    lambda_n: float           # final-constraint margin (0 unless configured)


@dataclass(frozen=True)
class BarrierCascade:
    """Configuration of the cascade.

    ``h1`` maps a list of n blocks of m state jets to the barrier jet;
    ``h1_grad`` maps the same blocks to the n*m jets of the barrier gradient
    and is required whenever a level-1 margin is configured on a chain with
    n >= 2.  ``mu`` lists the margin weights by level (may be shorter than n;
    missing levels carry no margin).  ``rho_bound`` is the worst-case
    disturbance norm used by the single-level worst_case mode.
    """

    n: int
    m: int
    h1: Callable
    rho: tuple
    theta: float
    gain: GainFunction
    mode: str = "nominal"
    mu: tuple = ()
    h1_grad: Optional[Callable] = None
    rho_bound: float = 0.0

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ConfigError(f"unknown cascade mode {self.mode!r}")
        if self.n < 1 or self.m < 1:
            raise ConfigError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if len(self.rho) != self.n:
            raise ConfigError(f"rho must list {self.n} gains, got {len(self.rho)}")
        if any(not float(r) > 0.0 for r in self.rho):
            raise ConfigError(f"all cascade gains must be > 0, got {self.rho}")
        if not float(self.theta) >= 1.0:
            raise ConfigError(f"theta must be >= 1, got {self.theta}")
        if self.mode == "worst_case":
            if self.n != 1:
                raise ConfigError(
                    "worst_case mode is nonsmooth and supports single-level chains only"
                )
            if float(self.rho_bound) < 0.0:
                raise ConfigError(f"rho_bound must be >= 0, got {self.rho_bound}")
        if self.mu:
            if self.mode != "observer":
                raise ConfigError("margin weights mu only apply in observer mode")
            if any(not float(mu) > 0.0 for mu in self.mu):
                raise ConfigError(f"all mu must be > 0, got {self.mu}")
            limit = self.n if self.n <= 2 else 1
            if len(self.mu) > limit:
                raise ConfigError(
                    f"chains with n={self.n} support margin weights for levels"
                    f" 1..{limit} only (got {len(self.mu)} entries); deeper margins"
                    " would need state derivatives the evaluator does not carry"
                )
            if self.n >= 2 and self.h1_grad is None:
                raise ConfigError("a level-1 margin on a chain with n >= 2 needs h1_grad")

    @property
    def has_top_margin(self) -> bool:
        return len(self.mu) == self.n and self.mode == "observer"

    def alpha_h(self, t: float, h_n: float, dt: float | None = None) -> float:
        """Constraint relaxation term rho_n * gain(t)**(theta*n) * h_n.

        With ``dt`` given, the decay coefficient is replaced by its
        sampled-data counterpart (1 - exp(-c*dt))/dt, where c is the
        continuous coefficient.  The two agree to first order in dt, but the
        sampled form never commands more decay per step than reaching zero:
        the plain coefficient makes the held-input loop overshoot and
        oscillate once c*dt exceeds 1 (the growing gain guarantees that
        eventually), while the sampled form keeps h_n contracting by exactly
        exp(-c*dt) per step, matching the continuous comparison envelope.
        """
        c = float(self.rho[-1]) * self.gain.value(t) ** (float(self.theta) * self.n)
        if dt is not None:
            c = -np.expm1(-c * dt) / dt
        return c * float(h_n)

    def envelope_floor(self, level: int, h0: float, t0: float, t: float) -> float:
        """Comparison-principle lower envelope h0 * exp(-rho_l * I(t0, t)).

        ``I`` integrates gain**(theta*level); along any filtered
        disturbance-free run, h_level can never fall below this curve.
        """
        integral = self.gain.power_integral(t0, t, float(self.theta) * level)
        return float(h0) * float(np.exp(-float(self.rho[level - 1]) * integral))


def _w_jets(values, derivs, m, order, dim):
    jets = []
    for j in range(m):
        jet = Jet.zero(order, dim)
        if values is not None:
            jet.c[0, 0] = values[j]
            if derivs is not None and order >= 1:
                jet.c[1, 0] = derivs[j]
        jets.append(jet)
    return jets


def _normalize_w(c: BarrierCascade, w_hat, w_hat_dot):
    if c.mode != "observer":
        return None, None
    w = [None] * c.n
    wd = [None] * c.n
    for level in range(c.n):
        if w_hat is not None and level < len(w_hat) and w_hat[level] is not None:
            w[level] = np.asarray(w_hat[level], dtype=float)
        if w_hat_dot is not None and level < len(w_hat_dot) and w_hat_dot[level] is not None:
            wd[level] = np.asarray(w_hat_dot[level], dtype=float)
    return w, wd


def _level_jets(c: BarrierCascade, phi, t, w, wd, rho, select=None):
    """Run the cascade recursion, optionally choosing gains on the fly.

    Returns (list of h jets, list of chosen gains).  ``select`` is either None
    (use ``rho`` as given) or the relative margin used to pick each gain from
    the level data as the recursion ascends.
    """
    order = c.n
    dim = c.n * c.m
    blocks = chain_state_jets(phi, c.n, c.m, order, w_hat=w, w_hat_dot=wd)
    h = c.h1(blocks)
    grad0 = h.c[0, 1:]
    if float(np.linalg.norm(grad0)) < _GRAD_TOL:
        raise AssumptionViolation(
            "gradient of the base barrier vanished at the evaluated state"
        )

    lam1 = None
    if c.mu:
        mu1 = float(c.mu[0])
        if c.n == 1:
            lam1 = None  # handled as the final-constraint margin
        else:
            gamma = c.h1_grad(blocks)
            lam = Jet.zero(order, dim)
            for comp in gamma:
                lam = lam + comp * comp
            lam = lam * (1.0 / (4.0 * mu1))
            w1 = _w_jets(w[0] if w else None, wd[0] if wd else None, c.m, order, dim)
            for jet in w1:
                lam = lam + mu1 * (jet * jet)
            lam1 = lam

    levels = [h]
    chosen = []
    for i in range(2, c.n + 1):
        margin_jet = lam1 if i == 2 and lam1 is not None else None
        if select is None:
            rho_i = float(rho[i - 2])
        else:
            lam0 = margin_jet.value if margin_jet is not None else 0.0
            rho_i = select_initial_gain(i, h.value, h.deriv, lam0,
                                        c.gain.value(t), c.theta, select)
        chosen.append(rho_i)
        u = Jet.from_series(c.gain.power_series(t, float(c.theta) * (i - 1), order),
                            order, dim)
        h = rho_i * (u * h) + h.ddt()
        if margin_jet is not None:
            h = h - margin_jet
        levels.append(h)
    return levels, chosen


def cascade_eval(c: BarrierCascade, phi, t: float, w_hat=None, w_hat_dot=None) -> CascadeEvaluation:
    """Evaluate the full cascade at state ``phi`` and time ``t``.

    ``w_hat``/``w_hat_dot`` list the current disturbance estimates and their
    update rates by level (entries may be None); they are ignored outside
    observer mode.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (c.n * c.m,):
        raise ValueError(f"phi must have shape ({c.n * c.m},), got {phi.shape}")
    w, wd = _normalize_w(c, w_hat, w_hat_dot)
    levels, _ = _level_jets(c, phi, t, w, wd, c.rho)

    top = levels[-1]
    grad = top.c[0, 1:].copy()
    lg = grad[(c.n - 1) * c.m:].copy()
    drift = top.deriv

    lambda_n = 0.0
    if c.mode == "worst_case":
        lambda_n = worst_case_margin(grad, c.rho_bound)
    elif c.has_top_margin:
        w_top = w[c.n - 1] if w and w[c.n - 1] is not None else np.zeros(c.m)
        lambda_n = smooth_bound(grad, w_top, float(c.mu[c.n - 1]))

    return CascadeEvaluation(
        h_values=np.array([lv.value for lv in levels]),
        grad_hn=grad,
        drift=float(drift),
        Lg_hn=lg,
        lambda_n=float(lambda_n),
    )


def select_gains(c: BarrierCascade, phi0, t0: float = 0.0, w_hat=None,
                 w_hat_dot=None, margin: float = 0.1) -> np.ndarray:
    """Pick the cascade gains level by level from the initial state.

    Each intermediate gain is chosen with ``select_initial_gain`` so that the
    next level starts strictly positive; the final (constraint) gain is free
    and passed through from the configuration.  Raises ``UnsafeInitialState``
    if the base barrier is not positive at ``phi0``.
    """
    phi0 = np.asarray(phi0, dtype=float)
    w, wd = _normalize_w(c, w_hat, w_hat_dot)
    _, chosen = _level_jets(c, phi0, t0, w, wd, c.rho, select=float(margin))
    return np.array(list(chosen) + [float(c.rho[-1])])


def initial_gain_bounds(c: BarrierCascade, phi0, t0: float = 0.0, w_hat=None,
                        w_hat_dot=None) -> np.ndarray:
    """Critical values the configured intermediate gains must exceed.

    Evaluated with the *configured* gains (each level's bound depends on the
    gains below it).  Entry i-1 is the threshold for rho_i, i = 1..n-1; a
    configured gain at or below its threshold leaves the next level
    nonpositive at the initial state.
    """
    phi0 = np.asarray(phi0, dtype=float)
    w, wd = _normalize_w(c, w_hat, w_hat_dot)
    levels, _ = _level_jets(c, phi0, t0, w, wd, c.rho)
    bounds = []
    for i in range(2, c.n + 1):
        prev = levels[i - 2]
        if prev.value <= 0.0:
            raise UnsafeInitialState(
                f"barrier level {i - 1} is not positive at the initial state"
            )
        # recover the margin value at this level from the recursion identity
        lam = c.rho[i - 2] * c.gain.value(t0) ** (float(c.theta) * (i - 1)) * prev.value \
            + prev.deriv - levels[i - 1].value
        bound = max(0.0, (-prev.deriv + lam)
                    / (c.gain.value(t0) ** (float(c.theta) * (i - 1)) * prev.value))
        bounds.append(bound)
    return np.array(bounds)
