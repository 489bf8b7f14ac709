"""Per-channel finite-time disturbance observer.

Each transformed-chain level i sees dynamics  e_i' = phi_{i+1} + w_i  (with
the convention that level n is driven by the virtual input).  The channel
tracks e_i with an auxiliary integrator r, so that sigma0 = r - e_i drifts
exactly with the estimation error; a first-order sliding-mode differentiator
recovers that drift rate, and a super-twisting update drives the combined
surface sigma1 = sigma0 + zeta to zero in finite time, at which point w_hat
equals the true disturbance.

States are advanced functionally: ``observer_step`` returns a new channel and
never mutates its input.  Channels for different levels are independent.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import ConfigError, NumericError


@dataclass(frozen=True)
class ObserverChannel:
    """State and gains of one observer channel (all vectors length m)."""

    lambda0: float
    lambda1: float
    k1: float
    k2: float
    r: np.ndarray
    sigma0: np.ndarray
    chi0: np.ndarray
    chi1: np.ndarray
    zeta: np.ndarray
    sigma1: np.ndarray
    int_sign: np.ndarray
    w_hat: np.ndarray
    w_hat_dot: np.ndarray

    @property
    def m(self) -> int:
        return self.r.shape[0]


def observer_init(lambda0, lambda1, k1, k2, m, e0=None) -> ObserverChannel:
    """Fresh channel with zero estimates.

    ``e0`` is the first measurement of the tracked quantity; seeding r with it
    makes sigma0 start at exactly zero, which keeps the differentiator's
    initial deviation bounded as its convergence argument requires.
    """
    gains = {"lambda0": lambda0, "lambda1": lambda1, "k1": k1, "k2": k2}
    for name, val in gains.items():
        if not float(val) > 0.0:
            raise ConfigError(f"observer gain {name} must be > 0, got {val}")
    m = int(m)
    if m < 1:
        raise ConfigError(f"channel width must be >= 1, got {m}")
    zeros = np.zeros(m)
    r = zeros.copy() if e0 is None else np.asarray(e0, dtype=float).copy()
    if r.shape != (m,):
        raise ConfigError(f"e0 must have shape ({m},), got {r.shape}")
    return ObserverChannel(
        lambda0=float(lambda0), lambda1=float(lambda1), k1=float(k1), k2=float(k2),
        r=r, sigma0=zeros.copy(), chi0=zeros.copy(), chi1=zeros.copy(),
        zeta=zeros.copy(), sigma1=zeros.copy(), int_sign=zeros.copy(),
        w_hat=zeros.copy(), w_hat_dot=zeros.copy(),
    )


def observer_step(ch: ObserverChannel, phi_i, phi_next, dt: float) -> ObserverChannel:
    """Advance a channel by one explicit-Euler step of size dt.

    ``phi_i`` is the current measurement of the tracked level and ``phi_next``
    the current value of whatever drives it (the next chain level, or the
    virtual input for the top level).  Sliding-mode right-hand sides are
    discontinuous, so plain Euler at the loop step is the appropriate
    discretization; the update order inside the step is fixed and normative.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    phi_i = np.ascontiguousarray(phi_i, dtype=float)
    phi_next = np.ascontiguousarray(phi_next, dtype=float)
    if not (np.isfinite(phi_i).all() and np.isfinite(phi_next).all()):
        raise NumericError("observer_step received non-finite inputs")

    (r, sigma0, chi0, chi1, zeta, sigma1, int_sign, w_hat, w_hat_dot) = \
        _kernels.observer_step_core(
            ch.r, ch.chi0, ch.chi1, ch.int_sign, ch.w_hat,
            phi_i, phi_next, float(dt),
            ch.lambda0, ch.lambda1, ch.k1, ch.k2,
        )
    return replace(
        ch, r=r, sigma0=sigma0, chi0=chi0, chi1=chi1, zeta=zeta,
        sigma1=sigma1, int_sign=int_sign, w_hat=w_hat, w_hat_dot=w_hat_dot,
    )


def simulate_tracking(w_fn, lambda0, lambda1, k1, k2, dt, duration,
                      m: int = 1, drive=None) -> dict:
    """Couple one channel to the scalar plant e' = drive + w(t) and record it.

    The default drive is zero, so the tracked quantity is just the integral of
    the disturbance.  Returns arrays keyed by ``t``, ``e``, ``w``, ``w_hat``,
    ``sigma1`` (the estimate row k is the one the controller would use at
    time t_k).  This is the standard tuning/diagnostic harness for observer
    gains.
    """
    steps = int(np.floor(duration / dt + 1e-9))
    drive = (lambda t: np.zeros(m)) if drive is None else drive

    def w_vec(t):
        return np.asarray(w_fn(t), dtype=float) * np.ones(m)

    e = np.zeros(m)
    ch = observer_init(lambda0, lambda1, k1, k2, m, e0=e)
    out = {key: np.empty((steps + 1, m)) for key in ("e", "w", "w_hat", "sigma1")}
    times = np.empty(steps + 1)
    for k in range(steps + 1):
        t = k * dt
        ch = observer_step(ch, e, drive(t), dt)
        times[k] = t
        out["e"][k] = e
        out["w"][k] = w_vec(t)
        out["w_hat"][k] = ch.w_hat
        out["sigma1"][k] = ch.sigma1
        if k < steps:
            # Simpson increment of e' = drive + w over the step
            mid = t + 0.5 * dt
            e = e + dt / 6.0 * (
                (drive(t) + w_vec(t))
                + 4.0 * (drive(mid) + w_vec(mid))
                + (drive(t + dt) + w_vec(t + dt))
            )
    result = {"t": times}
    for key, arr in out.items():
        result[key] = arr[:, 0] if m == 1 else arr
    return result


def observer_gain_check(k1: float, k2: float, varsigma_bar: float) -> bool:
    """Sufficient finite-time-convergence condition on the super-twisting gains.

    ``varsigma_bar`` bounds the derivative of the lumped perturbation seen by
    the sigma1 dynamics; the test is k1 >= 1.5*sqrt(bound) and
    k2 >= 1.1*bound, boundary inclusive.
    """
    varsigma_bar = float(varsigma_bar)
    if varsigma_bar < 0.0:
        raise ValueError(f"varsigma_bar must be >= 0, got {varsigma_bar}")
    return k1 >= 1.5 * np.sqrt(varsigma_bar) and k2 >= 1.1 * varsigma_bar
