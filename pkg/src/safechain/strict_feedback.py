"""Perturbed strict-feedback systems and their chain-of-integrators form.

A model is a cascade of n blocks of width m,

    x_i' = x_{i+1} + phi_i(xbar_i) + d_i(t),   i < n,
    x_n' = G(xbar_n) u + phi_n(xbar_n) + d_n(t),

where xbar_i stacks blocks 1..i.  The recursive feedback terms beta_i
(beta_0 = 0) define new coordinates  varphi_i = x_i - beta_{i-1}  and the
input substitution  u = G^{-1}(v + beta_n), under which the system becomes a
pure integrator chain driven by v and the residual disturbances

    w_i = d_i - sum_{k<i} (d beta_{i-1}/d x_k) d_k.

The beta functions and their Jacobians are supplied in closed form by the
model author (the recursion needs exact partials, and keeping the core purely
numeric beats dragging in symbolic algebra); ``beta_consistency_check``
verifies a supplied family against the recursion by finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, SingularInputMatrix


@dataclass(frozen=True)
class StrictFeedbackModel:
    """Closed-form description of one strict-feedback system.

    ``phi[i]`` and ``beta[i]`` receive the stacked prefix of blocks 1..i+1 and
    return an (m,) array; ``beta_jac[i][k]`` is the (m, m) Jacobian of
    beta_{i+1} with respect to block k+1 (needed for levels 1..n-1).
    ``g_regularization`` is the pivot floor used when inverting G near a
    singularity.
    """

    n: int
    m: int
    phi: tuple
    G: Callable
    beta: tuple
    beta_jac: tuple = ()
    g_regularization: float = 1e-3

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ConfigError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if len(self.phi) != self.n:
            raise ConfigError(f"phi must list {self.n} evaluators, got {len(self.phi)}")
        if len(self.beta) != self.n:
            raise ConfigError(f"beta must list {self.n} evaluators, got {len(self.beta)}")
        if len(self.beta_jac) < self.n - 1:
            raise ConfigError(
                f"beta_jac must cover levels 1..{self.n - 1}, got {len(self.beta_jac)}"
            )
        if self.g_regularization < 0.0:
            raise ConfigError(f"g_regularization must be >= 0, got {self.g_regularization}")

    def block(self, x, i: int) -> np.ndarray:
        """Block i (1-based) of a stacked state."""
        return np.asarray(x)[(i - 1) * self.m: i * self.m]

    def prefix(self, x, i: int) -> np.ndarray:
        """Stacked blocks 1..i of a state."""
        return np.asarray(x)[: i * self.m]


@dataclass(frozen=True)
class DisturbanceSignal:
    """Per-level disturbance evaluators d_i(t) with a norm bound."""

    d: tuple
    rho: float = 0.0

    def values(self, t: float):
        return [np.asarray(di(t), dtype=float) for di in self.d]

    def max_norm(self, times) -> float:
        """Largest stacked-disturbance norm over a time grid (bound check)."""
        return max(float(np.linalg.norm(np.concatenate(self.values(t)))) for t in times)


def regularized_solve(a, b, eps):
    """Gaussian elimination with partial pivoting and sign-preserving pivot floors.

    Pivots smaller than ``eps`` in magnitude are replaced by +-eps (zero maps
    to +eps), which bridges isolated singular points such as a vehicle at
    standstill without changing well-conditioned solves.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    m = a.shape[0]
    for col in range(m):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        p = a[col, col]
        if abs(p) < eps:
            p = eps if p >= 0.0 else -eps
            a[col, col] = p
        for row in range(col + 1, m):
            f = a[row, col] / p
            if f != 0.0:
                a[row, col:] -= f * a[col, col:]
                b[row] -= f * b[col]
    x = np.zeros_like(b)
    for col in range(m - 1, -1, -1):
        x[col] = (b[col] - a[col, col + 1:] @ x[col + 1:]) / a[col, col]
    return x


def to_transformed(model: StrictFeedbackModel, x) -> np.ndarray:
    """Map an original state to chain coordinates: varphi_i = x_i - beta_{i-1}."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    m = model.m
    out[:m] = x[:m]
    for i in range(2, model.n + 1):
        out[(i - 1) * m: i * m] = model.block(x, i) - model.beta[i - 2](model.prefix(x, i - 1))
    return out


def from_transformed(model: StrictFeedbackModel, phi) -> np.ndarray:
    """Invert ``to_transformed`` (solvable blockwise from the bottom up)."""
    phi = np.asarray(phi, dtype=float)
    out = np.empty_like(phi)
    m = model.m
    out[:m] = phi[:m]
    for i in range(2, model.n + 1):
        out[(i - 1) * m: i * m] = phi[(i - 1) * m: i * m] \
            + model.beta[i - 2](out[: (i - 1) * m])
    return out


def input_from_virtual(model: StrictFeedbackModel, x, v) -> np.ndarray:
    """Actuator input realizing a virtual chain input: u = G^{-1} (v + beta_n)."""
    x = np.asarray(x, dtype=float)
    rhs = np.asarray(v, dtype=float) + model.beta[model.n - 1](x)
    g = np.asarray(model.G(x), dtype=float)
    if not np.isfinite(g).all():
        raise SingularInputMatrix("input matrix has non-finite entries")
    u = regularized_solve(g, rhs, model.g_regularization)
    if not np.isfinite(u).all():
        raise SingularInputMatrix("input matrix solve produced non-finite values")
    return u


def nominal_to_virtual(model: StrictFeedbackModel, x, u_no) -> np.ndarray:
    """Express a plant-level nominal input in chain coordinates: v = G u - beta_n."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(model.G(x), dtype=float)
    return g @ np.asarray(u_no, dtype=float) - model.beta[model.n - 1](x)


def residual_disturbance(model: StrictFeedbackModel, x, d_values):
    """Per-level residual disturbances w_i in chain coordinates.

    Mismatched components persist: level i accumulates the lower-level
    disturbances weighted by the beta_{i-1} Jacobians.  A purely matched
    disturbance (only d_n nonzero) passes through unchanged.
    """
    x = np.asarray(x, dtype=float)
    d_values = [np.asarray(d, dtype=float) for d in d_values]
    out = [d_values[0].copy()]
    for i in range(2, model.n + 1):
        w = d_values[i - 1].copy()
        xbar = model.prefix(x, i - 1)
        for k in range(1, i):
            w -= np.asarray(model.beta_jac[i - 2][k - 1](xbar), dtype=float) @ d_values[k - 1]
        out.append(w)
    return out


def original_rhs(model: StrictFeedbackModel, x, u, d_values=None, t: float = 0.0) -> np.ndarray:
    """Right-hand side of the original cascade.

    ``d_values`` may be None (no disturbance), a ``DisturbanceSignal``
    (evaluated at ``t``) or a pre-evaluated sequence of per-level arrays.
    """
    x = np.asarray(x, dtype=float)
    if d_values is None:
        d_values = [np.zeros(model.m)] * model.n
    elif isinstance(d_values, DisturbanceSignal):
        d_values = d_values.values(t)
    out = np.empty_like(x)
    m = model.m
    for i in range(1, model.n):
        out[(i - 1) * m: i * m] = model.block(x, i + 1) \
            + model.phi[i - 1](model.prefix(x, i)) + d_values[i - 1]
    g = np.asarray(model.G(x), dtype=float)
    out[(model.n - 1) * m:] = g @ np.asarray(u, dtype=float) \
        + model.phi[model.n - 1](x) + d_values[model.n - 1]
    return out


def beta_consistency_check(model: StrictFeedbackModel, x, fd_step: float = 1e-5) -> float:
    """Largest recursion residual of the supplied beta family at state x.

    Checks  beta_i + phi_i = sum_{k<i} (d beta_{i-1}/d x_k)(x_{k+1} + phi_k)
    with the Jacobians replaced by central finite differences of the supplied
    beta_{i-1}, so an inconsistent closed form (or a wrong Jacobian-free
    beta) shows up as a residual far above the differencing error.
    """
    if not fd_step > 0.0:
        raise ValueError(f"fd_step must be > 0, got {fd_step}")
    x = np.asarray(x, dtype=float)
    m = model.m
    worst = 0.0
    for i in range(1, model.n + 1):
        res = model.beta[i - 1](model.prefix(x, i)) + model.phi[i - 1](model.prefix(x, i))
        for k in range(1, i):
            xbar = model.prefix(x, i - 1).copy()
            jac = np.empty((m, m))
            for col in range(m):
                idx = (k - 1) * m + col
                keep = xbar[idx]
                xbar[idx] = keep + fd_step
                hi = model.beta[i - 2](xbar)
                xbar[idx] = keep - fd_step
                lo = model.beta[i - 2](xbar)
                xbar[idx] = keep
                jac[:, col] = (hi - lo) / (2.0 * fd_step)
            res = res - jac @ (model.block(x, k + 1) + model.phi[k - 1](model.prefix(x, k)))
        worst = max(worst, float(np.linalg.norm(res)))
    return worst


# -- built-in models --------------------------------------------------------


def _worked_example_model() -> StrictFeedbackModel:
    """Third-order single-input cascade with quadratic couplings."""

    def phi1(xb):
        return np.array([xb[0] ** 2])

    def phi2(xb):
        return np.array([xb[0] ** 2 + xb[1] ** 2])

    def phi3(xb):
        return np.zeros(1)

    def beta1(xb):
        return np.array([-xb[0] ** 2])

    def beta2(xb):
        x1, x2 = xb[0], xb[1]
        return np.array([-x1 ** 2 - x2 ** 2 - 2.0 * x1 * x2 - 2.0 * x1 ** 3])

    def beta3(xb):
        x1, x2, x3 = xb[0], xb[1], xb[2]
        return (-2.0 * x1 - 2.0 * x2 - 6.0 * x1 ** 2) * np.array([x2 + x1 ** 2]) \
            + (-2.0 * x2 - 2.0 * x1) * np.array([x3 + x1 ** 2 + x2 ** 2])

    def d_beta1_d_x1(xb):
        return np.array([[-2.0 * xb[0]]])

    def d_beta2_d_x1(xb):
        return np.array([[-2.0 * xb[0] - 2.0 * xb[1] - 6.0 * xb[0] ** 2]])

    def d_beta2_d_x2(xb):
        return np.array([[-2.0 * xb[1] - 2.0 * xb[0]]])

    return StrictFeedbackModel(
        n=3, m=1,
        phi=(phi1, phi2, phi3),
        G=lambda x: np.array([[1.0]]),
        beta=(beta1, beta2, beta3),
        beta_jac=((d_beta1_d_x1,), (d_beta2_d_x1, d_beta2_d_x2)),
    )


def _vehicle_chain_model() -> StrictFeedbackModel:
    """Planar vehicle as a two-block chain: positions, then velocity vector.

    The second block is (v*cos(heading), v*sin(heading)), so the input matrix
    recovered from it is singular at standstill; the pivot regularization in
    ``input_from_virtual`` bridges that instant (heading falls back to zero
    when the velocity vector is exactly zero).
    """
    zero2 = lambda xb: np.zeros(2)

    def G(x):
        vx, vy = x[2], x[3]
        speed = float(np.hypot(vx, vy))
        if speed < 1e-12:
            c, s = 1.0, 0.0
        else:
            c, s = vx / speed, vy / speed
        return np.array([[c, -vy], [s, vx]])

    return StrictFeedbackModel(
        n=2, m=2,
        phi=(zero2, zero2),
        G=G,
        beta=(zero2, zero2),
        beta_jac=((lambda xb: np.zeros((2, 2)),),),
    )


MODEL_REGISTRY = {
    "worked_example_n3": _worked_example_model,
    "vehicle_chain_n2": _vehicle_chain_model,
}


def get_model(key: str) -> StrictFeedbackModel:
    try:
        return MODEL_REGISTRY[key]()
    except KeyError:
        raise ConfigError(
            f"unknown model {key!r}; available: {sorted(MODEL_REGISTRY)}"
        ) from None
