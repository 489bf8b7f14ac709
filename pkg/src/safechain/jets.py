"""Truncated Taylor ("jet") arithmetic along chain-of-integrator flows.

The barrier cascade needs exact directional derivatives of the base barrier
along the transformed dynamics, up to the chain length.  Rather than symbolic
algebra, every scalar is carried as a jet: its first K+1 Taylor coefficients
in the time offset tau around the current instant, where each coefficient
additionally stores its gradient with respect to the current chain state.
Layout: a C-contiguous float64 array of shape (K+1, 1+D) with column 0 the
coefficients and columns 1..D the gradients (D = chain dimension).

Because the transformed dynamics are a pure integrator chain with exogenous
forcing, seeding the state jets is exact, and any barrier expressed through
the overloaded operators (+, -, *, **) is differentiated exactly.
"""

from __future__ import annotations

import numpy as np

from . import _kernels


class Jet:
    """A truncated Taylor expansion with per-coefficient state gradients."""

    __slots__ = ("c",)

    def __init__(self, c: np.ndarray):
        self.c = c

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, order: int, dim: int) -> "Jet":
        return cls(np.zeros((order + 1, dim + 1)))

    @classmethod
    def constant(cls, value: float, order: int, dim: int) -> "Jet":
        c = np.zeros((order + 1, dim + 1))
        c[0, 0] = value
        return cls(c)

    @classmethod
    def from_series(cls, coeffs, order: int, dim: int) -> "Jet":
        """Pure time series (zero gradients); extra coefficients are dropped."""
        c = np.zeros((order + 1, dim + 1))
        coeffs = np.asarray(coeffs, dtype=float)
        k = min(order + 1, coeffs.shape[0])
        c[:k, 0] = coeffs[:k]
        return cls(c)

    # -- accessors ---------------------------------------------------------

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.c.shape[1] - 1

    @property
    def value(self) -> float:
        return float(self.c[0, 0])

    @property
    def deriv(self) -> float:
        """First time derivative (coefficient 1)."""
        return float(self.c[1, 0])

    @property
    def gradient(self) -> np.ndarray:
        """Gradient of the value with respect to the current chain state."""
        return self.c[0, 1:].copy()

    def series(self) -> np.ndarray:
        return self.c[:, 0].copy()

    def gradient_series(self, component: int) -> np.ndarray:
        """Taylor coefficients of one gradient component."""
        return self.c[:, 1 + component].copy()

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.c + other.c)
        out = self.c.copy()
        out[0, 0] += float(other)
        return Jet(out)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c)

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet(self.c - other.c)
        out = self.c.copy()
        out[0, 0] -= float(other)
        return Jet(out)

    def __rsub__(self, other):
        out = -self.c
        out[0, 0] += float(other)
        return Jet(out)

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet(_kernels.jet_mul(self.c, other.c))
        return Jet(self.c * float(other))

    __rmul__ = __mul__

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise ValueError("jets support nonnegative integer powers only")
        out = Jet.constant(1.0, self.order, self.dim)
        for _ in range(n):
            out = out * self
        return out

    def ddt(self) -> "Jet":
        """Shift to the time-derivative jet.

        The result is valid one order lower than the input; the top
        coefficient is zero-filled and must not be read.
        """
        out = np.zeros_like(self.c)
        korder = self.c.shape[0] - 1
        for k in range(korder):
            out[k] = (k + 1) * self.c[k + 1]
        return Jet(out)


def chain_state_jets(phi, n: int, m: int, order: int, w_hat=None, w_hat_dot=None):
    """Seed jets for the stacked chain state under the transformed dynamics.

    ``phi`` is the stacked state (n*m,).  Block i evolves as the integral of
    block i+1 plus, when given, the estimated disturbance of level i; the last
    block's input is excluded (its contribution is recovered separately from
    the gradient of the final barrier).  Estimates enter as exogenous signals
    with known value and first derivative; their higher derivatives are not
    observable and are taken as zero.

    Returns a list of n blocks, each a list of m jets.
    """
    phi = np.asarray(phi, dtype=float)
    dim = n * m
    zeros = np.zeros(m)

    def w_jet(level, j):
        if w_hat is None or w_hat[level] is None:
            return None
        wd = zeros if (w_hat_dot is None or w_hat_dot[level] is None) else w_hat_dot[level]
        jet = Jet.zero(order, dim)
        jet.c[0, 0] = w_hat[level][j]
        if order >= 1:
            jet.c[1, 0] = wd[j]
        return jet

    blocks = [None] * n
    for i in range(n - 1, -1, -1):  # build from the top of the chain down
        row = []
        for j in range(m):
            jet = Jet.zero(order, dim)
            jet.c[0, 0] = phi[i * m + j]
            jet.c[0, 1 + i * m + j] = 1.0
            src = w_jet(i, j)
            if i + 1 < n:
                upstream = blocks[i + 1][j]
                src = upstream if src is None else upstream + src
            if src is not None:
                for k in range(order):
                    jet.c[k + 1] = src.c[k] / (k + 1)
            row.append(jet)
        blocks[i] = row
    return blocks
