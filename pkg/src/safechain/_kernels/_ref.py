"""Pure-Python/numpy reference implementation of the hot per-step kernels.

The compiled backend in ``_fast.pyx`` transliterates these routines statement
by statement.  Keep the two in lockstep: the arithmetic *order* is normative,
because traces are required to be bit-identical regardless of which backend
is active (see tests/test_kernels_parity.py).
"""

import numpy as np

BACKEND = "python"


def jet_mul(a, b):
    """Truncated product of two jets.

    A jet is a C-contiguous float64 array of shape (K+1, 1+D): column 0 holds
    Taylor coefficients in the time offset, columns 1..D the gradient of each
    coefficient with respect to the current chain state.  The product applies
    the Cauchy rule in the Taylor direction and the product rule in the
    gradient columns.
    """
    k1, d1 = a.shape
    out = np.zeros((k1, d1))
    for k in range(k1):
        ok = out[k]
        for i in range(k + 1):
            ai = a[i]
            bj = b[k - i]
            ok += ai[0] * bj
            ok[1:] += bj[0] * ai[1:]
    return out


def observer_step_core(r, chi0, chi1, int_sign, w_hat, phi_i, phi_next, dt,
                       lam0, lam1, k1, k2):
    """One explicit update of a disturbance-observer channel.

    Update order is normative: auxiliary integrator r, then sliding surface
    sigma0 = r - phi_i, then the first-order sliding-mode differentiator
    driven by sigma0, then sigma1 = sigma0 + zeta, then the super-twisting
    estimate update (its right-hand side is returned as w_hat_dot), and last
    the running integral of sign(sigma1).  sign(0) = 0 elementwise.

    The differentiator's discontinuous corrections are explicit Euler with
    one amendment: each correction is clamped so it cannot carry its state
    past the target within a single step.  Unclamped, the sqrt term bounces
    chi0 across sigma0 every step (a period-2 cycle of amplitude
    (lam0*dt)^2/4 in chi0 - sigma0, hence lam0^2*dt/2 of chatter in zeta),
    which at dt = 1e-3 is far too coarse for the estimate to settle.

    Returns (r, sigma0, chi0, chi1, zeta, sigma1, int_sign, w_hat, w_hat_dot).
    """
    r_new = r + dt * (phi_next + w_hat)
    sigma0 = r_new - phi_i

    err = chi0 - sigma0
    corr = np.minimum(lam0 * np.sqrt(np.abs(err)), np.abs(err) / dt)
    zeta = -corr * np.sign(err) + chi1
    chi0_new = chi0 + dt * zeta
    gap = chi1 - zeta
    chi1_new = chi1 - np.minimum(lam1 * dt, np.abs(gap)) * np.sign(gap)

    sigma1 = sigma0 + zeta
    s1 = np.sign(sigma1)
    w_hat_dot = -zeta - k1 * np.sqrt(np.abs(sigma1)) * s1 - k2 * int_sign
    w_hat_new = w_hat + dt * w_hat_dot
    int_sign_new = int_sign + dt * s1

    return (r_new, sigma0, chi0_new, chi1_new, zeta, sigma1,
            int_sign_new, w_hat_new, w_hat_dot)
