"""Closed-form minimally invasive safety filter.

The safety constraint on the virtual input v is a single affine inequality

    drift + Lg . v - lambda_n + alpha_h >= 0,

where drift collects every input-independent term of the barrier's rate,
lambda_n is an optional robustness margin and alpha_h the barrier relaxation
term supplied by the caller.  Minimizing ||v - v_no||^2 subject to it has the
standard KKT solution: keep v_no when it already satisfies the constraint,
otherwise project onto the boundary hyperplane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleConstraint

_DEGENERATE_LG = 1e-12


@dataclass(frozen=True)
class FilterResult:
    """Outcome of one filter evaluation.

    ``zeta`` is the constraint slack at the nominal input; the filter is
    active exactly when it is negative, in which case ``v`` sits on the
    constraint boundary.
    """

    v: np.ndarray
    zeta: float
    active: bool
    correction_norm: float


def qp_filter(v_no, drift, Lg, lambda_n, alpha_h) -> FilterResult:
    """Minimally modify v_no so the affine safety constraint holds.

    Ties at zero slack count as satisfied (the nominal input is returned
    unchanged).  A violated constraint with a vanished input direction Lg has
    no feasible correction and raises ``InfeasibleConstraint``; the barrier
    construction is supposed to rule that situation out.
    """
    v_no = np.asarray(v_no, dtype=float)
    Lg = np.asarray(Lg, dtype=float)
    zeta = float(drift) + float(Lg @ v_no) - float(lambda_n) + float(alpha_h)
    if zeta >= 0.0:
        return FilterResult(v=v_no.copy(), zeta=zeta, active=False, correction_norm=0.0)
    lg_norm2 = float(Lg @ Lg)
    if np.sqrt(lg_norm2) < _DEGENERATE_LG:
        raise InfeasibleConstraint(
            f"constraint violated (slack {zeta:.3e}) but the input direction is zero"
        )
    v = v_no - Lg * (zeta / lg_norm2)
    return FilterResult(v=v, zeta=zeta, active=True,
                        correction_norm=float(np.linalg.norm(v - v_no)))


def worst_case_margin(grad_h, rho: float) -> float:
    """Robustness margin ||grad_h|| * rho for a known disturbance bound rho.

    Subtract it from the drift to make the barrier condition hold for every
    disturbance of norm at most rho.  Nonsmooth in the state, so only suitable
    for single-level (relative-degree-one) filtering.
    """
    rho = float(rho)
    if rho < 0.0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    return float(np.linalg.norm(np.asarray(grad_h, dtype=float)) * rho)


def dorcbf_margin(grad_h, w_hat_norm: float) -> float:
    """Observer-based robustness margin ||grad_h|| * ||w_hat||.

    Same structure as ``worst_case_margin`` but scaled by the current estimate
    instead of a worst-case bound; nonsmooth, single-level use only.  The
    smooth majorant used inside the cascade always dominates this quantity.
    """
    w_hat_norm = float(w_hat_norm)
    if w_hat_norm < 0.0:
        raise ValueError(f"w_hat_norm must be >= 0, got {w_hat_norm}")
    return float(np.linalg.norm(np.asarray(grad_h, dtype=float)) * w_hat_norm)
