"""Independent oracles shared by the test modules.

These deliberately avoid the code paths they check: the QP oracle scans the
constraint boundary on a refined grid instead of projecting, and the
transform-equivalence oracle integrates the chain-coordinate dynamics
directly instead of going through the closed-loop engine.
"""

import numpy as np

from safechain import (
    from_transformed,
    input_from_virtual,
    nominal_to_virtual,
    original_rhs,
    residual_disturbance,
    rk4_step,
    to_transformed,
)


def qp_oracle(v_no, drift, lg, lam, alpha, span=50.0):
    """Brute-force minimizer of ||v - v_no|| subject to the affine constraint.

    Interior check first; otherwise a grid scan of the boundary hyperplane (a
    point for m=1, a line for m=2) anchored at the closest boundary point to
    the origin, refined once and finished with a parabola-vertex fit of the
    sampled cost (the cost is exactly quadratic along the boundary, so the
    fit is float-exact where pure grid refinement stalls on cost plateaus).
    Independent of the projection formula under test.
    """
    v_no = np.asarray(v_no, dtype=float)
    lg = np.asarray(lg, dtype=float)
    zeta = drift + lg @ v_no - lam + alpha
    if zeta >= 0.0:
        return v_no.copy()
    target = lam - alpha - drift  # boundary: lg @ v == target
    if v_no.size == 1:
        return np.array([target / lg[0]])
    anchor = lg * target / (lg @ lg)
    tangent = np.array([-lg[1], lg[0]]) / np.linalg.norm(lg)
    lo, hi = -span, span
    s = k = None
    for _ in range(2):
        s = np.linspace(lo, hi, 401)
        pts = anchor[None, :] + s[:, None] * tangent[None, :]
        cost = ((pts - v_no[None, :]) ** 2).sum(axis=1)
        k = min(max(int(np.argmin(cost)), 1), len(s) - 2)
        step = s[1] - s[0]
        lo, hi = s[k] - step, s[k] + step
    c_minus, c_0, c_plus = cost[k - 1], cost[k], cost[k + 1]
    denom = c_plus - 2.0 * c_0 + c_minus
    vertex = s[k] if denom == 0.0 else s[k] - (s[1] - s[0]) * (c_plus - c_minus) / (2.0 * denom)
    return anchor + vertex * tangent


def run_transform_pair(model, d_laws, v_law, x0, dt, duration):
    """Simulate the original cascade and the transformed chain side by side.

    Both use the same virtual-input law (a function of chain coordinates and
    time) evaluated continuously inside the integrator stages, so the two
    runs are exact coordinate images of one another up to integration error.
    Returns (times, original-run states mapped to chain coordinates,
    directly integrated chain states).
    """
    x0 = np.asarray(x0, dtype=float)
    steps = round(duration / dt)

    def d_at(t):
        return [np.asarray(d(t), dtype=float) for d in d_laws]

    def rhs_original(x, t):
        u = input_from_virtual(model, x, v_law(to_transformed(model, x), t))
        return original_rhs(model, x, u, d_at(t), t)

    def rhs_chain(phi, t):
        x = from_transformed(model, phi)
        w = residual_disturbance(model, x, d_at(t))
        out = np.empty_like(phi)
        m = model.m
        for i in range(model.n - 1):
            out[i * m:(i + 1) * m] = phi[(i + 1) * m:(i + 2) * m] + w[i]
        out[(model.n - 1) * m:] = v_law(phi, t) + w[model.n - 1]
        return out

    x = x0.copy()
    phi = to_transformed(model, x0)
    times = np.empty(steps + 1)
    mapped = np.empty((steps + 1, x0.size))
    direct = np.empty((steps + 1, x0.size))
    for k in range(steps + 1):
        t = k * dt
        times[k] = t
        mapped[k] = to_transformed(model, x)
        direct[k] = phi
        if k < steps:
            x = rk4_step(rhs_original, x, t, dt)
            phi = rk4_step(rhs_chain, phi, t, dt)
    return times, mapped, direct


def replay_chain_with_inputs(model, trace_u, d_laws, phi0, dt):
    """Re-integrate the chain dynamics under a recorded held-input sequence.

    ``trace_u`` holds the actuator command applied over each step.  The
    virtual input is recovered pointwise from the held command through the
    state-dependent input map, which is exactly what the plant experienced.
    """
    def d_at(t):
        return [np.asarray(d(t), dtype=float) for d in d_laws]

    phi = np.asarray(phi0, dtype=float).copy()
    out = np.empty((len(trace_u), phi.size))
    m = model.m
    for k, u_held in enumerate(trace_u):
        out[k] = phi
        if k == len(trace_u) - 1:
            break
        t = k * dt

        def rhs(p, tt):
            x = from_transformed(model, p)
            w = residual_disturbance(model, x, d_at(tt))
            v = nominal_to_virtual(model, x, u_held)
            d_out = np.empty_like(p)
            for i in range(model.n - 1):
                d_out[i * m:(i + 1) * m] = p[(i + 1) * m:(i + 2) * m] + w[i]
            d_out[(model.n - 1) * m:] = v + w[model.n - 1]
            return d_out

        phi = rk4_step(rhs, phi, t, dt)
    return out
