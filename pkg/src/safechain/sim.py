"""Fixed-step closed-loop simulation engine.

Each loop iteration, in order: read the states, advance the disturbance
observers, map the nominal plant input into chain coordinates, evaluate the
barrier cascade, solve the safety filter, map the filtered virtual input back
to an actuator command, record the step, and integrate plant and obstacle
with the command held constant across the step.  The controller only ever
sees quantities available at the step start; true disturbances are computed
for logging and never fed back.

Runs are deterministic: the same configuration produces a bit-identical
trace.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .barrier import cascade_eval
from .errors import NumericError, SafechainError, UnsafeInitialState
from .gains import GainFunction
from .observer import observer_init, observer_step
from .safety_filter import qp_filter


@dataclass(frozen=True)
class BarrierParams:
    """Cascade configuration as plain data (see barrier.BarrierCascade)."""

    rho: tuple
    theta: float
    mu: tuple = ()
    mode: str = "nominal"
    rho_margin: float = 0.1
    rho_bound: float = 0.0


@dataclass(frozen=True)
class ObserverParams:
    """Gains of one observer channel plus its perturbation-derivative bound."""

    level: int
    lambda0: float
    lambda1: float
    k1: float
    k2: float
    varsigma_bar: float = 0.0


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce one closed-loop run.

    ``hooks`` may carry scenario-specific callables (custom disturbance or
    nominal-input laws); it is code-level only and never serialized.
    """

    scenario: str
    dt: float = 1e-3
    duration: float = 10.0
    gain: GainFunction = field(default_factory=GainFunction.linear)
    barrier: BarrierParams = None
    observers: tuple = ()
    hooks: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.duration < self.dt:
            raise ValueError(f"duration must be >= dt, got {self.duration}")

    def to_dict(self) -> dict:
        out = {
            "scenario": self.scenario,
            "dt": self.dt,
            "duration": self.duration,
            "gain": self.gain.to_config(),
            "barrier": asdict(self.barrier) if self.barrier else None,
            "observer": {"channels": [asdict(o) for o in self.observers]},
        }
        if out["barrier"]:
            out["barrier"]["rho"] = list(out["barrier"]["rho"])
            out["barrier"]["mu"] = list(out["barrier"]["mu"])
        return out


@dataclass
class SimulationTrace:
    """Column-oriented record of one run."""

    scenario: str
    dt: float
    columns: tuple
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.data.shape[0]

    def col(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    @property
    def t(self) -> np.ndarray:
        return self.col("t")


def rk4_step(rhs, state, t: float, dt: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta update of ``state`` over [t, t+dt]."""
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    state = np.asarray(state, dtype=float)
    k1 = np.asarray(rhs(state, t))
    k2 = np.asarray(rhs(state + (0.5 * dt) * k1, t + 0.5 * dt))
    k3 = np.asarray(rhs(state + (0.5 * dt) * k2, t + 0.5 * dt))
    k4 = np.asarray(rhs(state + dt * k3, t + dt))
    incr = k1 + 2.0 * k2 + 2.0 * k3 + k4
    if not np.isfinite(incr).all():
        raise NumericError("non-finite derivative in rk4_step")
    return state + (dt / 6.0) * incr


def run_closed_loop(cfg: SimConfig) -> SimulationTrace:
    """Run one scenario to completion and return its trace."""
    from . import scenarios  # deferred: scenarios builds SimConfig objects

    scn = scenarios.instantiate(cfg)
    dt = cfg.dt
    steps = int(np.floor(cfg.duration / dt + 1e-9))

    plant = np.asarray(scn.plant0, dtype=float).copy()
    obs = None if scn.obstacle0 is None else np.asarray(scn.obstacle0, dtype=float).copy()

    channels = {}
    for spec in scn.observer_channels:
        p = spec.params
        channels[spec.level] = observer_init(
            p.lambda0, p.lambda1, p.k1, p.k2, scn.m, e0=spec.e_fn(plant, obs)
        )

    n = scn.n
    v_prev = np.zeros(scn.m)
    rows = []
    started = time.perf_counter()

    for k in range(steps + 1):
        t = k * dt
        try:
            psi = scn.chain_state(plant, obs)

            w_hat = [None] * n
            w_hat_dot = [None] * n
            for spec in scn.observer_channels:
                ch = observer_step(channels[spec.level], spec.e_fn(plant, obs),
                                   spec.phi_next_fn(psi, v_prev), dt)
                channels[spec.level] = ch
                w_hat[spec.level - 1] = ch.w_hat
                w_hat_dot[spec.level - 1] = ch.w_hat_dot

            u_no, v_no = scn.v_nominal(plant, obs, t)
            ev = cascade_eval(scn.cascade, psi, t, w_hat, w_hat_dot)
            if k == 0 and not ev.h_values[0] > 0.0:
                raise UnsafeInitialState(
                    f"h1 at the initial state is {ev.h_values[0]:.6g}; runs must start"
                    " strictly inside the safe set"
                )
            fr = qp_filter(v_no, ev.drift, ev.Lg_hn, ev.lambda_n,
                           scn.cascade.alpha_h(t, ev.h_values[-1], dt))
            u = scn.u_from_v(plant, fr.v)

            rows.append(scn.record_row(t, plant, obs, psi, ev, fr, u, channels))

            if k < steps:
                u_held = u
                plant = rk4_step(lambda s, tt: scn.plant_rhs(s, u_held, tt), plant, t, dt)
                if obs is not None:
                    obs = rk4_step(scn.obstacle_rhs, obs, t, dt)
                v_prev = fr.v
        except SafechainError as exc:
            if k == 0 and isinstance(exc, UnsafeInitialState):
                raise
            raise type(exc)(f"aborted at step {k} (t = {t:.6f}): {exc}") from exc

    runtime = time.perf_counter() - started
    meta = {
        "runtime_s": runtime,
        "config": cfg.to_dict(),
        "r_safe": scn.r_safe,
        "n_levels": n,
        "m": scn.m,
        "kernel_backend": _backend_name(),
    }
    return SimulationTrace(scenario=cfg.scenario, dt=dt, columns=tuple(scn.columns),
                           data=np.asarray(rows, dtype=float), meta=meta)


def _backend_name() -> str:
    from . import _kernels

    return _kernels.BACKEND
