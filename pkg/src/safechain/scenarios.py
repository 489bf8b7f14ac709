"""Shipped scenarios: the vehicle/moving-obstacle study plus two chain testbeds.

``vehicle_dorcbf`` runs a planar vehicle against a wandering obstacle whose
motion is unknown to the controller and estimated online by a disturbance
observer feeding an observer-aware barrier cascade.  ``vehicle_bcbf`` is the
baseline: same gains, same barrier, but the cascade assumes the obstacle is
frozen, which is exactly what makes it collide.  ``worked_example_n3`` is a
third-order single-input cascade with closed-form feedback terms, used mainly
to exercise the coordinate transform, and ``envelope_chain`` is a double
integrator pushed at a wall, used to check decay envelopes for every gain
family.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .barrier import BarrierCascade, initial_gain_bounds
from .errors import ConfigError
from .gains import GainFunction
from .observer import observer_gain_check
from .sim import BarrierParams, ObserverParams, SimConfig
from .strict_feedback import (
    DisturbanceSignal,
    get_model,
    input_from_virtual,
    nominal_to_virtual,
    original_rhs,
    regularized_solve,
    residual_disturbance,
    to_transformed,
)

VEHICLE_SAFE_RADIUS = 1.0
VEHICLE_G_EPS = 1e-3


# -- vehicle and obstacle primitives ----------------------------------------


@dataclass(frozen=True)
class VehicleState:
    """Planar vehicle: position, forward speed, heading (heading unwrapped)."""

    x: float
    y: float
    v: float
    theta: float

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.v, self.theta])


@dataclass(frozen=True)
class ObstacleState:
    """Obstacle vehicle: position and heading; speed/turn laws live separately."""

    x_d: float
    y_d: float
    theta_d: float

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x_d, self.y_d, self.theta_d])


def obstacle_speed(t: float) -> float:
    return 1.0


def obstacle_turn_rate(t: float) -> float:
    return 2.0 * math.cos(2.0 * t)


def vehicle_rhs(state, u) -> np.ndarray:
    """(x, y, v, heading) rates under acceleration u[0] and turn rate u[1]."""
    x, y, v, th = np.asarray(state, dtype=float)
    u = np.asarray(u, dtype=float)
    return np.array([v * math.cos(th), v * math.sin(th), u[0], u[1]])


def obstacle_rhs(state, t, v_d: Callable = obstacle_speed,
                 u_d: Callable = obstacle_turn_rate) -> np.ndarray:
    """(x_d, y_d, heading) rates of the obstacle vehicle."""
    sp = float(v_d(t))
    th = float(np.asarray(state, dtype=float)[2])
    return np.array([sp * math.cos(th), sp * math.sin(th), float(u_d(t))])


def vehicle_nominal(state) -> np.ndarray:
    """Cruise controller: drive speed to 1 and heading to 0 (unit gains)."""
    s = np.asarray(state, dtype=float)
    return np.array([-(s[2] - 1.0), -s[3]])


def vehicle_input_matrix(state) -> np.ndarray:
    """Matrix mapping (acceleration, turn rate) to velocity-vector rates."""
    s = np.asarray(state, dtype=float)
    v, th = s[2], s[3]
    c, sn = math.cos(th), math.sin(th)
    return np.array([[c, -v * sn], [sn, v * c]])


# -- runtime plumbing ---------------------------------------------------------


@dataclass(frozen=True)
class ChannelSpec:
    """Wiring of one observer channel into the loop."""

    level: int
    params: ObserverParams
    e_fn: Callable      # (plant, obstacle) -> tracked quantity
    phi_next_fn: Callable  # (chain state, previous virtual input) -> drive term


@dataclass
class RuntimeScenario:
    """Everything the engine needs; built from a SimConfig by ``instantiate``."""

    key: str
    n: int
    m: int
    plant0: np.ndarray
    obstacle0: Optional[np.ndarray]
    plant_rhs: Callable
    obstacle_rhs: Optional[Callable]
    chain_state: Callable
    v_nominal: Callable
    u_from_v: Callable
    cascade: BarrierCascade
    observer_channels: tuple
    columns: tuple
    record_row: Callable
    r_safe: Optional[float] = None


# -- scenario defaults --------------------------------------------------------

_VEHICLE_OBSERVER = {
    "channels": [
        {"level": 1, "lambda0": 20.0, "lambda1": 10.0, "k1": 10.0, "k2": 10.0,
         "varsigma_bar": 2.5}
    ]
}

_DEFAULTS = {
    "vehicle_dorcbf": {
        "scenario": "vehicle_dorcbf",
        "dt": 1e-3,
        "duration": 10.0,
        "gain": {"family": "linear"},
        "barrier": {"rho": [5.0, 0.5], "theta": 3.0, "mu": [0.2],
                    "mode": "observer", "rho_margin": 0.1, "rho_bound": 0.0},
        "observer": _VEHICLE_OBSERVER,
    },
    "vehicle_bcbf": {
        "scenario": "vehicle_bcbf",
        "dt": 1e-3,
        "duration": 10.0,
        "gain": {"family": "linear"},
        "barrier": {"rho": [5.0, 0.5], "theta": 3.0, "mu": [],
                    "mode": "nominal", "rho_margin": 0.1, "rho_bound": 0.0},
        "observer": {"channels": []},
    },
    "worked_example_n3": {
        "scenario": "worked_example_n3",
        "dt": 1e-3,
        "duration": 5.0,
        "gain": {"family": "linear"},
        "barrier": {"rho": [1.0, 1.0, 0.5], "theta": 1.0, "mu": [],
                    "mode": "nominal", "rho_margin": 0.1, "rho_bound": 0.0},
        "observer": {"channels": []},
    },
    "envelope_chain": {
        "scenario": "envelope_chain",
        "dt": 1e-3,
        "duration": 3.0,
        "gain": {"family": "linear"},
        # rho[1] large enough that the filter stays inactive for an initial
        # stretch: the decay floor then detaches from the trajectory before
        # any boundary riding starts
        "barrier": {"rho": [2.0, 1.0], "theta": 1.0, "mu": [],
                    "mode": "nominal", "rho_margin": 0.1, "rho_bound": 0.0},
        "observer": {"channels": []},
    },
}

SCENARIO_KEYS = tuple(_DEFAULTS)

_TOP_KEYS = {"scenario", "dt", "duration", "gain", "barrier", "observer"}
_BARRIER_KEYS = {"rho", "theta", "mu", "mode", "rho_margin", "rho_bound"}
_CHANNEL_KEYS = {"level", "lambda0", "lambda1", "k1", "k2", "varsigma_bar"}


def default_config(key: str) -> dict:
    if key not in _DEFAULTS:
        raise ConfigError(f"unknown scenario {key!r}; available: {sorted(_DEFAULTS)}")
    return copy.deepcopy(_DEFAULTS[key])


def merge_config(base: dict, override: dict) -> dict:
    """Recursive dict merge; override wins, nested dicts merge key by key."""
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = merge_config(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def config_from_dict(raw: dict, hooks: dict | None = None) -> SimConfig:
    """Validate a plain config dict (defaults already merged) into a SimConfig."""
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "scenario" not in raw:
        raise ConfigError("config must name a scenario")
    if raw["scenario"] not in _DEFAULTS:
        raise ConfigError(
            f"unknown scenario {raw['scenario']!r}; available: {sorted(_DEFAULTS)}"
        )

    bar = raw.get("barrier", {})
    unknown = set(bar) - _BARRIER_KEYS
    if unknown:
        raise ConfigError(f"unknown barrier config keys: {sorted(unknown)}")
    obs = raw.get("observer", {})
    if set(obs) - {"channels"}:
        raise ConfigError(f"unknown observer config keys: {sorted(set(obs) - {'channels'})}")
    channels = []
    for chan in obs.get("channels", []):
        unknown = set(chan) - _CHANNEL_KEYS
        if unknown:
            raise ConfigError(f"unknown observer channel keys: {sorted(unknown)}")
        channels.append(ObserverParams(
            level=int(chan["level"]),
            lambda0=float(chan["lambda0"]), lambda1=float(chan["lambda1"]),
            k1=float(chan["k1"]), k2=float(chan["k2"]),
            varsigma_bar=float(chan.get("varsigma_bar", 0.0)),
        ))

    try:
        cfg = SimConfig(
            scenario=raw["scenario"],
            dt=float(raw.get("dt", 1e-3)),
            duration=float(raw.get("duration", 10.0)),
            gain=GainFunction.from_config(raw.get("gain", {"family": "linear"})),
            barrier=BarrierParams(
                rho=tuple(float(r) for r in bar["rho"]),
                theta=float(bar["theta"]),
                mu=tuple(float(mu) for mu in bar.get("mu", [])),
                mode=str(bar.get("mode", "nominal")),
                rho_margin=float(bar.get("rho_margin", 0.1)),
                rho_bound=float(bar.get("rho_bound", 0.0)),
            ),
            observers=tuple(channels),
            hooks=hooks or {},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    instantiate(cfg)  # surface structural problems (bad rho length, modes, ...) now
    return cfg


def build_vehicle_scenario(mode: str = "dorcbf", overrides: dict | None = None) -> SimConfig:
    """Config for the vehicle study; mode 'dorcbf' (observer-aware) or 'bcbf'."""
    mode = mode.lower()
    if mode not in ("dorcbf", "bcbf"):
        raise ConfigError(f"vehicle mode must be 'dorcbf' or 'bcbf', got {mode!r}")
    raw = default_config(f"vehicle_{mode}")
    if overrides:
        raw = merge_config(raw, overrides)
    return config_from_dict(raw)


def build_worked_example_scenario(d_laws=None, u_law=None,
                                  overrides: dict | None = None) -> SimConfig:
    """Config for the third-order cascade.

    ``d_laws`` optionally replaces the synthetic per-level disturbances
    (default 0.3*sin t, 0.2*cos t, 0) and ``u_law`` the stabilizing virtual
    feedback; both are code-level hooks, not serializable configuration.
    """
    raw = default_config("worked_example_n3")
    if overrides:
        raw = merge_config(raw, overrides)
    hooks = {}
    if d_laws is not None:
        hooks["d_laws"] = tuple(d_laws)
    if u_law is not None:
        hooks["u_law"] = u_law
    return config_from_dict(raw, hooks=hooks)


def build_envelope_chain_scenario(gain: dict | None = None,
                                  overrides: dict | None = None) -> SimConfig:
    """Config for the double-integrator envelope testbed."""
    raw = default_config("envelope_chain")
    if gain is not None:
        raw["gain"] = gain
    if overrides:
        raw = merge_config(raw, overrides)
    return config_from_dict(raw)


# -- runtime construction -----------------------------------------------------


def _vehicle_runtime(cfg: SimConfig) -> RuntimeScenario:
    bar = cfg.barrier
    r = VEHICLE_SAFE_RADIUS

    def h1_fn(blocks):
        dx, dy = blocks[0]
        return dx * dx + dy * dy - r * r

    def h1_grad_fn(blocks):
        dx, dy = blocks[0]
        zero = dx * 0.0
        return [2.0 * dx, 2.0 * dy, zero, zero]

    cascade = BarrierCascade(
        n=2, m=2, h1=h1_fn, h1_grad=h1_grad_fn, rho=bar.rho, theta=bar.theta,
        gain=cfg.gain, mode=bar.mode, mu=bar.mu, rho_bound=bar.rho_bound,
    )

    def chain_state(plant, obs):
        x, y, v, th = plant
        return np.array([x - obs[0], y - obs[1], v * math.cos(th), v * math.sin(th)])

    def v_nominal(plant, obs, t):
        u_no = vehicle_nominal(plant)
        return u_no, vehicle_input_matrix(plant) @ u_no

    def u_from_v(plant, v):
        return regularized_solve(vehicle_input_matrix(plant), v, VEHICLE_G_EPS)

    def relative_position(plant, obs):
        return np.array([plant[0] - obs[0], plant[1] - obs[1]])

    channels = tuple(
        ChannelSpec(level=p.level, params=p, e_fn=relative_position,
                    phi_next_fn=lambda psi, v_prev: psi[2:4])
        for p in cfg.observers
    )

    def true_w1(obs, t):
        sp = obstacle_speed(t)
        return np.array([-sp * math.cos(obs[2]), -sp * math.sin(obs[2])])

    columns = ("t", "x", "y", "v", "theta", "xd", "yd", "dist", "h1", "h2",
               "zeta", "filter_active", "v1", "v2", "u1", "u2",
               "what1x", "what1y", "w1x", "w1y")

    def record_row(t, plant, obs, psi, ev, fr, u, chans):
        wh = chans[1].w_hat if 1 in chans else np.zeros(2)
        w1 = true_w1(obs, t)
        return [t, plant[0], plant[1], plant[2], plant[3], obs[0], obs[1],
                math.hypot(psi[0], psi[1]), ev.h_values[0], ev.h_values[1],
                fr.zeta, float(fr.active), fr.v[0], fr.v[1], u[0], u[1],
                wh[0], wh[1], w1[0], w1[1]]

    return RuntimeScenario(
        key=cfg.scenario, n=2, m=2,
        plant0=np.zeros(4), obstacle0=np.array([3.0, -3.0, math.pi / 2.0]),
        plant_rhs=lambda s, u, t: vehicle_rhs(s, u),
        obstacle_rhs=obstacle_rhs,
        chain_state=chain_state, v_nominal=v_nominal, u_from_v=u_from_v,
        cascade=cascade, observer_channels=channels,
        columns=columns, record_row=record_row, r_safe=r,
    )


def _worked_example_runtime(cfg: SimConfig) -> RuntimeScenario:
    model = get_model("worked_example_n3")
    bar = cfg.barrier

    d_laws = cfg.hooks.get("d_laws")
    if d_laws is None:
        d_laws = (
            lambda t: np.array([0.3 * math.sin(t)]),
            lambda t: np.array([0.2 * math.cos(t)]),
            lambda t: np.zeros(1),
        )
    disturbance = DisturbanceSignal(d=tuple(d_laws))

    u_law = cfg.hooks.get("u_law")
    if u_law is None:
        u_law = lambda phi, t: np.array([-3.0 * (phi[0] + phi[1] + phi[2])])

    def h1_fn(blocks):
        # wide keep-above set; linear, so the gradient never vanishes and the
        # filter never engages on the bounded demo trajectories
        return blocks[0][0] + 100.0

    def h1_grad_fn(blocks):
        p1 = blocks[0][0]
        one = p1 * 0.0 + 1.0
        return [one, p1 * 0.0, p1 * 0.0]

    cascade = BarrierCascade(
        n=3, m=1, h1=h1_fn, h1_grad=h1_grad_fn, rho=bar.rho, theta=bar.theta,
        gain=cfg.gain, mode=bar.mode, mu=bar.mu, rho_bound=bar.rho_bound,
    )

    def chain_state(plant, obs):
        return to_transformed(model, plant)

    def v_nominal(plant, obs, t):
        u_no = input_from_virtual(model, plant, u_law(to_transformed(model, plant), t))
        return u_no, nominal_to_virtual(model, plant, u_no)

    def u_from_v(plant, v):
        return input_from_virtual(model, plant, v)

    def plant_rhs(s, u, t):
        return original_rhs(model, s, u, disturbance, t)

    columns = tuple(["t"] + [f"x{i}" for i in (1, 2, 3)] + [f"phi{i}" for i in (1, 2, 3)]
                    + [f"h{i}" for i in (1, 2, 3)]
                    + ["zeta", "filter_active", "v1", "u1", "wtrue1", "wtrue2", "wtrue3"])

    def record_row(t, plant, obs, psi, ev, fr, u, chans):
        w = residual_disturbance(model, plant, disturbance.values(t))
        return [t, plant[0], plant[1], plant[2], psi[0], psi[1], psi[2],
                ev.h_values[0], ev.h_values[1], ev.h_values[2],
                fr.zeta, float(fr.active), fr.v[0], u[0], w[0][0], w[1][0], w[2][0]]

    return RuntimeScenario(
        key=cfg.scenario, n=3, m=1,
        plant0=np.array([0.5, -0.3, 0.2]), obstacle0=None,
        plant_rhs=plant_rhs, obstacle_rhs=None,
        chain_state=chain_state, v_nominal=v_nominal, u_from_v=u_from_v,
        cascade=cascade, observer_channels=(),
        columns=columns, record_row=record_row,
    )


def _envelope_chain_runtime(cfg: SimConfig) -> RuntimeScenario:
    bar = cfg.barrier

    def h1_fn(blocks):
        p1 = blocks[0][0]
        return 1.0 - p1 * p1

    def h1_grad_fn(blocks):
        p1 = blocks[0][0]
        return [-2.0 * p1, p1 * 0.0]

    cascade = BarrierCascade(
        n=2, m=1, h1=h1_fn, h1_grad=h1_grad_fn, rho=bar.rho, theta=bar.theta,
        gain=cfg.gain, mode=bar.mode, mu=bar.mu, rho_bound=bar.rho_bound,
    )

    def record_row(t, plant, obs, psi, ev, fr, u, chans):
        return [t, plant[0], plant[1], ev.h_values[0], ev.h_values[1],
                fr.zeta, float(fr.active), fr.v[0], u[0]]

    return RuntimeScenario(
        key=cfg.scenario, n=2, m=1,
        plant0=np.array([0.3, 0.4]), obstacle0=None,
        plant_rhs=lambda s, u, t: np.array([s[1], u[0]]),
        obstacle_rhs=None,
        chain_state=lambda plant, obs: plant.copy(),
        v_nominal=lambda plant, obs, t: (np.array([2.0]), np.array([2.0])),
        u_from_v=lambda plant, v: np.asarray(v, dtype=float).copy(),
        cascade=cascade, observer_channels=(),
        columns=("t", "x1", "x2", "h1", "h2", "zeta", "filter_active", "v1", "u1"),
        record_row=record_row,
    )


_RUNTIMES = {
    "vehicle_dorcbf": _vehicle_runtime,
    "vehicle_bcbf": _vehicle_runtime,
    "worked_example_n3": _worked_example_runtime,
    "envelope_chain": _envelope_chain_runtime,
}


def instantiate(cfg: SimConfig) -> RuntimeScenario:
    try:
        builder = _RUNTIMES[cfg.scenario]
    except KeyError:
        raise ConfigError(
            f"unknown scenario {cfg.scenario!r}; available: {sorted(_RUNTIMES)}"
        ) from None
    return builder(cfg)


def config_warnings(cfg: SimConfig) -> list:
    """Design-condition violations worth surfacing at parse time.

    Checks the configured intermediate cascade gains against their critical
    initial-state values and the observer gains against the finite-time
    convergence condition.  Returns human-readable messages (possibly empty).
    """
    scn = instantiate(cfg)
    messages = []
    psi0 = scn.chain_state(scn.plant0, scn.obstacle0)
    w0 = [np.zeros(scn.m)] * scn.n if cfg.barrier.mode == "observer" else None
    bounds = initial_gain_bounds(scn.cascade, psi0, 0.0, w_hat=w0)
    for i, bound in enumerate(bounds, start=1):
        rho_i = cfg.barrier.rho[i - 1]
        if rho_i <= bound:
            messages.append(
                f"initial-gain bound {bound:.3f} exceeds rho[{i - 1}]={rho_i:g}:"
                f" barrier level {i + 1} starts nonpositive at the initial state"
            )
    for chan in cfg.observers:
        if chan.varsigma_bar > 0.0 and not observer_gain_check(
                chan.k1, chan.k2, chan.varsigma_bar):
            messages.append(
                f"observer channel {chan.level}: gains k1={chan.k1:g}, k2={chan.k2:g}"
                f" fail the finite-time condition for varsigma_bar={chan.varsigma_bar:g}"
                f" (need k1 >= {1.5 * math.sqrt(chan.varsigma_bar):.3f},"
                f" k2 >= {1.1 * chan.varsigma_bar:.3f})"
            )
    return messages
