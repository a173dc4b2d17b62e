"""Fixed-step time-domain simulation of the reference model and damaged plant.

The composite state per run is ``[y_m(4), y_d(4), L(2x4), T, T_dot]`` where
(T, T_dot) is the differential-thrust engine channel in lbf about trim. All
runs of a batch advance together with one RK4 step; every operation acts row by
row, so a run's result does not depend on which batch it was computed in.

Wiring in the engine-lag modes: the pilot's rudder step goes through the
differential thrust module (rad -> lbf, saturation, rate limit, delay, lag) and
becomes the available thrust; the adaptive/LQR feedback ``-L y_d`` is added to
that in the plant input. With ``engine_in_loop=True`` the whole thrust demand,
feedback included, is routed through the engine instead.
"""

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .allocation import LimiterConfig
from .integrate import SimulationError, rk4_step
from .propulsion import EngineModel, delay_steps

DIVERGENCE_LIMIT = 1e6
ONE_DEG = math.radians(1.0)

CSV_COLUMNS = (
    ["t", "phi_m", "p_m", "beta_m", "r_m", "phi_d", "p_d", "beta_d", "r_d",
     "e1", "e2", "e3", "e4", "da_cmd", "dT_cmd", "dT_avail"]
    + [f"L{i}{j}" for i in (1, 2) for j in (1, 2, 3, 4)]
    + ["dT_effort"]
)
CSV_UNITS = {
    "t": "s",
    **{c: "rad" for c in ("phi_m", "beta_m", "phi_d", "beta_d", "e1", "e3", "da_cmd")},
    **{c: "rad/s" for c in ("p_m", "r_m", "p_d", "r_d", "e2", "e4")},
    "dT_cmd": "lbf", "dT_avail": "lbf", "dT_effort": "lbf",
    **{f"L1{j}": "rad/(state unit)" for j in (1, 2, 3, 4)},
    **{f"L2{j}": "rad-equivalent/(state unit)" for j in (1, 2, 3, 4)},
}


class ScenarioKind(str, Enum):
    OPEN_LOOP = "openloop"
    LQR_CLOSED_LOOP = "lqr"
    MRAC_IDEAL = "mrac-ideal"
    MRAC_ENGINE_LAG = "mrac-engine-lag"


@dataclass(frozen=True)
class Scenario:
    kind: ScenarioKind = ScenarioKind.MRAC_ENGINE_LAG
    duration: float = 60.0
    dt: float = 0.005
    aileron_step: float = ONE_DEG
    rudder_step: float = ONE_DEG
    step_time: float = 0.0
    initial_model: tuple = (0.0, 0.0, 0.0, 0.0)
    initial_damaged: tuple = (0.0, 0.0, 0.0, 0.0)
    engine_in_loop: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def n_steps(self):
        return int(round(self.duration / self.dt))

    def u_c(self, t):
        if t + 1e-12 < self.step_time:
            return np.zeros(2)
        return np.array([self.aileron_step, self.rudder_step])


@dataclass
class SimTrace:
    t: np.ndarray
    model_state: np.ndarray
    damaged_state: np.ndarray
    error: np.ndarray
    aileron_cmd: np.ndarray
    dT_cmd: np.ndarray
    dT_avail: np.ndarray
    dT_effort: np.ndarray
    gains: np.ndarray
    saturated: np.ndarray
    kind: ScenarioKind = ScenarioKind.MRAC_ENGINE_LAG
    diverged: bool = False
    diverged_at: float | None = None

    def __len__(self):
        return len(self.t)

    @property
    def error_norm(self):
        return np.max(np.abs(self.error), axis=1)

    def table(self):
        return np.column_stack([
            self.t, self.model_state, self.damaged_state, self.error,
            self.aileron_cmd, self.dT_cmd, self.dT_avail,
            self.gains.reshape(len(self.t), 8), self.dT_effort,
        ])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in self.table():
                w.writerow([repr(float(x)) for x in row])


class _TraceRecorder:
    def __init__(self, n, batch):
        self.buf = {
            "y_m": np.full((n, batch, 4), np.nan),
            "y_d": np.full((n, batch, 4), np.nan),
            "da": np.full((n, batch), np.nan),
            "dT_cmd": np.full((n, batch), np.nan),
            "dT_avail": np.full((n, batch), np.nan),
            "dT_effort": np.full((n, batch), np.nan),
            "L": np.full((n, batch, 2, 4), np.nan),
            "sat": np.zeros((n, batch), dtype=bool),
        }

    def record(self, k, snap):
        for key, arr in self.buf.items():
            arr[k] = snap[key]


@dataclass
class _Plant:
    a_m: np.ndarray          # (4,4) reference dynamics
    b_m: np.ndarray          # (4,2)
    a_d: np.ndarray          # (B,4,4) damaged dynamics per run
    b_d: np.ndarray          # (4,2)
    gain: np.ndarray         # (2,4) adaptation gain matrix
    l0: np.ndarray           # (B,2,4)
    adapt: bool
    lag: bool                # engine channel active
    limits: bool             # aileron/thrust saturation active
    factor: float            # lbf per rad-equivalent thrust input
    engine: EngineModel = field(default_factory=EngineModel)
    limiter: LimiterConfig = field(default_factory=LimiterConfig)


def _mv(m, x):
    """Row-wise matrix-vector product; m is (r,c) or (B,r,c), x is (B,c).

    Stacked matmul works item by item, so a run's result does not depend on
    the batch size.
    """
    return np.matmul(m, x[..., None])[..., 0]


def _simulate(plant, scenario, recorder):
    sc = scenario
    dt = sc.dt
    n = sc.n_steps
    batch = plant.a_d.shape[0]
    a_m, b_m, b_d, gain = plant.a_m, plant.b_m, plant.b_d, plant.gain
    F = plant.factor
    ail_lim = plant.limiter.aileron_limit
    sat = plant.limiter.dT_saturation
    rate_step = plant.limiter.dT_rate_limit * dt
    tau, zeta = plant.engine.tau, plant.engine.zeta

    nd = delay_steps(plant.engine.t_d, dt) if plant.lag else 0
    delay_buf = np.zeros((max(nd, 1), batch))
    delay_idx = 0

    state = np.zeros((batch, 18))
    state[:, 0:4] = np.asarray(sc.initial_model, dtype=float)
    state[:, 4:8] = np.asarray(sc.initial_damaged, dtype=float)
    state[:, 8:16] = plant.l0.reshape(batch, 8)
    alive = np.ones(batch, dtype=bool)
    diverged_at = np.full(batch, np.nan)
    prev_cmd = np.zeros(batch)

    def clamp(x, lim):
        return np.minimum(np.maximum(x, -lim), lim)

    def efforts(y, uc):
        """(aileron, delivered thrust, raw aileron, raw thrust, feedback)."""
        y_d = y[:, 4:8]
        fb = -_mv(y[:, 8:16].reshape(batch, 2, 4), y_d)
        if not plant.lag:
            raw_da = uc[0] + fb[:, 0]
            raw_dT = (uc[1] + fb[:, 1]) * F
        else:
            raw_da = uc[0] + fb[:, 0]
            raw_dT = y[:, 16] if sc.engine_in_loop else y[:, 16] + fb[:, 1] * F
        if plant.limits:
            return clamp(raw_da, ail_lim), clamp(raw_dT, sat), raw_da, raw_dT, fb
        return raw_da, raw_dT, raw_da, raw_dT, fb

    inv_tau2, damp = 1.0 / tau**2, 2.0 * zeta / tau
    b_da, b_dT = b_d[:, 0], b_d[:, 1] / F

    def deriv(y, drive_m, uc, delayed):
        y_m, y_d = y[:, 0:4], y[:, 4:8]
        da, dT = efforts(y, uc)[:2]
        out = np.zeros_like(y)
        out[:, 0:4] = _mv(a_m, y_m) + drive_m
        out[:, 4:8] = _mv(plant.a_d, y_d) + da[:, None] * b_da + dT[:, None] * b_dT
        if plant.adapt:
            ge = _mv(gain, y_d - y_m)
            out[:, 8:16] = (ge[:, :, None] * y_d[:, None, :]).reshape(batch, 8)
        if plant.lag:
            T, Td = y[:, 16], y[:, 17]
            out[:, 16] = Td
            out[:, 17] = (delayed - T) * inv_tau2 - damp * Td
        if not all_alive:
            out[~alive] = 0.0
        return out

    all_alive = True
    for k in range(n + 1):
        if not alive.any():
            break
        t = k * dt
        uc = sc.u_c(t)
        da, dT, raw_da, raw_dT, fb = efforts(state, uc)
        saturated = (da != raw_da) | (dT != raw_dT)
        if plant.lag:
            demand = (uc[1] + fb[:, 1]) * F if sc.engine_in_loop else np.full(batch, uc[1] * F)
            cmd = clamp(demand, sat)
            cmd = np.minimum(np.maximum(cmd, prev_cmd - rate_step), prev_cmd + rate_step)
            prev_cmd = cmd
            avail = state[:, 16].copy()
        else:
            cmd = np.full(batch, uc[1] * F)
            avail = cmd
        recorder.record(k, {
            "y_m": state[:, 0:4], "y_d": state[:, 4:8], "da": da,
            "dT_cmd": cmd, "dT_avail": avail, "dT_effort": dT,
            "L": state[:, 8:16].reshape(batch, 2, 4), "sat": saturated,
        })
        if k == n:
            break
        if plant.lag and nd:
            delayed = delay_buf[delay_idx].copy()
            delay_buf[delay_idx] = cmd
            delay_idx = (delay_idx + 1) % nd
        else:
            delayed = cmd
        drive_m = b_m @ uc
        with np.errstate(over="ignore", invalid="ignore"):
            new = rk4_step_batch(lambda _t, y: deriv(y, drive_m, uc, delayed), t, state, dt)
        bad = alive & (~np.all(np.isfinite(new), axis=1)
                       | (np.max(np.abs(new[:, 0:8]), axis=1) > DIVERGENCE_LIMIT))
        if bad.any():
            diverged_at[bad] = t + dt
            alive &= ~bad
            all_alive = False
        state = np.where(alive[:, None], new, state)
    return diverged_at


def rk4_step_batch(f, t, y, dt):
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_step(f, t, y, dt):
    """Single RK4 step for ``y' = f(t, y)``; raises on non-finite results."""
    return rk4_step(f, t, np.asarray(y, dtype=float), dt)


def _trace_from(recorder, scenario, diverged_at, row=0):
    b = recorder.buf
    n = scenario.n_steps + 1
    t = np.arange(n) * scenario.dt
    div = not math.isnan(diverged_at[row])
    if div:
        # keep rows up to and including the last finite sample
        keep = int(np.sum(~np.isnan(b["y_d"][:, row, 0])))
        n = keep
        t = t[:n]
    y_m, y_d = b["y_m"][:n, row], b["y_d"][:n, row]
    return SimTrace(
        t=t, model_state=y_m.copy(), damaged_state=y_d.copy(), error=y_d - y_m,
        aileron_cmd=b["da"][:n, row].copy(), dT_cmd=b["dT_cmd"][:n, row].copy(),
        dT_avail=b["dT_avail"][:n, row].copy(), dT_effort=b["dT_effort"][:n, row].copy(),
        gains=b["L"][:n, row].copy(), saturated=b["sat"][:n, row].copy(),
        kind=scenario.kind, diverged=div,
        diverged_at=None if not div else float(diverged_at[row]),
    )


def _closed_loop_plant(scenario, design, cfg, factor, engine, limiter, a_d=None, l0=None):
    kind = scenario.kind
    a_batch = np.asarray(design.a_d if a_d is None else a_d, dtype=float)
    if a_batch.ndim == 2:
        a_batch = a_batch[None]
    batch = a_batch.shape[0]
    if kind == ScenarioKind.LQR_CLOSED_LOOP:
        l_init, adapt = design.k, False
    elif kind in (ScenarioKind.MRAC_IDEAL, ScenarioKind.MRAC_ENGINE_LAG):
        l_init, adapt = cfg.l_initial, True
    else:
        raise ValueError(f"scenario kind {kind.value} is not a closed-loop scenario")
    if l0 is not None:
        l_init = l0
    lag = kind != ScenarioKind.MRAC_IDEAL
    return _Plant(
        a_m=design.a_m, b_m=design.b_d, a_d=a_batch, b_d=design.b_d,
        gain=cfg.gain, l0=np.broadcast_to(np.asarray(l_init, dtype=float), (batch, 2, 4)).copy(),
        adapt=adapt, lag=lag, limits=lag, factor=factor,
        engine=engine, limiter=limiter,
    )


def run_closed_loop(scenario, design, cfg, factor, engine=None, limiter=None, l0=None):
    """LQR, ideal-MRAC or engine-lag MRAC run on the design's damaged plant."""
    engine = engine or EngineModel()
    limiter = limiter or LimiterConfig()
    plant = _closed_loop_plant(scenario, design, cfg, factor, engine, limiter, l0=l0)
    rec = _TraceRecorder(scenario.n_steps + 1, 1)
    diverged_at = _simulate(plant, scenario, rec)
    return _trace_from(rec, scenario, diverged_at)


def run_mrac(scenario, design, cfg, factor, engine=None, limiter=None, l0=None):
    if scenario.kind not in (ScenarioKind.MRAC_IDEAL, ScenarioKind.MRAC_ENGINE_LAG):
        raise ValueError("run_mrac needs an MRAC scenario kind")
    return run_closed_loop(scenario, design, cfg, factor, engine, limiter, l0)


def run_lqr(scenario, design, cfg, factor, engine=None, limiter=None):
    return run_closed_loop(replace(scenario, kind=ScenarioKind.LQR_CLOSED_LOOP),
                           design, cfg, factor, engine, limiter)


def run_open_loop(plant_model, scenario, factor=1.0):
    """Uncontrolled response ``x' = A x + B u_c`` to the scenario's input steps.

    ``factor`` only scales the recorded thrust columns (lbf per input unit).
    Model-plant columns stay zero, so the error equals the plant state.
    """
    a = np.asarray(plant_model.a, dtype=float)
    b = np.asarray(plant_model.b, dtype=float)
    plant = _Plant(
        a_m=np.zeros((4, 4)), b_m=np.zeros((4, 2)), a_d=a[None], b_d=b,
        gain=np.zeros((2, 4)), l0=np.zeros((1, 2, 4)), adapt=False, lag=False,
        limits=False, factor=factor,
    )
    sc = replace(scenario, kind=ScenarioKind.OPEN_LOOP)
    rec = _TraceRecorder(sc.n_steps + 1, 1)
    diverged_at = _simulate(plant, sc, rec)
    return _trace_from(rec, sc, diverged_at)


class _MetricsRecorder:
    """Keeps only what the Monte Carlo summary needs, per run."""

    def __init__(self, n, batch):
        self.err = np.full((n, batch), np.nan)
        self.ail_peak = np.zeros(batch)
        self.dT_peak = np.zeros(batch)
        self.ail_last = np.zeros(batch)
        self.dT_last = np.zeros(batch)

    def record(self, k, snap):
        e = snap["y_d"] - snap["y_m"]
        self.err[k] = np.max(np.abs(e), axis=1)
        da, dT = snap["da"], snap["dT_effort"]
        self.ail_peak = np.where(np.abs(da) > np.abs(self.ail_peak), da, self.ail_peak)
        self.dT_peak = np.where(np.abs(dT) > np.abs(self.dT_peak), dT, self.dT_peak)
        ok = np.isfinite(da) & np.isfinite(dT)
        self.ail_last = np.where(ok, da, self.ail_last)
        self.dT_last = np.where(ok, dT, self.dT_last)


def run_batch_metrics(scenario, design, cfg, factor, a_batch, engine=None, limiter=None):
    """Run many damaged-plant matrices at once; return per-run metric arrays."""
    engine = engine or EngineModel()
    limiter = limiter or LimiterConfig()
    plant = _closed_loop_plant(scenario, design, cfg, factor, engine, limiter, a_d=a_batch)
    rec = _MetricsRecorder(scenario.n_steps + 1, plant.a_d.shape[0])
    diverged_at = _simulate(plant, scenario, rec)
    return rec, diverged_at


def settle_time(t, err_norm, fraction=0.01):
    """First time after which ``err_norm`` stays at or below fraction * peak."""
    err_norm = np.asarray(err_norm)
    peak = np.nanmax(err_norm) if err_norm.size else 0.0
    above = np.nonzero(~(err_norm <= fraction * peak))[0]
    if above.size == 0:
        return float(t[0])
    last = above[-1]
    return math.inf if last + 1 >= len(t) else float(t[last + 1])


__all__ = [
    "CSV_COLUMNS", "CSV_UNITS", "Scenario", "ScenarioKind", "SimTrace", "SimulationError",
    "integrate_step", "run_closed_loop", "run_lqr", "run_mrac", "run_open_loop",
    "run_batch_metrics", "settle_time",
]
