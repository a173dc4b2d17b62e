"""Engine thrust response as a delayed, critically damped second-order lag.

    T'' + 2 zeta T' / tau + T / tau^2 = T_c(t - t_d) / tau^2

The delay is an integer number of integration steps held in a ring buffer, so
the delayed command is piecewise constant across each step.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .integrate import rk4_step


@dataclass(frozen=True)
class EngineModel:
    tau: float = 1.25
    zeta: float = 1.0
    t_d: float = 0.4
    T_max: float = 46500.0
    T_trim: float = 3221.0
    rate_limit: float = 12726.0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.t_d < 0:
            raise ValueError("t_d must be nonnegative")
        if not 0 <= self.T_trim < self.T_max:
            raise ValueError("need 0 <= T_trim < T_max")
        if self.rate_limit <= 0:
            raise ValueError("rate_limit must be positive")

    @property
    def peak_slope(self):
        """Largest thrust rate of an unlimited step from trim to T_max."""
        return (self.T_max - self.T_trim) / (self.tau * np.e)


@dataclass
class EngineState:
    T: float
    T_dot: float = 0.0


def engine_derivative(state, delayed_command, model):
    """(dT/dt, d2T/dt2) for thrust ``state`` = (T, T_dot); works on arrays too."""
    T, T_dot = (state.T, state.T_dot) if isinstance(state, EngineState) else state
    tau = model.tau
    return T_dot, (delayed_command - T) / tau**2 - 2.0 * model.zeta * T_dot / tau


def delay_steps(t_d, dt):
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = int(round(t_d / dt))
    if abs(n * dt - t_d) > 1e-9 * max(t_d, dt):
        raise ValueError(f"dt={dt} does not divide the engine delay t_d={t_d}")
    return n


class DelayLine:
    """Fixed-length FIFO of past command samples."""

    def __init__(self, n, initial):
        self.n = n
        self._buf = deque([initial] * n, maxlen=n) if n else None

    def push(self, value):
        """Store ``value`` and return the sample from ``n`` pushes ago."""
        if not self.n:
            return value
        out = self._buf[0]
        self._buf.append(value)
        return out


def rate_limit(value, previous, max_rate, dt):
    step = max_rate * dt
    return np.clip(value, previous - step, previous + step)


@dataclass(frozen=True)
class EngineTrace:
    t: np.ndarray
    command: np.ndarray
    available: np.ndarray
    rate: np.ndarray

    def rows(self):
        return zip(self.t, self.command, self.available)


def step_response(model, command, duration, dt=0.005, rate_limited=False):
    """Thrust history after a step in throttle command at t = 0.

    The command is saturated to [0, T_max] (and optionally rate limited) before
    it enters the delay and the lag; the engine starts at trim equilibrium.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if duration < model.t_d:
        raise ValueError("duration shorter than the engine delay")
    nd = delay_steps(model.t_d, dt)
    n = int(round(duration / dt))
    line = DelayLine(nd, model.T_trim)
    target = float(np.clip(command, 0.0, model.T_max))

    t = np.arange(n + 1) * dt
    cmd = np.empty(n + 1)
    avail = np.empty(n + 1)
    rate = np.empty(n + 1)
    y = np.array([model.T_trim, 0.0])
    prev = model.T_trim
    for k in range(n + 1):
        c = rate_limit(target, prev, model.rate_limit, dt) if rate_limited else target
        prev = c
        cmd[k], avail[k], rate[k] = c, y[0], y[1]
        if k == n:
            break
        delayed = line.push(c)
        y = rk4_step(lambda _t, s: np.array(engine_derivative(s, delayed, model)), t[k], y, dt)
    return EngineTrace(t, cmd, avail, rate)
