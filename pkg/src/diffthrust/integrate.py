import numpy as np


class SimulationError(RuntimeError):
    pass


def rk4_step(f, t, y, dt):
    """One classical Runge-Kutta step of ``y' = f(t, y)``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise SimulationError(f"non-finite state after step at t={t:.6g}")
    return out
