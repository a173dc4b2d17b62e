"""Differential thrust control module.

Maps a rudder demand to an equivalent differential thrust by matching yawing
moments (q S b Cn_dr * delta_r = dT * y_e), limits it, and splits it across the
two outboard engines while the inboard pair stays at trim.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConversionContext:
    q_bar: float
    S: float
    b: float
    CN_dr: float
    y_e: float

    def __post_init__(self):
        if self.y_e <= 0:
            raise ValueError("y_e must be positive")
        if min(self.q_bar, self.S, self.b) <= 0:
            raise ValueError("q_bar, S and b must be positive")

    @property
    def factor(self):
        """lbf of differential thrust per radian of rudder."""
        return self.q_bar * self.S * self.b * abs(self.CN_dr) / self.y_e

    @classmethod
    def from_aircraft(cls, derivs, geom, trim):
        return cls(trim.q_bar, geom.S, geom.b, derivs.CN_dr, geom.y_e)


@dataclass(frozen=True)
class LimiterConfig:
    aileron_limit: float = math.radians(26.0)
    dT_saturation: float = 43729.0
    dT_rate_limit: float = 12726.0

    def __post_init__(self):
        if min(self.aileron_limit, self.dT_saturation, self.dT_rate_limit) <= 0:
            raise ValueError("limits must be positive")


@dataclass(frozen=True)
class ThrustAllocation:
    T1: float
    T2: float
    T3: float
    T4: float

    @property
    def differential(self):
        return self.T1 - self.T4

    @property
    def symmetric(self):
        return math.isclose(self.T1 + self.T4, 2 * self.T2, rel_tol=1e-12, abs_tol=1e-9)


class AllocationError(ValueError):
    pass


def rudder_to_thrust(delta_r, ctx):
    return ctx.factor * delta_r


def yawing_moment_rudder(delta_r, ctx):
    return ctx.q_bar * ctx.S * ctx.b * ctx.CN_dr * delta_r


def limit_command(raw_dT, prev_dT, dt, cfg):
    """Clamp to +/- saturation, then to the rate band around ``prev_dT``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    sat = np.clip(raw_dT, -cfg.dT_saturation, cfg.dT_saturation)
    step = cfg.dT_rate_limit * dt
    out = np.clip(sat, prev_dT - step, prev_dT + step)
    return float(out) if np.ndim(out) == 0 else out


def allocate(dT, T_trim, T_max):
    """Engine thrusts (T1..T4) realizing ``dT = T1 - T4`` with T2 = T3 = trim.

    The split is symmetric about trim when the margin allows. Beyond that one
    outboard engine sits at its bound (idle or T_max) and the other carries the
    rest; demands larger than T_max cannot be realized.
    """
    if not 0 <= T_trim <= T_max:
        raise AllocationError("need 0 <= T_trim <= T_max")
    if abs(dT) > T_max:
        raise AllocationError(f"|dT| = {abs(dT):.1f} lbf exceeds engine authority {T_max:.1f} lbf")
    half = 0.5 * dT
    T1, T4 = T_trim + half, T_trim - half
    if min(T1, T4) < 0:
        T1, T4 = (dT, 0.0) if dT > 0 else (0.0, -dT)
    elif max(T1, T4) > T_max:
        T1, T4 = (T_max, T_max - dT) if dT > 0 else (T_max + dT, T_max)
    return ThrustAllocation(T1, T_trim, T_trim, T4)
