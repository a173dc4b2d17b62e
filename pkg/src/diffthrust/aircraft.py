"""Lateral/directional linear models of the nominal and tail-less aircraft.

State order is (phi, p, beta, r): roll angle, roll rate, side-slip, yaw rate.
Dimensional derivatives follow the usual stability-axis conventions::

    Y_x = qS C_Yx / m            Y_{p,r} = qSb C_Y{p,r} / (2 m V)
    L_x = qSb C_lx / Ixx         L_{p,r} = qSb^2 C_l{p,r} / (2 Ixx V)
    N_x = qSb C_nx / Izz         N_{p,r} = qSb^2 C_n{p,r} / (2 Izz V)

``dimensionalize(..., coupled=True)`` additionally folds in the product of
inertia (the primed derivatives L' = (L + Ixz/Ixx N) / (1 - Ixz^2/(Ixx Izz)),
and likewise N').
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import eigenvalues

STATE_LABELS = ("phi", "p", "beta", "r")

# 1976 US Standard Atmosphere, 20,000 ft
RHO_20KFT = 0.0012673  # slug/ft^3
G0 = 32.174  # ft/s^2


@dataclass(frozen=True)
class AeroDerivatives:
    CL_beta: float
    CL_p: float
    CL_r: float
    CL_da: float
    CL_dr: float
    CN_beta: float
    CN_p: float
    CN_r: float
    CN_da: float
    CN_dr: float
    CY_beta: float
    CY_p: float
    CY_r: float
    CY_da: float
    CY_dr: float

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not math.isfinite(v):
                raise ValueError(f"derivative {k} is not finite")


@dataclass(frozen=True)
class InertiaSet:
    W: float
    m: float
    Ixx: float
    Iyy: float
    Izz: float
    Ixz: float

    def __post_init__(self):
        for k in ("W", "m", "Ixx", "Iyy", "Izz"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")
        if self.det_xz <= 0:
            raise ValueError("Ixx*Izz - Ixz^2 must be positive")

    @property
    def det_xz(self):
        return self.Ixx * self.Izz - self.Ixz**2


@dataclass(frozen=True)
class Geometry:
    S: float
    b: float
    c_bar: float
    y_e: float
    l_v: float = 0.0
    z_v: float = 0.0
    S_v: float = 0.0

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if v < 0:
                raise ValueError(f"geometry {k} must be nonnegative")

    def damaged(self):
        return replace(self, S_v=0.0)


@dataclass(frozen=True)
class TrimCondition:
    mach: float
    V_bar: float
    altitude: float
    rho: float
    q_bar: float
    C_L: float
    T_trim: float
    theta_bar: float = 0.0
    gamma_bar: float = 0.0
    beta_bar: float = 0.0
    g: float = G0

    @classmethod
    def level(cls, mach, V_bar, altitude, rho, W, S, T_trim, g=G0):
        """Steady level flight: q = rho V^2 / 2, C_L = W / (q S), zero attitude."""
        if V_bar <= 0:
            raise ValueError("airspeed must be positive")
        q_bar = 0.5 * rho * V_bar**2
        return cls(mach=mach, V_bar=V_bar, altitude=altitude, rho=rho, q_bar=q_bar,
                   C_L=W / (q_bar * S), T_trim=T_trim, g=g)


@dataclass(frozen=True)
class StateSpaceModel:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray = None
    d: np.ndarray = None
    input_labels: tuple = ("delta_a", "delta_r")

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        n, m = b.shape
        if a.shape != (n, n):
            raise ValueError("a must be n x n with n = rows of b")
        c = np.eye(n) if self.c is None else np.array(self.c, dtype=float)
        d = np.zeros((c.shape[0], m)) if self.d is None else np.array(self.d, dtype=float)
        for arr in (a, b, c, d):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "input_labels", tuple(self.input_labels))

    @property
    def n_states(self):
        return self.a.shape[0]

    def with_a(self, a):
        return replace(self, a=a)


def _dimensional(derivs, inertia, geom, trim, coupled):
    q, S, b, V = trim.q_bar, geom.S, geom.b, trim.V_bar
    qS, qSb = q * S, q * S * b
    rate = b / (2.0 * V)
    m, Ixx, Izz, Ixz = inertia.m, inertia.Ixx, inertia.Izz, inertia.Ixz
    Y = {
        "beta": qS * derivs.CY_beta / m,
        "p": qS * rate * derivs.CY_p / m,
        "r": qS * rate * derivs.CY_r / m,
        "da": qS * derivs.CY_da / m,
        "dr": qS * derivs.CY_dr / m,
    }
    L = {
        "beta": qSb * derivs.CL_beta / Ixx,
        "p": qSb * rate * derivs.CL_p / Ixx,
        "r": qSb * rate * derivs.CL_r / Ixx,
        "da": qSb * derivs.CL_da / Ixx,
        "dr": qSb * derivs.CL_dr / Ixx,
    }
    N = {
        "beta": qSb * derivs.CN_beta / Izz,
        "p": qSb * rate * derivs.CN_p / Izz,
        "r": qSb * rate * derivs.CN_r / Izz,
        "da": qSb * derivs.CN_da / Izz,
        "dr": qSb * derivs.CN_dr / Izz,
    }
    if coupled:
        g = 1.0 - Ixz**2 / (Ixx * Izz)
        L, N = (
            {k: (L[k] + Ixz / Ixx * N[k]) / g for k in L},
            {k: (N[k] + Ixz / Izz * L[k]) / g for k in N},
        )
    return Y, L, N


def _lateral_a(Y, L, N, trim):
    V, g = trim.V_bar, trim.g
    return np.array([
        [0.0, 1.0, 0.0, trim.theta_bar],
        [0.0, L["p"], L["beta"], L["r"]],
        [g / V, Y["p"] / V, (Y["beta"] + g * trim.gamma_bar) / V, Y["r"] / V - 1.0],
        [0.0, N["p"], N["beta"], N["r"]],
    ])


def dimensionalize(derivs, inertia, geom, trim, coupled=False):
    """Build the aileron/rudder lateral model from dimensionless data."""
    if inertia.det_xz <= 0:
        raise ValueError("Ixx*Izz - Ixz^2 must be positive")
    if trim.V_bar <= 0:
        raise ValueError("airspeed must be positive")
    Y, L, N = _dimensional(derivs, inertia, geom, trim, coupled)
    a = _lateral_a(Y, L, N, trim)
    b = np.array([
        [0.0, 0.0],
        [L["da"], L["dr"]],
        [Y["da"] / trim.V_bar, Y["dr"] / trim.V_bar],
        [N["da"], N["dr"]],
    ])
    return StateSpaceModel(a, b, input_labels=("delta_a", "delta_r"))


def apply_damage(derivs, trim):
    """Derivative set with the vertical tail removed.

    Side force and yaw damping from the fin vanish, the fin is taken as the only
    source of weathercock stability, and roll-due-to-yaw-rate keeps only its
    wing lift term C_L/4.
    """
    return replace(derivs, CY_beta=0.0, CY_r=0.0, CN_beta=0.0, CN_r=0.0,
                   CL_r=trim.C_L / 4.0)


def thrust_column(inertia, geom):
    """Per-lbf differential-thrust input column [0, Ixz ye/D, 0, Ixx ye/D]."""
    det = inertia.det_xz
    if det <= 0:
        raise ValueError("Ixx*Izz - Ixz^2 must be positive")
    ye = geom.y_e
    return np.array([0.0, inertia.Ixz * ye / det, 0.0, inertia.Ixx * ye / det])


def damaged_b_matrix(derivs, inertia, geom, trim, thrust_scale=1.0):
    """Aileron / differential-thrust input matrix of the damaged aircraft.

    The thrust column is per lbf unless ``thrust_scale`` (lbf per input unit)
    converts it, e.g. to rad-equivalent rudder units.
    """
    Y, L, N = _dimensional(derivs, inertia, geom, trim, coupled=False)
    col_a = np.array([0.0, L["da"], Y["da"] / trim.V_bar, N["da"]])
    return np.column_stack([col_a, thrust_column(inertia, geom) * thrust_scale])


def damaged_model(derivs, inertia, geom, trim, thrust_scale=1.0, coupled=False):
    """Dimensionalized damaged model with aileron and differential-thrust inputs."""
    dmg = apply_damage(derivs, trim)
    a = dimensionalize(dmg, inertia, geom.damaged(), trim, coupled=coupled).a
    b = damaged_b_matrix(dmg, inertia, geom, trim, thrust_scale)
    b[2, :] = 0.0
    return StateSpaceModel(a, b, input_labels=("delta_a", "delta_T"))


A_NOMINAL = np.array([
    [0.0, 1.0, 0.0, 0.0],
    [0.0, -0.8566, -2.7681, 0.3275],
    [0.0478, 0.0, -0.1079, -1.0],
    [0.0, -0.0248, 1.0460, -0.2665],
])
B_NOMINAL = np.array([
    [0.0, 0.0],
    [0.2249, 0.1384],
    [0.0, 0.0144],
    [0.0118, -0.6537],
])
A_DAMAGED = np.array([
    [0.0, 1.0, 0.0, 0.0],
    [0.0, -0.8566, -2.7681, 0.1008],
    [0.0478, 0.0, 0.0, -1.0],
    [0.0, -0.0248, 0.0, 0.0],
])
# thrust column in rad-equivalent rudder units
B_DAMAGED = np.array([
    [0.0, 0.0],
    [0.2249, 0.0142],
    [0.0, 0.0],
    [0.0118, 0.6784],
])


def canonical_models():
    """The published 747-100 lateral matrices at Mach 0.65 / 20,000 ft."""
    nominal = StateSpaceModel(A_NOMINAL, B_NOMINAL, input_labels=("delta_a", "delta_r"))
    damaged = StateSpaceModel(A_DAMAGED, B_DAMAGED, input_labels=("delta_a", "delta_T"))
    return nominal, damaged


@dataclass(frozen=True)
class Mode:
    name: str
    poles: tuple
    damping: float
    frequency: float
    period: float


@dataclass(frozen=True)
class ModalAnalysis:
    modes: tuple
    poles: np.ndarray = field(repr=False)
    classified: bool = True

    def mode(self, name):
        for m in self.modes:
            if m.name == name:
                return m
        raise KeyError(name)


def _mode(name, poles):
    lam = poles[0]
    mag = abs(lam)
    damping = -lam.real / mag if mag > 0 else 1.0
    period = 2 * math.pi / mag if mag > 0 else math.inf
    return Mode(name, tuple(poles), damping, mag, period)


def modal_analysis(model):
    """Split the 4 lateral poles into Dutch roll, spiral and roll modes.

    The complex pair is the Dutch roll; of the two real poles the larger in
    magnitude is the roll mode (ties go to the more negative one). Any other
    pole pattern is returned unclassified, one entry per pole.
    """
    a = model.a if isinstance(model, StateSpaceModel) else np.asarray(model, dtype=float)
    if a.shape != (4, 4):
        raise ValueError("modal analysis needs a 4x4 state matrix")
    lam = eigenvalues(a).eigenvalues
    cplx = [l for l in lam if l.imag != 0]
    real = [l for l in lam if l.imag == 0]
    if len(cplx) != 2 or len(real) != 2:
        modes = tuple(_mode(f"pole{i}", [l]) for i, l in enumerate(lam))
        return ModalAnalysis(modes, lam, classified=False)
    pair = sorted(cplx, key=lambda l: -l.imag)
    r1, r2 = sorted(real, key=lambda l: (-abs(l), l.real))
    modes = (_mode("DutchRoll", pair), _mode("Spiral", [r2]), _mode("Roll", [r1]))
    return ModalAnalysis(modes, lam)


def format_modal_table(analysis):
    lines = [f"{'mode':<10} {'pole':>24} {'damping':>9} {'freq 1/s':>10} {'period s':>12}"]
    for m in analysis.modes:
        lam = m.poles[0]
        if lam.imag:
            pole = f"{lam.real:.4g} +/- {abs(lam.imag):.4g}i"
        else:
            pole = f"{lam.real:.4g}"
        lines.append(f"{m.name:<10} {pole:>24} {m.damping:>9.4f} {m.frequency:>10.4g} {m.period:>12.5g}")
    return "\n".join(lines)
