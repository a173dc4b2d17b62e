"""LQR reference-model synthesis and the Lyapunov-based adaptive law.

The reference model is the damaged plant under LQR feedback, A_m = A_d - B_d K.
The damaged plant runs u = u_c - L y_d with

    dL/dt = (B' N B)^-1 B' P e y_d'

where e = y_d - y_m and P solves A_m' P + P A_m = -C'C. Along ideal
trajectories V = e'Pe + tr[(A_d - B L - A_m)' N (A_d - B L - A_m)] satisfies
dV/dt = -e' C'C e.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import NotHurwitzError, SingularSystemError, is_hurwitz, solve_care, solve_lyapunov

LQR_Q = 1e5 * np.diag([1.0, 2.0, 0.1, 1.0])
LQR_R = 1e3 * np.eye(2)


@dataclass(frozen=True)
class LqrDesign:
    q: np.ndarray
    r: np.ndarray
    k: np.ndarray
    a_m: np.ndarray
    p: np.ndarray
    a_d: np.ndarray
    b_d: np.ndarray


def design_lqr(plant, q=LQR_Q, r=LQR_R):
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    p, k = solve_care(plant.a, plant.b, q, r)
    a_m = plant.a - plant.b @ k
    if not is_hurwitz(a_m):
        raise NotHurwitzError("LQR closed loop is not Hurwitz")
    return LqrDesign(q, r, k, a_m, p, np.array(plant.a), np.array(plant.b))


@dataclass(frozen=True)
class MracConfig:
    n_weight: np.ndarray
    p: np.ndarray
    q_lyap: np.ndarray
    l_initial: np.ndarray
    gain: np.ndarray  # (B'NB)^-1 B'P, so that dL/dt = gain @ e y_d'


def mrac_config(design, c=None, n_weight=None, l_initial=None):
    """Adaptive-law constants for a design.

    Defaults: N = I, Lyapunov weight C'C with C = I, and L(0) = K_lqr, the
    gain that matches the damaged plant to the reference model exactly.
    """
    b = design.b_d
    n = b.shape[0]
    c = np.eye(n) if c is None else np.asarray(c, dtype=float)
    q_lyap = c.T @ c
    n_weight = np.eye(n) if n_weight is None else np.asarray(n_weight, dtype=float)
    p = solve_lyapunov(design.a_m, q_lyap)
    btnb = b.T @ n_weight @ b
    if np.linalg.matrix_rank(btnb) < btnb.shape[0]:
        raise SingularSystemError("B'NB is singular")
    gain = np.linalg.solve(btnb, b.T @ p)
    l0 = design.k.copy() if l_initial is None else np.asarray(l_initial, dtype=float)
    return MracConfig(n_weight, p, q_lyap, l0, gain)


def adaptation_rate(gain, e, y_d, cfg, b_d):
    """dL/dt = (B'NB)^-1 B' P e y_d' (the current gain does not enter)."""
    btnb = b_d.T @ cfg.n_weight @ b_d
    try:
        return np.linalg.solve(btnb, b_d.T @ cfg.p @ np.outer(e, y_d))
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("B'NB is singular") from exc


def control_law(u_c, gain, y_d):
    return np.asarray(u_c, dtype=float) - np.asarray(gain) @ np.asarray(y_d, dtype=float)


def lyapunov_function(e, gain, design, cfg):
    """V = e'Pe + tr[M' N M] with M = A_d - B_d L - A_m; vectorized over leading axes."""
    e = np.asarray(e, dtype=float)
    gain = np.asarray(gain, dtype=float)
    mismatch = design.a_d - design.b_d @ gain - design.a_m
    quad = np.einsum("...i,ij,...j->...", e, cfg.p, e)
    trace = np.einsum("...ki,kl,...li->...", mismatch, cfg.n_weight, mismatch)
    return quad + trace
