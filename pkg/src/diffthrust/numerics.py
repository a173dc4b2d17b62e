"""Small dense linear algebra: eigenvalues, continuous Lyapunov and Riccati solvers.

Everything here is sized for the 4-state lateral plant (n <= 8). The eigenvalue
routine works from the characteristic polynomial (Faddeev-LeVerrier) and refines
all roots at once (Durand-Kerner). The Lyapunov solver vectorizes the equation
with Kronecker products, and the Riccati solver runs Kleinman-Newton iterations
on top of it.
"""

from dataclasses import dataclass

import numpy as np


class NumericsError(Exception):
    pass


class ConvergenceError(NumericsError):
    pass


class NotHurwitzError(NumericsError):
    pass


class SingularSystemError(NumericsError):
    pass


class StabilizabilityError(NumericsError):
    pass


EIG_TOL = 1e-12
EIG_MAX_ITER = 500
CARE_TOL = 1e-10
CARE_MAX_ITER = 100


@dataclass(frozen=True)
class EigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None

    def __len__(self):
        return len(self.eigenvalues)


def _as_square(m, name="matrix"):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def characteristic_polynomial(a):
    """Monic characteristic polynomial coefficients, highest power first."""
    a = _as_square(a)
    n = a.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    m = np.zeros_like(a)
    eye = np.eye(n)
    for k in range(1, n + 1):
        m = a @ m + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(a @ m) / k
    return coeffs


def _durand_kerner(coeffs, tol=EIG_TOL, max_iter=EIG_MAX_ITER):
    n = len(coeffs) - 1
    if n == 0:
        return np.zeros(0, dtype=complex)
    radius = 1.0 + np.max(np.abs(coeffs[1:]))
    z = radius * (0.4 + 0.9j) ** np.arange(n)
    abs_coeffs = np.abs(coeffs)
    eps = np.finfo(float).eps
    for _ in range(max_iter):
        p = np.polyval(coeffs, z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        denom = np.prod(diff, axis=1)
        if np.any(denom == 0):
            # coincident iterates; nudge apart
            z = z + 1e-8 * radius * np.exp(2j * np.pi * np.arange(n) / n)
            continue
        step = p / denom
        z = z - step
        small_step = np.abs(step) <= tol * np.maximum(1.0, np.abs(z))
        # rounding-level residual: multiple roots stall here rather than converge
        noise = 16 * n * eps * np.polyval(abs_coeffs, np.abs(z))
        at_noise = np.abs(np.polyval(coeffs, z)) <= noise
        if np.all(small_step | at_noise):
            return z
    raise ConvergenceError(f"root refinement did not converge in {max_iter} iterations")


def _conjugate_close(z, scale):
    """Force exact conjugate-pair structure on roots of a real polynomial."""
    z = np.array(z, dtype=complex)
    tol = 1e-9 * max(scale, 1e-300)
    real_mask = np.abs(z.imag) <= tol
    out = list(z[real_mask].real.astype(complex))
    upper = [w for w in z[~real_mask] if w.imag > 0]
    lower = [w for w in z[~real_mask] if w.imag < 0]
    while upper:
        w = upper.pop(0)
        if lower:
            j = int(np.argmin([abs(w - np.conj(v)) for v in lower]))
            v = lower.pop(j)
            m = 0.5 * (w + np.conj(v))
            out.extend([m, np.conj(m)])
        else:
            out.append(complex(w.real, 0.0))
    out.extend(complex(v.real, 0.0) for v in lower)
    out = np.array(out, dtype=complex)
    order = np.lexsort((out.imag, out.real))
    return out[order]


def _eigenvector(a, lam):
    n = a.shape[0]
    scale = max(np.max(np.abs(a)), 1.0)
    shift = lam + (1e-10 * scale) * (1 + 1j if lam.imag != 0 else 1)
    m = a.astype(complex) - shift * np.eye(n)
    v = np.ones(n, dtype=complex) / np.sqrt(n)
    for _ in range(3):
        try:
            v = np.linalg.solve(m, v)
        except np.linalg.LinAlgError:
            break
        v = v / np.linalg.norm(v)
    if lam.imag == 0:
        k = np.argmax(np.abs(v))
        v = (v * np.exp(-1j * np.angle(v[k]))).real.astype(complex)
        v = v / np.linalg.norm(v)
    return v


def eigenvalues(m, vectors=False):
    """All eigenvalues of a real square matrix (n <= 8).

    Returns an EigenResult sorted by real part; complex eigenvalues come in
    exact conjugate pairs. With ``vectors=True`` unit eigenvectors are added
    by inverse iteration.
    """
    a = _as_square(m)
    n = a.shape[0]
    if n > 8:
        raise ValueError("eigenvalues() is limited to n <= 8")
    if n == 0:
        return EigenResult(np.zeros(0, dtype=complex))
    scale = np.max(np.abs(a))
    if scale == 0.0:
        lam = np.zeros(n, dtype=complex)
    else:
        coeffs = characteristic_polynomial(a / scale)
        lam = _conjugate_close(_durand_kerner(coeffs), 1.0) * scale
    vecs = None
    if vectors:
        vecs = np.column_stack([_eigenvector(a, l) for l in lam])
    return EigenResult(lam, vecs)


def spectral_abscissa(m):
    return float(np.max(eigenvalues(m).eigenvalues.real))


def is_hurwitz(m):
    return spectral_abscissa(m) < 0.0


def _check_symmetric(q, name):
    if not np.allclose(q, q.T, rtol=1e-10, atol=1e-12 * max(np.max(np.abs(q)), 1.0)):
        raise ValueError(f"{name} must be symmetric")


def _solve_lyapunov_unchecked(a, q):
    n = a.shape[0]
    eye = np.eye(n)
    # row-major vec: vec(M X N) = (M kron N^T) vec(X)
    big = np.kron(a.T, eye) + np.kron(eye, a.T)
    try:
        p = np.linalg.solve(big, -q.reshape(-1)).reshape(n, n)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("Lyapunov operator is singular") from exc
    return 0.5 * (p + p.T)


def solve_lyapunov(a, q):
    """Solve ``a.T @ P + P @ a + q = 0`` for symmetric P; ``a`` must be Hurwitz."""
    a = _as_square(a, "a")
    q = _as_square(q, "q")
    if a.shape != q.shape:
        raise ValueError("a and q must have the same shape")
    _check_symmetric(q, "q")
    alpha = spectral_abscissa(a)
    if alpha >= 0.0:
        raise NotHurwitzError(f"a is not Hurwitz (max real part {alpha:.3g})")
    return _solve_lyapunov_unchecked(a, q)


def care_residual(a, b, q, r, p):
    return a.T @ p + p @ a - p @ b @ np.linalg.solve(r, b.T @ p) + q


def _stabilizing_gain(a, b):
    n = a.shape[0]
    lam = eigenvalues(a).eigenvalues
    if np.max(lam.real) < 0.0:
        return np.zeros((b.shape[1], n))
    # -(a + beta I) must be Hurwitz for the shifted Lyapunov equation
    beta = np.max(np.abs(lam.real)) + 1.0
    shifted = -(a + beta * np.eye(n))
    z = _solve_lyapunov_unchecked(shifted.T, 2.0 * b @ b.T)
    if np.linalg.cond(z) > 1e12:
        raise StabilizabilityError("(a, b) is not stabilizable by the shift initializer")
    k0 = np.linalg.solve(z, b).T
    if spectral_abscissa(a - b @ k0) >= 0.0:
        raise StabilizabilityError("could not find an initial stabilizing gain")
    return k0


def solve_care(a, b, q, r, tol=CARE_TOL, max_iter=CARE_MAX_ITER):
    """Stabilizing solution of ``A'P + PA - PBR^-1B'P + Q = 0``.

    Returns ``(P, K)`` with ``K = R^-1 B' P`` so that ``A - BK`` is Hurwitz.
    """
    a = _as_square(a, "a")
    q = _as_square(q, "q")
    r = _as_square(r, "r")
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    n, m = b.shape
    if a.shape[0] != n or q.shape[0] != n or r.shape[0] != m:
        raise ValueError("incompatible shapes for a, b, q, r")
    _check_symmetric(q, "q")
    _check_symmetric(r, "r")
    if np.linalg.cond(r) > 1e14:
        raise SingularSystemError("r is singular")

    k = _stabilizing_gain(a, b)
    qnorm = max(np.linalg.norm(q), np.finfo(float).tiny)
    p_prev = None
    for _ in range(max_iter):
        acl = a - b @ k
        p = _solve_lyapunov_unchecked(acl, q + k.T @ r @ k)
        k = np.linalg.solve(r, b.T @ p)
        res = np.linalg.norm(care_residual(a, b, q, r, p))
        if res <= tol * qnorm:
            break
        if p_prev is not None and np.linalg.norm(p - p_prev) <= 1e-14 * np.linalg.norm(p):
            break
        p_prev = p
    res = np.linalg.norm(care_residual(a, b, q, r, p))
    if not np.isfinite(res) or res > 1e-8 * qnorm:
        raise ConvergenceError(f"Riccati residual {res:.3g} above tolerance")
    if spectral_abscissa(a - b @ k) >= 0.0:
        raise StabilizabilityError("no stabilizing Riccati solution found")
    return p, k
