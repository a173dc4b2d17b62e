"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import math

import numpy as np
import pytest

from diffthrust.aircraft import modal_analysis
from diffthrust.controllers import lyapunov_function
from diffthrust.integrate import rk4_step
from diffthrust.numerics import care_residual, eigenvalues, solve_care, solve_lyapunov
from diffthrust.propulsion import step_response
from diffthrust.robustness import UncertaintySpec, run_monte_carlo
from diffthrust.simulator import DIVERGENCE_LIMIT, Scenario, ScenarioKind, run_mrac, run_open_loop

from conftest import random_stable

DEG = math.radians(1.0)

K_PUBLISHED = np.array([[9.6697, 13.2854, -9.1487, 0.8729],
                        [1.9631, 2.8644, -12.1067, 11.5702]])
A_M_PUBLISHED = np.array([[0, 1, 0, 0],
                          [-2.2026, -3.8851, -0.5390, -0.2595],
                          [0.0478, 0, 0, -1],
                          [-1.4455, -2.1243, 8.3210, -7.8597]])
MODES_NOMINAL = {"DutchRoll": (0.118, 1.07), "Spiral": (1.0, 0.0172), "Roll": (1.0, 0.963)}
MODES_DAMAGED = {"DutchRoll": (-0.209, 0.439), "Spiral": (-1.0, None), "Roll": (1.0, 1.04)}


@pytest.fixture
def verdict(capsys):
    def report(number, checks):
        failed = [name for name, ok in checks if not ok]
        status = "PASS" if not failed else "FAIL"
        with capsys.disabled():
            detail = "; ".join(f"{n}={'ok' if ok else 'NO'}" for n, ok in checks)
            print(f"\nCRITERION {number}: {status} | {detail}")
        assert not failed, f"criterion {number} failed: {failed}"
    return report


def _rel_ok(got, ref, rtol, atol_zero=1e-12):
    got, ref = np.asarray(got), np.asarray(ref)
    nz = ref != 0
    return bool(np.all(np.abs(got[nz] / ref[nz] - 1) <= rtol) and np.all(np.abs(got[~nz]) <= atol_zero))


def test_criterion_01_lqr_fixture(models, verdict):
    a, b = models[1].a, models[1].b
    q = 1e5 * np.diag([1.0, 2.0, 0.1, 1.0])
    r = 1e3 * np.eye(2)
    _, k = solve_care(a, b, q, r)
    a_m = a - b @ k
    verdict(1, [
        (f"K within 0.5% (worst {np.max(np.abs(k / K_PUBLISHED - 1)):.2e})", _rel_ok(k, K_PUBLISHED, 0.005)),
        ("A_m within 0.5%", _rel_ok(a_m, A_M_PUBLISHED, 0.005)),
    ])


def test_criterion_02_modal_tables(models, verdict):
    checks = []
    for label, model, table in (("nominal", models[0], MODES_NOMINAL), ("damaged", models[1], MODES_DAMAGED)):
        res = modal_analysis(model)
        for name, (zeta, freq) in table.items():
            mode = res.mode(name)
            checks.append((f"{label} {name} damping {mode.damping:.4f}", abs(mode.damping - zeta) <= 0.005))
            if freq is not None:
                checks.append((f"{label} {name} freq {mode.frequency:.4g}",
                               abs(mode.frequency / freq - 1) <= 0.02))
    spiral = abs(modal_analysis(models[1]).mode("Spiral").poles[0])
    checks.append((f"damaged spiral |pole| {spiral:.2e}", spiral <= 1e-10))
    verdict(2, checks)


def test_criterion_03_conversion_factor(aircraft_config, verdict):
    f = aircraft_config.factor
    verdict(3, [
        (f"factor {f:.5g} lbf/rad", abs(f / 4.43e5 - 1) <= 0.01),
        (f"1 deg -> {f * DEG:.1f} lbf", abs(f * DEG / 7737 - 1) <= 0.01),
    ])


def test_criterion_04_engine_response(aircraft_config, verdict):
    eng = aircraft_config.engine
    tr = step_response(eng, eng.T_max, 10.0)
    before = tr.t < eng.t_d - 1e-12
    verdict(4, [
        ("no output before t_d", bool(np.all(tr.available[before] == eng.T_trim))),
        (f"T(10 s) = {tr.available[-1]:.1f} lbf", tr.available[-1] >= 0.98 * 46500),
        (f"peak slope {eng.peak_slope:.1f} lbf/s", abs(eng.peak_slope / 12726 - 1) <= 0.02),
    ])


def _envelope_grows(x):
    """Successive local peaks of |x| strictly increase (at least two peaks)."""
    x = np.abs(x)
    peaks = np.nonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:]))[0] + 1
    return len(peaks) >= 2 and bool(np.all(np.diff(x[peaks]) > 0))


def test_criterion_05_open_loop_instability(models, verdict):
    tr = run_open_loop(models[1], Scenario(duration=60.0))
    half = len(tr.t) // 2
    guard = tr.diverged or np.max(np.abs(tr.damaged_state)) > DIVERGENCE_LIMIT
    growing = [i for i in range(4) if _envelope_grows(tr.damaged_state[half:, i])]
    ratio = np.max(np.abs(tr.damaged_state[-1]) / np.maximum(np.abs(tr.damaged_state[200]), 1e-300))
    verdict(5, [
        (f"guard or growing final half (states {growing})", bool(guard or growing)),
        (f"some state >10x its 1 s value (max ratio {ratio:.3g})", ratio > 10),
    ])


def _settled(x, window=0.1):
    """Each column varies by at most 1% of its peak over the last 10% of the trace."""
    n = max(2, int(len(x) * window))
    tail = x[-n:]
    peak = np.max(np.abs(x), axis=0)
    return bool(np.all(np.ptp(tail, axis=0) <= 0.01 * np.maximum(peak, 1e-300)))


def _signed_peak(x):
    return x[np.argmax(np.abs(x))]


def test_criterion_06_lqr_closed_loop(lqr_trace, verdict):
    tr = lqr_trace
    da_pk, da_ss = math.degrees(_signed_peak(tr.aileron_cmd)), math.degrees(tr.aileron_cmd[-1])
    dT_pk, dT_ss = _signed_peak(tr.dT_effort), tr.dT_effort[-1]
    verdict(6, [
        ("all states settle", _settled(tr.damaged_state)),
        (f"aileron peak {da_pk:.3f} deg", abs(da_pk / 1.0 - 1) <= 0.25),
        (f"aileron steady {da_ss:.3f} deg", abs(da_ss / -0.7 - 1) <= 0.25),
        (f"dT peak {dT_pk:.1f} lbf", abs(dT_pk / -400 - 1) <= 0.25),
        (f"dT steady {dT_ss:.1f} lbf", abs(dT_ss / 100 - 1) <= 0.25),
    ])


def test_criterion_07_mrac_convergence(lag_trace, verdict):
    tr = lag_trace
    en = tr.error_norm
    after = en[tr.t >= 20.0 - 1e-12]
    da = np.degrees(tr.aileron_cmd)
    dT = tr.dT_effort
    verdict(7, [
        (f"|e| <= 1% of peak after 20 s ({np.max(after) / np.max(en):.2e})",
         bool(np.all(after <= 0.01 * np.max(en)))),
        (f"aileron peak {np.max(np.abs(da)):.3f} deg", np.max(np.abs(da)) <= 2.5),
        (f"aileron steady {da[-1]:.3f} deg", -1.0 <= da[-1] <= -0.4),
        (f"dT peak {np.max(np.abs(dT)):.1f} lbf", np.max(np.abs(dT)) <= 4500),
        (f"dT steady {dT[-1]:.1f} lbf", 40 <= dT[-1] <= 150),
    ])


def test_criterion_08_lyapunov_monotonicity(design, adaptive, factor, verdict):
    sc = Scenario(kind=ScenarioKind.MRAC_IDEAL, duration=60.0)
    free = run_mrac(sc, design, adaptive, factor, l0=np.zeros((2, 4)))
    v = lyapunov_function(free.error, free.gains, design, adaptive)
    rise = float(np.max(np.diff(v)))
    matched = run_mrac(sc, design, adaptive, factor, l0=design.k)
    e_max = float(np.max(np.abs(matched.error)))
    scale = float(np.max(np.abs(matched.model_state)))
    verdict(8, [
        (f"V non-increasing (largest step {rise:.2e})", rise <= 1e-9),
        (f"matched gain |e| {e_max:.2e}", e_max <= 100 * np.finfo(float).eps * scale),
    ])


def test_criterion_09_monte_carlo(design, adaptive, factor, aircraft_config, lag_trace, verdict):
    c = aircraft_config
    sc = Scenario(kind=ScenarioKind.MRAC_ENGINE_LAG, duration=60.0)
    spec = UncertaintySpec(fraction=0.30, runs=1000)
    first = run_monte_carlo(spec, sc, design, adaptive, factor, engine=c.engine, limiter=c.limiter)
    second = run_monte_carlo(spec, sc, design, adaptive, factor, engine=c.engine, limiter=c.limiter)
    null = run_monte_carlo(UncertaintySpec(fraction=0.0, runs=1), sc, design, adaptive, factor,
                           engine=c.engine, limiter=c.limiter).runs[0]
    nominal_ok = (null.peak_error == np.max(lag_trace.error_norm)
                  and null.steady_dT == lag_trace.dT_effort[-1]
                  and null.steady_aileron == lag_trace.aileron_cmd[-1])
    peak_dT = max(abs(r.peak_dT) for r in first.runs)
    verdict(9, [
        (f"{len(first.runs)} runs complete, {first.divergence_count} diverged", len(first.runs) == 1000),
        (f"convergence rate {first.convergence_rate:.3f}", first.convergence_rate >= 0.99),
        ("fixed seed bit-identical", first.summary_text() == second.summary_text() and first.runs == second.runs),
        ("fraction 0 equals nominal", nominal_ok),
        (f"peak dT across runs {peak_dT:.0f} lbf", peak_dT <= 5000),
    ])


def test_criterion_10_numerics(verdict):
    rng = np.random.default_rng(2017)
    lyap_worst = care_worst = 0.0
    for _ in range(100):
        a = rng.standard_normal((4, 4))
        b = rng.standard_normal((4, 2))
        m = rng.standard_normal((4, 4))
        q = m @ m.T + 0.1 * np.eye(4)
        r = np.diag(rng.uniform(0.5, 2.0, 2))
        p, _ = solve_care(a, b, q, r)
        care_worst = max(care_worst, np.max(np.abs(care_residual(a, b, q, r, p))))
        s = random_stable(rng, 4)
        x = solve_lyapunov(s, q)
        lyap_worst = max(lyap_worst, np.max(np.abs(s.T @ x + x @ s + q)))

    closed = True
    for _ in range(1000):
        lam = eigenvalues(rng.standard_normal((rng.integers(2, 9),) * 2)).eigenvalues
        cplx = lam[lam.imag != 0]
        closed &= all(np.any(lam == np.conj(z)) for z in cplx)

    def terminal(dt):
        y = np.array([1.0])
        for k in range(int(round(1.0 / dt))):
            y = rk4_step(lambda t, x: -x, k * dt, y, dt)
        return y[0]

    y1, y2, y3 = terminal(0.1), terminal(0.05), terminal(0.025)
    order = math.log2(abs(y1 - y2) / abs(y2 - y3))
    verdict(10, [
        (f"Lyapunov residual {lyap_worst:.1e}", lyap_worst <= 1e-8),
        (f"CARE residual {care_worst:.1e}", care_worst <= 1e-8),
        ("conjugate-pair closure", bool(closed)),
        (f"RK4 order {order:.3f}", order >= 3.8),
    ])
