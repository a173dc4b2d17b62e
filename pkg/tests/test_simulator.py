import csv
import math

import numpy as np
import pytest
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from diffthrust.aircraft import StateSpaceModel
from diffthrust.controllers import lyapunov_function
from diffthrust.numerics import eigenvalues
from diffthrust.propulsion import EngineModel, step_response
from diffthrust.simulator import (
    CSV_COLUMNS, Scenario, ScenarioKind, run_batch_metrics, run_lqr, run_mrac, run_open_loop,
    settle_time,
)

DEG = math.radians(1.0)


def _step_solution(a, b, u, t):
    """x(t) for x' = Ax + Bu, x(0) = 0, constant u, via the augmented exponential."""
    n = a.shape[0]
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n], aug[:n, n] = a, b @ u
    return np.array([sla.expm(aug * tk)[:n, n] for tk in t])


def test_open_loop_matches_matrix_exponential(models):
    for model in models:
        tr = run_open_loop(model, Scenario(duration=20.0))
        ref = _step_solution(np.asarray(model.a), np.asarray(model.b), np.array([DEG, DEG]), tr.t[::400])
        np.testing.assert_allclose(tr.damaged_state[::400], ref, rtol=1e-8, atol=1e-12)


def test_open_loop_equilibrium(models):
    tr = run_open_loop(models[0], Scenario(duration=5.0, aileron_step=0.0, rudder_step=0.0))
    assert np.all(tr.damaged_state == 0)


def test_nominal_open_loop_stays_bounded(models):
    nominal = models[0]
    tr = run_open_loop(nominal, Scenario(duration=60.0))
    a = np.asarray(nominal.a)
    x_inf = -np.linalg.solve(a, nominal.b @ np.array([DEG, DEG]))
    # x(t) = (I - e^{At}) x_inf and |e^{At}| <= cond(V) for a Hurwitz A = V diag V^-1
    v = eigenvalues(a, vectors=True).eigenvectors
    bound = (1 + np.linalg.cond(v)) * np.linalg.norm(x_inf)
    assert np.max(np.linalg.norm(tr.damaged_state, axis=1)) <= bound


def test_damaged_open_loop_grows(models):
    tr = run_open_loop(models[1], Scenario(duration=60.0))
    one_s = np.abs(tr.damaged_state[200])
    end = np.abs(tr.damaged_state[-1])
    assert np.any(end > 10 * one_s)


def test_divergence_guard_truncates_trace():
    plant = StateSpaceModel(np.diag([5.0, 0.0, 0.0, 0.0]), np.array([[1.0, 0], [0, 0], [0, 0], [0, 0]]))
    tr = run_open_loop(plant, Scenario(duration=10.0))
    assert tr.diverged
    assert 0 < tr.diverged_at < 10.0
    assert tr.t[-1] < tr.diverged_at + 1e-12
    assert np.all(np.isfinite(tr.damaged_state))


def _ideal_rhs(design, adaptive, uc):
    def f(_t, y):
        ym, yd, L = y[:4], y[4:8], y[8:].reshape(2, 4)
        e = yd - ym
        u = uc - L @ yd
        dL = adaptive.gain @ np.outer(e, yd)
        return np.concatenate([design.a_m @ ym + design.b_d @ uc,
                               design.a_d @ yd + design.b_d @ u, dL.ravel()])
    return f


def test_ideal_mrac_matches_independent_integrator(design, adaptive, factor):
    sc = Scenario(kind=ScenarioKind.MRAC_IDEAL, duration=10.0)
    l0 = np.zeros((2, 4))
    tr = run_mrac(sc, design, adaptive, factor, l0=l0)
    uc = np.array([DEG, DEG])
    sol = solve_ivp(_ideal_rhs(design, adaptive, uc), (0, 10.0), np.zeros(16),
                    t_eval=tr.t[::200], rtol=1e-11, atol=1e-14, method="DOP853")
    np.testing.assert_allclose(tr.model_state[::200], sol.y[:4].T, atol=1e-9)
    np.testing.assert_allclose(tr.damaged_state[::200], sol.y[4:8].T, atol=1e-9)
    np.testing.assert_allclose(tr.gains[::200].reshape(-1, 8), sol.y[8:].T, atol=1e-8)


def test_matched_gain_holds_zero_error(design, adaptive, factor):
    tr = run_mrac(Scenario(kind=ScenarioKind.MRAC_IDEAL, duration=20.0), design, adaptive, factor)
    assert np.max(np.abs(tr.error)) < 1e-14
    np.testing.assert_allclose(tr.damaged_state, tr.model_state, atol=1e-14)


def test_zero_command_zero_state_stays_zero(design, adaptive, factor):
    sc = Scenario(kind=ScenarioKind.MRAC_ENGINE_LAG, duration=5.0, aileron_step=0.0, rudder_step=0.0)
    tr = run_mrac(sc, design, adaptive, factor, l0=np.zeros((2, 4)))
    assert np.all(tr.table()[:, 1:] == 0)


def test_lyapunov_function_never_increases_in_ideal_mode(design, adaptive, factor):
    sc = Scenario(kind=ScenarioKind.MRAC_IDEAL, duration=20.0)
    tr = run_mrac(sc, design, adaptive, factor, l0=np.zeros((2, 4)))
    v = lyapunov_function(tr.error, tr.gains, design, adaptive)
    assert np.max(np.diff(v)) <= 1e-9
    assert v[-1] < v[0]


def test_engine_channel_matches_standalone_engine(lag_trace, factor):
    eng = EngineModel(T_trim=0.0)
    ref = step_response(eng, factor * DEG, 60.0, rate_limited=True)
    np.testing.assert_allclose(lag_trace.dT_avail, ref.available, rtol=1e-9, atol=1e-6)
    np.testing.assert_allclose(lag_trace.dT_cmd, ref.command, rtol=1e-12)


def test_lag_run_effort_is_within_limits(lag_trace):
    assert np.max(np.abs(lag_trace.aileron_cmd)) <= math.radians(26)
    assert np.max(np.abs(lag_trace.dT_effort)) <= 43729
    assert not lag_trace.saturated.any()


def test_lqr_run_keeps_gain_fixed(lqr_trace, design):
    assert np.all(lqr_trace.gains == design.k)


def test_batch_runs_are_independent_of_batch(design, adaptive, factor):
    sc = Scenario(kind=ScenarioKind.MRAC_ENGINE_LAG, duration=10.0)
    rng = np.random.default_rng(0)
    others = design.a_d * (1 + 0.3 * rng.uniform(-1, 1, (3, 4, 4)))
    single, _ = run_batch_metrics(sc, design, adaptive, factor, design.a_d[None])
    many, _ = run_batch_metrics(sc, design, adaptive, factor, np.concatenate([others, design.a_d[None]]))
    np.testing.assert_array_equal(single.err[:, 0], many.err[:, 3])


def test_csv_schema_and_roundtrip(tmp_path, lag_trace):
    path = tmp_path / "t.csv"
    lag_trace.to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:24] == ["t", "phi_m", "p_m", "beta_m", "r_m", "phi_d", "p_d", "beta_d", "r_d",
                            "e1", "e2", "e3", "e4", "da_cmd", "dT_cmd", "dT_avail",
                            "L11", "L12", "L13", "L14", "L21", "L22", "L23", "L24"]
    assert rows[0] == list(CSV_COLUMNS)
    assert len(rows) == len(lag_trace) + 1
    np.testing.assert_array_equal(np.array(rows[1:], dtype=float), lag_trace.table())


def test_settle_time():
    t = np.arange(6.0)
    assert settle_time(t, np.array([0, 1, 0.5, 0.001, 0, 0])) == 3.0
    assert settle_time(t, np.array([0, 1, 0.5, 0.001, 0, 0.5])) == math.inf
    assert settle_time(t, np.zeros(6)) == 0.0


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(duration=0)
    with pytest.raises(ValueError):
        Scenario(dt=-0.1)
    with pytest.raises(ValueError):
        Scenario(kind="bogus")
    sc = Scenario(step_time=1.0)
    assert np.all(sc.u_c(0.5) == 0) and np.all(sc.u_c(1.0) == DEG)


def test_lag_mode_rejects_dt_not_dividing_delay(design, adaptive, factor):
    with pytest.raises(ValueError):
        run_mrac(Scenario(duration=1.0, dt=0.003), design, adaptive, factor)
