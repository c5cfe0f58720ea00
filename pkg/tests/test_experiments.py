import numpy as np
import pytest

from jtprobe.experiments import fig3_params, relaxation_time, run_experiment, simulate_steady
from jtprobe.gaussian import steady_state


def test_fig2_rows_and_columns():
    res = run_experiment("fig2", {"n_samples": "20"})
    assert res.columns[0] == "t_ms"
    assert len(res.columns) == 4
    assert len(res.rows) == 21


def test_fig1a_small_cutoff_is_flagged_not_converged():
    res = run_experiment("fig1a", {"lambdas": "0.9", "n": "8", "n_samples": "5"})
    assert res.metadata["converged"] is False


def test_fig3_without_simulation_columns():
    res = run_experiment("fig3b", {"simulate": "0"})
    nx_cf = np.array(res.column("n_x_closed_form"))
    nx_ls = np.array(res.column("n_x_linear_solve"))
    # the closed form drops the splitting correction, so agreement is only approximate
    np.testing.assert_allclose(nx_cf, nx_ls, rtol=0.05)
    assert np.all(np.diff(nx_ls) > 0)


def test_simulate_steady_reaches_gaussian_prediction_at_weak_coupling():
    cfg = dict(omega=0.2, delta=0.5, phi=800.0, gamma=0.5, f_tilde=1.27, gamma_dephase=2.5)
    p = fig3_params(0.2, cfg, 8)
    assert relaxation_time(p) > 0
    rec = simulate_steady(p)
    ls = steady_state(p)
    assert rec.converged
    assert rec.n_x[-1] == pytest.approx(ls.n_x, rel=1e-3)


def test_fig4a_short_run():
    res = run_experiment("fig4a", {"t_end_ms": "0.05", "n": "5", "n_samples": "5"})
    x_exact, x_coh = np.array(res.column("x_exact")), np.array(res.column("x_coherent"))
    np.testing.assert_allclose(x_exact, x_coh, atol=1e-3)


def test_custom_effective_vacuum_run():
    res = run_experiment("custom", {"generator": "effective-2", "initial": "vacuum", "gamma": "0.5", "t_end_ms": "0.2",
                                    "n_samples": "4", "n": "6"})
    assert res.metadata["generator"] == "effective-2"
    assert len(res.rows) == 5
