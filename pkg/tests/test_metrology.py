import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jtprobe import NumericalError, SupercriticalError
from jtprobe.dynamics import TimeGrid, evolve_pure
from jtprobe.metrology import (
    fidelity_susceptibility,
    fit_power_law,
    mode_frequencies,
    signal_x,
    t_star,
    uncertainty_scaling,
    variance_x,
)
from jtprobe.model import TWO_PI, ModelParams
from jtprobe.operators import HilbertSpace, probe_state

G, PHI = TWO_PI * 5.0, TWO_PI * 1100.0


def at_lambda(lam, n=8, delta=0.0):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return ModelParams.from_lambda(lam, g=G, phi=PHI, delta=delta, space=HilbertSpace(n, n))


@given(lam=st.floats(0.05, 0.99), tau=st.floats(0.0, 50.0))
@settings(max_examples=60, deadline=None)
def test_written_variance_equals_normal_mode_sum(lam, tau):
    p = at_lambda(lam)
    t = tau / p.omega_x
    assert variance_x(p, t, form="printed") == pytest.approx(variance_x(p, t), rel=1e-9)


@pytest.mark.parametrize("lam", [0.3, 0.9, 0.95])
def test_initial_values(lam):
    p = at_lambda(lam)
    assert signal_x(p, 0.0) == 0.0
    assert variance_x(p, 0.0) == 2.0


def test_closed_forms_match_effective_simulation():
    p = at_lambda(0.6, n=20)
    t_end = 2 * t_star(p)
    rec = evolve_pure(probe_state(p.space), p, TimeGrid.effective(p, t_end, n_samples=40), "effective-1")
    assert rec.max_leakage < 1e-8
    np.testing.assert_allclose(rec.x, signal_x(p, rec.times), atol=1e-7)
    np.testing.assert_allclose(rec.var_x, variance_x(p, rec.times), atol=1e-7)


def test_mode_frequencies_and_errors():
    p = at_lambda(0.8, delta=0.01 * PHI)
    nu1, nu2 = mode_frequencies(p, 2)
    assert nu1 == pytest.approx(math.sqrt(1 - 0.64 * 1.01))
    assert nu2 == pytest.approx(math.sqrt(1 + 0.64 * 0.99))
    with pytest.raises(SupercriticalError):
        mode_frequencies(at_lambda(0.995, delta=0.02 * PHI), 2)
    with pytest.raises(ValueError):
        mode_frequencies(p, 3)



@pytest.mark.parametrize("hold", ["g", "lambda"])
def test_omega_derivative_matches_numerical_derivative(hold):
    p = at_lambda(0.9)
    t = 0.7 * t_star(p)
    h = 1e-6 * p.omega_x

    def shifted(dw):
        w = p.omega_x + dw
        kw = dict(omega_x=w, omega_y=w)
        if hold == "lambda":
            kw.update(g_x=p.g_x * math.sqrt(w / p.omega_x), g_y=p.g_y * math.sqrt(w / p.omega_x))
        return p.replace(**kw)

    numeric = (signal_x(shifted(h), t) - signal_x(shifted(-h), t)) / (2 * h)
    expected = numeric / math.sqrt(variance_x(p, t))
    assert fidelity_susceptibility(p, t, "omega", hold=hold) == pytest.approx(expected, rel=1e-6)


def test_epsilon_derivative_matches_numerical_derivative():
    p = at_lambda(0.9, delta=0.001 * PHI)
    t = t_star(p, 2)
    h = 1e-7
    up = p.replace(delta=p.delta + h * PHI)
    dn = p.replace(delta=p.delta - h * PHI)
    numeric = (signal_x(up, t, 2) - signal_x(dn, t, 2)) / (2 * h)
    assert fidelity_susceptibility(p, t, "epsilon") == pytest.approx(numeric / math.sqrt(variance_x(p, t, 2)), rel=1e-5)


def test_finite_difference_susceptibility_matches_closed_form():
    p = at_lambda(0.9, n=30)
    t = 0.5 * t_star(p)
    cf = fidelity_susceptibility(p, t)
    fd = fidelity_susceptibility(p, t, method="finite-difference", dt=0.02 / p.omega_x)
    assert fd == pytest.approx(cf, rel=1e-5)


def test_finite_difference_zero_step_raises():
    with pytest.raises(NumericalError):
        fidelity_susceptibility(at_lambda(0.9), 1.0, "epsilon", method="finite-difference")


@given(exponent=st.floats(-2.0, 2.0), prefactor=st.floats(0.1, 10.0))
@settings(max_examples=30, deadline=None)
def test_power_law_fit_recovers_synthetic_law(exponent, prefactor):
    x = np.linspace(0.01, 0.1, 10)
    fit = fit_power_law(x, prefactor * x**exponent)
    assert fit.exponent == pytest.approx(exponent, abs=1e-9)
    assert fit.prefactor == pytest.approx(prefactor, rel=1e-8)
    assert fit.conclusive


def test_inconclusive_fit_flagged():
    x = np.linspace(0.01, 0.1, 10)
    noisy = x * np.where(np.arange(10) % 2, 10.0, 0.1)
    assert not fit_power_law(x, noisy).conclusive


@pytest.mark.parametrize(
    "kind, optimize, exponent, prefactor",
    [("omega", False, 1.4359, 2.1408), ("epsilon", False, 1.5039, 2.5554)],
)
def test_scaling_fits_frozen(kind, optimize, exponent, prefactor):
    fit = uncertainty_scaling(at_lambda(0.9), kind, np.linspace(0.9, 0.99, 10), optimize)
    assert fit.exponent == pytest.approx(exponent, abs=1e-3)
    assert fit.prefactor == pytest.approx(prefactor, rel=1e-3)
    assert fit.conclusive


def test_scaling_rejects_bad_grids():
    with pytest.raises(ValueError):
        uncertainty_scaling(at_lambda(0.9), "omega", [0.9, 0.95])
    with pytest.raises(ValueError):
        uncertainty_scaling(at_lambda(0.9), "omega", np.linspace(0.9, 1.0, 8))
    with pytest.raises(ValueError):
        uncertainty_scaling(at_lambda(0.9), "phase", np.linspace(0.9, 0.99, 8))


def test_signal_peak_and_growth_with_coupling():
    p = at_lambda(0.93)
    nu1 = math.sqrt(1 - 0.93**2)
    assert signal_x(p, math.pi / (2 * p.omega_x * nu1)) == pytest.approx(2.7206, abs=1e-4)
    peaks = [1 / mode_frequencies(at_lambda(lam))[0] for lam in (0.9, 0.93, 0.95)]
    assert peaks == sorted(peaks)


def test_susceptibility_vanishes_at_zero_and_grows_with_coupling():
    assert fidelity_susceptibility(at_lambda(0.9), 0.0) == 0.0
    # compare at each coupling's own half period of the soft mode
    values = [abs(fidelity_susceptibility(p, t_star(p))) for p in map(at_lambda, (0.9, 0.93, 0.95))]
    assert values == sorted(values)


def test_initial_slope_matches_simulation():
    # d⟨x⟩/dt at t=0 equals ω⟨p_x⟩(0) = ω for the probe state
    p = at_lambda(0.8, n=12)
    h = 1e-3 / p.omega_x
    rec = evolve_pure(probe_state(p.space), p, TimeGrid(0.0, h, h / 50, 50), "effective-1")
    assert rec.x[-1] / h == pytest.approx(p.omega_x, rel=1e-4)
    assert (signal_x(p, h) - signal_x(p, -h)) / (2 * h) == pytest.approx(p.omega_x, rel=1e-6)


def test_variance_recurs_at_commensurate_time():
    # λ² = 3/5 gives ν₂/ν₁ = 2, so the variance repeats after one soft period
    p = at_lambda(math.sqrt(0.6))
    period = 2 * math.pi / (p.omega_x * mode_frequencies(p)[0])
    ts = np.linspace(0, period, 17)
    np.testing.assert_allclose(variance_x(p, ts + period), variance_x(p, ts), atol=1e-9)


def test_force_scaling_default_window():
    w = TWO_PI * 0.2
    base = ModelParams(omega_x=w, omega_y=w, phi=TWO_PI * 800.0, gamma_x=0.5 * w, gamma_y=0.5 * w)
    fit = uncertainty_scaling(base, "force", np.linspace(0.9, 0.995, 10))
    assert fit.exponent == pytest.approx(0.5, abs=0.05)
    assert fit.prefactor == pytest.approx(fit.reference_prefactor, rel=0.1)


def test_epsilon_fit_with_zero_splitting_matches_omega_exponent():
    grid = np.linspace(0.9, 0.99, 10)
    e = uncertainty_scaling(at_lambda(0.9), "epsilon", grid)
    assert e.exponent == pytest.approx(1.5, abs=0.1)


@pytest.mark.parametrize("lam", [0.99, 0.995, 0.999])
def test_variance_at_half_period_stays_order_one_near_critical(lam):
    p = at_lambda(lam)
    nu1, nu2 = mode_frequencies(p)
    var = variance_x(p, t_star(p))
    assert 1.0 <= var <= 2.5
    assert var == pytest.approx((13 + 3 * math.cos(2 * math.pi * nu2 / nu1)) / 8, rel=0.02)
