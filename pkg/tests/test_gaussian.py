import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jtprobe import ClosedFormUnavailableError, CriticalityError, InstabilityError, NumericalError
from jtprobe.gaussian import (
    SYMPLECTIC,
    MomentState,
    drift_quadrature,
    evolve_moments,
    moment_rhs,
    qfi_force,
    steady_covariance,
    steady_first_moments,
    steady_phonons,
    steady_state,
)
from jtprobe.model import TWO_PI, ModelParams, effective_hamiltonian, jump_operators
from jtprobe.operators import HilbertSpace, QuantumState, annihilation, number, quadratures


def params_at(ratio, *, gamma=0.5, omega=0.2, phi=800.0, delta=0.0, f_tilde=0.0, space=None):
    """Equal-coupling parameters at ``lam = ratio * lambda_c`` (frequencies in kHz)."""
    w, gm, ph = TWO_PI * omega, TWO_PI * gamma, TWO_PI * phi
    lam = ratio * math.sqrt(1 + (gm / w) ** 2)
    g = math.sqrt(lam**2 * w * ph / 8)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return ModelParams(omega_x=w, omega_y=w, g_x=g, g_y=g, phi=ph, delta=TWO_PI * delta, gamma_x=gm, gamma_y=gm,
                           force=f_tilde * w, space=space or HilbertSpace(8, 8))


def _liouvillian(params):
    h = effective_hamiltonian(params, 2).matrix
    jumps = [j.matrix for j in jump_operators(params)]

    def apply(rho):
        out = -1j * (h @ rho - rho @ h)
        for j in jumps:
            jd = j.conj().T
            out += 2 * j @ rho @ jd - jd @ j @ rho - rho @ jd @ j
        return out

    return apply


def _low_state(space, rng, kmax=3):
    """Random spin-up density matrix supported on Fock levels ≤ kmax (far from the cutoff)."""
    nx, ny = space.fock_numbers()
    keep = (nx <= kmax) & (ny <= kmax) & (np.arange(space.total_dim) < space.n_x * space.n_y)
    psi = np.zeros(space.total_dim, dtype=complex)
    psi[keep] = rng.normal(size=keep.sum()) + 1j * rng.normal(size=keep.sum())
    psi /= np.linalg.norm(psi)
    return QuantumState.pure(space, psi).to_density()


@pytest.mark.parametrize("ratio, delta, f_tilde", [(0.4, 0.0, 0.0), (0.7, 0.5, 1.27), (0.9, 3.0, -0.6)])
def test_moment_equations_match_dense_liouvillian(rng, ratio, delta, f_tilde):
    s = HilbertSpace(9, 9)
    p = params_at(ratio, delta=delta, f_tilde=f_tilde, space=s).replace(gamma_dephase=TWO_PI * 1.0)
    rho = _low_state(s, rng)
    drho = _liouvillian(p)(rho.data)
    q = [op.matrix for op in quadratures(s)]
    m = MomentState.from_state(rho)
    dd = np.array([np.trace(qk @ drho).real for qk in q])
    dsym = np.array([[0.5 * np.trace((qk @ ql + ql @ qk) @ drho).real for ql in q] for qk in q])
    dv = dsym - np.outer(dd, m.d) - np.outer(m.d, dd)
    rhs = moment_rhs(m, p)
    w = p.omega_x
    np.testing.assert_allclose(w * rhs.d, dd, atol=1e-10)
    np.testing.assert_allclose(w * rhs.V, dv, atol=1e-10)


def test_number_equation_matches_written_complex_form(rng):
    # ∂τ⟨n_x⟩ = −2γ̃⟨n_x⟩ + i(λ²ε/2)(⟨a_x†²⟩ − ⟨a_x²⟩) + i(λ²/2)(⟨a_x†a_y⟩ + ⟨a_x†a_y†⟩ − ⟨a_x a_y†⟩ − ⟨a_x a_y⟩)
    #            − i(f̃/2)(⟨a_x†⟩ − ⟨a_x⟩)
    s = HilbertSpace(9, 9)
    p = params_at(0.6, delta=2.0, f_tilde=0.8, space=s)
    d = p.derived()
    rho = _low_state(s, rng)
    ax, ay = annihilation(s, "x").matrix, annihilation(s, "y").matrix
    ev = lambda m: np.trace(m @ rho.data)  # noqa: E731
    lhs = np.trace(number(s, "x").matrix @ _liouvillian(p)(rho.data)).real / d.omega
    l2, eps, gt, ft = d.lam**2, d.epsilon, d.gamma_tilde, d.f_tilde
    axd, ayd = ax.conj().T, ay.conj().T
    rhs = (-2 * gt * ev(axd @ ax) + 0.5j * l2 * eps * (ev(axd @ axd) - ev(ax @ ax))
           + 0.5j * l2 * (ev(axd @ ay) + ev(axd @ ayd) - ev(ax @ ayd) - ev(ax @ ay)) - 0.5j * ft * (ev(axd) - ev(ax)))
    assert lhs == pytest.approx(rhs.real, abs=1e-10)
    assert abs(rhs.imag) < 1e-10


def test_steady_displacement_frozen_value():
    # λ = 0.5, γ̃ = 0, f̃ = 1:  ⟨x⟩ = 1/((λ²+1)(λ²−1)), ⟨y⟩ = λ²/((λ²+1)(λ²−1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        p = ModelParams.from_lambda(0.5, g=TWO_PI * 5.0, phi=TWO_PI * 800.0)
    p = p.replace(force=p.omega_x)
    for method in ("closed-form", "linear-solve"):
        d = steady_first_moments(p, method)
        np.testing.assert_allclose(d, [-16 / 15, 0.0, -4 / 15, 0.0], atol=1e-12)


@pytest.mark.parametrize("delta", [0.0, 0.5, 4.0])
@pytest.mark.parametrize("ratio", [0.2, 0.6, 0.95])
def test_displacement_closed_form_matches_solve(ratio, delta):
    p = params_at(ratio, delta=delta, f_tilde=1.27)
    np.testing.assert_allclose(steady_first_moments(p, "closed-form"), steady_first_moments(p), rtol=1e-10, atol=1e-14)


@given(ratio=st.floats(0.05, 0.95), gamma=st.floats(0.05, 2.0))
@settings(max_examples=40, deadline=None)
def test_covariance_closed_form_matches_lyapunov(ratio, gamma):
    p = params_at(ratio, gamma=gamma)
    v_cf = steady_covariance(p, "closed-form").V
    v_ls = steady_covariance(p, "linear-solve").V
    np.testing.assert_allclose(v_cf, v_ls, rtol=1e-8, atol=1e-12)
    assert steady_covariance(p).satisfies_uncertainty()


def test_small_damping_limit_frozen():
    # γ̃ → 0 at λ = 0.5: V11 = (2 − λ⁴)/(2(1 − λ⁴)) = 31/30
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        p = ModelParams.from_lambda(0.5, g=TWO_PI * 5.0, phi=TWO_PI * 800.0)
    p = p.replace(gamma_x=1e-6 * p.omega_x, gamma_y=1e-6 * p.omega_x)
    assert steady_covariance(p).V[0, 0] == pytest.approx(31 / 30, rel=1e-5)
    with pytest.raises(NumericalError):
        steady_covariance(p.replace(gamma_x=0.0, gamma_y=0.0))


def test_closed_forms_refuse_splitting_and_guard_band():
    with pytest.raises(ClosedFormUnavailableError):
        steady_covariance(params_at(0.5, delta=1.0), "closed-form")
    with pytest.raises(CriticalityError):
        steady_covariance(params_at(0.9995), "closed-form")
    with pytest.raises(CriticalityError):
        steady_covariance(params_at(1.01))


@pytest.mark.parametrize("ratio", [0.1, 0.5, 0.8])
def test_phonons_closed_form_match_solve(ratio):
    p = params_at(ratio, f_tilde=1.27)
    nx, ny = steady_phonons(p)
    ls = steady_state(p)
    assert nx == pytest.approx(ls.n_x, rel=1e-9)
    assert ny == pytest.approx(ls.n_y, rel=1e-9)


def test_long_time_ode_matches_solve():
    p = params_at(0.7, delta=0.5, f_tilde=1.27)
    a = steady_state(p, "long-time-ODE")
    b = steady_state(p, "linear-solve")
    assert a.converged
    np.testing.assert_allclose(a.moment.V, b.moment.V, atol=1e-9)
    np.testing.assert_allclose(a.moment.d, b.moment.d, atol=1e-9)


def test_evolve_moments_diverges_past_critical_point():
    p = params_at(1.2)
    with pytest.raises(InstabilityError) as exc:
        evolve_moments(MomentState.vacuum(), p, 500.0, dtau=0.01)
    assert exc.value.lam > exc.value.lambda_c


def test_drift_is_real_and_damped(rng):
    p = params_at(0.5, delta=0.5)
    a, b, dmat = drift_quadrature(p)
    assert np.all(np.linalg.eigvals(a).real < 0)
    np.testing.assert_allclose(dmat, 2 * p.derived().gamma_tilde * np.eye(4))
    assert SYMPLECTIC.shape == (4, 4)


@pytest.mark.parametrize("ratio", [0.0, 0.3, 0.7, 0.95])
@pytest.mark.parametrize("gamma", [0.0, 0.5, 2.0])
def test_qfi_closed_form_matches_gaussian_general(ratio, gamma):
    p = params_at(ratio, gamma=gamma) if ratio > 0 else ModelParams(
        omega_x=TWO_PI * 0.2, omega_y=TWO_PI * 0.2, phi=TWO_PI * 800.0, gamma_x=TWO_PI * gamma, gamma_y=TWO_PI * gamma)
    assert qfi_force(p, "gaussian-general") == pytest.approx(qfi_force(p), rel=1e-6)


def test_qfi_uncoupled_undamped_is_one():
    p = ModelParams(omega_x=TWO_PI * 0.2, omega_y=TWO_PI * 0.2, phi=TWO_PI * 800.0)
    assert qfi_force(p) == 1.0
    assert qfi_force(p, "gaussian-general") == pytest.approx(1.0, abs=1e-14)


def test_moment_state_from_vacuum():
    s = HilbertSpace(4, 4)
    from jtprobe.operators import vacuum

    m = MomentState.from_state(vacuum(s))
    np.testing.assert_allclose(m.V, np.eye(4), atol=1e-14)
    assert m.phonons() == pytest.approx((0.0, 0.0), abs=1e-14)
    assert m.uncertainty_min_eigenvalue() == pytest.approx(0.0, abs=1e-12)


def _uncoupled(gamma_tilde=0.0, f_tilde=0.0):
    w = TWO_PI * 0.2
    return ModelParams(omega_x=w, omega_y=w, phi=TWO_PI * 800.0, gamma_x=gamma_tilde * w, gamma_y=gamma_tilde * w,
                       force=f_tilde * w)


def test_vacuum_is_fixed_point_without_coupling():
    for gt in (0.0, 0.5, 2.5):
        rhs = moment_rhs(MomentState.vacuum(), _uncoupled(gt))
        np.testing.assert_allclose(rhs.d, 0.0)
        np.testing.assert_allclose(rhs.V, 0.0, atol=1e-15)


def test_uncoupled_force_is_damped_driven_oscillator():
    from jtprobe.model import drift_matrix_g0

    g0, a = drift_matrix_g0(_uncoupled(0.5, 1.3))
    np.testing.assert_allclose(np.diag(g0), [-1j - 0.5, 1j - 0.5, -1j - 0.5, 1j - 0.5])
    assert a[0] == pytest.approx(-0.65j)


def test_steady_examples_without_coupling():
    np.testing.assert_allclose(steady_first_moments(_uncoupled(0.5)), 0.0)
    np.testing.assert_allclose(steady_first_moments(_uncoupled(0.0, 1.0), "closed-form"), [-1.0, 0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(steady_covariance(_uncoupled(0.5)).V, np.eye(4), atol=1e-12)
    assert steady_phonons(_uncoupled(0.0, 2.0)) == pytest.approx((1.0, 0.0))
    assert steady_phonons(_uncoupled(0.0, 0.0)) == (0.0, 0.0)
    for gt in (0.5, 2.5):
        assert qfi_force(_uncoupled(gt)) == pytest.approx(1 / (1 + gt * gt))


def test_undamped_closed_form_values():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        p = ModelParams.from_lambda(0.5, g=TWO_PI * 5.0, phi=TWO_PI * 800.0)
    v = steady_covariance(p, "closed-form").V
    assert v[0, 0] == pytest.approx(1.9375 / 1.875)
    assert v[1, 1] == 1.0
    assert v[0, 1] == 0.0 and v[0, 3] == 0.0


# gamma in kHz against omega = 0.2 kHz, i.e. damping ratios 0.1 and 0.5
@pytest.mark.parametrize("gamma", [0.02, 0.1])
def test_qfi_near_critical_point_follows_asymptote(gamma):
    for ratio in np.linspace(0.95, 0.995, 10):
        p = params_at(ratio, gamma=gamma)
        d = p.derived()
        assert qfi_force(p) * (d.lambda_c - d.lam) * 2 * d.lambda_c**3 == pytest.approx(1.0, rel=0.1)


def test_pure_damping_of_covariance():
    p = _uncoupled(0.5)
    series = evolve_moments(MomentState(np.zeros(4), 3 * np.eye(4)), p, 4.0, dtau=0.001, sample_every=1000)
    for tau, m in zip(series.tau, series.states):
        np.testing.assert_allclose(m.V, (1 + 2 * np.exp(-2 * 0.5 * tau)) * np.eye(4), atol=1e-10)


def test_long_time_moments_reach_fixed_point_tightly():
    p = params_at(0.6, delta=0.5, f_tilde=1.27)
    a = steady_state(p, "long-time-ODE", tau_max=120.0)
    b = steady_state(p)
    np.testing.assert_allclose(a.moment.V, b.moment.V, atol=1e-8)
    np.testing.assert_allclose(a.moment.d, b.moment.d, atol=1e-8)


@pytest.mark.slow
@pytest.mark.parametrize("ratio, gamma_tilde", [(0.0, 0.5), (0.3, 0.5), (0.6, 0.5), (0.8, 0.5),
                                                (0.0, 2.5), (0.3, 2.5), (0.6, 2.5)])
def test_density_evolution_reaches_gaussian_steady_state(ratio, gamma_tilde):
    from jtprobe.experiments import relaxation_time, simulate_steady

    worst = 0.0
    for f_tilde in (0.0, 1.27):
        for eps in (0.0, 0.000625):
            if ratio == 0.0:
                p = _uncoupled(gamma_tilde, f_tilde).replace(space=HilbertSpace(12, 12), delta=eps * TWO_PI * 800.0)
            else:
                p = params_at(ratio, gamma=0.2 * gamma_tilde, f_tilde=f_tilde, delta=eps * 800.0,
                              space=HilbertSpace(12, 12))
            rec = simulate_steady(p, t_end=relaxation_time(p, 16.0))
            ls = steady_state(p)
            m = MomentState.from_state(rec.final_state)
            scale = max(1.0, float(np.max(np.abs(ls.moment.V))))
            worst = max(worst, float(np.max(np.abs(m.V - ls.moment.V))) / scale,
                        float(np.max(np.abs(m.d - ls.moment.d))) / max(1.0, float(np.max(np.abs(ls.moment.d)))))
    assert worst < 0.01


@pytest.mark.slow
def test_strongly_damped_near_critical_converges_with_cutoff():
    # at n=12 this corner still leaks 1e-4 of population, so check the trend instead
    from jtprobe.experiments import relaxation_time, simulate_steady

    errors = []
    for n in (10, 12, 14):
        p = params_at(0.8, gamma=0.5, space=HilbertSpace(n, n))
        rec = simulate_steady(p, t_end=relaxation_time(p, 16.0))
        m = MomentState.from_state(rec.final_state)
        errors.append(float(np.max(np.abs(m.V - steady_state(p).moment.V))))
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] < 0.4 * errors[1]
