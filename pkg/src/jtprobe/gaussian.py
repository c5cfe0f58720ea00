"""Quadrature moments of the effective dissipative dynamics.

Everything here works in dimensionless time ``τ = ωt`` with quadratures
``q = (x, p_x, y, p_y)``, ``x = a + a†``, ``p = i(a† − a)``.  The dynamics is
that of the spin-up sector of the effective Liouvillian; it is linear, so the
first moments ``d`` and the covariance ``V`` close on themselves:

    d' = A d + b,        V' = A V + V Aᵀ + D,

with ``A`` the ladder-operator drift matrix rotated into quadratures and
``D = 2γ̃ 1`` the vacuum noise fed in by the loss channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ClosedFormUnavailableError, CriticalityError, InstabilityError, NumericalError, ShapeError
from .model import ModelParams, drift_matrix_g0
from .operators import QuantumState, destroy, sparse_embed

SYMMETRY_TOL = 1e-10
UNCERTAINTY_TOL = 1e-8
GUARD_BAND = 0.999
DIVERGENCE_LIMIT = 1e12

# ladder (a, a†) -> quadrature (x, p) for each mode
_LADDER_TO_QUAD = np.kron(np.eye(2), np.array([[1.0, 1.0], [-1j, 1j]]))
SYMPLECTIC = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True, eq=False)
class MomentState:
    """First moments ``d`` and symmetrised covariance ``V`` of ``(x, p_x, y, p_y)``."""

    d: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float).reshape(-1)
        v = np.array(self.V, dtype=float)
        if d.shape != (4,) or v.shape != (4, 4):
            raise ShapeError(f"need d of shape (4,) and V of shape (4, 4), got {d.shape} and {v.shape}")
        if np.max(np.abs(v - v.T)) > SYMMETRY_TOL * max(1.0, np.max(np.abs(v))):
            raise ValueError("covariance matrix is not symmetric")
        d.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "V", v)

    @classmethod
    def vacuum(cls) -> MomentState:
        return cls(np.zeros(4), np.eye(4))

    @classmethod
    def from_state(cls, state: QuantumState) -> MomentState:
        """Moments of a truncated-Fock state (any spin content is traced over)."""
        s = state.space
        ax, ay = destroy(s.n_x), destroy(s.n_y)
        quads = [
            sparse_embed(x_part=ax + ax.T, space=s),
            sparse_embed(x_part=1j * (ax.T - ax), space=s),
            sparse_embed(y_part=ay + ay.T, space=s),
            sparse_embed(y_part=1j * (ay.T - ay), space=s),
        ]
        if state.is_pure:
            psi = state.data
            ev = lambda m: complex(np.vdot(psi, m @ psi))  # noqa: E731
        else:
            rho = state.data
            ev = lambda m: complex(m.multiply(rho.T).sum())  # noqa: E731
        d = np.array([ev(q).real for q in quads])
        v = np.empty((4, 4))
        for k in range(4):
            for l in range(k, 4):
                sym = 0.5 * (ev(quads[k] @ quads[l]) + ev(quads[l] @ quads[k]))
                v[k, l] = v[l, k] = sym.real - d[k] * d[l]
        return cls(d, v)

    def phonons(self) -> tuple[float, float]:
        """Mean occupations ``(V_xx + V_pp + d_x² + d_p² − 2)/4`` of both modes."""
        v, d = self.V, self.d
        return tuple(float((v[i, i] + v[i + 1, i + 1] + d[i] ** 2 + d[i + 1] ** 2 - 2.0) / 4.0) for i in (0, 2))

    def uncertainty_min_eigenvalue(self) -> float:
        """Smallest eigenvalue of ``V + iΩ``; physical states have it ``≥ 0``."""
        return float(np.linalg.eigvalsh(self.V + 1j * SYMPLECTIC)[0])

    def satisfies_uncertainty(self, tol: float = UNCERTAINTY_TOL) -> bool:
        return self.uncertainty_min_eigenvalue() >= -tol


@dataclass(frozen=True)
class SteadyState:
    moment: MomentState
    n_x: float
    n_y: float
    converged: bool
    method: str


def drift_quadrature(params: ModelParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Real drift ``A``, drive ``b`` and diffusion ``D`` of the quadrature moment equations."""
    g0, a = drift_matrix_g0(params)
    t = _LADDER_TO_QUAD
    amat = t @ g0 @ np.linalg.inv(t)
    b = t @ a
    if np.max(np.abs(amat.imag)) > 1e-12 or np.max(np.abs(b.imag)) > 1e-12:
        raise NumericalError("quadrature drift is not real; ladder drift matrix lost its conjugation symmetry")
    w = params.omega_x
    diff = np.diag([2.0 * params.gamma_x / w] * 2 + [2.0 * params.gamma_y / w] * 2)
    return amat.real, b.real, diff


def moment_rhs(m: MomentState, params: ModelParams) -> MomentState:
    """``(d', V')`` with respect to ``τ``; the returned ``V'`` is a derivative, not a covariance."""
    amat, b, diff = drift_quadrature(params)
    dv = amat @ m.V + m.V @ amat.T + diff
    return MomentState(amat @ m.d + b, 0.5 * (dv + dv.T))


def _check_stable(params: ModelParams, closed_form: bool = False):
    d = params.derived()
    lam_c_sq = d.lambda_plus_c_sq
    if d.lam**2 >= lam_c_sq:
        raise CriticalityError(f"coupling {d.lam:.6g} at or above the dissipative critical value {math.sqrt(lam_c_sq):.6g}",
                               lam=d.lam, lambda_c=math.sqrt(lam_c_sq))
    if closed_form and d.lam > GUARD_BAND * d.lambda_c:
        raise CriticalityError(f"coupling {d.lam:.6g} inside the guard band {GUARD_BAND}·lambda_c; closed forms refuse",
                               lam=d.lam, lambda_c=d.lambda_c)
    return d


def steady_first_moments(params: ModelParams, method: str = "linear-solve") -> np.ndarray:
    """Steady displacement ``d``: ``−G⁻¹a`` mapped to quadratures, or the closed form.

    Raises:
        CriticalityError: the coupling is at or above the critical value.
    """
    d = _check_stable(params, closed_form=method == "closed-form")
    if method == "closed-form":
        if params.g_x != params.g_y and d.epsilon != 0.0:
            raise ClosedFormUnavailableError("the splitting-corrected closed form assumes g_x == g_y")
        lam2, eps, gt, ft = d.lam**2, d.epsilon, d.gamma_tilde, d.f_tilde
        den = (1.0 - eps * eps) * (lam2 + d.lambda_minus_c_sq) * (lam2 - d.lambda_plus_c_sq)
        x = ft * (1.0 + gt * gt - eps * lam2) / den
        y = ft * lam2 / den
        return np.array([x, gt * x, y, gt * y])
    if method != "linear-solve":
        raise ValueError(f"method must be 'linear-solve' or 'closed-form', got {method!r}")
    g0, a = drift_matrix_g0(params)
    if np.linalg.cond(g0) > 1e14:
        raise CriticalityError("drift matrix is singular", lam=d.lam, lambda_c=d.lambda_c)
    h = -np.linalg.solve(g0, a)
    q = _LADDER_TO_QUAD @ h
    return q.real


def _closed_form_covariance(lam: float, lam_c: float, gt: float) -> np.ndarray:
    l2, l4, c2 = lam**2, lam**4, lam_c**2
    c4 = c2 * c2
    den = 2.0 * (c4 - l4)
    v11 = (2.0 * c4 - l4) / den
    v22 = (2.0 * c4 + (c2 - 3.0) * l4) / den
    v12 = gt * l4 / den
    v13 = c2 * l2 / den
    v24 = (l2**3 - c2 * l2) / den
    v14 = gt * c2 * l2 / den
    return np.array(
        [
            [v11, v12, v13, v14],
            [v12, v22, v14, v24],
            [v13, v14, v11, v12],
            [v14, v24, v12, v22],
        ]
    )


def steady_covariance(params: ModelParams, method: str = "linear-solve") -> MomentState:
    """Steady covariance (together with the steady displacement).

    ``closed-form`` needs ``ε = 0`` and equal couplings.  ``linear-solve``
    solves the Lyapunov equation ``A V + V Aᵀ + D = 0``; without damping the
    equation is singular and :class:`NumericalError` is raised (the closed
    form is the vanishing-damping limit in that case).
    """
    d = _check_stable(params, closed_form=method == "closed-form")
    if method == "closed-form":
        if d.epsilon != 0.0 or params.g_x != params.g_y:
            raise ClosedFormUnavailableError("closed-form covariance needs zero spin splitting and equal couplings")
        return MomentState(steady_first_moments(params, "closed-form"), _closed_form_covariance(d.lam, d.lambda_c, d.gamma_tilde))
    if method != "linear-solve":
        raise ValueError(f"method must be 'linear-solve' or 'closed-form', got {method!r}")
    if params.gamma_x == 0.0 or params.gamma_y == 0.0:
        raise NumericalError("Lyapunov equation is singular without boson damping")
    amat, _, diff = drift_quadrature(params)
    v = sla.solve_continuous_lyapunov(amat, -diff)
    return MomentState(steady_first_moments(params), 0.5 * (v + v.T))


def steady_phonons(params: ModelParams) -> tuple[float, float]:
    """Closed-form steady occupations in terms of ``λ``, ``λ_c`` and ``f̃``.

    These are first-order results: a nonzero splitting ratio ``ε`` is ignored.
    """
    d = _check_stable(params, closed_form=True)
    l4, c2, ft = d.lam**4, d.lambda_c**2, d.f_tilde
    c4 = c2 * c2
    den = 8.0 * (c4 - l4) ** 2
    n_x = (l4 * c2 * (c4 - l4) + 2.0 * ft * ft * c2**3) / den
    n_y = l4 * c2 * (c4 - l4 + 2.0 * ft * ft) / den
    return n_x, n_y


def steady_state(params: ModelParams, method: str = "linear-solve", tau_max: float | None = None) -> SteadyState:
    """Steady state by closed form, Lyapunov solve or long-time integration of the moment equations."""
    if method in ("closed-form", "linear-solve"):
        m = steady_covariance(params, method)
        converged = True
    elif method == "long-time-ODE":
        _check_stable(params)
        amat, _, _ = drift_quadrature(params)
        rate = -float(np.max(np.linalg.eigvals(amat).real))
        if rate <= 0:
            raise CriticalityError("moment dynamics is not damped", lam=params.derived().lam)
        tau = tau_max if tau_max is not None else 40.0 / rate
        dtau = min(0.01, 0.1 / max(1.0, np.max(np.abs(amat))))
        n = int(math.ceil(tau / dtau))
        series = evolve_moments(MomentState.vacuum(), params, tau, dtau=tau / n, sample_every=n)
        m = series.states[-1]
        converged = bool(np.max(np.abs(moment_rhs(m, params).V)) < 1e-8)
    else:
        raise ValueError(f"unknown method {method!r}")
    n_x, n_y = m.phonons()
    return SteadyState(m, n_x, n_y, converged, method)


def qfi_force(params: ModelParams, method: str = "closed-form") -> float:
    """Quantum Fisher information of the steady state for the reduced force ``f̃ = f/ω``.

    The covariance does not depend on the force, so only the displacement
    contributes: ``F = (∂d)ᵀ V⁻¹ (∂d)``.  Divide by ``ω²`` for the Fisher
    information with respect to ``f`` itself.
    """
    d = _check_stable(params, closed_form=method == "closed-form")
    if method == "closed-form":
        l2, c2 = d.lam**2, d.lambda_c**2
        l4, l8, c4 = l2 * l2, l2**4, c2 * c2
        num = 16.0 * c2**3 + 4.0 * c4 * l4 - 2.0 * l8
        den = (l4 + 4.0 * (c2 - l2)) * (l4 + 4.0 * (c2 + l2)) * (c4 - l4)
        return num / den
    if method != "gaussian-general":
        raise ValueError(f"method must be 'closed-form' or 'gaussian-general', got {method!r}")
    unit = params.replace(force=params.omega_x)
    dd = steady_first_moments(unit)
    if params.gamma_x > 0 and params.gamma_y > 0:
        v = steady_covariance(params, "linear-solve").V
    else:
        v = steady_covariance(params, "closed-form").V
    if np.linalg.cond(v) > 1e14:
        raise NumericalError("covariance matrix is not invertible")
    return float(dd @ np.linalg.solve(v, dd))


@dataclass(frozen=True)
class MomentSeries:
    tau: np.ndarray
    states: list


def evolve_moments(m0: MomentState, params: ModelParams, tau_end: float, *, dtau: float = 0.01,
                   sample_every: int = 10) -> MomentSeries:
    """RK4 integration of the moment equations in ``τ``.

    Raises:
        InstabilityError: any entry exceeds ``1e12`` (the coupling is past
            the dissipative critical point).
    """
    amat, b, diff = drift_quadrature(params)
    n = max(1, int(round(tau_end / dtau)))
    d, v = np.array(m0.d), np.array(m0.V)

    def f(d_, v_):
        return amat @ d_ + b, amat @ v_ + v_ @ amat.T + diff

    taus, states = [0.0], [m0]
    for i in range(1, n + 1):
        k1 = f(d, v)
        k2 = f(d + 0.5 * dtau * k1[0], v + 0.5 * dtau * k1[1])
        k3 = f(d + 0.5 * dtau * k2[0], v + 0.5 * dtau * k2[1])
        k4 = f(d + dtau * k3[0], v + dtau * k3[1])
        d = d + dtau / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v = v + dtau / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        if not (np.all(np.isfinite(v)) and np.max(np.abs(v)) < DIVERGENCE_LIMIT and np.max(np.abs(d)) < DIVERGENCE_LIMIT):
            lam = lam_c = None
            try:
                der = params.derived()
                lam, lam_c = der.lam, der.lambda_c
            except ClosedFormUnavailableError:
                pass
            raise InstabilityError(f"moments diverged at tau={i * dtau:.4g}", lam=lam, lambda_c=lam_c, tau=i * dtau)
        if i % sample_every == 0 or i == n:
            taus.append(i * dtau)
            states.append(MomentState(d, 0.5 * (v + v.T)))
    return MomentSeries(np.asarray(taus), states)
