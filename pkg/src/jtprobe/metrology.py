"""Coherent-probe signals, fidelity susceptibility and critical scaling fits.

The coherent protocol starts from ``|↑⟩ ⊗ (|0⟩+i|1⟩)/√2 ⊗ (|0⟩+i|1⟩)/√2`` and
reads out the x quadrature.  Under the effective Hamiltonian the two normal
modes (symmetric and antisymmetric combinations of x and y) oscillate at
``ων₁`` and ``ων₂``; only the soft mode carries a mean displacement.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import TimeGrid, default_dt, evolve_pure
from .errors import NumericalError, SupercriticalError
from .gaussian import GUARD_BAND, qfi_force
from .model import ModelParams
from .operators import probe_state

log = logging.getLogger(__name__)

FD_STEP = 1e-6
CONCLUSIVE_R2 = 0.99
MIN_GRID_POINTS = 6


def mode_frequencies(params: ModelParams, order: int = 1) -> tuple[float, float]:
    """``(ν₁, ν₂)``; order 2 includes the splitting shift ``λ²(1±ε)``."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order!r}")
    d = params.derived()
    eps = d.epsilon if order == 2 else 0.0
    soft = d.lam**2 * (1.0 + eps)
    if soft >= 1.0:
        raise SupercriticalError(f"coupling {math.sqrt(soft):.6g} is at or beyond the critical value 1", value=math.sqrt(soft))
    return math.sqrt(1.0 - soft), math.sqrt(1.0 + d.lam**2 * (1.0 - eps))


def signal_x(params: ModelParams, t, order: int = 1):
    """``⟨x(t)⟩ = sin(ων₁t)/ν₁`` for the coherent probe state."""
    nu1, _ = mode_frequencies(params, order)
    return np.sin(params.omega_x * nu1 * np.asarray(t)) / nu1


def variance_x(params: ModelParams, t, order: int = 1, form: str = "normal-mode"):
    """Variance of ``x`` for the coherent probe state.

    ``normal-mode`` sums the second moments of the two normal modes,
    ``½ Σ_α [2cos²(ν_α τ) + sin²(ν_α τ)/ν_α²]``.  ``printed`` evaluates the
    alternative trigonometric expression in ``cos(2ν_α τ)`` (reading its
    bracket ``(ν² − 2(1−ν²)²)``); it is kept for comparison only.
    """
    nu1, nu2 = mode_frequencies(params, order)
    tau = params.omega_x * np.asarray(t, dtype=float)
    if form == "normal-mode":
        total = 0.0
        for nu in (nu1, nu2):
            total = total + 2.0 * np.cos(nu * tau) ** 2 + np.sin(nu * tau) ** 2 / nu**2
        return 0.5 * total
    if form == "printed":
        a1, a2 = nu1**2, nu2**2
        return (6.0 - (a1 - a2) ** 2 + (a1 - 2.0 * (1.0 - a1) ** 2) * np.cos(2.0 * nu1 * tau)
                + (a2 - 2.0 * (1.0 - a2) ** 2) * np.cos(2.0 * nu2 * tau)) / (4.0 * a1 * a2)
    raise ValueError(f"form must be 'normal-mode' or 'printed', got {form!r}")


def t_star(params: ModelParams, order: int = 1) -> float:
    """Half period of the soft mode, ``π/(ων₁)``."""
    nu1, _ = mode_frequencies(params, order)
    return math.pi / (params.omega_x * nu1)


def _signal_derivative(params: ModelParams, t, wrt: str, hold: str):
    w = params.omega_x
    t = np.asarray(t, dtype=float)
    if wrt == "omega":
        nu1, _ = mode_frequencies(params, 1 if params.delta == 0 else 2)
        # ν₁² = 1 − c/ω when the couplings are fixed
        dnu = (1.0 - nu1**2) / (2.0 * w * nu1) if hold == "g" else 0.0
        dphase = (nu1 + w * dnu) * t
    elif wrt == "epsilon":
        nu1, _ = mode_frequencies(params, 2)
        lam2 = params.derived().lam ** 2
        dnu = -lam2 / (2.0 * nu1)
        dphase = w * t * dnu
    else:
        raise ValueError(f"wrt must be 'omega' or 'epsilon', got {wrt!r}")
    phase = w * nu1 * t
    return np.cos(phase) * dphase / nu1 - np.sin(phase) * dnu / nu1**2


def _perturbed(params: ModelParams, wrt: str, hold: str, step: float) -> ModelParams:
    if wrt == "omega":
        w = params.omega_x + step
        changes = dict(omega_x=w, omega_y=w)
        if hold == "lambda":
            scale = math.sqrt(w / params.omega_x)
            changes.update(g_x=params.g_x * scale, g_y=params.g_y * scale)
        return params.replace(**changes)
    return params.replace(delta=params.delta + step * params.phi)


def _simulated_x(params: ModelParams, t: float, generator: str, dt: float | None):
    dt = dt if dt is not None else default_dt(params, generator)
    n = max(1, int(math.ceil(t / dt)))
    grid = TimeGrid(0.0, t, t / n, n)
    rec = evolve_pure(probe_state(params.space), params, grid, generator)
    return float(rec.x[-1]), float(rec.var_x[-1])


def fidelity_susceptibility(params: ModelParams, t: float, wrt: str = "omega", method: str = "closed-form", *,
                            hold: str = "g", generator: str = "effective-1", dt: float | None = None) -> float:
    """Signal slope over signal noise, ``∂_θ⟨x(t)⟩ / Δx(t)``.

    Args:
        wrt: ``omega`` (boson frequency) or ``epsilon`` (spin splitting over
            drive frequency; uses the splitting-corrected mode frequencies).
        method: ``closed-form`` differentiates the analytic signal;
            ``finite-difference`` re-simulates at ``θ(1 ± 1e-6)`` with the
            chosen ``generator`` and takes a central difference.
        hold: for ``wrt='omega'``, keep the drive couplings ``g`` fixed (the
            coupling ratio then moves with ω) or keep the ratio ``lambda``
            fixed.
    """
    if hold not in ("g", "lambda"):
        raise ValueError("hold must be 'g' or 'lambda'")
    if method == "closed-form":
        order = 2 if wrt == "epsilon" else (1 if params.delta == 0 else 2)
        var = variance_x(params, t, order)
        return _signal_derivative(params, t, wrt, hold) / np.sqrt(var)
    if method != "finite-difference":
        raise ValueError(f"method must be 'closed-form' or 'finite-difference', got {method!r}")
    base = params.omega_x if wrt == "omega" else params.delta / params.phi
    step = FD_STEP * abs(base)
    if step == 0.0 or base + step == base:
        raise NumericalError(f"finite-difference step underflows for {wrt}={base!r}")
    xp, _ = _simulated_x(_perturbed(params, wrt, hold, step), t, generator, dt)
    xm, _ = _simulated_x(_perturbed(params, wrt, hold, -step), t, generator, dt)
    _, var = _simulated_x(params, t, generator, dt)
    return (xp - xm) / (2.0 * step) / math.sqrt(var)


@dataclass(frozen=True)
class ScalingFit:
    """Power law ``value ≈ prefactor · distance**exponent`` fitted in log-log space."""

    exponent: float
    prefactor: float
    r_squared: float
    window: tuple[float, float]
    reference_prefactor: float = float("nan")

    @property
    def conclusive(self) -> bool:
        return self.r_squared >= CONCLUSIVE_R2


def fit_power_law(distance, values, window=None, reference_prefactor: float = float("nan")) -> ScalingFit:
    x = np.log(np.asarray(distance, dtype=float))
    y = np.log(np.abs(np.asarray(values, dtype=float)))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res, ss_tot = float(np.sum(resid**2)), float(np.sum((y - y.mean()) ** 2))
    # a flat series fitted exactly counts as a perfect fit
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 1e-24 else (1.0 if ss_res < 1e-20 else 0.0)
    fit = ScalingFit(float(slope), float(math.exp(intercept)), r2,
                     tuple(window) if window is not None else (float(np.min(distance)), float(np.max(distance))),
                     reference_prefactor)
    if not fit.conclusive:
        log.warning("inconclusive power-law fit: r^2 = %.4f < %.2f", r2, CONCLUSIVE_R2)
    return fit


def _best_uncertainty(p: ModelParams, wrt: str, optimize_time: bool, n_times: int = 801) -> float:
    order = 2 if wrt == "epsilon" else (1 if p.delta == 0 else 2)
    ts = t_star(p, order)
    times = np.linspace(0.8 * ts, 1.2 * ts, n_times) if optimize_time else np.array([ts])
    fx = np.abs(np.atleast_1d(fidelity_susceptibility(p, times, wrt)))
    return float(1.0 / fx.max())


def uncertainty_scaling(params_base: ModelParams, kind: str, lambda_grid, optimize_time: bool = False) -> ScalingFit:
    """Fit the estimation uncertainty against the distance to the critical point.

    * ``omega``: ``δω = 1/|F_x(ω)|`` at ``t* = π/(ων₁)`` against ``1 − λ``.  The
      couplings and drive of ``params_base`` are kept and ω follows from each
      ``λ`` in ``lambda_grid``.  Reference prefactor ``2√10 ω_c/π`` with ω_c
      the boson frequency at ``λ = 1``.
    * ``epsilon``: ``δε = 1/|F_x(ε)|`` against ``1 − λ₊(ε)``, same
      parameterisation; reference ``√5/π``.
    * ``force``: ``δf̃ = F_Q^{-1/2}`` against ``λ_c − λ``.  Here ``lambda_grid``
      holds fractions of ``λ_c``; ω and the damping are kept and ``g`` is set
      from each ``λ``.  Reference ``√2 λ_c^{3/2}``.

    ``optimize_time`` scans ``[0.8t*, 1.2t*]`` and keeps the smallest
    uncertainty (frequency kinds only).
    """
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.size < MIN_GRID_POINTS:
        raise ValueError(f"need at least {MIN_GRID_POINTS} grid points")
    p0 = params_base
    if kind in ("omega", "epsilon"):
        eps = p0.delta / p0.phi
        couplings = 8.0 * p0.g_x * p0.g_y
        crit = grid * math.sqrt(1.0 + eps) if kind == "epsilon" else grid
        if np.any(crit >= GUARD_BAND) or np.any(grid <= 0):
            raise ValueError("lambda grid must lie inside (0, 0.999)")
        values = []
        for lam in grid:
            w = couplings / (lam**2 * p0.phi)
            values.append(_best_uncertainty(p0.replace(omega_x=w, omega_y=w), kind, optimize_time))
        ref = 2.0 * math.sqrt(10.0) * (couplings / p0.phi) / math.pi if kind == "omega" else math.sqrt(5.0) / math.pi
        return fit_power_law(1.0 - crit, values, (float(grid.min()), float(grid.max())), ref)
    if kind == "force":
        if np.any(grid >= GUARD_BAND) or np.any(grid < 0):
            raise ValueError("force grid (fractions of lambda_c) must lie inside [0, 0.999)")
        d = p0.derived()
        values, dist = [], []
        for r in grid:
            lam = r * d.lambda_c
            g = math.sqrt(lam**2 * d.omega * p0.phi / 8.0)
            values.append(qfi_force(p0.replace(g_x=g, g_y=g)) ** -0.5)
            dist.append(d.lambda_c - lam)
        return fit_power_law(dist, values, (float(grid.min()), float(grid.max())), math.sqrt(2.0) * d.lambda_c**1.5)
    raise ValueError(f"kind must be 'omega', 'epsilon' or 'force', got {kind!r}")
