"""Physical parameters, Hamiltonians, jump operators and the high-frequency effective theory.

Units: every frequency and rate is an angular frequency in rad/ms, times are
in ms.  :meth:`ModelParams.from_khz` accepts ordinary frequencies ``ν = ω/2π``
in kHz, which is how experimental parameter sets are usually quoted.

The drive is written as ``H_d(t) = e^{iΦt} v + e^{-iΦt} v†`` with
``v = g_x σ_x X − i g_y σ_y Y`` and ``X = a_x + a_x†``.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ClosedFormUnavailableError, SupercriticalError
from .operators import (
    HilbertSpace,
    Operator,
    annihilation,
    commutator,
    destroy,
    embed,
    number,
    pauli,
    position,
    sparse_embed,
    spin,
)

TWO_PI = 2.0 * math.pi
HIGH_FREQUENCY_RATIO = 10.0


@dataclass(frozen=True)
class ModelParams:
    """Complete parameter set of the driven, damped spin-two-boson model.

    Attributes:
        omega_x, omega_y: boson angular frequencies.
        delta: spin splitting.
        g_x, g_y: drive amplitudes of the spin-boson couplings.
        phi: drive angular frequency.
        gamma_x, gamma_y: boson amplitude damping rates.
        gamma_dephase: spin dephasing rate (jump operator ``sqrt(rate/2) σ_z``).
        force: strength of the static displacement ``(force/2) X`` on mode x.
        space: Fock truncation.
    """

    omega_x: float
    omega_y: float
    delta: float = 0.0
    g_x: float = 0.0
    g_y: float = 0.0
    phi: float = 1.0
    gamma_x: float = 0.0
    gamma_y: float = 0.0
    gamma_dephase: float = 0.0
    force: float = 0.0
    space: HilbertSpace = field(default_factory=lambda: HilbertSpace(8, 8))

    def __post_init__(self):
        for name in ("omega_x", "omega_y", "delta", "g_x", "g_y", "phi", "gamma_x", "gamma_y", "gamma_dephase", "force"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.phi <= 0:
            raise ValueError(f"phi must be positive, got {self.phi}")
        if self.omega_x <= 0 or self.omega_y <= 0:
            raise ValueError("boson frequencies must be positive")
        for name in ("gamma_x", "gamma_y", "gamma_dephase"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        slow = max(self.g_x, self.g_y, self.omega_x, self.omega_y, abs(self.delta), self.gamma_x, self.gamma_y)
        if self.phi < HIGH_FREQUENCY_RATIO * slow:
            warnings.warn(
                f"drive frequency {self.phi:g} is below {HIGH_FREQUENCY_RATIO:g}x the largest slow scale {slow:g}; "
                "the high-frequency expansion may be inaccurate",
                RuntimeWarning,
                stacklevel=3,
            )

    @classmethod
    def from_khz(cls, *, space: HilbertSpace | None = None, **freqs_khz) -> ModelParams:
        """Build from ordinary frequencies in kHz (``ν = ω/2π``)."""
        kwargs = {k: TWO_PI * v for k, v in freqs_khz.items()}
        if space is not None:
            kwargs["space"] = space
        return cls(**kwargs)

    @classmethod
    def from_lambda(cls, lam: float, *, g: float, phi: float, space: HilbertSpace | None = None, **rest) -> ModelParams:
        """Equal couplings ``g`` and equal boson frequencies fixed by the coupling ratio.

        The boson frequency follows from ``lam² = 8 g² / (ω Φ)``.
        """
        if lam <= 0:
            raise ValueError("lam must be positive to fix the boson frequency")
        omega = 8.0 * g * g / (lam * lam * phi)
        kwargs = dict(omega_x=omega, omega_y=omega, g_x=g, g_y=g, phi=phi, **rest)
        if space is not None:
            kwargs["space"] = space
        return cls(**kwargs)

    def replace(self, **changes) -> ModelParams:
        return dataclasses.replace(self, **changes)

    @property
    def drive_period(self) -> float:
        return TWO_PI / self.phi

    @property
    def has_dissipation(self) -> bool:
        return self.gamma_x > 0 or self.gamma_y > 0 or self.gamma_dephase > 0

    def derived(self) -> DerivedParams:
        return DerivedParams.from_params(self)

    def as_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "space"}
        out["n_x"] = self.space.n_x
        out["n_y"] = self.space.n_y
        return out


@dataclass(frozen=True)
class DerivedParams:
    """Dimensionless combinations used by every closed-form result.

    Only defined for equal boson frequencies.  ``nu1``/``nu2`` are the
    lowest-order normal-mode frequencies in units of ω; ``nu1`` is ``None`` once
    the coupling reaches the closed-system critical point.
    """

    omega: float
    lam: float
    epsilon: float
    gamma_tilde: float
    f_tilde: float
    lambda_c: float
    lambda_plus_c_sq: float
    lambda_minus_c_sq: float
    nu1: float | None
    nu2: float
    t_drive: float

    @classmethod
    def from_params(cls, p: ModelParams) -> DerivedParams:
        if p.omega_x != p.omega_y:
            raise ClosedFormUnavailableError("closed forms require omega_x == omega_y")
        if p.gamma_x != p.gamma_y:
            raise ClosedFormUnavailableError("closed forms require gamma_x == gamma_y")
        omega = p.omega_x
        lam = math.sqrt(8.0 * p.g_x * p.g_y / (omega * p.phi))
        eps = p.delta / p.phi
        gt = p.gamma_x / omega
        lc_sq = 1.0 + gt * gt
        return cls(
            omega=omega,
            lam=lam,
            epsilon=eps,
            gamma_tilde=gt,
            f_tilde=p.force / omega,
            lambda_c=math.sqrt(lc_sq),
            lambda_plus_c_sq=lc_sq / (1.0 + eps),
            lambda_minus_c_sq=lc_sq / (1.0 - eps),
            nu1=math.sqrt(1.0 - lam * lam) if lam < 1.0 else None,
            nu2=math.sqrt(1.0 + lam * lam),
            t_drive=TWO_PI / p.phi,
        )

    @property
    def lambda_plus(self) -> float:
        """Coupling shifted by the spin splitting, ``lam·sqrt(1+ε)``."""
        return self.lam * math.sqrt(1.0 + self.epsilon)

    @property
    def lambda_minus(self) -> float:
        return self.lam * math.sqrt(1.0 - self.epsilon)


@dataclass(frozen=True)
class NormalModes:
    """Normal-mode frequencies (units of ω), eigenvectors and squeezing angles."""

    nu: tuple[float, float]
    b_vectors: tuple[np.ndarray, np.ndarray]
    theta: tuple[float, float]


PARTS = ("H0", "drive", "force", "total")


def _h0(p: ModelParams) -> Operator:
    s = p.space
    return p.omega_x * number(s, "x") + p.omega_y * number(s, "y") + (0.5 * p.delta) * spin(s, "z")


def _sx_x(p: ModelParams) -> Operator:
    return embed(pauli("x"), destroy(p.space.n_x) + destroy(p.space.n_x).T, space=p.space)


def _sy_y(p: ModelParams) -> Operator:
    return embed(pauli("y"), None, destroy(p.space.n_y) + destroy(p.space.n_y).T, space=p.space)


def hamiltonian(params: ModelParams, t: float = 0.0, part: str = "total") -> Operator:
    """Hamiltonian pieces at time ``t``.

    ``part`` is one of ``H0`` (free spin and bosons), ``drive`` (the
    modulated couplings), ``force`` (static push on mode x) or ``total``.
    """
    if part not in PARTS:
        raise ValueError(f"part must be one of {PARTS}, got {part!r}")
    p = params
    if part == "H0":
        return _h0(p)
    if part == "drive":
        return (2.0 * p.g_x * math.cos(p.phi * t)) * _sx_x(p) + (2.0 * p.g_y * math.sin(p.phi * t)) * _sy_y(p)
    if part == "force":
        return (0.5 * p.force) * position(p.space, "x")
    return hamiltonian(p, t, "H0") + hamiltonian(p, t, "drive") + hamiltonian(p, t, "force")


def fourier_v(params: ModelParams) -> Operator:
    """Positive-frequency drive component ``v`` with ``H_d(t) = e^{iΦt} v + h.c.``."""
    return params.g_x * _sx_x(params) - 1j * params.g_y * _sy_y(params)


def jump_operators(params: ModelParams) -> list[Operator]:
    """Lindblad operators of the nonzero channels: boson loss per mode, then spin dephasing."""
    p = params
    ops = []
    if p.gamma_x > 0:
        ops.append(math.sqrt(p.gamma_x) * annihilation(p.space, "x"))
    if p.gamma_y > 0:
        ops.append(math.sqrt(p.gamma_y) * annihilation(p.space, "y"))
    if p.gamma_dephase > 0:
        ops.append(math.sqrt(0.5 * p.gamma_dephase) * spin(p.space, "z"))
    return ops


def second_order_constant(params: ModelParams) -> float:
    """Energy offset that the commutator route produces at second order but the closed form drops."""
    p = params
    return 2.0 * (p.g_x**2 * p.omega_x + p.g_y**2 * p.omega_y) / p.phi**2


def effective_hamiltonian(params: ModelParams, order: int = 1, method: str = "closed-form") -> Operator:
    """Time-independent generator of the stroboscopic dynamics.

    Args:
        params: model parameters.
        order: 1 keeps ``[v, v†]/Φ``; 2 adds the double-commutator correction.
        method: ``closed-form`` uses the explicit spin-diagonal expression;
            ``commutator`` evaluates the nested commutators numerically on the
            truncated space (accurate only away from the top Fock levels).

    The closed form at order 2 omits the constant
    :func:`second_order_constant`, which shifts all energies equally.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order!r}")
    p = params
    h0 = hamiltonian(p, 0.0, "H0") + hamiltonian(p, 0.0, "force")
    if method == "commutator":
        v = fourier_v(p)
        vd = v.dag()
        h = h0 + commutator(v, vd) / p.phi
        if order == 2:
            bare = hamiltonian(p, 0.0, "H0")
            double = commutator(commutator(bare, v), vd)
            h = h - (double + double.dag()) / (2.0 * p.phi**2)
        return h
    if method != "closed-form":
        raise ValueError(f"method must be 'closed-form' or 'commutator', got {method!r}")
    s = p.space
    sz = pauli("z")
    ax, ay = destroy(s.n_x), destroy(s.n_y)
    xq, yq = ax + ax.T, ay + ay.T
    h = h0 - (4.0 * p.g_x * p.g_y / p.phi) * embed(sz, xq, yq, space=s)
    if order == 2:
        h = h - (2.0 * p.delta / p.phi**2) * (p.g_x**2 * embed(sz, xq @ xq, space=s) + p.g_y**2 * embed(sz, None, yq @ yq, space=s))
    return h


@dataclass(frozen=True)
class SparseTerms:
    """CSR building blocks for the propagators (same conventions as the dense builders)."""

    h0: sp.csr_matrix
    drive_cos: sp.csr_matrix
    drive_sin: sp.csr_matrix
    effective_1: sp.csr_matrix
    effective_2: sp.csr_matrix


def sparse_terms(params: ModelParams) -> SparseTerms:
    """Sparse Hamiltonian pieces: ``H(t) = h0 + cos(Φt)·drive_cos + sin(Φt)·drive_sin``.

    ``h0`` already contains the static force term.
    """
    p = params
    s = p.space
    ax, ay = destroy(s.n_x), destroy(s.n_y)
    xq, yq = ax + ax.T, ay + ay.T
    nx, ny = ax.T @ ax, ay.T @ ay
    h0 = (
        p.omega_x * sparse_embed(x_part=nx, space=s)
        + p.omega_y * sparse_embed(y_part=ny, space=s)
        + (0.5 * p.delta) * sparse_embed(pauli("z"), space=s)
        + (0.5 * p.force) * sparse_embed(x_part=xq, space=s)
    )
    drive_cos = (2.0 * p.g_x) * sparse_embed(pauli("x"), xq, space=s)
    drive_sin = (2.0 * p.g_y) * sparse_embed(pauli("y"), None, yq, space=s)
    eff1 = h0 - (4.0 * p.g_x * p.g_y / p.phi) * sparse_embed(pauli("z"), xq, yq, space=s)
    eff2 = eff1 - (2.0 * p.delta / p.phi**2) * (
        p.g_x**2 * sparse_embed(pauli("z"), xq @ xq, space=s) + p.g_y**2 * sparse_embed(pauli("z"), None, yq @ yq, space=s)
    )
    return SparseTerms(*(m.tocsr() for m in (h0, drive_cos, drive_sin, eff1, eff2)))


def b_matrix(params: ModelParams, order: int = 2) -> np.ndarray:
    """Potential-energy matrix of the spin-up effective Hamiltonian in mass-weighted coordinates.

    Coordinates are ``X/sqrt(2ω)``; at order 1 the splitting-dependent
    diagonal shifts are dropped.
    """
    p = params
    shift = p.delta if order == 2 else 0.0
    wx, wy = p.omega_x, p.omega_y
    off = -8.0 * p.g_x * p.g_y * math.sqrt(wx * wy) / p.phi
    return np.array(
        [
            [wx * wx * (1.0 - 8.0 * p.g_x**2 * shift / (wx * p.phi**2)), off],
            [off, wy * wy * (1.0 - 8.0 * p.g_y**2 * shift / (wy * p.phi**2))],
        ]
    )


def normal_modes(params: ModelParams, order: int = 1) -> NormalModes:
    """Diagonalise the spin-up effective Hamiltonian into two independent oscillators.

    Raises:
        ClosedFormUnavailableError: unequal boson frequencies.
        SupercriticalError: the soft mode frequency is not real; ``value`` is
            the coupling that crossed 1 (``lam`` at order 1, ``lam·sqrt(1+ε)``
            at order 2).
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order!r}")
    d = params.derived()
    crit = d.lam if order == 1 else d.lambda_plus
    evals, evecs = np.linalg.eigh(b_matrix(params, order) / d.omega**2)
    if evals[0] <= 0.0:
        raise SupercriticalError(f"coupling {crit:.6g} is at or beyond the critical value 1", value=crit)
    nu = np.sqrt(evals)
    vecs = []
    for k in range(2):
        b = evecs[:, k]
        vecs.append(b if b[0] >= 0 else -b)
    theta = tuple(0.5 * math.log(v) for v in nu)
    return NormalModes(nu=(float(nu[0]), float(nu[1])), b_vectors=(vecs[0], vecs[1]), theta=theta)


def bogoliubov_operators(params: ModelParams, modes: NormalModes) -> tuple[Operator, Operator]:
    """Normal-mode annihilation operators built from the lab-frame ladders.

    ``d_α = Σ_k b_k^(α) (cosh θ_α a_k + sinh θ_α a_k†)``.
    """
    s = params.space
    ax, ay = annihilation(s, "x"), annihilation(s, "y")
    out = []
    for b, th in zip(modes.b_vectors, modes.theta):
        c, sh = math.cosh(th), math.sinh(th)
        out.append(b[0] * (c * ax + sh * ax.dag()) + b[1] * (c * ay + sh * ay.dag()))
    return out[0], out[1]


def drift_matrix_g0(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """First-moment drift for the ladder vector ``(a_x, a_x†, a_y, a_y†)`` in ``τ = ωt``.

    Returns ``(G, a)`` with ``d⟨h⟩/dτ = G⟨h⟩ + a`` for the spin-up sector of
    the order-2 effective Liouvillian.  The splitting-dependent shift
    ``κ_β = 4 g_β² Δ / (ω Φ²)`` reduces to ``lam²ε/2`` for equal couplings.
    """
    p = params
    if p.omega_x != p.omega_y:
        raise ClosedFormUnavailableError("the drift matrix is written for omega_x == omega_y")
    w = p.omega_x
    k = 4.0 * p.g_x * p.g_y / (w * p.phi)
    kx = 4.0 * p.g_x**2 * p.delta / (w * p.phi**2)
    ky = 4.0 * p.g_y**2 * p.delta / (w * p.phi**2)
    gx, gy = p.gamma_x / w, p.gamma_y / w
    j = 1j
    g0 = np.array(
        [
            [-j * (1 - kx) - gx, j * kx, j * k, j * k],
            [-j * kx, j * (1 - kx) - gx, -j * k, -j * k],
            [j * k, j * k, -j * (1 - ky) - gy, j * ky],
            [-j * k, -j * k, -j * ky, j * (1 - ky) - gy],
        ]
    )
    ft = p.force / w
    a = np.array([-0.5j * ft, 0.5j * ft, 0.0, 0.0])
    return g0, a

