"""Truncated Fock-space linear algebra for one spin coupled to two bosonic modes.

The composite space is ordered ``spin ⊗ x ⊗ y`` everywhere in the package, with
``|↑⟩`` as spin index 0 so that ``σ_z|↑⟩ = +|↑⟩``.  A flat basis index is
therefore ``s * n_x * n_y + i * n_y + j`` for spin ``s`` and Fock numbers
``i`` (mode x) and ``j`` (mode y).

Quadratures follow ``x̂ = a† + a`` and ``p̂ = i(a† − a)`` so the vacuum has unit
variance in both.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidCutoffError, ShapeError

log = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
IMAG_TOL = 1e-8

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class HilbertSpace:
    """Truncated space ``C² ⊗ C^{n_x} ⊗ C^{n_y}``."""

    n_x: int
    n_y: int

    def __post_init__(self):
        for name in ("n_x", "n_y"):
            value = getattr(self, name)
            if int(value) != value or value < 2:
                raise InvalidCutoffError(f"{name} must be an integer >= 2, got {value!r}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return (2, self.n_x, self.n_y)

    @property
    def total_dim(self) -> int:
        return 2 * self.n_x * self.n_y

    def index(self, spin: int, nx: int, ny: int) -> int:
        """Flat basis index of ``|spin, nx, ny⟩`` (spin 0 is ``|↑⟩``)."""
        return (spin * self.n_x + nx) * self.n_y + ny

    def spin_block(self, spin: int) -> np.ndarray:
        """Flat indices belonging to one spin sector."""
        block = self.n_x * self.n_y
        return np.arange(spin * block, (spin + 1) * block)

    def fock_numbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-basis-state occupation numbers ``(n_x, n_y)``."""
        _, nx, ny = np.meshgrid(np.arange(2), np.arange(self.n_x), np.arange(self.n_y), indexing="ij")
        return nx.ravel(), ny.ravel()

    def interior_mask(self, margin: int = 1) -> np.ndarray:
        """Boolean mask of basis states at least ``margin`` levels below both cutoffs.

        Products of truncated ladder operators are wrong only near the top Fock
        levels, so identities are checked on this block.
        """
        nx, ny = self.fock_numbers()
        return (nx < self.n_x - margin) & (ny < self.n_y - margin)


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense operator on a :class:`HilbertSpace`."""

    space: HilbertSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.space.total_dim
        if m.shape != (d, d):
            raise ShapeError(f"operator shape {m.shape} does not match space dimension {d}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def _check(self, other):
        if not isinstance(other, Operator):
            return NotImplemented
        if other.space != self.space:
            raise ShapeError(f"space mismatch: {self.space} vs {other.space}")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix - other.matrix)

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar):
        if isinstance(scalar, Operator):
            return NotImplemented
        return Operator(self.space, self.matrix * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.space, self.matrix / scalar)

    def __matmul__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return Operator(self.space, self.matrix @ other.matrix)

    def dag(self) -> Operator:
        return Operator(self.space, self.matrix.conj().T)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0) < tol)

    def max_norm(self) -> float:
        return float(np.max(np.abs(self.matrix), initial=0.0))


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def destroy(n: int) -> np.ndarray:
    """Single-mode annihilation operator on ``n`` Fock levels."""
    if int(n) != n or n < 2:
        raise InvalidCutoffError(f"Fock cutoff must be an integer >= 2, got {n!r}")
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), k=1).astype(complex)


def pauli(axis: str) -> np.ndarray:
    """Pauli matrix in the ``(|↑⟩, |↓⟩)`` basis."""
    try:
        return _PAULI[axis].copy()
    except KeyError:
        raise ValueError(f"axis must be one of 'x', 'y', 'z', got {axis!r}") from None


def embed(spin_part=None, x_part=None, y_part=None, *, space: HilbertSpace) -> Operator:
    """Kronecker product ``spin ⊗ x ⊗ y``; ``None`` stands for the identity factor."""
    factors = []
    for part, dim, name in zip((spin_part, x_part, y_part), space.dims, ("spin", "x", "y")):
        if part is None:
            factors.append(np.eye(dim, dtype=complex))
            continue
        part = np.asarray(part, dtype=complex)
        if part.shape != (dim, dim):
            raise ShapeError(f"{name} factor has shape {part.shape}, expected {(dim, dim)}")
        factors.append(part)
    return Operator(space, np.kron(np.kron(factors[0], factors[1]), factors[2]))


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.total_dim, dtype=complex))


def annihilation(space: HilbertSpace, mode: str) -> Operator:
    if mode == "x":
        return embed(x_part=destroy(space.n_x), space=space)
    if mode == "y":
        return embed(y_part=destroy(space.n_y), space=space)
    raise ValueError(f"mode must be 'x' or 'y', got {mode!r}")


def number(space: HilbertSpace, mode: str) -> Operator:
    a = annihilation(space, mode)
    return a.dag() @ a


def position(space: HilbertSpace, mode: str) -> Operator:
    """``a† + a`` for the given mode."""
    a = annihilation(space, mode)
    return a + a.dag()


def momentum(space: HilbertSpace, mode: str) -> Operator:
    """``i(a† − a)`` for the given mode."""
    a = annihilation(space, mode)
    return 1j * (a.dag() - a)


def spin(space: HilbertSpace, axis: str) -> Operator:
    return embed(pauli(axis), space=space)


def quadratures(space: HilbertSpace) -> list[Operator]:
    """``[x̂, p̂_x, ŷ, p̂_y]``, the ordering used by every moment vector."""
    return [position(space, "x"), momentum(space, "x"), position(space, "y"), momentum(space, "y")]


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure state vector or density matrix on a :class:`HilbertSpace`."""

    space: HilbertSpace
    kind: str
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = self.space.total_dim
        arr = np.array(self.data, dtype=complex)
        if self.kind == "pure":
            if arr.shape != (d,):
                raise ShapeError(f"pure state needs shape {(d,)}, got {arr.shape}")
        elif self.kind == "density":
            if arr.shape != (d, d):
                raise ShapeError(f"density matrix needs shape {(d, d)}, got {arr.shape}")
        else:
            raise ValueError(f"kind must be 'pure' or 'density', got {self.kind!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def pure(cls, space: HilbertSpace, vector) -> QuantumState:
        return cls(space, "pure", vector)

    @classmethod
    def density(cls, space: HilbertSpace, matrix) -> QuantumState:
        return cls(space, "density", matrix)

    @property
    def is_pure(self) -> bool:
        return self.kind == "pure"

    def norm(self) -> float:
        """``⟨ψ|ψ⟩`` for pure states, ``Tr ρ`` for density matrices."""
        if self.is_pure:
            return float(np.vdot(self.data, self.data).real)
        return float(np.trace(self.data).real)

    def to_density(self) -> QuantumState:
        if not self.is_pure:
            return self
        return QuantumState.density(self.space, np.outer(self.data, self.data.conj()))

    def top_level_population(self) -> tuple[float, float]:
        """Population of the highest retained Fock level of each mode."""
        nx, ny = self.space.fock_numbers()
        probs = np.abs(self.data) ** 2 if self.is_pure else np.diag(self.data).real
        return float(probs[nx == self.space.n_x - 1].sum()), float(probs[ny == self.space.n_y - 1].sum())

    def min_eigenvalue(self) -> float:
        if self.is_pure:
            return 0.0
        return float(np.linalg.eigvalsh(0.5 * (self.data + self.data.conj().T))[0])


def fock(n: int, k: int) -> np.ndarray:
    if not 0 <= k < n:
        raise ValueError(f"Fock level {k} outside cutoff {n}")
    v = np.zeros(n, dtype=complex)
    v[k] = 1.0
    return v


def coherent(n: int, alpha: complex) -> np.ndarray:
    """Truncated coherent state, renormalised on the retained levels."""
    k = np.arange(n)
    logfact = np.cumsum(np.log(np.maximum(k, 1)))
    amp = np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * logfact) * np.power(complex(alpha), k)
    return amp / np.linalg.norm(amp)


SPIN_UP = np.array([1, 0], dtype=complex)
SPIN_DOWN = np.array([0, 1], dtype=complex)


def product_state(space: HilbertSpace, spin_vec, x_vec, y_vec) -> QuantumState:
    """Normalised pure product state ``spin ⊗ x ⊗ y``."""
    vecs = [np.asarray(v, dtype=complex) for v in (spin_vec, x_vec, y_vec)]
    for v, dim, name in zip(vecs, space.dims, ("spin", "x", "y")):
        if v.shape != (dim,):
            raise ShapeError(f"{name} vector has shape {v.shape}, expected {(dim,)}")
    psi = np.kron(np.kron(vecs[0], vecs[1]), vecs[2])
    return QuantumState.pure(space, psi / np.linalg.norm(psi))


def vacuum(space: HilbertSpace, spin_vec=SPIN_UP) -> QuantumState:
    return product_state(space, spin_vec, fock(space.n_x, 0), fock(space.n_y, 0))


def superposition_01(n: int) -> np.ndarray:
    """``(|0⟩ + i|1⟩)/√2``, the single-mode probe state with ``⟨p̂⟩ = 1``."""
    v = np.zeros(n, dtype=complex)
    v[0], v[1] = 1.0, 1.0j
    return v / np.sqrt(2.0)


def probe_state(space: HilbertSpace) -> QuantumState:
    """``|↑⟩ ⊗ (|0⟩+i|1⟩)/√2 ⊗ (|0⟩+i|1⟩)/√2`` used for the coherent-evolution runs."""
    return product_state(space, SPIN_UP, superposition_01(space.n_x), superposition_01(space.n_y))


def expectation(state: QuantumState, op: Operator):
    """``⟨ψ|A|ψ⟩`` or ``Tr(ρA)``.

    Hermitian operators return a float; the discarded imaginary part must be
    below ``1e-8``.
    """
    if state.space != op.space:
        raise ShapeError(f"state space {state.space} does not match operator space {op.space}")
    if state.is_pure:
        value = complex(np.vdot(state.data, op.matrix @ state.data))
    else:
        value = complex(np.sum(op.matrix.T * state.data))
    if op.is_hermitian():
        assert abs(value.imag) < IMAG_TOL * max(1.0, abs(value.real)), f"imaginary part {value.imag:g} on Hermitian expectation"
        return value.real
    return value


def sparse_embed(spin_part=None, x_part=None, y_part=None, *, space: HilbertSpace):
    """Sparse CSR counterpart of :func:`embed` for the propagators.

    Dense matrices at the cutoffs needed for the coherent runs (dimension a few
    thousand) cost hundreds of MB each, so the integrators never materialise
    them.
    """
    factors = []
    for part, dim in zip((spin_part, x_part, y_part), space.dims):
        factors.append(sp.identity(dim, dtype=complex, format="csr") if part is None else sp.csr_matrix(np.asarray(part, dtype=complex)))
    return sp.kron(sp.kron(factors[0], factors[1]), factors[2], format="csr")
