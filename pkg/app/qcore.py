#!/usr/bin/env python3
"""
qcore.py

Dense operator algebra for the quantum-dot (QD) and QD ⊗ cavity Hilbert spaces.

Basis ordering is QD-major: ``index = qd_level * cavity_levels + fock_n`` with
``qd_level`` 0 = |G⟩ and 1 = |X⟩. Without a cavity the space is the bare
two-level system {|G⟩, |X⟩}. Every operator is a dense complex matrix; the
largest space used in practice is 2·(n_max + 1) ≤ 8, so no sparse storage.

Superoperators act on row-major vectorised density matrices, for which
``vec(A ρ B) = (A ⊗ Bᵀ) vec(ρ)``.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from app.errors import PhysicsInvariantError

logger = logging.getLogger(__name__)

GROUND = 0
EXCITED = 1

TRACE_TOLERANCE = 1e-6
HERMITIAN_TOLERANCE = 1e-8
POSITIVITY_FLOOR = -1e-4


@dataclass(frozen=True)
class HilbertSpace:
    """QD two-level system, optionally tensored with a truncated Fock ladder."""

    cavity_levels: int = 0
    qd_levels: int = 2

    def __post_init__(self):
        if self.qd_levels != 2:
            raise ValueError(f"qd_levels must be 2, got {self.qd_levels}")
        if self.cavity_levels != 0 and self.cavity_levels < 2:
            raise ValueError(
                f"cavity_levels must be 0 (no cavity) or >= 2, got {self.cavity_levels}"
            )

    @classmethod
    def with_cavity(cls, n_max: int) -> "HilbertSpace":
        return cls(cavity_levels=n_max + 1)

    @property
    def has_cavity(self) -> bool:
        return self.cavity_levels > 0

    @property
    def fock_levels(self) -> int:
        return self.cavity_levels if self.has_cavity else 1

    @property
    def dim(self) -> int:
        return self.qd_levels * self.fock_levels

    def index(self, qd_level: int, fock_n: int = 0) -> int:
        if not 0 <= fock_n < self.fock_levels:
            raise ValueError(f"Fock level {fock_n} outside truncation of {self}")
        return qd_level * self.fock_levels + fock_n

    def ket(self, qd_level: int, fock_n: int = 0) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=complex)
        vec[self.index(qd_level, fock_n)] = 1.0
        return vec


@dataclass(frozen=True, eq=False)
class Operator:
    """Immutable dense operator on a declared Hilbert space."""

    space: HilbertSpace
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=complex)
        if entries.shape != (self.space.dim, self.space.dim):
            raise ValueError(
                f"Operator entries of shape {entries.shape} do not match space dim {self.space.dim}"
            )
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    # ------------------------------------------------------------------
    # Constructors
    # ------------------------------------------------------------------

    @classmethod
    def identity(cls, space: HilbertSpace) -> "Operator":
        return cls(space, np.eye(space.dim))

    @classmethod
    def zeros(cls, space: HilbertSpace) -> "Operator":
        return cls(space, np.zeros((space.dim, space.dim)))

    # ------------------------------------------------------------------
    # Algebra
    # ------------------------------------------------------------------

    def _check_space(self, other: "Operator"):
        if other.space != self.space:
            raise ValueError(f"dimension mismatch: {self.space} vs {other.space}")

    def dag(self) -> "Operator":
        return Operator(self.space, self.entries.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_space(other)
        return Operator(self.space, self.entries @ other.entries)

    def __add__(self, other: "Operator") -> "Operator":
        self._check_space(other)
        return Operator(self.space, self.entries + other.entries)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_space(other)
        return Operator(self.space, self.entries - other.entries)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.space, self.entries * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.entries)

    # ------------------------------------------------------------------
    # Predicates
    # ------------------------------------------------------------------

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.entries - self.entries.conj().T), initial=0.0) <= tol)

    def is_unitary(self, tol: float = 1e-6) -> bool:
        deviation = self.entries.conj().T @ self.entries - np.eye(self.space.dim)
        return bool(np.max(np.abs(deviation)) <= tol)

    def allclose(self, other: "Operator", atol: float = 1e-12) -> bool:
        self._check_space(other)
        return bool(np.allclose(self.entries, other.entries, rtol=0.0, atol=atol))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A state ρ; health checks enforce trace, Hermiticity and the positivity floor."""

    op: Operator

    @classmethod
    def from_ket(cls, space: HilbertSpace, ket: np.ndarray) -> "DensityMatrix":
        return cls(Operator(space, np.outer(ket, ket.conj())))

    @classmethod
    def basis(cls, space: HilbertSpace, qd_level: int, fock_n: int = 0) -> "DensityMatrix":
        return cls.from_ket(space, space.ket(qd_level, fock_n))

    @classmethod
    def maximally_mixed(cls, space: HilbertSpace) -> "DensityMatrix":
        return cls(Operator(space, np.eye(space.dim) / space.dim))

    @classmethod
    def from_vector(cls, space: HilbertSpace, vec: np.ndarray) -> "DensityMatrix":
        return cls(Operator(space, unvec(vec, space.dim)))

    @property
    def space(self) -> HilbertSpace:
        return self.op.space

    @property
    def matrix(self) -> np.ndarray:
        return self.op.entries

    def trace(self) -> complex:
        return self.op.trace()

    def min_eigenvalue(self) -> float:
        hermitian_part = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(hermitian_part)[0])

    def check(
        self,
        time: Optional[float] = None,
        trace_tol: float = TRACE_TOLERANCE,
        hermitian_tol: float = HERMITIAN_TOLERANCE,
        floor: float = POSITIVITY_FLOOR,
    ) -> float:
        """Validate the state and return its smallest eigenvalue."""
        trace = self.trace()
        if abs(trace - 1.0) > trace_tol:
            raise PhysicsInvariantError(
                f"trace drifted to {trace.real:.9f}{trace.imag:+.2e}j", time=time,
                detail={"trace": trace},
            )
        asym = float(np.max(np.abs(self.matrix - self.matrix.conj().T)))
        if asym > hermitian_tol:
            raise PhysicsInvariantError(
                f"state lost Hermiticity (max |ρ - ρ†| = {asym:.3e})", time=time,
                detail={"hermiticity": asym},
            )
        min_eig = self.min_eigenvalue()
        if min_eig < floor:
            raise PhysicsInvariantError(
                f"negative eigenvalue {min_eig:.3e} below floor {floor:.0e}", time=time,
                detail={"min_eigenvalue": min_eig},
            )
        if min_eig < 0.0:
            logger.debug("Tolerated negative eigenvalue %.3e at t = %s", min_eig, time)
        return min_eig


class QDOperators(NamedTuple):
    sigma: Operator
    sigma_dag: Operator
    X: Operator


class CavityOperators(NamedTuple):
    a: Operator
    a_dag: Operator


def tensor(qd_part: np.ndarray, cavity_part: np.ndarray) -> np.ndarray:
    """QD-major tensor product of a QD matrix and a cavity matrix."""
    return np.kron(qd_part, cavity_part)


def _embed_qd(space: HilbertSpace, qd_matrix: np.ndarray) -> np.ndarray:
    return tensor(qd_matrix, np.eye(space.fock_levels))


def build_qd_operators(space: HilbertSpace) -> QDOperators:
    """σ = |G⟩⟨X|, σ† and X = σ†σ, tensored with the cavity identity when present."""
    lowering = np.zeros((2, 2), dtype=complex)
    lowering[GROUND, EXCITED] = 1.0
    sigma = Operator(space, _embed_qd(space, lowering))
    sigma_dag = sigma.dag()
    return QDOperators(sigma=sigma, sigma_dag=sigma_dag, X=sigma_dag @ sigma)


def build_cavity_operators(space: HilbertSpace) -> CavityOperators:
    """a|n⟩ = √n|n−1⟩ on the truncated ladder.

    Truncation makes [a, a†] = 1 everywhere except the top Fock level, where the
    commutator evaluates to −n_max instead of 1.
    """
    if not space.has_cavity:
        raise ValueError("cavity operators requested on a space without a cavity")
    levels = space.cavity_levels
    ladder = np.diag(np.sqrt(np.arange(1, levels, dtype=float)), k=1).astype(complex)
    a = Operator(space, tensor(np.eye(2), ladder))
    return CavityOperators(a=a, a_dag=a.dag())


def commutator(A: Operator, B: Operator) -> Operator:
    return A @ B - B @ A


def anticommutator(A: Operator, B: Operator) -> Operator:
    return A @ B + B @ A


def _as_operator(rho) -> Operator:
    return rho.op if isinstance(rho, DensityMatrix) else rho


def lindblad(A: Operator, rho) -> Operator:
    """L_A[ρ] = AρA† − ½{A†A, ρ}."""
    rho_op = _as_operator(rho)
    A._check_space(rho_op)
    AdA = A.dag() @ A
    return A @ rho_op @ A.dag() - 0.5 * anticommutator(AdA, rho_op)


def expval(A: Operator, rho) -> complex:
    """Tr[Aρ]."""
    rho_op = _as_operator(rho)
    A._check_space(rho_op)
    return complex(np.einsum("ij,ji->", A.entries, rho_op.entries))


# ----------------------------------------------------------------------
# Superoperators on row-major vectorised states
# ----------------------------------------------------------------------

def vec(matrix: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(matrix).reshape(-1)


def unvec(vector: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(vector).reshape(dim, dim)


def _dagger(A: np.ndarray) -> np.ndarray:
    return np.swapaxes(A.conj(), -1, -2)


def sprepost(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """ρ ↦ AρB; either argument may be a stack of shape (n, d, d)."""
    A, B = np.asarray(A), np.asarray(B)
    d = A.shape[-1]
    out = np.einsum("...ij,...lk->...ikjl", A, B)
    return out.reshape(out.shape[:-4] + (d * d, d * d))


def spre(A: np.ndarray) -> np.ndarray:
    """ρ ↦ Aρ."""
    return sprepost(A, np.eye(np.shape(A)[-1]))


def spost(A: np.ndarray) -> np.ndarray:
    """ρ ↦ ρA."""
    return sprepost(np.eye(np.shape(A)[-1]), A)


def hamiltonian_superop(H: np.ndarray) -> np.ndarray:
    """ρ ↦ −i[H, ρ] (energies in rad·ps⁻¹, ħ = 1)."""
    return -1j * (spre(H) - spost(H))


def lindblad_superop(A: np.ndarray) -> np.ndarray:
    AdA = _dagger(A) @ A
    return sprepost(A, _dagger(A)) - 0.5 * (spre(AdA) + spost(AdA))


def trace_functional(observable: np.ndarray) -> np.ndarray:
    """Row vector w with w · vec(ρ) = Tr[Oρ]."""
    return vec(observable.T).copy()
