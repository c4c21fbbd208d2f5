"""Two-qubit open-system model in a real 16-dimensional coordinate system.

Density matrices are expanded in a fixed orthogonal Hermitian basis ``M``
(row-major upper triangle, real part before imaginary part), so that
superoperators become real 16x16 matrices.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

N = 4
DIM = N * N
HERM_TOL = 1e-12

# 0-based positions of diagonal coordinates (x1, x8, x13, x16).
DIAG_IDX = (0, 7, 12, 15)


def _layout():
    """Map coordinate index -> (kind, i, j) row-major upper triangle, real part then imaginary part."""
    slots = []
    for i in range(N):
        slots.append(("d", i, i))
        for j in range(i + 1, N):
            slots.append(("re", i, j))
            slots.append(("im", i, j))
    return slots


_SLOTS = _layout()


def _basis():
    mats = np.zeros((DIM, N, N), dtype=complex)
    for k, (kind, i, j) in enumerate(_SLOTS):
        if kind == "d":
            mats[k, i, i] = 1.0
        elif kind == "re":
            mats[k, i, j] = 1.0
            mats[k, j, i] = 1.0
        else:
            mats[k, i, j] = 1j
            mats[k, j, i] = -1j
    return mats


@dataclass(frozen=True)
class HermBasis:
    matrices: np.ndarray
    beta: np.ndarray


def herm_basis() -> HermBasis:
    mats = _basis()
    beta = np.real(np.einsum("kij,kij->k", mats.conj(), mats))
    return HermBasis(mats, beta)


BASIS = herm_basis()
BETA = BASIS.beta
TRACE_ROW = np.zeros(DIM)
TRACE_ROW[list(DIAG_IDX)] = 1.0


def realify(rho, tol: float = HERM_TOL) -> np.ndarray:
    """Coordinates of a Hermitian 4x4 matrix in the basis ``M``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (N, N):
        raise ValueError(f"expected a 4x4 matrix, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ValueError("matrix is not Hermitian")
    return _realify_unchecked(rho)


def _realify_unchecked(rho: np.ndarray) -> np.ndarray:
    x = np.empty(DIM)
    for k, (kind, i, j) in enumerate(_SLOTS):
        if kind == "d":
            x[k] = rho[i, i].real
        elif kind == "re":
            x[k] = rho[i, j].real
        else:
            x[k] = rho[i, j].imag
    return x


def derealify(x) -> np.ndarray:
    """Inverse of :func:`realify`."""
    x = np.asarray(x, dtype=float)
    return np.tensordot(x, BASIS.matrices, axes=(0, 0))


def weighted_inner(x, y) -> float:
    return float(np.sum(BETA * np.asarray(x) * np.asarray(y)))


def weighted_channel_inner(psi, psi2) -> float:
    weights = BETA[:, None] / BETA[None, :]
    return float(np.sum(weights * np.asarray(psi) * np.asarray(psi2)))


def superop_matrix(superop) -> np.ndarray:
    """Realified 16x16 matrix of a Hermiticity-preserving linear map on 4x4 matrices."""
    out = np.empty((DIM, DIM))
    for j in range(DIM):
        out[:, j] = _realify_unchecked(superop(BASIS.matrices[j]))
    return out


# --- operators -------------------------------------------------------------

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
# Matrix conventions for sigma^+ and sigma^- follow the model definition verbatim.
SPLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SMINUS = np.array([[0, 1], [0, 0]], dtype=complex)


def _on(op, qubit):
    return np.kron(op, I2) if qubit == 1 else np.kron(I2, op)


class SystemKind(enum.IntEnum):
    SYSTEM1 = 1
    SYSTEM2 = 2
    SYSTEM3 = 3


@dataclass(frozen=True)
class SystemSpec:
    kind: SystemKind = SystemKind.SYSTEM1
    omega1: float = 1.0
    omega2: float = 1.1
    alpha: float = 0.2
    lambda1: float = 0.5
    lambda2: float = 0.5
    cap_omega1: float = 0.5
    cap_omega2: float = 0.5
    epsilon: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", SystemKind(self.kind))
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if min(self.cap_omega1, self.cap_omega2) <= 0:
            raise ValueError("dissipation constants must be positive")
        if min(self.lambda1, self.lambda2) <= 0:
            raise ValueError("Lamb-shift constants must be positive")
        if min(self.omega1, self.omega2) <= 0:
            raise ValueError("qubit frequencies must be positive")
        if self.kind == SystemKind.SYSTEM3 and self.alpha <= 0:
            raise ValueError("System 3 needs alpha > 0")

    def with_epsilon(self, epsilon: float) -> "SystemSpec":
        return SystemSpec(**{**self.__dict__, "epsilon": epsilon})

    def free_hamiltonian(self) -> np.ndarray:
        if self.kind == SystemKind.SYSTEM3:
            return (
                _on(SZ, 1)
                + _on(SZ, 2)
                + self.alpha * (np.kron(SY, SY) + np.kron(SZ, SZ))
            )
        return 0.5 * self.omega1 * _on(SZ, 1) + 0.5 * self.omega2 * _on(SZ, 2)

    def control_hamiltonian(self) -> np.ndarray:
        if self.kind == SystemKind.SYSTEM1:
            return _on(SX, 1) + _on(SX, 2)
        if self.kind == SystemKind.SYSTEM2:
            return np.kron(SX, SX)
        return _on(SX, 1)

    def lamb(self, qubit: int) -> float:
        return self.lambda1 if qubit == 1 else self.lambda2

    def rate(self, qubit: int) -> float:
        return self.cap_omega1 if qubit == 1 else self.cap_omega2


def commutator_map(h):
    return lambda rho: -1j * (h @ rho - rho @ h)


def lindblad_term(jump):
    """rho -> 2 J rho J^+ - J^+ J rho - rho J^+ J."""
    jd = jump.conj().T
    jdj = jd @ jump
    return lambda rho: 2 * jump @ rho @ jd - jdj @ rho - rho @ jdj


def master_rhs(spec: SystemSpec, u: float, n1: float, n2: float):
    """Complex-domain right-hand side of the master equation for fixed controls."""
    eps = spec.epsilon
    h = spec.free_hamiltonian() + u * spec.control_hamiltonian()
    for q, n in ((1, n1), (2, n2)):
        h = h + eps * spec.lamb(q) * n * _on(SZ, q)
    terms = []
    for q, n in ((1, n1), (2, n2)):
        down = lindblad_term(_on(SMINUS, q))
        up = lindblad_term(_on(SPLUS, q))
        terms.append((eps * spec.rate(q) * (n + 1), down))
        terms.append((eps * spec.rate(q) * n, up))

    def rhs(rho):
        out = -1j * (h @ rho - rho @ h)
        for c, d in terms:
            if c:
                out = out + c * d(rho)
        return out

    return rhs


@dataclass(frozen=True)
class GeneratorSet:
    """Real matrices with ``L(u, n1, n2) = A + u*B_u + n1*B_n1 + n2*B_n2``."""

    A: np.ndarray
    B_u: np.ndarray
    B_n1: np.ndarray
    B_n2: np.ndarray
    spec: SystemSpec | None = None

    @property
    def controls(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.B_u, self.B_n1, self.B_n2)


def build_generators(spec: SystemSpec) -> GeneratorSet:
    eps = spec.epsilon
    a = superop_matrix(commutator_map(spec.free_hamiltonian()))
    b_u = superop_matrix(commutator_map(spec.control_hamiltonian()))
    b_n = []
    for q in (1, 2):
        down = lindblad_term(_on(SMINUS, q))
        up = lindblad_term(_on(SPLUS, q))
        # spontaneous emission is the n-independent part of the down rate
        a = a + eps * spec.rate(q) * superop_matrix(down)
        lamb = commutator_map(eps * spec.lamb(q) * _on(SZ, q))
        b_n.append(
            superop_matrix(lamb)
            + eps * spec.rate(q) * (superop_matrix(down) + superop_matrix(up))
        )
    return GeneratorSet(a, b_u, b_n[0], b_n[1], spec)


# --- gates and the three special states ------------------------------------


class GateKind(enum.Enum):
    CNOT = "cnot"
    CPHASE = "cphase"


def cnot_matrix() -> np.ndarray:
    u = np.eye(N, dtype=complex)
    u[2:, 2:] = [[0, 1], [1, 0]]
    return u


def cphase_matrix(lam: float) -> np.ndarray:
    return np.diag([1, 1, 1, np.exp(1j * lam)])


def gate_channel_matrix(u, tol: float = 1e-10) -> np.ndarray:
    """Realified matrix of ``rho -> U rho U^+``."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (N, N) or np.max(np.abs(u.conj().T @ u - np.eye(N))) > tol:
        raise ValueError("gate matrix must be a 4x4 unitary")
    ud = u.conj().T
    return superop_matrix(lambda rho: u @ rho @ ud)


RHO1 = np.diag([0.4, 0.3, 0.2, 0.1]).astype(complex)
RHO2 = np.full((N, N), 0.25, dtype=complex)
RHO3 = np.eye(N, dtype=complex) / 4


@dataclass(frozen=True)
class SpecialStates:
    rhos: tuple = (RHO1, RHO2, RHO3)
    xs: np.ndarray = field(
        default_factory=lambda: np.stack([realify(r) for r in (RHO1, RHO2, RHO3)])
    )


SPECIAL = SpecialStates()


@dataclass(frozen=True)
class GateTarget:
    kind: GateKind
    lam: float
    u_matrix: np.ndarray
    psi_u: np.ndarray
    target_states: np.ndarray  # rows are Psi_U x_rho_m

    @property
    def label(self) -> str:
        if self.kind == GateKind.CNOT:
            return "cnot"
        return f"cphase({self.lam / np.pi:g}pi)"


def make_gate(kind: GateKind | str, lam: float = np.pi) -> GateTarget:
    kind = GateKind(kind)
    u = cnot_matrix() if kind == GateKind.CNOT else cphase_matrix(lam)
    psi = gate_channel_matrix(u)
    return GateTarget(kind, float(lam), u, psi, SPECIAL.xs @ psi.T)


def cnot() -> GateTarget:
    return make_gate(GateKind.CNOT)


def cphase(lam: float) -> GateTarget:
    return make_gate(GateKind.CPHASE, lam)


def cz() -> GateTarget:
    return make_gate(GateKind.CPHASE, np.pi)
