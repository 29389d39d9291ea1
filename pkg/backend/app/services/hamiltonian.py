"""Per-family Hamiltonian blocks in the frame rotating at the laser frequency."""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .basis import (
    FamilyBasis,
    FamilyKind,
    Polarization,
    coupling_amplitude,
    family_members,
)

# Decay rate of the excited level; the unit of all rates.
GAMMA = 1.0


@dataclass(frozen=True)
class SimParams:
    omega_plus: float
    omega_minus: float
    delta: float = 0.0
    omega_r: float = 5e-3

    def __post_init__(self):
        if self.omega_r <= 0:
            raise ValueError(f"omega_r must be positive, got {self.omega_r}")
        if self.omega_plus < 0 or self.omega_minus < 0:
            raise ValueError("Rabi frequencies must be non-negative")

    def rabi(self, polarization: Polarization) -> float:
        return self.omega_plus if polarization is Polarization.SIGMA_PLUS else self.omega_minus

    @property
    def is_dark(self) -> bool:
        """True when no light is applied at all."""
        return self.omega_plus == 0 and self.omega_minus == 0

    def swapped(self) -> "SimParams":
        return SimParams(self.omega_minus, self.omega_plus, self.delta, self.omega_r)


@dataclass(frozen=True)
class FamilyBlock:
    basis: FamilyBasis
    matrix: np.ndarray


def _coupling_matrix(kind: FamilyKind, omega_plus: float, omega_minus: float) -> np.ndarray:
    """Laser part of the family Hamiltonian; independent of q."""
    basis = family_members(kind)
    n = len(basis.members)
    v = np.zeros((n, n))
    rabi = {Polarization.SIGMA_PLUS: omega_plus, Polarization.SIGMA_MINUS: omega_minus}
    for gi, g_mem in enumerate(basis.members):
        if g_mem.state.is_excited:
            continue
        for pol in (Polarization.SIGMA_PLUS, Polarization.SIGMA_MINUS):
            c = coupling_amplitude(g_mem.state.m, pol)
            if c == 0.0:
                continue
            for ei, e_mem in enumerate(basis.members):
                if e_mem.state.is_excited and e_mem.state.m == g_mem.state.m + int(pol):
                    v[ei, gi] = 0.5 * c * rabi[pol]
                    v[gi, ei] = v[ei, gi]
    return v


def coupling_operator(kind: FamilyKind, params: SimParams) -> np.ndarray:
    return _coupling_matrix(FamilyKind(kind), params.omega_plus, params.omega_minus)


def _diagonal(kind: FamilyKind, q: np.ndarray, params: SimParams) -> np.ndarray:
    basis = family_members(kind)
    p = np.asarray(q, dtype=float)[..., None] + basis.offsets
    return params.omega_r * p**2 - params.delta * basis.excited_mask


def family_hamiltonian(basis: FamilyBasis, params: SimParams) -> FamilyBlock:
    matrix = np.diag(_diagonal(basis.kind, basis.q, params)).astype(complex)
    matrix += coupling_operator(basis.kind, params)
    return FamilyBlock(basis=basis, matrix=matrix)


def family_hamiltonians(kind: FamilyKind, q: np.ndarray, params: SimParams) -> np.ndarray:
    """Stack of family Hamiltonians, shape (len(q), n, n), for every family momentum."""
    diag = _diagonal(kind, q, params)
    h = np.zeros(diag.shape + (diag.shape[-1],), dtype=complex)
    idx = np.arange(diag.shape[-1])
    h[:, idx, idx] = diag
    h += coupling_operator(kind, params)
    return h


@lru_cache(maxsize=64)
def _dark_state(kind: FamilyKind, omega_plus: float, omega_minus: float) -> np.ndarray:
    if omega_plus == 0 and omega_minus == 0:
        raise ValueError("dark state undefined without light (omega_plus = omega_minus = 0)")
    wp, wm = omega_plus, omega_minus
    if kind is FamilyKind.LAMBDA:
        vec = np.array([0.0, wm, -wp])
        return vec / np.sqrt(wp**2 + wm**2)
    vec = np.array([wm**2, 0.0, -np.sqrt(6.0) * wp * wm, 0.0, wp**2])
    return vec / np.sqrt(wp**4 + 6 * wp**2 * wm**2 + wm**4)


def dark_state(kind: FamilyKind, params: SimParams) -> np.ndarray:
    """Light-decoupled superposition of a family, in family member order."""
    return _dark_state(FamilyKind(kind), params.omega_plus, params.omega_minus).copy()


def coupling_norm(state: np.ndarray, basis: FamilyBasis, params: SimParams) -> float:
    """Norm of the laser coupling applied to `state`; zero for a dark state."""
    return float(np.linalg.norm(coupling_operator(basis.kind, params) @ np.asarray(state)))


def family_spectrum(kind: FamilyKind, q: float, params: SimParams) -> tuple[np.ndarray, np.ndarray]:
    """Dressed-state energies (ascending) and eigenvectors (columns)."""
    block = family_hamiltonian(family_members(kind, q), params)
    return np.linalg.eigh(block.matrix)
