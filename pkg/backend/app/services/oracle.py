"""Independent propagation with the full Liouvillian superoperator.

The basis is built from (internal state, physical momentum) pairs and
couplings are looked up by physical momentum, so no family structure is
assumed by the generator. Used to cross-check the family-block integrator
on coarse grids.
"""
from dataclasses import dataclass
import logging

import numpy as np
import scipy.sparse as sparse
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from ..core.config import settings
from ..core.exceptions import OracleBudgetError
from .basis import (
    ALL_STATES,
    InternalState,
    MomentumGrid,
    Polarization,
    coupling_amplitude,
    decay_amplitude,
    excited,
    family_of,
    ground,
)
from .hamiltonian import GAMMA, SimParams
from .liouvillian import KINDS, FamilyBlockState, build_initial_state, emission_kernel, polarization_class
from .propagation import IntegratorConfig, evolve

logger = logging.getLogger(__name__)

# bytes per superoperator entry times the working copies held by expm
_DENSE_BYTES_PER_ENTRY = 16 * 6
# Krylov/Taylor vectors plus sparse storage, per vectorized element
_SPARSE_BYTES_PER_ROW = 16 * 64 + 24 * 48


@dataclass(frozen=True)
class OracleBasis:
    """Internal states paired with physical grid momenta, state-major.

    A pair is kept when both its momentum p and its family momentum
    p - offset lie on the grid, the same states the block layout stores.
    The family columns are only used to move data between the two layouts;
    the superoperator itself never reads them.
    """
    grid: MomentumGrid
    states: tuple[InternalState, ...]
    momentum_index: np.ndarray  # physical momentum in units of the grid spacing
    family_label: np.ndarray
    member: np.ndarray

    @classmethod
    def for_grid(cls, grid: MomentumGrid) -> "OracleBasis":
        states, momentum, labels, members = [], [], [], []
        for state in ALL_STATES:
            slot = family_of(state)
            kind_id = KINDS.index(slot.kind)
            for k in range(grid.size):
                q_index = k - grid.shift_points(slot.offset)
                if not 0 <= q_index < grid.size:
                    continue
                states.append(state)
                momentum.append(k - grid.half_points)
                labels.append(kind_id * grid.size + q_index)
                members.append(slot.index)
        return cls(grid, tuple(states), np.array(momentum), np.array(labels), np.array(members))

    @property
    def size(self) -> int:
        return len(self.states)

    def lookup(self) -> dict[tuple[InternalState, int], int]:
        return {(s, int(k)): idx for idx, (s, k) in enumerate(zip(self.states, self.momentum_index))}

    def block_pairs(self):
        """(row, col, kind_id, q_index, member_row, member_col) for every family-diagonal element."""
        rows, cols = np.nonzero(self.family_label[:, None] == self.family_label[None, :])
        label = self.family_label[rows]
        n = self.grid.size
        return rows, cols, label // n, label % n, self.member[rows], self.member[cols]


@dataclass
class OracleState:
    rho: np.ndarray
    lost_trace: float = 0.0


def _hamiltonian(basis: OracleBasis, params: SimParams, index) -> sparse.csr_matrix:
    npr = basis.grid.points_per_recoil
    p = basis.momentum_index / npr
    is_excited = np.array([s.is_excited for s in basis.states])
    h = sparse.lil_matrix((basis.size, basis.size), dtype=complex)
    h.setdiag(params.omega_r * p**2 - params.delta * is_excited)
    for g_idx, (state, k) in enumerate(zip(basis.states, basis.momentum_index)):
        if state.is_excited:
            continue
        for pol in (Polarization.SIGMA_PLUS, Polarization.SIGMA_MINUS):
            c = coupling_amplitude(state.m, pol)
            if c == 0.0:
                continue
            e_idx = index.get((excited(state.m + int(pol)), int(k) + int(pol) * npr))
            if e_idx is None:
                continue
            h[e_idx, g_idx] = 0.5 * c * params.rabi(pol)
            h[g_idx, e_idx] = 0.5 * c * params.rabi(pol)
    return h.tocsr()


def _jump_operators(basis: OracleBasis, index) -> list[sparse.csr_matrix]:
    npr = basis.grid.points_per_recoil
    jumps = []
    for channel in Polarization:
        kernel = emission_kernel(polarization_class(channel), npr)
        for j, weight in zip(range(-npr, npr + 1), kernel.weights):
            op = sparse.lil_matrix((basis.size, basis.size))
            for e_idx, (state, k) in enumerate(zip(basis.states, basis.momentum_index)):
                if not state.is_excited:
                    continue
                amp = decay_amplitude(state.m, channel)
                if amp == 0.0:
                    continue
                # photon carries u = j/npr along the axis, the atom recoils by -u
                g_idx = index.get((ground(state.m - int(channel)), int(k) - j))
                if g_idx is not None:
                    op[g_idx, e_idx] = np.sqrt(GAMMA * weight) * amp
            jumps.append(op.tocsr())
    return jumps


def build_superoperator(basis: OracleBasis, params: SimParams) -> sparse.csr_matrix:
    """Generator acting on (row-major vec(rho), lost_trace)."""
    n = basis.size
    index = basis.lookup()
    eye = sparse.identity(n, format="csr")
    h = _hamiltonian(basis, params, index)
    pe = sparse.diags(np.array([float(s.is_excited) for s in basis.states]), format="csr")

    lindblad = -1j * (sparse.kron(h, eye) - sparse.kron(eye, h.T))
    lindblad = lindblad - 0.5 * GAMMA * (sparse.kron(pe, eye) + sparse.kron(eye, pe))
    fed = sparse.csr_matrix((n, n))
    for op in _jump_operators(basis, index):
        lindblad = lindblad + sparse.kron(op, op.conj())
        fed = fed + op.T @ op

    # d(lost)/dt = Gamma tr(P_e rho) - tr(sum J rho J^dagger)
    leak = (GAMMA * pe - fed).T.toarray().ravel()
    lost_row = sparse.csr_matrix(leak.reshape(1, -1))
    return sparse.bmat(
        [[lindblad, sparse.csr_matrix((n * n, 1))], [lost_row, sparse.csr_matrix((1, 1))]],
        format="csr",
    )


def oracle_from_state(state: FamilyBlockState) -> OracleState:
    basis = OracleBasis.for_grid(state.grid)
    rho = np.zeros((basis.size, basis.size), dtype=complex)
    rows, cols, kind_id, q_index, a, b = basis.block_pairs()
    for k, kind in enumerate(KINDS):
        sel = kind_id == k
        rho[rows[sel], cols[sel]] = state.blocks(kind)[q_index[sel], a[sel], b[sel]]
    return OracleState(rho, state.lost_trace)


def oracle_to_state(oracle: OracleState, grid: MomentumGrid) -> FamilyBlockState:
    """Keep the family-diagonal blocks of a dense state."""
    basis = OracleBasis.for_grid(grid)
    state = FamilyBlockState.zeros(grid)
    rows, cols, kind_id, q_index, a, b = basis.block_pairs()
    for k, kind in enumerate(KINDS):
        sel = kind_id == k
        state.blocks(kind)[q_index[sel], a[sel], b[sel]] = oracle.rho[rows[sel], cols[sel]]
    state.lost_trace = float(oracle.lost_trace)
    return state


def cross_family_coherence(oracle: OracleState, grid: MomentumGrid) -> float:
    labels = OracleBasis.for_grid(grid).family_label
    mask = labels[:, None] != labels[None, :]
    return float(np.abs(oracle.rho[mask]).max()) if mask.any() else 0.0


def dense_oracle_evolve(state0: OracleState, params: SimParams, t: float, coarse_grid: MomentumGrid,
                        memory_budget_mb: float | None = None) -> OracleState:
    """exp(L t) applied to the vectorized state.

    Dense scaling-and-squaring when the superoperator fits the budget,
    otherwise scipy's sparse exponential action, a truncated Taylor series
    with its own scaling steps.
    """
    budget = (memory_budget_mb or settings.oracle_memory_budget_mb) * 2**20
    basis = OracleBasis.for_grid(coarse_grid)
    n = basis.size
    if state0.rho.shape != (n, n):
        raise ValueError(f"state has shape {state0.rho.shape}, grid needs ({n}, {n})")
    dim = n * n + 1
    dense_bytes = dim**2 * _DENSE_BYTES_PER_ENTRY
    sparse_bytes = dim * _SPARSE_BYTES_PER_ROW
    if min(dense_bytes, sparse_bytes) > budget:
        raise OracleBudgetError(
            f"{n} basis states need ~{sparse_bytes / 2**20:.0f} MiB, budget is {budget / 2**20:.0f} MiB"
        )

    generator = build_superoperator(basis, params)
    vec = np.concatenate([state0.rho.ravel(), [state0.lost_trace]]).astype(complex)
    if dense_bytes <= budget:
        logger.info(f"Dense oracle: {dim}x{dim} matrix exponential")
        out = expm(generator.toarray() * t) @ vec
    else:
        logger.info(f"Sparse oracle: {dim} unknowns, {generator.nnz} nonzeros")
        out = expm_multiply(generator * t, vec)
    return OracleState(out[:-1].reshape(n, n), float(out[-1].real))


@dataclass(frozen=True)
class OracleCheck:
    max_deviation: float
    cross_family_coherence: float
    trace_error: float
    grid_points: int
    gamma_t: float


def run_oracle_check(params: SimParams, p_max: float = 4.0, points_per_recoil: int = 4,
                     gamma_t: float = 5.0, delta_q: float = 0.15, dt: float = 1.0 / 50,
                     memory_budget_mb: float | None = None) -> OracleCheck:
    """Evolve the same initial state with the integrator and the oracle and compare."""
    grid = MomentumGrid(p_max, points_per_recoil)
    state0 = build_initial_state(grid, delta_q)
    config = IntegratorConfig(dt=dt, t_final=gamma_t, observation_stride=max(1, int(round(gamma_t / dt))))
    stepped, _ = evolve(state0, params, config)

    oracle = dense_oracle_evolve(oracle_from_state(state0), params, gamma_t, grid, memory_budget_mb)
    reference = oracle_from_state(stepped)
    deviation = float(np.abs(reference.rho - oracle.rho).max())
    trace_error = abs(float(np.trace(oracle.rho).real) + oracle.lost_trace - 1.0)
    return OracleCheck(
        max_deviation=deviation,
        cross_family_coherence=cross_family_coherence(oracle, grid),
        trace_error=trace_error,
        grid_points=grid.size,
        gamma_t=gamma_t,
    )
