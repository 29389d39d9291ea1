"""Generalized optical Bloch equation in the momentum-family representation.

The density operator is stored as one 3x3 block per family momentum q for
the Lambda families and one 5x5 block per q for the inverted-W families.
Coherences between different families are never created by the dynamics
and are not stored.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple
import logging

import numpy as np

from .basis import (
    FamilyKind,
    MomentumGrid,
    Polarization,
    decay_amplitude,
    family_members,
    family_of,
    ground,
)
from .hamiltonian import GAMMA, SimParams, family_hamiltonians

logger = logging.getLogger(__name__)

KINDS = (FamilyKind.LAMBDA, FamilyKind.INVERTED_W)

# reflection m -> -m within each family
_MIRROR_ORDER = {
    FamilyKind.LAMBDA: np.array([0, 2, 1]),
    FamilyKind.INVERTED_W: np.array([4, 3, 2, 1, 0]),
}


@dataclass(frozen=True)
class EmissionKernel:
    polarization_class: str
    offsets: np.ndarray
    weights: np.ndarray


def _pi_density(u: np.ndarray) -> np.ndarray:
    return 0.75 * (1.0 - u**2)


def _sigma_density(u: np.ndarray) -> np.ndarray:
    return 0.375 * (1.0 + u**2)


EMISSION_DENSITIES = {"pi": _pi_density, "sigma": _sigma_density}


def polarization_class(channel: Polarization) -> str:
    return "pi" if channel is Polarization.PI else "sigma"


@lru_cache(maxsize=32)
def _kernel(polarization_class: str, points_per_recoil: int) -> EmissionKernel:
    if points_per_recoil < 1:
        raise ValueError(f"points_per_recoil must be >= 1, got {points_per_recoil}")
    try:
        density = EMISSION_DENSITIES[polarization_class]
    except KeyError:
        raise ValueError(f"unknown polarization class {polarization_class!r}") from None
    offsets = np.arange(-points_per_recoil, points_per_recoil + 1) / points_per_recoil
    weights = density(offsets) / points_per_recoil
    weights = weights / weights.sum()
    offsets.setflags(write=False)
    weights.setflags(write=False)
    return EmissionKernel(polarization_class, offsets, weights)


def emission_kernel(polarization_class: str, points_per_recoil: int) -> EmissionKernel:
    """Discrete distribution of the photon momentum projected on the beam axis."""
    return _kernel(polarization_class, int(points_per_recoil))


@dataclass
class FamilyBlockState:
    grid: MomentumGrid
    lambda_blocks: np.ndarray
    iw_blocks: np.ndarray
    lost_trace: float = 0.0

    @classmethod
    def zeros(cls, grid: MomentumGrid) -> "FamilyBlockState":
        return cls(
            grid=grid,
            lambda_blocks=np.zeros((grid.size, 3, 3), dtype=complex),
            iw_blocks=np.zeros((grid.size, 5, 5), dtype=complex),
        )

    def blocks(self, kind: FamilyKind) -> np.ndarray:
        return self.lambda_blocks if FamilyKind(kind) is FamilyKind.LAMBDA else self.iw_blocks

    def copy(self) -> "FamilyBlockState":
        return FamilyBlockState(self.grid, self.lambda_blocks.copy(), self.iw_blocks.copy(), self.lost_trace)

    def total_trace(self) -> float:
        return float(
            np.trace(self.lambda_blocks, axis1=1, axis2=2).real.sum()
            + np.trace(self.iw_blocks, axis1=1, axis2=2).real.sum()
        )

    def min_diagonal(self) -> float:
        return float(min(
            np.diagonal(self.lambda_blocks, axis1=1, axis2=2).real.min(),
            np.diagonal(self.iw_blocks, axis1=1, axis2=2).real.min(),
        ))

    def hermiticity_error(self) -> float:
        return float(max(
            np.abs(b - b.conj().transpose(0, 2, 1)).max() for b in (self.lambda_blocks, self.iw_blocks)
        ))

    def hermitized(self) -> "FamilyBlockState":
        return FamilyBlockState(
            self.grid,
            0.5 * (self.lambda_blocks + self.lambda_blocks.conj().transpose(0, 2, 1)),
            0.5 * (self.iw_blocks + self.iw_blocks.conj().transpose(0, 2, 1)),
            self.lost_trace,
        )

    def mirror(self) -> "FamilyBlockState":
        """Simultaneous reflection m -> -m, p -> -p."""
        lam = _MIRROR_ORDER[FamilyKind.LAMBDA]
        iw = _MIRROR_ORDER[FamilyKind.INVERTED_W]
        return FamilyBlockState(
            self.grid,
            self.lambda_blocks[::-1][:, lam][:, :, lam].copy(),
            self.iw_blocks[::-1][:, iw][:, :, iw].copy(),
            self.lost_trace,
        )

    def __add__(self, other: "FamilyBlockState") -> "FamilyBlockState":
        return FamilyBlockState(
            self.grid,
            self.lambda_blocks + other.lambda_blocks,
            self.iw_blocks + other.iw_blocks,
            self.lost_trace + other.lost_trace,
        )

    def __mul__(self, scalar: float) -> "FamilyBlockState":
        return FamilyBlockState(
            self.grid, self.lambda_blocks * scalar, self.iw_blocks * scalar, self.lost_trace * scalar
        )

    __rmul__ = __mul__


def member_support(grid: MomentumGrid, kind: FamilyKind) -> np.ndarray:
    """support[i, a] is True when member a of family i has its physical momentum on the grid."""
    shifts = np.array([grid.shift_points(o) for o in family_members(kind).offsets])
    physical = np.arange(grid.size)[:, None] + shifts[None, :]
    return (physical >= 0) & (physical < grid.size)


def build_initial_state(grid: MomentumGrid, delta_q: float) -> FamilyBlockState:
    """Equal population of the five ground sublevels, Gaussian in momentum around p = 0."""
    if delta_q <= 0:
        raise ValueError(f"delta_q must be positive, got {delta_q}")
    if delta_q > grid.p_max / 4:
        raise ValueError(f"delta_q={delta_q} is too wide for a grid of half-width {grid.p_max}")

    p = grid.values
    weights = np.exp(-0.5 * (p / delta_q) ** 2)
    weights /= weights.sum()

    state = FamilyBlockState.zeros(grid)
    n = grid.size
    for m in range(-2, 3):
        slot = family_of(ground(m))
        shift = grid.shift_points(slot.offset)
        # family index i holds physical index i + shift
        lo, hi = max(0, -shift), min(n, n - shift)
        state.blocks(slot.kind)[lo:hi, slot.index, slot.index] += 0.2 * weights[lo + shift:hi + shift]

    total = state.total_trace()
    state.lambda_blocks /= total
    state.iw_blocks /= total
    return state


class FeedingRule(NamedTuple):
    source_kind: FamilyKind
    a: int
    b: int
    target_kind: FamilyKind
    ta: int
    tb: int
    coefficient: float
    family_shift: int  # in recoil units
    kernel_class: str


@lru_cache(maxsize=None)
def feeding_rules() -> tuple[FeedingRule, ...]:
    """Every (excited pair, photon class) combination that feeds a ground coherence."""
    rules = []
    for kind in KINDS:
        members = family_members(kind).members
        excited_idx = [i for i, mem in enumerate(members) if mem.state.is_excited]
        for a in excited_idx:
            for b in excited_idx:
                ea, eb = members[a], members[b]
                for channel in Polarization:
                    amp_a = decay_amplitude(ea.state.m, channel)
                    amp_b = decay_amplitude(eb.state.m, channel)
                    if amp_a == 0.0 or amp_b == 0.0:
                        continue
                    target_a = family_of(ground(ea.state.m - int(channel)))
                    target_b = family_of(ground(eb.state.m - int(channel)))
                    shift = ea.offset - target_a.offset
                    if target_a.kind is not target_b.kind or shift != eb.offset - target_b.offset:
                        raise AssertionError("spontaneous emission left a single family")
                    rules.append(FeedingRule(
                        source_kind=kind, a=a, b=b,
                        target_kind=target_a.kind, ta=target_a.index, tb=target_b.index,
                        coefficient=GAMMA * amp_a * amp_b,
                        family_shift=shift,
                        kernel_class=polarization_class(channel),
                    ))
    return tuple(rules)


class BlochGenerator:
    """Right-hand side of the Bloch equation for a fixed grid and fixed parameters.

    Members whose physical momentum q + offset falls outside the grid are not
    part of the state: their rows and columns are masked out, and feeding
    that would land on them is counted as lost.
    """

    def __init__(self, grid: MomentumGrid, params: SimParams):
        self.grid = grid
        self.params = params
        self.hamiltonians = {kind: family_hamiltonians(kind, grid.values, params) for kind in KINDS}
        self.decay = {}
        self.support = {}
        self.masks = {}
        for kind in KINDS:
            pe = family_members(kind).excited_mask.astype(float)
            self.decay[kind] = -0.5 * GAMMA * (pe[:, None] + pe[None, :])
            support = member_support(grid, kind)
            self.support[kind] = support
            self.masks[kind] = (support[:, :, None] & support[:, None, :]).astype(float)
        self.kernels = {
            cls: emission_kernel(cls, grid.points_per_recoil).weights[::-1].copy()
            for cls in EMISSION_DENSITIES
        }
        self.rules = feeding_rules()

    def __call__(self, state: FamilyBlockState) -> FamilyBlockState:
        out = {}
        rhos = {}
        for kind in KINDS:
            rho = state.blocks(kind) * self.masks[kind]
            h = self.hamiltonians[kind]
            rhos[kind] = rho
            out[kind] = (-1j * (h @ rho - rho @ h) + self.decay[kind] * rho) * self.masks[kind]

        n = self.grid.size
        npr = self.grid.points_per_recoil
        lost_rate = 0.0
        for rule in self.rules:
            source = rhos[rule.source_kind][:, rule.a, rule.b]
            spread = np.convolve(source, self.kernels[rule.kernel_class])
            # target family i' receives spread[i' + npr - shift]
            start = npr - rule.family_shift * npr
            lo, hi = max(0, start), min(spread.size, start + n)
            support = self.support[rule.target_kind][lo - start:hi - start]
            on_grid = support[:, rule.ta] & support[:, rule.tb]
            landed = rule.coefficient * spread[lo:hi] * on_grid
            out[rule.target_kind][lo - start:hi - start, rule.ta, rule.tb] += landed
            if rule.a == rule.b:
                lost_rate += (rule.coefficient * spread.sum() - landed.sum()).real

        return FamilyBlockState(self.grid, out[FamilyKind.LAMBDA], out[FamilyKind.INVERTED_W], float(lost_rate))


@lru_cache(maxsize=8)
def bloch_generator(grid: MomentumGrid, params: SimParams) -> BlochGenerator:
    return BlochGenerator(grid, params)


def apply_rhs(state: FamilyBlockState, params: SimParams) -> FamilyBlockState:
    """Time derivative of `state`; its lost_trace field carries d(lost_trace)/dt."""
    return bloch_generator(state.grid, params)(state)
