"""Observables: momentum distributions, dark-state populations, peak fits and lifetimes."""
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from lmfit.models import GaussianModel
from scipy.stats import linregress

from .basis import FamilyKind, MomentumGrid, family_members
from .hamiltonian import SimParams, dark_state
from .liouvillian import KINDS, FamilyBlockState

logger = logging.getLogger(__name__)

RECOIL_CENTERS = (-2.0, -1.0, 0.0, 1.0, 2.0)
DEFAULT_PEAK_SIGMA = 0.15
CENTER_TOLERANCE = 0.3

# recoil-heating pedestal under the narrow peaks
BACKGROUND_SIGMA_INIT = 2.0
BACKGROUND_SIGMA_MIN = 0.5
BACKGROUND_CENTER_TOLERANCE = 1.0


@dataclass(frozen=True)
class MomentumDistribution:
    grid: MomentumGrid
    density: np.ndarray

    @property
    def momenta(self) -> np.ndarray:
        return self.grid.values

    def total(self) -> float:
        return float(self.density.sum() * self.grid.spacing)

    def weight_between(self, lo: float, hi: float) -> float:
        mask = (self.momenta >= lo) & (self.momenta <= hi)
        return float(self.density[mask].sum() * self.grid.spacing)


def momentum_distribution(state: FamilyBlockState) -> MomentumDistribution:
    """Deposit every member population at its physical momentum q + offset.

    Members whose physical momentum is off the grid are never populated by
    the dynamics, so the total equals the trace of the state.
    """
    grid = state.grid
    n = grid.size
    weight = np.zeros(n)
    for kind in KINDS:
        blocks = state.blocks(kind)
        for i, mem in enumerate(family_members(kind).members):
            shift = grid.shift_points(mem.offset)
            lo, hi = max(0, -shift), min(n, n - shift)
            weight[lo + shift:hi + shift] += blocks[lo:hi, i, i].real
    return MomentumDistribution(grid, weight / grid.spacing)


def dark_population(state: FamilyBlockState, kind: FamilyKind, params: SimParams) -> float:
    psi = dark_state(kind, params)
    rho = state.blocks(kind)
    return float(np.einsum("i,qij,j->", psi, rho, psi).real)


def dark_member_populations(state: FamilyBlockState, kind: FamilyKind, params: SimParams) -> np.ndarray:
    """Member populations of the blocks projected onto the dark state, summed over q."""
    psi = dark_state(kind, params)
    weight = np.einsum("i,qij,j->", psi, state.blocks(kind), psi).real
    return weight * psi**2


def member_populations_near(state: FamilyBlockState, kind: FamilyKind, q_window: float) -> np.ndarray:
    """Unprojected member populations of the families with |q| <= q_window."""
    near = np.abs(state.grid.values) <= q_window + 1e-12
    return np.diagonal(state.blocks(kind)[near], axis1=1, axis2=2).real.sum(axis=0)


def sublevel_populations(state: FamilyBlockState) -> dict[str, float]:
    pops = {}
    for kind in KINDS:
        diag = np.diagonal(state.blocks(kind), axis1=1, axis2=2).real.sum(axis=0)
        for i, mem in enumerate(family_members(kind).members):
            pops[mem.state.label] = float(diag[i])
    return pops


def excited_population(state: FamilyBlockState) -> float:
    total = 0.0
    for kind in KINDS:
        mask = family_members(kind).excited_mask
        total += np.diagonal(state.blocks(kind), axis1=1, axis2=2).real[:, mask].sum()
    return float(total)


@dataclass(frozen=True)
class Peak:
    amplitude: float
    center: float
    sigma: float

    def evaluate(self, p: np.ndarray) -> np.ndarray:
        return self.amplitude / (self.sigma * math.sqrt(2 * math.pi)) * np.exp(-0.5 * ((p - self.center) / self.sigma) ** 2)


@dataclass(frozen=True)
class PeakFit:
    peaks: list[Peak]
    residual_norm: float
    converged: bool = True
    iterations: int = 0
    centers_init: tuple[float, ...] = field(default_factory=tuple)
    background: Peak | None = None

    def evaluate(self, p: np.ndarray) -> np.ndarray:
        """Sum of all fitted Gaussians, pedestal included."""
        p = np.asarray(p, dtype=float)
        total = sum((peak.evaluate(p) for peak in self.peaks), np.zeros_like(p))
        if self.background is not None:
            total = total + self.background.evaluate(p)
        return total

    def amplitude_near(self, center: float) -> float:
        """Amplitude of the peak initialised closest to `center`."""
        idx = int(np.argmin([abs(c - center) for c in self.centers_init]))
        return self.peaks[idx].amplitude

    def total_amplitude(self) -> float:
        """Summed area of the narrow peaks; the pedestal is not counted."""
        return float(sum(peak.amplitude for peak in self.peaks))


def _first_moment(dist: MomentumDistribution) -> float:
    weight = np.clip(dist.density, 0.0, None)
    return float(np.sum(dist.momenta * weight) / max(weight.sum(), 1e-300))


def fit_gaussian_peaks(
    dist: MomentumDistribution,
    centers_init,
    sigma_init: float = DEFAULT_PEAK_SIGMA,
    max_iterations: int = 500,
    tolerance: float = 1e-10,
    background: bool = False,
) -> PeakFit:
    """Levenberg-Marquardt fit of a sum of Gaussians, one per initial center.

    Amplitudes are peak areas (probability); centers are confined to
    +-0.3 hbar*k around their initial value. With `background` a broad
    Gaussian pedestal is fitted as well; the narrow peaks are then kept
    narrower than the pedestal so the two cannot swap roles.
    """
    centers_init = tuple(float(c) for c in centers_init)
    if not centers_init:
        raise ValueError("centers_init must not be empty")
    p = dist.momenta
    for c in centers_init:
        if not p[0] <= c <= p[-1]:
            raise ValueError(f"initial center {c} outside the grid")

    model = None
    for n in range(len(centers_init)):
        component = GaussianModel(prefix=f"p{n}_")
        model = component if model is None else model + component
    if background:
        model = model + GaussianModel(prefix="bg_")
    params = model.make_params()

    span = p[-1] - p[0]
    sigma_max = BACKGROUND_SIGMA_MIN if background else span
    floor = 1e-6 * max(float(np.max(dist.density)), 1e-300)
    for n, c in enumerate(centers_init):
        height = max(float(dist.density[int(np.argmin(np.abs(p - c)))]), floor)
        params[f"p{n}_amplitude"].set(value=height * sigma_init * math.sqrt(2 * math.pi), min=0.0)
        params[f"p{n}_center"].set(value=c, min=c - CENTER_TOLERANCE, max=c + CENTER_TOLERANCE)
        params[f"p{n}_sigma"].set(value=min(sigma_init, sigma_max), min=1e-4, max=sigma_max)
    if background:
        mean = _first_moment(dist)
        params["bg_amplitude"].set(value=0.5 * max(dist.total(), 0.0), min=0.0)
        params["bg_center"].set(value=mean, min=mean - BACKGROUND_CENTER_TOLERANCE,
                                max=mean + BACKGROUND_CENTER_TOLERANCE)
        params["bg_sigma"].set(value=BACKGROUND_SIGMA_INIT, min=BACKGROUND_SIGMA_MIN, max=span)

    max_nfev = max_iterations * (len(params) + 1)
    result = model.fit(
        dist.density, params, x=p, method="leastsq", max_nfev=max_nfev,
        fit_kws={"ftol": tolerance, "xtol": tolerance},
    )
    converged = bool(result.success) and result.nfev < max_nfev
    if not converged:
        logger.warning(f"Peak fit did not converge after {result.nfev} evaluations: {result.message}")

    def _peak(prefix: str) -> Peak:
        return Peak(
            amplitude=float(result.params[f"{prefix}amplitude"].value),
            center=float(result.params[f"{prefix}center"].value),
            sigma=float(result.params[f"{prefix}sigma"].value),
        )

    return PeakFit(
        peaks=[_peak(f"p{n}_") for n in range(len(centers_init))],
        residual_norm=float(np.sqrt(np.sum(result.residual**2))),
        converged=converged,
        iterations=int(result.nfev),
        centers_init=centers_init,
        background=_peak("bg_") if background else None,
    )


def estimate_lifetime(trajectory, kind: FamilyKind, fit_window: tuple[float, float],
                      asymptote: float | None = None) -> tuple[float, float]:
    """Decay time of a dark-state population from a log-linear fit.

    The final snapshot value is taken as the asymptote unless one is given.
    Returns (tau, R^2).
    """
    times = np.asarray(trajectory.times, dtype=float)
    pops = trajectory.series("dark_lambda" if FamilyKind(kind) is FamilyKind.LAMBDA else "dark_iw")
    t_start, t_end = fit_window
    mask = (times >= t_start) & (times <= t_end)
    if mask.sum() < 3:
        raise ValueError(f"fit window {fit_window} holds fewer than 3 snapshots")
    floor = pops[-1] if asymptote is None else asymptote
    adjusted = pops[mask] - floor
    if np.any(adjusted <= 0):
        raise ValueError("population does not exceed its asymptote inside the fit window")
    if np.any(np.diff(adjusted) > 0):
        raise ValueError("population is not monotonically decaying inside the fit window")

    fit = linregress(times[mask], np.log(adjusted))
    if fit.slope >= 0:
        raise ValueError("no decay inside the fit window")
    return -1.0 / fit.slope, fit.rvalue**2


def convolve_detector(dist: MomentumDistribution, sigma_p: float) -> MomentumDistribution:
    """Blur with a Gaussian detector response of width sigma_p (hbar*k).

    Each source point spreads only over the grid: its kernel is renormalized
    to the part that stays in range, so the total is unchanged.
    """
    if sigma_p < 0:
        raise ValueError(f"sigma_p must be non-negative, got {sigma_p}")
    if sigma_p == 0:
        return MomentumDistribution(dist.grid, dist.density.copy())
    spacing = dist.grid.spacing
    half = min(int(math.ceil(5 * sigma_p / spacing)), (dist.grid.size - 1) // 2)
    x = np.arange(-half, half + 1) * spacing
    kernel = np.exp(-0.5 * (x / sigma_p) ** 2)
    kernel /= kernel.sum()
    # symmetric kernel: in_range[i] is the kernel weight point i keeps on the grid
    in_range = np.convolve(np.ones(dist.grid.size), kernel, mode="same")
    return MomentumDistribution(dist.grid, np.convolve(dist.density / in_range, kernel, mode="same"))
