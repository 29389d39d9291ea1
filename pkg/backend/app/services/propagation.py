"""Fixed-step time integration of the family-block Bloch equation."""
from dataclasses import dataclass, field
import logging

import numpy as np

from ..core.exceptions import IntegrationError
from .analysis import dark_population, excited_population, momentum_distribution
from .basis import FamilyKind, MomentumGrid
from .hamiltonian import SimParams
from .liouvillian import BlochGenerator, FamilyBlockState, bloch_generator

logger = logging.getLogger(__name__)

MAX_STABLE_DT = 0.1
NEGATIVITY_TOLERANCE = -1e-9
DEFAULT_DT = 1.0 / 50


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = DEFAULT_DT
    t_final: float = 0.0
    observation_stride: int = 250

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_final < 0:
            raise ValueError(f"t_final must be non-negative, got {self.t_final}")
        if self.observation_stride < 1:
            raise ValueError(f"observation_stride must be >= 1, got {self.observation_stride}")

    @property
    def n_steps(self) -> int:
        return steps_for(self.t_final, self.dt)


def steps_for(duration: float, dt: float) -> int:
    """Number of fixed steps covering `duration`; it must be a multiple of dt."""
    n = int(round(duration / dt))
    if abs(n * dt - duration) > 1e-9 * max(1.0, duration):
        raise ValueError(f"duration {duration} is not a multiple of dt={dt}")
    return n


@dataclass(frozen=True)
class Snapshot:
    gamma_t: float
    trace: float
    lost_trace: float
    dark_lambda: float
    dark_iw: float
    excited_population: float
    min_diagonal: float
    distribution: np.ndarray


SCALAR_FIELDS = ("trace", "lost_trace", "dark_lambda", "dark_iw", "excited_population", "min_diagonal")


@dataclass
class Trajectory:
    grid: MomentumGrid
    snapshots: list[Snapshot] = field(default_factory=list)

    @property
    def times(self) -> list[float]:
        return [s.gamma_t for s in self.snapshots]

    def append(self, snapshot: Snapshot) -> None:
        if self.snapshots and snapshot.gamma_t <= self.snapshots[-1].gamma_t:
            raise ValueError("snapshot times must be strictly increasing")
        self.snapshots.append(snapshot)

    def extend(self, other: "Trajectory") -> None:
        """Concatenate; a leading snapshot repeating the current final time is dropped."""
        for snap in other.snapshots:
            if self.snapshots and snap.gamma_t == self.snapshots[-1].gamma_t:
                continue
            self.append(snap)

    def series(self, name: str) -> np.ndarray:
        if name not in SCALAR_FIELDS:
            raise ValueError(f"unknown observable {name!r}")
        return np.array([getattr(s, name) for s in self.snapshots])

    def distributions(self) -> np.ndarray:
        return np.array([s.distribution for s in self.snapshots])

    def __len__(self) -> int:
        return len(self.snapshots)


def observe(state: FamilyBlockState, params: SimParams, gamma_t: float) -> Snapshot:
    if params.is_dark:
        dark_l = dark_i = float("nan")
    else:
        dark_l = dark_population(state, FamilyKind.LAMBDA, params)
        dark_i = dark_population(state, FamilyKind.INVERTED_W, params)
    return Snapshot(
        gamma_t=float(gamma_t),
        trace=state.total_trace(),
        lost_trace=state.lost_trace,
        dark_lambda=dark_l,
        dark_iw=dark_i,
        excited_population=excited_population(state),
        min_diagonal=state.min_diagonal(),
        distribution=momentum_distribution(state).density,
    )


def rk4_step(state: FamilyBlockState, params: SimParams, dt: float,
             generator: BlochGenerator | None = None) -> FamilyBlockState:
    """One classical Runge-Kutta step followed by re-Hermitization."""
    if dt < 0 or dt > MAX_STABLE_DT:
        raise ValueError(f"dt={dt} outside the stable range [0, {MAX_STABLE_DT}]")
    if dt == 0:
        return state.copy()
    rhs = generator or bloch_generator(state.grid, params)

    k1 = rhs(state)
    k2 = rhs(state + (0.5 * dt) * k1)
    k3 = rhs(state + (0.5 * dt) * k2)
    k4 = rhs(state + dt * k3)
    new = (state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).hermitized()

    lowest = new.min_diagonal()
    if lowest < NEGATIVITY_TOLERANCE:
        raise IntegrationError(f"negative population {lowest:.3e} after step")
    return new


def evolve(state0: FamilyBlockState, params: SimParams, config: IntegratorConfig,
           t0: float = 0.0, observer_params: SimParams | None = None) -> tuple[FamilyBlockState, Trajectory]:
    """Step `state0` forward to t0 + t_final, recording a snapshot every observation_stride steps.

    `observer_params` selects the dark states used for the recorded
    populations; it defaults to `params`.
    """
    observer = observer_params or params
    generator = bloch_generator(state0.grid, params)
    n_steps = config.n_steps
    trajectory = Trajectory(state0.grid)
    trajectory.append(observe(state0, observer, t0))

    state = state0
    for step in range(1, n_steps + 1):
        gamma_t = t0 + step * config.dt
        try:
            state = rk4_step(state, params, config.dt, generator)
        except IntegrationError as e:
            raise IntegrationError(f"{e} at Gamma t = {gamma_t:.4f}", gamma_t=gamma_t) from e
        if step % config.observation_stride == 0 or step == n_steps:
            snap = observe(state, observer, gamma_t)
            trajectory.append(snap)
            logger.debug(f"Gamma t = {gamma_t:.2f}: trace={snap.trace:.12f} lost={snap.lost_trace:.3e}")

    if state.lost_trace > 1e-6:
        logger.warning(f"Off-grid leakage {state.lost_trace:.3e} by Gamma t = {t0 + n_steps * config.dt:.2f}")
    return state, trajectory
