"""Declarative scenarios: presets, document parsing and staged runs."""
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
import hashlib
import json
import logging

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..core.config import settings
from ..core.exceptions import ConfigError, ScenarioError, SimulationError
from .analysis import (
    RECOIL_CENTERS,
    MomentumDistribution,
    Peak,
    PeakFit,
    convolve_detector,
    dark_population,
    estimate_lifetime,
    fit_gaussian_peaks,
    momentum_distribution,
    sublevel_populations,
)
from .basis import FamilyKind, build_momentum_grid
from .hamiltonian import SimParams
from .liouvillian import FamilyBlockState, build_initial_state
from .outputs import write_outputs
from .propagation import MAX_STABLE_DT, IntegratorConfig, Trajectory, evolve, steps_for

logger = logging.getLogger(__name__)

DEFAULT_RABI = 0.3
DEFAULT_OMEGA_R = 5e-3
ASYMMETRY_RATIO = 0.8
# window for the inverted-W lifetime reported by runs that cover it
LIFETIME_WINDOW = (200.0, 700.0)


class PresetName(str, Enum):
    SHORT = "short"
    MEDIUM = "medium"
    LONG = "long"
    TILTED = "tilted"
    ASYMMETRIC = "asymmetric"


class GridSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    p_max: float = Field(8.0, gt=0)
    points_per_recoil: int = Field(20, ge=1)


class Stage(BaseModel):
    model_config = ConfigDict(extra="forbid")

    duration: float = Field(ge=0)
    omega_plus: float = Field(ge=0)
    omega_minus: float = Field(ge=0)
    delta: float = 0.0


class OutputPaths(BaseModel):
    model_config = ConfigDict(extra="forbid")

    trajectory: str = "trajectory.csv"
    distribution: str = "final_distribution.csv"
    peak_fits: str = "peak_fits.json"
    report: str = "report.json"

    @model_validator(mode="after")
    def _distinct(self):
        paths = [self.trajectory, self.distribution, self.peak_fits, self.report]
        if len(set(paths)) != len(paths):
            raise ValueError("output paths must be distinct")
        return self


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    grid: GridSpec = Field(default_factory=GridSpec)
    omega_r: float = Field(DEFAULT_OMEGA_R, gt=0)
    initial_delta_q: float = Field(0.15, gt=0)
    stages: list[Stage] = Field(min_length=1)
    dt: float = Field(1.0 / 50, gt=0, le=MAX_STABLE_DT)
    observation_stride: int = Field(default_factory=lambda: settings.default_observation_stride, ge=1)
    outputs: OutputPaths = Field(default_factory=OutputPaths)
    detector_sigma: float | None = Field(None, ge=0)
    seed_label: str = "run"

    @model_validator(mode="after")
    def _consistent(self):
        half = self.grid.p_max * self.grid.points_per_recoil
        if abs(half - round(half)) > 1e-9:
            raise ValueError("grid.p_max must be a whole number of grid spacings")
        if self.initial_delta_q > self.grid.p_max / 4:
            raise ValueError("initial_delta_q is too wide for the grid (must be <= p_max/4)")
        for stage in self.stages:
            steps_for(stage.duration, self.dt)
        if all(s.omega_plus == 0 and s.omega_minus == 0 for s in self.stages):
            raise ValueError("at least one stage must apply light")
        return self

    @property
    def total_duration(self) -> float:
        return sum(s.duration for s in self.stages)

    def digest(self) -> str:
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def sim_params(self, stage: Stage) -> SimParams:
        return SimParams(stage.omega_plus, stage.omega_minus, stage.delta, self.omega_r)


def _stage(duration: float, omega_plus: float = DEFAULT_RABI, omega_minus: float = DEFAULT_RABI) -> Stage:
    return Stage(duration=duration, omega_plus=omega_plus, omega_minus=omega_minus, delta=0.0)


def preset(name: str) -> ScenarioConfig:
    try:
        name = PresetName(name)
    except ValueError:
        raise ConfigError(f"unknown preset {name!r}; choose from {[p.value for p in PresetName]}") from None

    if name is PresetName.SHORT:
        stages = [_stage(150)]
    elif name is PresetName.MEDIUM:
        stages = [_stage(200)]
    elif name is PresetName.LONG:
        stages = [_stage(800)]
    elif name is PresetName.TILTED:
        # retroreflected beam leaves after the dark states formed
        stages = [_stage(150), _stage(100, omega_minus=0.0)]
    else:
        stages = [_stage(150, omega_minus=ASYMMETRY_RATIO * DEFAULT_RABI)]
    return ScenarioConfig(stages=stages, seed_label=name.value)


def _key_path(loc) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def validate_config(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        key = _key_path(first["loc"])
        raise ConfigError(f"{key}: {first['msg']}", key=key) from e


def parse_config(text: str) -> ScenarioConfig:
    """Parse a JSON/YAML scenario document; omitted fields come from preset 'short'."""
    try:
        data = yaml.safe_load(text) if text and text.strip() else {}
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed document: {e}") from e
    if data is None:
        data = {}
    return merge_config(data)


def merge_config(data: dict, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Overlay a partial document on `base` (preset 'short' by default), one level deep."""
    if not isinstance(data, dict):
        raise ConfigError("document must be a mapping of keys to values")

    merged = (base or preset(PresetName.SHORT)).model_dump()
    for key, value in data.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    return validate_config(merged)


class PeakRecord(BaseModel):
    amplitude: float
    center: float
    sigma: float


class StageReport(BaseModel):
    index: int
    gamma_t: float
    omega_plus: float
    omega_minus: float
    dark_lambda: float
    dark_iw: float
    sublevels: dict[str, float]
    peaks: list[PeakRecord]
    background: PeakRecord | None = None
    fit_converged: bool
    fit_residual: float


class RunReport(BaseModel):
    seed_label: str
    config_digest: str
    final_gamma_t: float
    final_trace: float
    lost_trace: float
    dark_lambda: float
    dark_iw: float
    peaks: list[PeakRecord]
    tau_iw: float | None = None
    tau_iw_r2: float | None = None
    stages: list[StageReport]
    files: dict[str, str] = Field(default_factory=dict)


@dataclass
class ScenarioResult:
    """Everything a run produces; the report is its serializable summary."""
    config: ScenarioConfig
    state: FamilyBlockState
    trajectory: Trajectory
    distribution: MomentumDistribution
    fits: list[PeakFit]
    report: RunReport


def _record(peak: Peak) -> PeakRecord:
    return PeakRecord(amplitude=peak.amplitude, center=peak.center, sigma=peak.sigma)


def _inverted_w_lifetime(trajectory: Trajectory) -> tuple[float | None, float | None]:
    times = trajectory.times
    if not times or times[0] > LIFETIME_WINDOW[0] or times[-1] < LIFETIME_WINDOW[1]:
        return None, None
    try:
        return estimate_lifetime(trajectory, FamilyKind.INVERTED_W, LIFETIME_WINDOW)
    except ValueError as e:
        logger.warning(f"No inverted-W lifetime over Gamma t {LIFETIME_WINDOW}: {e}")
        return None, None


def observer_params(config: ScenarioConfig) -> SimParams:
    """Dark states of the first illuminated stage define the recorded dark populations."""
    for stage in config.stages:
        if stage.omega_plus > 0 or stage.omega_minus > 0:
            return config.sim_params(stage)
    raise ConfigError("stages: no stage applies light")


def execute_scenario(config: ScenarioConfig) -> ScenarioResult:
    grid = build_momentum_grid(config.grid.p_max, config.grid.points_per_recoil)
    state = build_initial_state(grid, config.initial_delta_q)
    observer = observer_params(config)
    trajectory = Trajectory(grid)
    fits: list[PeakFit] = []
    stage_reports: list[StageReport] = []
    t = 0.0

    for index, stage in enumerate(config.stages):
        params = config.sim_params(stage)
        logger.info(
            f"[{config.seed_label}] stage {index}: Gamma t {t:g} -> {t + stage.duration:g}, "
            f"Omega+={stage.omega_plus:g}, Omega-={stage.omega_minus:g}"
        )
        try:
            integrator = IntegratorConfig(config.dt, stage.duration, config.observation_stride)
            state, stage_trajectory = evolve(state, params, integrator, t0=t, observer_params=observer)
        except (SimulationError, ValueError) as e:
            gamma_t = getattr(e, "gamma_t", None)
            raise ScenarioError(f"stage {index} failed: {e}", stage_index=index,
                                gamma_t=t if gamma_t is None else gamma_t) from e
        trajectory.extend(stage_trajectory)
        t += stage.duration

        dist = momentum_distribution(state)
        if config.detector_sigma:
            dist = convolve_detector(dist, config.detector_sigma)
        fit = fit_gaussian_peaks(dist, RECOIL_CENTERS, background=True)
        fits.append(fit)
        stage_reports.append(StageReport(
            index=index,
            gamma_t=t,
            omega_plus=stage.omega_plus,
            omega_minus=stage.omega_minus,
            dark_lambda=dark_population(state, FamilyKind.LAMBDA, observer),
            dark_iw=dark_population(state, FamilyKind.INVERTED_W, observer),
            sublevels=sublevel_populations(state),
            peaks=[_record(p) for p in fit.peaks],
            background=_record(fit.background) if fit.background else None,
            fit_converged=fit.converged,
            fit_residual=fit.residual_norm,
        ))

    final = stage_reports[-1]
    tau_iw, tau_iw_r2 = _inverted_w_lifetime(trajectory)
    report = RunReport(
        seed_label=config.seed_label,
        config_digest=config.digest(),
        final_gamma_t=t,
        final_trace=state.total_trace(),
        lost_trace=state.lost_trace,
        dark_lambda=final.dark_lambda,
        dark_iw=final.dark_iw,
        peaks=final.peaks,
        tau_iw=tau_iw,
        tau_iw_r2=tau_iw_r2,
        stages=stage_reports,
    )
    return ScenarioResult(config, state, trajectory, dist, fits, report)


def run_scenario(config: ScenarioConfig, out_dir: Path | str | None = None) -> RunReport:
    """Run all stages and, when `out_dir` is given, write the output files."""
    result = execute_scenario(config)
    if out_dir is not None:
        result.report.files = write_outputs(result, Path(out_dir))
    logger.info(
        f"[{config.seed_label}] done at Gamma t = {result.report.final_gamma_t:g}: "
        f"trace={result.report.final_trace:.12f}, lost={result.report.lost_trace:.3e}"
    )
    return result.report
