"""CSV/JSON serialization of trajectories, distributions and fits."""
from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path
from typing import TYPE_CHECKING
import json
import logging

import numpy as np
import pandas as pd

from .analysis import MomentumDistribution, PeakFit
from .basis import build_momentum_grid
from .propagation import Trajectory

if TYPE_CHECKING:
    from .scenarios import ScenarioResult

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
TRAJECTORY_COLUMNS = ["gamma_t", "trace", "lost_trace", "pop_dark_lambda", "pop_dark_iw"]


def _stamp() -> str:
    return f"# generated {datetime.now(timezone.utc).isoformat()}\n"


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(_stamp())
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def momentum_column(p: float) -> str:
    return f"p={p:+.6f}"


def trajectory_frame(trajectory: Trajectory) -> pd.DataFrame:
    scalars = pd.DataFrame(
        {
            "gamma_t": trajectory.times,
            "trace": trajectory.series("trace"),
            "lost_trace": trajectory.series("lost_trace"),
            "pop_dark_lambda": trajectory.series("dark_lambda"),
            "pop_dark_iw": trajectory.series("dark_iw"),
        },
        columns=TRAJECTORY_COLUMNS,
    )
    dists = pd.DataFrame(
        trajectory.distributions(),
        columns=[momentum_column(p) for p in trajectory.grid.values],
    )
    return pd.concat([scalars, dists], axis=1)


def write_trajectory_csv(trajectory: Trajectory, path: Path) -> None:
    """One row per snapshot: the scalar observables, then the momentum density."""
    _write_csv(trajectory_frame(trajectory), path)


def write_distribution_csv(dist: MomentumDistribution, path: Path) -> None:
    _write_csv(pd.DataFrame({"p_over_hbark": dist.momenta, "density": dist.density}), path)


def read_distribution(path: Path) -> MomentumDistribution:
    frame = pd.read_csv(path, comment="#")
    if list(frame.columns[:2]) != ["p_over_hbark", "density"]:
        raise ValueError(f"{path}: expected columns p_over_hbark, density")
    p = frame["p_over_hbark"].to_numpy(dtype=float)
    if p.size < 3:
        raise ValueError(f"{path}: too few momentum points")
    spacing = float(np.median(np.diff(p)))
    grid = build_momentum_grid(float(p[-1]), int(round(1.0 / spacing)))
    if grid.size != p.size or not np.allclose(grid.values, p, atol=1e-9):
        raise ValueError(f"{path}: momenta do not form a symmetric uniform grid")
    return MomentumDistribution(grid, frame["density"].to_numpy(dtype=float))


def _record(peak, residual: float) -> dict:
    return {"amplitude": peak.amplitude, "center": peak.center, "sigma": peak.sigma, "residual": residual}


def fit_records(fit: PeakFit) -> list[dict]:
    return [_record(p, fit.residual_norm) for p in fit.peaks]


def background_record(fit: PeakFit) -> dict | None:
    return None if fit.background is None else _record(fit.background, fit.residual_norm)


def write_json(payload, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def write_peak_fits_json(fits: list[PeakFit], gamma_ts: list[float], path: Path) -> None:
    write_json(
        [
            {"gamma_t": t, "converged": fit.converged, "peaks": fit_records(fit), "background": background_record(fit)}
            for t, fit in zip(gamma_ts, fits)
        ],
        path,
    )


def write_outputs(result: ScenarioResult, out_dir: Path) -> dict[str, str]:
    outputs = result.config.outputs
    paths = {
        "trajectory": out_dir / outputs.trajectory,
        "distribution": out_dir / outputs.distribution,
        "peak_fits": out_dir / outputs.peak_fits,
        "report": out_dir / outputs.report,
    }
    write_trajectory_csv(result.trajectory, paths["trajectory"])
    write_distribution_csv(result.distribution, paths["distribution"])
    write_peak_fits_json(result.fits, [s.gamma_t for s in result.report.stages], paths["peak_fits"])
    files = {name: str(path) for name, path in paths.items()}
    write_json({**result.report.model_dump(mode="json"), "files": files}, paths["report"])
    logger.info(f"Wrote outputs to {out_dir}")
    return files
