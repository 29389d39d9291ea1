"""Cached scenario runs behind the HTTP service."""
import asyncio
import logging
from pathlib import Path
from typing import Optional

from sqlalchemy.ext.asyncio import AsyncSession

from ..core.config import SERVER_OUTPUT_DIR
from ..models.run import ScenarioRun
from ..repositories import RunRepository
from .scenarios import ScenarioConfig, run_scenario

logger = logging.getLogger(__name__)


class RunService:
    def __init__(self, db: AsyncSession, output_root: str | Path | None = None):
        self.db = db
        self.output_root = Path(output_root or SERVER_OUTPUT_DIR)
        self.run_repo = RunRepository(db)

    async def get_or_run(self, config: ScenarioConfig, force_refresh: bool = False) -> dict:
        """Return the stored report for `config`, running the scenario when none exists."""
        digest = config.digest()
        if not force_refresh:
            cached = await self.run_repo.get_by_digest(digest)
            if cached:
                logger.info(f"Cache hit for run {digest[:12]} ({cached.seed_label})")
                return self._model_to_dict(cached, is_cached=True)

        out_dir = self.output_root / digest
        logger.info(f"Running scenario {config.seed_label} into {out_dir}")
        # the integrator is CPU bound; keep the event loop free
        report = await asyncio.to_thread(run_scenario, config, out_dir)

        run = await self.run_repo.save_report({
            "config_digest": digest,
            "seed_label": config.seed_label,
            "final_gamma_t": report.final_gamma_t,
            "config": config.model_dump(mode="json"),
            "report": report.model_dump(mode="json"),
            "output_dir": str(out_dir),
        })
        return self._model_to_dict(run, is_cached=False)

    async def get_cached(self, digest: str) -> Optional[dict]:
        run = await self.run_repo.get_by_digest(digest)
        return self._model_to_dict(run, is_cached=True) if run else None

    async def list_runs(self, limit: int = 20) -> list[dict]:
        runs = await self.run_repo.list_recent(limit)
        return [
            {
                "config_digest": r.config_digest,
                "seed_label": r.seed_label,
                "final_gamma_t": r.final_gamma_t,
                "updated_at": r.updated_at.isoformat() if r.updated_at else None,
            }
            for r in runs
        ]

    @staticmethod
    def _model_to_dict(run: ScenarioRun, is_cached: bool = False) -> dict:
        return {
            "config_digest": run.config_digest,
            "seed_label": run.seed_label,
            "config": run.config,
            "report": run.report,
            "output_dir": run.output_dir,
            "cached": is_cached,
            "created_at": run.created_at.isoformat() if run.created_at else None,
            "updated_at": run.updated_at.isoformat() if run.updated_at else None,
        }
