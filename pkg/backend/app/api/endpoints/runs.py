import logging

from fastapi import APIRouter, Body, Depends, HTTPException
from sqlalchemy.ext.asyncio import AsyncSession

from app.core.database import get_db
from app.core.exceptions import ScenarioError, SimulationError
from app.services.runs import RunService
from app.services.scenarios import merge_config, preset

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/runs")
async def create_run(
    document: dict | None = Body(default=None),
    preset_name: str | None = None,
    force_refresh: bool = False,
    db: AsyncSession = Depends(get_db),
):
    """Run a scenario (or return its stored report).

    The body is a partial scenario document laid over `preset_name`
    (default 'short').
    """
    try:
        base = preset(preset_name) if preset_name else None
        config = merge_config(document or {}, base)
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))

    service = RunService(db)
    try:
        return await service.get_or_run(config, force_refresh=force_refresh)
    except ScenarioError as e:
        logger.error(f"Run {config.seed_label} failed in stage {e.stage_index}: {e}")
        raise HTTPException(
            status_code=422,
            detail={"message": str(e), "stage": e.stage_index, "gamma_t": e.gamma_t},
        )
    except SimulationError as e:
        raise HTTPException(status_code=422, detail=str(e))


@router.get("/runs")
async def list_runs(limit: int = 20, db: AsyncSession = Depends(get_db)):
    return await RunService(db).list_runs(limit)


@router.get("/runs/{digest}")
async def get_run(digest: str, db: AsyncSession = Depends(get_db)):
    """Stored report for a config digest."""
    data = await RunService(db).get_cached(digest)
    if data is None:
        raise HTTPException(status_code=404, detail=f"no run with digest {digest}")
    return data
