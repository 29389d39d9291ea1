from fastapi import APIRouter
from .endpoints import presets_router, runs_router

router = APIRouter()


@router.get("/health")
async def health_check():
    return {"status": "ok"}

router.include_router(presets_router, tags=["presets"])
router.include_router(runs_router, tags=["runs"])
