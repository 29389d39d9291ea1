from fastapi import APIRouter, HTTPException

from app.core.exceptions import ConfigError
from app.services.scenarios import PresetName, preset

router = APIRouter()


@router.get("/presets")
async def list_presets():
    """Names of the built-in scenarios."""
    return {"presets": [p.value for p in PresetName]}


@router.get("/presets/{name}")
async def get_preset(name: str):
    """Full scenario document of a preset."""
    try:
        config = preset(name)
    except ConfigError as e:
        raise HTTPException(status_code=404, detail=str(e))
    return {"name": name, "digest": config.digest(), "config": config.model_dump(mode="json")}
