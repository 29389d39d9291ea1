from .presets import router as presets_router
from .runs import router as runs_router

__all__ = ["presets_router", "runs_router"]
