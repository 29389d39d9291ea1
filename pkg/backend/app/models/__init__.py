from .run import ScenarioRun

__all__ = ["ScenarioRun"]
