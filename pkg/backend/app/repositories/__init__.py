from .runs import RunRepository

__all__ = ["RunRepository"]
