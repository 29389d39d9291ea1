from typing import Optional
from sqlalchemy.ext.asyncio import AsyncSession

from app.models.run import ScenarioRun
from app.repositories.base import BaseRepository


class RunRepository(BaseRepository[ScenarioRun]):
    def __init__(self, session: AsyncSession):
        super().__init__(session, ScenarioRun)

    async def get_by_digest(self, digest: str) -> Optional[ScenarioRun]:
        return await self.find_one(config_digest=digest)

    async def list_recent(self, limit: int = 20) -> list[ScenarioRun]:
        return await self.latest(limit)

    async def save_report(self, run_data: dict) -> ScenarioRun:
        """Update the run with the same digest or create it."""
        cached = await self.get_by_digest(run_data["config_digest"])
        if cached:
            return await self.update(cached, **run_data)
        return await self.create(**run_data)
