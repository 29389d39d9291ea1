from datetime import datetime
from sqlalchemy import String, DateTime, JSON, Float
from sqlalchemy.orm import Mapped, mapped_column

from ..core.database import Base


class ScenarioRun(Base):
    """Report of a finished scenario run, keyed by its config digest."""
    __tablename__ = "scenario_runs"

    id: Mapped[int] = mapped_column(primary_key=True)
    config_digest: Mapped[str] = mapped_column(String(64), unique=True, index=True)
    seed_label: Mapped[str] = mapped_column(String(100), index=True)
    final_gamma_t: Mapped[float] = mapped_column(Float)
    # ScenarioConfig and RunReport as JSON documents
    config: Mapped[dict] = mapped_column(JSON)
    report: Mapped[dict] = mapped_column(JSON)
    output_dir: Mapped[str | None] = mapped_column(String(500))
    created_at: Mapped[datetime] = mapped_column(DateTime, default=datetime.utcnow)
    updated_at: Mapped[datetime] = mapped_column(DateTime, default=datetime.utcnow, onupdate=datetime.utcnow)
