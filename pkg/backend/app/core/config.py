import os
from dataclasses import dataclass
from pathlib import Path

import yaml
from dotenv import load_dotenv

load_dotenv()

DATABASE_URL = os.getenv("DATABASE_URL", "sqlite+aiosqlite:///./vscpt_runs.db")

REPO_ROOT = Path(__file__).resolve().parents[3]
SETTINGS_PATH = REPO_ROOT / "config" / "settings.yaml"


@dataclass(frozen=True)
class Settings:
    output_dir: str = "outputs"
    log_level: str = "INFO"
    oracle_memory_budget_mb: float = 512.0
    default_observation_stride: int = 250


def load_settings(path: Path | None = None) -> Settings:
    """Read settings.yaml; missing file or keys fall back to defaults."""
    path = path or SETTINGS_PATH
    data = {}
    if path.exists():
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    known = {k: v for k, v in data.items() if k in Settings.__dataclass_fields__}
    return Settings(**known)


settings = load_settings()

# Server-side output root for runs submitted over HTTP
SERVER_OUTPUT_DIR = os.getenv("VSCPT_OUTPUT_DIR", settings.output_dir)
