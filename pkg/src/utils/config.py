import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv


@dataclass
class RuntimeConfig:
    log_level: str = "WARNING"
    log_file: Optional[str] = None
    jobs: int = 1

    @classmethod
    def from_env(cls) -> "RuntimeConfig":
        """Build the runtime configuration from the environment (and a .env file if present)."""
        load_dotenv()

        jobs = os.getenv("GUARDIAN_JOBS", "1")
        try:
            jobs_value = max(1, int(jobs))
        except ValueError:
            raise ValueError(f"GUARDIAN_JOBS must be an integer, got {jobs!r}")

        return cls(
            log_level=os.getenv("GUARDIAN_LOG_LEVEL", "WARNING").upper(),
            log_file=os.getenv("GUARDIAN_LOG_FILE") or None,
            jobs=jobs_value,
        )
