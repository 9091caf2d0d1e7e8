import os
from typing import Any

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError

from errors import ConfigError

load_dotenv()

OUTPUT_ROOT = os.getenv("MFBPINN_OUTPUT_ROOT", "results")
MAX_WORKERS = max(1, int(os.getenv("MFBPINN_MAX_WORKERS", "1")))
LOG_LEVEL = os.getenv("MFBPINN_LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


class StrictModel(BaseModel):
    """Base for configuration documents: unknown fields are rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    @classmethod
    def parse(cls, data: dict[str, Any] | None = None, **overrides):
        """Validate ``data``, raising :class:`ConfigError` with field-level messages."""
        payload = {**(data or {}), **overrides}
        try:
            return cls.model_validate(payload)
        except ValidationError as exc:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc']) or cls.__name__}: {err['msg']}"
                for err in exc.errors()
            )
            raise ConfigError(f"invalid {cls.__name__}: {problems}") from exc
