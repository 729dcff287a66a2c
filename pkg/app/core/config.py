from functools import lru_cache
from pathlib import Path
from typing import Any, Optional, Tuple, Type
import logging

from pydantic import ValidationError
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from app.core.exceptions import ConfigError
from app.schemas.engine import EngineConfig, MemoryScope, ProviderConfig

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_FILE = "cam.toml"


class Settings(BaseSettings):
    APP_NAME: str = "CAM Memory Engine"

    # =========================================================
    # Remote provider (secret itself stays in the environment)
    # =========================================================
    api_base: str = "https://api.openai.com/v1"
    api_key_env: str = "CAM_API_KEY"
    embed_model: str = "text-embedding-3-small"
    chat_model: str = "gpt-4o-mini"
    timeout: float = 30.0
    max_retries: int = 3
    retry_backoff: float = 0.5

    # =========================================================
    # Ingestion / engine
    # =========================================================
    batch_size: int = 50
    scope: MemoryScope = MemoryScope.UNIFIED
    log_level: str = "INFO"
    engine: EngineConfig = EngineConfig()

    model_config = SettingsConfigDict(
        env_prefix="CAM_",
        env_nested_delimiter="__",
        toml_file=DEFAULT_CONFIG_FILE,
        extra="ignore",
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        # flags > env > cam.toml > defaults
        return (init_settings, env_settings, TomlConfigSettingsSource(settings_cls))

    def provider_config(self) -> ProviderConfig:
        return ProviderConfig(
            endpoint_url=self.api_base,
            api_key_env_name=self.api_key_env,
            embed_model_name=self.embed_model,
            chat_model_name=self.chat_model,
            timeout=self.timeout,
            max_retries=self.max_retries,
            retry_backoff=self.retry_backoff,
        )


def load_settings(config_file: Optional[str] = None, **overrides: Any) -> Settings:
    """
    Build settings with explicit overrides on top of env and the TOML file.

    Engine overrides may be given flat (alpha=0.9); they are merged over the
    engine values coming from the lower-precedence sources.

    Raises:
        ConfigError: if any value fails validation or the config file is missing
    """
    engine_fields = set(EngineConfig.model_fields)
    engine_overrides = {k: v for k, v in overrides.items() if k in engine_fields and v is not None}
    top_overrides = {k: v for k, v in overrides.items() if k not in engine_fields and v is not None}

    settings_cls: Type[Settings] = Settings
    if config_file:
        if not Path(config_file).is_file():
            raise ConfigError(f"config file not found: {config_file}")

        class _FileSettings(Settings):
            model_config = SettingsConfigDict(toml_file=config_file)

        settings_cls = _FileSettings

    try:
        settings = settings_cls(**top_overrides)
        if engine_overrides:
            merged = {**settings.engine.model_dump(), **engine_overrides}
            settings = settings.model_copy(update={"engine": EngineConfig(**merged)})
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {_first_error(e)}") from e

    logger.debug(f"Settings loaded (config file: {config_file or DEFAULT_CONFIG_FILE})")
    return settings


def _first_error(e: ValidationError) -> str:
    err = e.errors()[0]
    where = ".".join(str(p) for p in err.get("loc", ()))
    message = err.get("msg", str(e))
    if message.startswith("Value error, "):
        message = message[len("Value error, "):]
    return f"{where}: {message}" if where else message


@lru_cache()
def get_settings() -> Settings:
    return load_settings()
