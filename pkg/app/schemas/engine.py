from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field, ConfigDict, field_validator


class MemoryScope(str, Enum):
    UNIFIED = "unified"
    DOCUMENT = "document"


class EngineConfig(BaseModel):
    """Hyperparameters of memory development and retrieval."""
    alpha: float = Field(0.7, description="Weight of semantic similarity vs positional proximity")
    sigma: float = Field(2.0, gt=0, description="Decay rate of positional proximity")
    theta: float = Field(0.5, description="Edge threshold on the composite score")
    k: int = Field(10, ge=1, description="Neighbours linked per new chunk")
    s: int = Field(5, ge=1, description="Fast-localization candidate count")
    max_lp_iters: int = Field(20, ge=1)
    max_hops: int = Field(3, ge=1)
    chunk_size: int = Field(512, ge=16)
    min_level_size: int = Field(4, ge=1)
    tau_sel: float = Field(0.30, description="Stub selector cosine threshold")

    # Not part of the published grid, needed to run the engine
    context_budget: int = Field(8000, ge=1, description="Approx tokens handed to the answer call")
    workers: int = Field(4, ge=1, description="Thread-pool width for ego recomputation and summaries")
    embedding_dim: int = Field(256, ge=8, description="Stub embedding dimension")
    disentangle: bool = Field(True, description="False skips ego-splitting (ablation)")
    max_levels: Optional[int] = Field(None, ge=0, description="Cap on abstraction levels; 0 keeps memory flat")

    model_config = ConfigDict(frozen=True)

    @field_validator("alpha", "theta", "tau_sel")
    @classmethod
    def unit_interval(cls, v: float, info) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{info.field_name} must lie in [0, 1], got {v}")
        return v

    def may_grow_to(self, level: int) -> bool:
        return self.max_levels is None or level <= self.max_levels


class ProviderConfig(BaseModel):
    """Connection details for the OpenAI-compatible remote provider."""
    endpoint_url: str = Field(..., min_length=1)
    api_key_env_name: str = Field("CAM_API_KEY", min_length=1)
    embed_model_name: str = "text-embedding-3-small"
    chat_model_name: str = "gpt-4o-mini"
    timeout: float = Field(30.0, gt=0, description="Seconds")
    max_retries: int = Field(3, ge=0, le=10)
    retry_backoff: float = Field(0.5, ge=0, description="Base of the exponential wait, seconds")

    model_config = ConfigDict(frozen=True)
