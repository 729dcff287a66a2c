from typing import List

from pydantic import BaseModel, Field, model_validator


class BenchResult(BaseModel):
    batch_size: int = Field(..., ge=1)
    per_batch_wall_time: List[float] = Field(..., min_length=1, description="Seconds")
    replicas_recomputed: List[int] = []
    affected_bound: List[int] = Field(default_factory=list, description="|V_new| + |neighbours(V_new)| per batch")
    offline_rebuild_time: float = Field(..., gt=0)
    speedup_ratio: float = 0.0

    @model_validator(mode="after")
    def derive_speedup(self):
        mean = sum(self.per_batch_wall_time) / len(self.per_batch_wall_time)
        self.speedup_ratio = self.offline_rebuild_time / mean if mean > 0 else float("inf")
        return self

    @property
    def mean_batch_s(self) -> float:
        return sum(self.per_batch_wall_time) / len(self.per_batch_wall_time)
