from typing import Dict, List

from pydantic import BaseModel, Field


class LevelReport(BaseModel):
    """Exact counters for one level of one batch."""
    level: int
    nodes_added: int = 0
    nodes_removed: int = 0
    nodes_updated: int = 0
    edges_added: int = 0
    edges_removed: int = 0
    affected_nodes: int = 0
    replicas_recomputed: int = 0
    replicas_added: int = 0
    replicas_removed: int = 0
    label_evaluations: int = 0
    lp_rounds: int = 0
    clusters_modified: int = 0
    summaries_regenerated: int = 0
    step_seconds: Dict[str, float] = Field(default_factory=dict)


class UpdateReport(BaseModel):
    batch_chunks: int = 0
    levels: List[LevelReport] = []
    level_count: int = 1
    wall_seconds: float = 0.0

    def level(self, level: int) -> LevelReport:
        for entry in self.levels:
            if entry.level == level:
                return entry
        entry = LevelReport(level=level)
        self.levels.append(entry)
        return entry

    @property
    def summaries_regenerated(self) -> int:
        return sum(entry.summaries_regenerated for entry in self.levels)

    @classmethod
    def merge(cls, reports: List["UpdateReport"]) -> "UpdateReport":
        """Sum several batch reports into one (CLI output)."""
        merged = cls()
        for report in reports:
            merged.batch_chunks += report.batch_chunks
            merged.wall_seconds += report.wall_seconds
            merged.level_count = max(merged.level_count, report.level_count)
            for entry in report.levels:
                target = merged.level(entry.level)
                for name, value in entry.model_dump(exclude={"level", "step_seconds"}).items():
                    setattr(target, name, getattr(target, name) + value)
                for step, seconds in entry.step_seconds.items():
                    target.step_seconds[step] = target.step_seconds.get(step, 0.0) + seconds
        merged.levels.sort(key=lambda e: e.level)
        return merged
