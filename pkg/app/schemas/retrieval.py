from typing import List

from pydantic import BaseModel, Field


class CandidateRound(BaseModel):
    offered: List[str] = Field(..., description="Candidate set D of this round")
    activated: List[str] = Field(default_factory=list)


class RetrievalTrace(BaseModel):
    query: str
    candidate_rounds: List[CandidateRound] = []
    final_activation: List[str] = []
    context_blocks: List[str] = []
    hops_used: int = 0
    truncated_blocks: int = 0
