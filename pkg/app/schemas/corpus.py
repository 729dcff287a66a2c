from pydantic import BaseModel, Field, ConfigDict, field_validator, model_validator


class Document(BaseModel):
    """One raw input document (a JSONL record or a plain-text file)."""
    doc_id: str = Field(..., min_length=1, description="Opaque identifier, unique per ingest session")
    text: str = Field("", description="Full document text")


class Chunk(BaseModel):
    """A positioned unit of raw text, the level-0 information unit."""
    doc_id: str = Field(..., min_length=1)
    seq_index: int = Field(..., ge=0, description="0-based position within its document")
    text: str
    approx_tokens: int = Field(..., ge=0, description="Whitespace word count")

    model_config = ConfigDict(frozen=True)

    @field_validator("text")
    @classmethod
    def text_not_blank(cls, v: str) -> str:
        if not v.strip():
            raise ValueError("chunk text must be non-empty")
        return v

    @model_validator(mode="after")
    def tokens_positive(self):
        if self.approx_tokens <= 0:
            raise ValueError("approx_tokens must be > 0 for non-empty text")
        return self

    @property
    def node_id(self) -> str:
        return f"{self.doc_id}#{self.seq_index:06d}"
