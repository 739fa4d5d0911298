"""Request/response models for the inference API."""

from __future__ import annotations

from typing import Annotated, Literal, Optional

from pydantic import BaseModel, Field, StringConstraints, model_validator

HexColor = Annotated[str, StringConstraints(pattern=r"^#[0-9a-fA-F]{6}$")]


class PhraseIn(BaseModel):
    """A phrase by text (resolved by the server's provider) or as a raw vector
    from a client running its own encoder."""

    text: Optional[str] = None
    kind: Literal["content", "label"] = "content"
    vector: Optional[list[float]] = None

    @model_validator(mode="after")
    def _text_or_vector(self):
        if self.vector is None and not (self.text and self.text.strip()):
            raise ValueError("phrase needs non-empty text or a vector")
        return self


class PaletteSlots(BaseModel):
    """Slotted palettes; null marks a masked slot to fill."""

    image: list[Optional[HexColor]] = Field(default_factory=list, max_length=5)
    graphic: list[Optional[HexColor]] = Field(default_factory=list, max_length=5)
    text: list[Optional[HexColor]] = Field(default_factory=list, max_length=5)


class RecommendRequest(BaseModel):
    palettes: PaletteSlots
    phrases: list[PhraseIn] = Field(default_factory=list, max_length=10)
    k: int = Field(5, ge=1)


class Candidate(BaseModel):
    color: HexColor
    probability: float


class SlotRecommendation(BaseModel):
    block: Literal["image", "graphic", "text"]
    slot: int
    position: int
    candidates: list[Candidate]


class RecommendResponse(BaseModel):
    recommendations: list[SlotRecommendation]


class GenerateRequest(BaseModel):
    phrases: list[PhraseIn] = Field(default_factory=list, max_length=10)
    length: int = Field(5, ge=1, le=5)
    post_process: bool = True


class GenerateResponse(BaseModel):
    colors: list[HexColor]


class HealthResponse(BaseModel):
    status: str


class ModelInfo(BaseModel):
    mode: str
    width: int
    self_layers: int
    self_heads: int
    cross_heads: int
    vocab: int
    max_len: int
    text_dim: int
    ca_enabled: bool
    mca_enabled: bool
    epoch: int
    best_val_loss: float
    provider: str
    requests: dict[str, int]
