"""HTTP JSON inference service over a loaded checkpoint.

The checkpoint is immutable for the process lifetime; requests never mutate
state, so identical bodies always produce identical responses. Validation
failures return 400 with a field path; unknown phrases under a store-only
provider return 422.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import colors, inference
from ..corpus import SLOTS_PER_BLOCK, BLOCK_LEN, Phrase
from ..text_embed import EmbeddingError, HashEmbedder, UnknownPhraseError, embed_phrases
from ..train import Checkpoint
from . import schemas


@dataclass
class ServiceState:
    checkpoint: Checkpoint
    provider: object
    counters: dict[str, int] = field(default_factory=lambda: {"recommend": 0, "generate": 0})

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, provider=None) -> "ServiceState":
        return cls(ckpt, provider or HashEmbedder(dim=ckpt.model_config.text_dim))


def _phrases_in(items: list[schemas.PhraseIn]) -> list[Phrase]:
    return [Phrase(text=p.text or f"vector-{i}", kind=p.kind,
                   embedding=list(p.vector) if p.vector is not None else None)
            for i, p in enumerate(items)]


def _field_path(err: dict) -> str:
    return ".".join(str(part) for part in err.get("loc", ()))


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="pmuse", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_: Request, exc: RequestValidationError):
        errors = [{"field": _field_path(e), "message": e.get("msg", "invalid")}
                  for e in exc.errors()]
        return JSONResponse(status_code=400, content={"detail": errors})

    @app.get("/v1/health", response_model=schemas.HealthResponse)
    def health():
        return {"status": "ok"}

    @app.get("/v1/model", response_model=schemas.ModelInfo)
    def model_info():
        cfg = state.checkpoint.model_config
        return schemas.ModelInfo(
            mode=state.checkpoint.mode, width=cfg.d, self_layers=cfg.self_layers,
            self_heads=cfg.self_heads, cross_heads=cfg.cross_heads, vocab=cfg.vocab,
            max_len=cfg.max_len, text_dim=cfg.text_dim, ca_enabled=cfg.ca_enabled,
            mca_enabled=cfg.mca_enabled, epoch=state.checkpoint.epoch,
            best_val_loss=state.checkpoint.best_val_loss,
            provider=getattr(state.provider, "name", "unknown"),
            requests=dict(state.counters),
        )

    @app.post("/v1/recommend", response_model=schemas.RecommendResponse)
    def recommend(req: schemas.RecommendRequest):
        slots: dict[str, list[int | None]] = {}
        n_masked = 0
        for kind in colors.PALETTE_KINDS:
            entries = getattr(req.palettes, kind)
            converted: list[int | None] = []
            for entry in entries:
                if entry is None:
                    converted.append(None)
                    n_masked += 1
                else:
                    converted.append(colors.hex_to_code(entry))
            slots[kind] = converted
        if n_masked == 0:
            raise HTTPException(status_code=400,
                                detail="palettes contain no masked slot (null) to recommend for")
        ctx = _embed(req.phrases)
        recs = inference.predict_slots(state.checkpoint, slots, ctx, k=req.k)
        pos_to_block = _position_map(slots, state.checkpoint.mode)
        out = []
        for rec in recs:
            block, slot = pos_to_block[rec.position]
            out.append(schemas.SlotRecommendation(
                block=block, slot=slot, position=rec.position,
                candidates=[schemas.Candidate(color=colors.code_to_hex(code), probability=prob)
                            for code, prob in rec.candidates]))
        state.counters["recommend"] += 1
        return schemas.RecommendResponse(recommendations=out)

    @app.post("/v1/generate", response_model=schemas.GenerateResponse)
    def generate(req: schemas.GenerateRequest):
        if state.checkpoint.mode != "pat":
            raise HTTPException(status_code=400,
                                detail="full palette generation needs a PAT-mode checkpoint")
        ctx = _embed(req.phrases)
        result = inference.generate(state.checkpoint, [], length=req.length,
                                    post_process=req.post_process, text=ctx)
        state.counters["generate"] += 1
        return schemas.GenerateResponse(colors=result.hexes)

    def _embed(phrase_models: list[schemas.PhraseIn]):
        try:
            return embed_phrases(_phrases_in(phrase_models), state.provider)
        except UnknownPhraseError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except EmbeddingError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    return app


def _position_map(slots: dict[str, list[int | None]], mode: str) -> dict[int, tuple[str, int]]:
    """Sequence position -> (block kind, slot index) for masked slots."""
    mapping: dict[int, tuple[str, int]] = {}
    if mode == "pat":
        kind = next((k for k, v in slots.items() if v), "graphic")
        for i in range(SLOTS_PER_BLOCK):
            mapping[i] = (kind, i)
        return mapping
    for b, kind in enumerate(colors.PALETTE_KINDS):
        for i in range(SLOTS_PER_BLOCK):
            mapping[b * BLOCK_LEN + i] = (kind, i)
    return mapping
