"""FastAPI application: the embedding wire protocol.

Endpoints
---------
POST /embed         token ids -> per-layer token matrices (base64 float32
                    blocks by default; JSON arrays in debug mode)
POST /embed_single  token ids -> one mean-pooled vector per sentence, for
                    single-vector scoring
GET  /models        capability report per loaded checkpoint
GET  /healthz       liveness + loaded model ids

Authentication is an optional shared secret: when the server is started
with one, requests must carry it in the X-Auth-Token header.
"""

from __future__ import annotations

import base64
from typing import Optional

import numpy as np
import torch
from fastapi import FastAPI, Header, HTTPException, Request
from pydantic import BaseModel, Field

from .models import ModelRegistry

MAX_SENTENCES_PER_REQUEST = 256


class EmbedRequest(BaseModel):
    model_id: str
    layer_indices: list[int] = Field(min_length=1)
    sentences: list[list[int]]
    encoding: str = "base64"  # or "json" for debugging


class EmbedSingleRequest(BaseModel):
    model_id: str
    sentences: list[list[int]]
    layer_index: Optional[int] = None  # default: middle encoder block


def create_app(checkpoint_dir: str, device: str = "cpu",
               shared_secret: Optional[str] = None,
               torch_threads: int = 1) -> FastAPI:
    # Single-threaded inference keeps repeated requests bit-identical.
    torch.set_num_threads(torch_threads)
    registry = ModelRegistry(checkpoint_dir, device=device)
    app = FastAPI(title="dsi-sidecar")

    def _authorize(token: Optional[str]):
        if shared_secret is not None and token != shared_secret:
            raise HTTPException(status_code=401, detail="bad or missing token")

    def _resolve(req_model_id: str):
        model = registry.get(req_model_id)
        if model is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown model: {req_model_id}")
        return model

    def _validate_sentences(model, sentences):
        if not sentences:
            raise HTTPException(status_code=422, detail="sentences is empty")
        if len(sentences) > MAX_SENTENCES_PER_REQUEST:
            raise HTTPException(
                status_code=422,
                detail=f"at most {MAX_SENTENCES_PER_REQUEST} sentences per request")
        for i, ids in enumerate(sentences):
            if not ids:
                raise HTTPException(status_code=422,
                                    detail=f"sentence {i} is empty")
            if len(ids) > model.handle.max_input_tokens:
                raise HTTPException(
                    status_code=422,
                    detail=f"sentence {i} has {len(ids)} tokens, limit "
                           f"{model.handle.max_input_tokens}")
            bad = [t for t in ids if not 0 <= t < model.vocab_size]
            if bad:
                raise HTTPException(
                    status_code=422,
                    detail=f"sentence {i} has out-of-vocabulary ids {bad[:5]}")

    @app.post("/embed")
    def embed(req: EmbedRequest, x_auth_token: Optional[str] = Header(None)):
        _authorize(x_auth_token)
        model = _resolve(req.model_id)
        _validate_sentences(model, req.sentences)
        for k in req.layer_indices:
            if not 0 <= k <= model.handle.n_layers:
                raise HTTPException(
                    status_code=422,
                    detail=f"layer index {k} outside [0, {model.handle.n_layers}] "
                           "(0 is the pre-encoder embedding output)")
        if req.encoding not in ("base64", "json"):
            raise HTTPException(status_code=400,
                                detail=f"unknown encoding: {req.encoding}")

        per_sentence = model.hidden_states(req.sentences, req.layer_indices)
        results = []
        for i, layers in enumerate(per_sentence):
            encoded = {}
            for k, matrix in layers.items():
                if req.encoding == "base64":
                    data = base64.b64encode(matrix.tobytes()).decode()
                else:
                    data = matrix.tolist()
                encoded[str(k)] = {"token_count": int(matrix.shape[0]),
                                   "data": data}
            results.append({"sentence_index": i, "layers": encoded})
        return {
            "model_id": req.model_id,
            "hidden_dim": model.handle.hidden_dim,
            "layer_indices": req.layer_indices,
            "dtype": "float32",
            "encoding": req.encoding,
            "results": results,
        }

    @app.post("/embed_single")
    def embed_single(req: EmbedSingleRequest,
                     x_auth_token: Optional[str] = Header(None)):
        _authorize(x_auth_token)
        model = _resolve(req.model_id)
        _validate_sentences(model, req.sentences)
        layer = req.layer_index
        if layer is None:
            layer = model.handle.n_layers // 2
        if not 0 <= layer <= model.handle.n_layers:
            raise HTTPException(status_code=422,
                                detail=f"layer index {layer} out of range")
        per_sentence = model.hidden_states(req.sentences, [layer])
        vectors = [m[layer].mean(axis=0, dtype=np.float64).astype(np.float32).tolist()
                   for m in per_sentence]
        return {
            "model_id": req.model_id,
            "dim": model.handle.hidden_dim,
            "pooling": "mean",
            "layer_index": layer,
            "vectors": vectors,
        }

    @app.get("/models")
    def models(x_auth_token: Optional[str] = Header(None)):
        _authorize(x_auth_token)
        return {"models": [h.to_dict() for h in registry.handles()]}

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "models": sorted(registry.models)}

    @app.exception_handler(Exception)
    async def on_error(request: Request, exc: Exception):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=500, content={"detail": str(exc)})

    return app
