"""FastAPI app implementing the scorer wire protocol.

- POST /v1/score       {"query", "products": [{"id","text"}...]}
                       -> {"scores": [0..1 ...]} same length and order
- POST /v1/rank_chunk  {"query", "products": [<=10 ...]}
                       -> {"top": [min(2,n) of {"id", "score": int 0-100}]}
- GET  /v1/health      -> {"status": "ok"}

Malformed bodies get 400, oversize batches 413, and the scoring endpoints
return 503 until a checkpoint is loaded. Request bodies are validated by
hand (not response-model magic) so the error codes match the protocol.
rank_chunk scores its members pointwise server-side and returns the top
min(2, n) with probabilities rescaled to round(100 * p).
"""

from __future__ import annotations

from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .model import CrossEncoder, load_checkpoint, pair_text

CHUNK_LIMIT = 10
FINALISTS = 2


@dataclass(frozen=True)
class ServiceConfig:
    model_path: str | None = None
    max_batch_size: int = 256
    max_seq_len: int = 256
    device: str = "cpu"
    port: int = 8321

    def __post_init__(self):
        if self.max_batch_size < 1:
            raise ValueError(f"max_batch_size must be >= 1, got {self.max_batch_size}")
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port out of range: {self.port}")


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def _parse_products(body: dict) -> tuple[str, list[tuple[str, str]]] | JSONResponse:
    if not isinstance(body, dict):
        return _error(400, "body must be a JSON object")
    query = body.get("query")
    if not isinstance(query, str):
        return _error(400, "field 'query' must be a string")
    products = body.get("products")
    if not isinstance(products, list):
        return _error(400, "field 'products' must be a list")
    parsed: list[tuple[str, str]] = []
    for entry in products:
        if not isinstance(entry, dict):
            return _error(400, "products entries must be objects")
        doc_id, text = entry.get("id"), entry.get("text")
        if not isinstance(doc_id, str) or not isinstance(text, str):
            return _error(400, "products entries need string 'id' and 'text'")
        parsed.append((doc_id, text))
    return query, parsed


def create_app(config: ServiceConfig, model: CrossEncoder | None = None) -> FastAPI:
    """Build the service; the model may arrive later via app.state.model."""
    app = FastAPI(title="scorer-service")
    if model is None and config.model_path:
        model = load_checkpoint(config.model_path, config.device)
    app.state.model = model
    app.state.config = config

    async def read_body(request: Request):
        try:
            return await request.json()
        except Exception:
            return None

    @app.get("/v1/health")
    async def health():
        return {"status": "ok"}

    @app.post("/v1/score")
    async def score(request: Request):
        body = await read_body(request)
        if body is None:
            return _error(400, "body is not valid JSON")
        parsed = _parse_products(body)
        if isinstance(parsed, JSONResponse):
            return parsed
        query, products = parsed
        if len(products) > config.max_batch_size:
            return _error(413, f"batch of {len(products)} exceeds {config.max_batch_size}")
        if app.state.model is None:
            return _error(503, "model not ready")
        texts = [pair_text(query, text) for _, text in products]
        scores = app.state.model.score_texts(texts, config.device)
        return {"scores": scores}

    @app.post("/v1/rank_chunk")
    async def rank_chunk(request: Request):
        body = await read_body(request)
        if body is None:
            return _error(400, "body is not valid JSON")
        parsed = _parse_products(body)
        if isinstance(parsed, JSONResponse):
            return parsed
        query, products = parsed
        if not products:
            return _error(400, "rank_chunk needs at least one product")
        if len(products) > CHUNK_LIMIT:
            return _error(400, f"chunk of {len(products)} exceeds {CHUNK_LIMIT}")
        if app.state.model is None:
            return _error(503, "model not ready")
        texts = [pair_text(query, text) for _, text in products]
        scores = app.state.model.score_texts(texts, config.device)
        ranked = sorted(
            zip((doc_id for doc_id, _ in products), scores),
            key=lambda item: (-item[1], item[0]),
        )
        top = [
            {"id": doc_id, "score": round(100 * probability)}
            for doc_id, probability in ranked[: min(FINALISTS, len(products))]
        ]
        return {"top": top}

    return app


def serve(config: ServiceConfig, model: CrossEncoder | None = None) -> None:
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    app = create_app(config, model)
    uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="info")
