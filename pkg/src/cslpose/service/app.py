"""FastAPI application wrapping the pose toolkit."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..pipeline import DegenerateSceneError
from ..pnp import PnPConvergenceError, PnPDegenerateError
from ..render import RenderError
from . import handlers
from .schemas import (LossCheckRequest, LossCheckResponse, RecoverRequest, RecoverResponse,
                      RoundtripRequest, RoundtripResponse, ToyRunRequest, ToyRunResponse)


def _error_kind(exc: Exception) -> str:
    if isinstance(exc, (DegenerateSceneError, RenderError, PnPDegenerateError,
                        PnPConvergenceError)):
        return "degenerate_scene"
    return "invalid_config"


def _guard(fn, request):
    try:
        return fn(request)
    except (DegenerateSceneError, RenderError, PnPDegenerateError, PnPConvergenceError,
            NotImplementedError, ValueError) as exc:
        raise HTTPException(status_code=422,
                            detail={"kind": _error_kind(exc), "message": str(exc)}) from exc


def create_app() -> FastAPI:
    app = FastAPI(title="cslpose service", version=__version__)

    @app.get("/api/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/api/recover", response_model=RecoverResponse)
    def recover(request: RecoverRequest):
        return _guard(handlers.handle_recover, request)

    @app.post("/api/roundtrip", response_model=RoundtripResponse)
    def roundtrip(request: RoundtripRequest):
        return _guard(handlers.handle_roundtrip, request)

    @app.post("/api/losscheck", response_model=LossCheckResponse)
    def losscheck(request: LossCheckRequest):
        return _guard(handlers.handle_losscheck, request)

    @app.post("/api/toy", response_model=ToyRunResponse)
    def toy(request: ToyRunRequest):
        return _guard(handlers.handle_toy, request)

    return app


app = create_app()
