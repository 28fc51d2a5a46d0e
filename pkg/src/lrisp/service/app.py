"""FastAPI application wrapping the reconstruction service layer."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import ConfigError, LrispError
from . import handlers
from .schemas import (
    ForwardResponse,
    ReconstructResponse,
    RoundtripResponse,
    RunConfig,
    SelftestResponse,
    SymbolDumpResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(
        title="lrisp",
        description=(
            "Fixed-energy inverse scattering for long-range potentials: "
            "forward phase tables, synthetic symbol oracles and "
            "component-wise reconstruction."
        ),
        version="0.1.0",
    )

    @app.exception_handler(ConfigError)
    async def config_error(_request: Request, exc: ConfigError):
        return JSONResponse(status_code=422, content={"error": "config", "detail": str(exc)})

    @app.exception_handler(LrispError)
    async def numeric_error(_request: Request, exc: LrispError):
        return JSONResponse(
            status_code=500,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/v1/forward", response_model=ForwardResponse)
    def forward(cfg: RunConfig):
        return handlers.run_forward(cfg)

    @app.post("/v1/symbol-dump", response_model=SymbolDumpResponse)
    def symbol_dump(cfg: RunConfig):
        return handlers.run_symbol_dump(cfg)

    @app.post("/v1/reconstruct", response_model=ReconstructResponse)
    def reconstruct(cfg: RunConfig):
        return handlers.run_reconstruct(cfg)

    @app.post("/v1/roundtrip", response_model=RoundtripResponse)
    def roundtrip(cfg: RunConfig):
        return handlers.run_roundtrip(cfg)

    @app.post("/v1/selftest", response_model=SelftestResponse)
    def selftest():
        return handlers.run_selftest()

    return app


app = create_app()
