"""FastAPI application exposing the toolkit commands as endpoints."""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from ..errors import VsrkitError
from . import handlers, schemas


def create_app() -> FastAPI:
    app = FastAPI(title="vsrkit", description="Blind video super-resolution service")

    @app.exception_handler(VsrkitError)
    async def vsrkit_error(request, exc: VsrkitError):
        detail = schemas.ErrorDetail(kind=exc.kind, message=str(exc))
        return JSONResponse(status_code=400, content={"detail": detail.model_dump()})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return handlers.health()

    @app.post("/degrade", response_model=schemas.DegradeResponse)
    def degrade(req: schemas.DegradeRequest):
        return handlers.run_degrade(req)

    @app.post("/estimate-kernel", response_model=schemas.EstimateKernelResponse)
    def estimate_kernel(req: schemas.EstimateKernelRequest):
        return handlers.run_estimate_kernel(req)

    @app.post("/superresolve", response_model=schemas.SuperresolveResponse)
    def superresolve(req: schemas.SuperresolveRequest):
        return handlers.run_superresolve(req)

    @app.post("/evaluate", response_model=schemas.MetricsResponse)
    def evaluate(req: schemas.EvaluateRequest):
        return handlers.run_evaluate(req)

    @app.post("/kernel-accuracy", response_model=schemas.MetricsResponse)
    def kernel_accuracy(req: schemas.KernelAccuracyRequest):
        return handlers.run_kernel_accuracy(req)

    return app


app = create_app()
