"""FastAPI application exposing the pipeline handlers under /api."""

# NOTE: no `from __future__ import annotations` here: the dynamically built
# routes annotate their body parameter with a closure variable, which must
# stay a real class for FastAPI's signature inspection.

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from . import schemas as sc
from .handlers import HANDLERS, ServiceError, handle_health


def create_app() -> FastAPI:
    app = FastAPI(
        title="climagen",
        version=__version__,
        description=(
            "Weather-data characterization, model fitting, and coherent "
            "artificial-sequence generation"
        ),
    )

    @app.exception_handler(ServiceError)
    async def _service_error(_request, exc: ServiceError):
        status = 422 if exc.category == "usage" else 400
        return JSONResponse(
            status_code=status,
            content={"category": exc.category, "message": exc.message},
        )

    @app.get("/api/health", response_model=sc.HealthResponse)
    def health():
        return handle_health()

    def _register(endpoint: str, req_cls, handler):
        # one POST route per pipeline operation, e.g. /api/fit/arma
        @app.post(f"/api/{endpoint}", name=endpoint)
        def route(req: req_cls):  # type: ignore[valid-type]
            return handler(req)

    for endpoint, (req_cls, handler) in HANDLERS.items():
        _register(endpoint, req_cls, handler)

    return app


app = create_app()
