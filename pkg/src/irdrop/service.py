"""HTTP inference service.

Endpoints:
  GET  /health   -> {"status": "ok", "model_version": ...}
  POST /predict  -> prediction + risk summary for three 64x64 maps

/predict accepts either a JSON body with nested arrays (power_grid,
cell_density, switching, optional threshold) or multipart/form-data with
three `.npy` file parts under the same names. Malformed bodies give 400 with
a field-level message, wrong shapes give 422, inference failures give 500.

The model is loaded once and treated as an immutable snapshot, so concurrent
requests are safe and identical requests give identical responses.
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .analysis import DEFAULT_HOTSPOT_THRESHOLD
from .npyio import NpyFormatError, read_npy
from .pipeline import run_prediction
from .unet import UNetParams

__all__ = ["create_app", "EXPECTED_SHAPE", "MAP_FIELDS"]

EXPECTED_SHAPE = (64, 64)
MAP_FIELDS = ("power_grid", "cell_density", "switching")


def _bad_request(detail: str):
    return HTTPException(status_code=400, detail=detail)


def _parse_threshold(raw, default: float) -> float:
    if raw is None:
        return default
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise _bad_request("threshold must be a number") from None
    if not math.isfinite(value):
        raise _bad_request("threshold must be finite")
    return value


async def _maps_from_json(request: Request):
    try:
        body = await request.json()
    except Exception:
        raise _bad_request("body is not valid JSON") from None
    if not isinstance(body, dict):
        raise _bad_request("JSON body must be an object")
    maps = {}
    for name in MAP_FIELDS:
        if name not in body:
            raise _bad_request(f"missing field '{name}'")
        try:
            arr = np.asarray(body[name], dtype=np.float64)
        except (TypeError, ValueError):
            raise _bad_request(f"field '{name}' is not a numeric array") from None
        maps[name] = arr
    return maps, body.get("threshold")


async def _maps_from_multipart(request: Request):
    try:
        form = await request.form()
    except Exception:
        raise _bad_request("cannot parse multipart form data") from None
    maps = {}
    for name in MAP_FIELDS:
        part = form.get(name)
        if part is None:
            raise _bad_request(f"missing file part '{name}'")
        if hasattr(part, "read"):
            payload = await part.read()
        else:
            payload = str(part).encode()
        try:
            maps[name] = read_npy(payload).data
        except NpyFormatError as exc:
            raise _bad_request(f"file part '{name}': {exc}") from None
    return maps, form.get("threshold")


def _validate_maps(maps: dict) -> None:
    for name, arr in maps.items():
        if arr.ndim != 2 or arr.shape != EXPECTED_SHAPE:
            raise HTTPException(
                status_code=422,
                detail=f"field '{name}' must have shape {list(EXPECTED_SHAPE)}, "
                f"got {list(arr.shape)}",
            )
        if not np.isfinite(arr).all():
            raise _bad_request(f"field '{name}' contains non-finite values")


def create_app(
    params: UNetParams,
    model_version: str = "unversioned",
    default_threshold: float = DEFAULT_HOTSPOT_THRESHOLD,
    static_dir=None,
) -> FastAPI:
    """Build the service around an immutable parameter snapshot."""
    app = FastAPI(title="irdrop inference service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/health")
    async def health():
        return {"status": "ok", "model_version": model_version}

    @app.post("/predict")
    async def predict(request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("application/json"):
            maps, raw_threshold = await _maps_from_json(request)
        elif content_type.startswith("multipart/form-data"):
            maps, raw_threshold = await _maps_from_multipart(request)
        else:
            raise _bad_request(
                "content type must be application/json or multipart/form-data"
            )
        threshold = _parse_threshold(raw_threshold, default_threshold)
        _validate_maps(maps)
        try:
            result = run_prediction(
                params,
                maps["power_grid"],
                maps["cell_density"],
                maps["switching"],
                threshold=threshold,
            )
        except Exception as exc:  # model/analysis failure, not client error
            raise HTTPException(status_code=500, detail=f"inference failed: {exc}")
        payload = result.to_dict()
        payload["model_version"] = model_version
        return JSONResponse(payload)

    if static_dir is not None:
        app.mount("/ui", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
