"""Deterministic stand-in tool server for the learned-model tools.

Responses are keyed by the sha256 of the posted image bytes, so behavior
never depends on engine-side file names. Unknown images get a fixed
fallback: scene "unknown" at confidence 0.0, the caption "a remote sensing
image", no detections, and an all-background mask.
"""
from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .core import Palette, PaletteClass, Raster, decode_raster, encode_raster
from .remote import (
    InlinePayload,
    ProducedFile,
    ToolInvokeResponse,
    parse_request,
    serialize_response,
)

SERVED_TOOLS = (
    "scene_classification",
    "landuse_classification",
    "object_detection",
    "image_captioning",
)

FALLBACK_CAPTION = "a remote sensing image"
_FALLBACK_PALETTE = Palette(classes=(PaletteClass(0, "background", (0, 0, 0)),))


class ManifestError(ValueError):
    pass


def load_manifest(path: Path | str) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot load manifest {path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), dict):
        raise ManifestError("manifest must be an object with an 'entries' map")
    for content_hash, entry in doc["entries"].items():
        if "mask_path" in entry.get("landuse", {}):
            mask_file = path.parent / entry["landuse"]["mask_path"]
            entry["landuse"]["mask_b64"] = base64.b64encode(mask_file.read_bytes()).decode()
    return doc


def _error(code: str, message: str, supported=None, status: int = 400) -> JSONResponse:
    body = {"error": {"code": code, "message": message}}
    if supported is not None:
        body["error"]["supported"] = supported
    return JSONResponse(body, status_code=status)


def create_fixture_app(manifest: dict) -> FastAPI:
    app = FastAPI(title="fixture tool server")
    entries: dict = manifest.get("entries", {})
    categories: dict = manifest.get("categories", {})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/v1/invoke")
    async def invoke(request: Request):
        try:
            doc = await request.json()
            parsed = parse_request(doc)
        except ValueError as exc:
            return _error("bad_input", str(exc))
        if parsed.tool not in SERVED_TOOLS:
            return _error("unsupported_tool", f"tool {parsed.tool!r} is not served here",
                          supported=list(SERVED_TOOLS))
        image = parsed.inputs.get("image")
        if image is None:
            return _error("bad_input", "an 'image' input is required")
        if not isinstance(image, InlinePayload):
            return _error("bad_input", "this server needs inline image bytes, not refs")

        supported = categories.get(parsed.tool)
        category = parsed.params.get("category")
        if category is not None and supported is not None and category not in supported:
            return _error(
                "unsupported_category",
                f"{parsed.tool} does not support category {category!r}",
                supported=supported,
            )

        content_hash = hashlib.sha256(image.data).hexdigest()
        entry = entries.get(content_hash)
        response = _respond(parsed.tool, entry, image, category)
        return JSONResponse(serialize_response(response))

    return app


def _respond(tool: str, entry, image: InlinePayload, category) -> ToolInvokeResponse:
    if tool == "scene_classification":
        scene = (entry or {}).get("scene", {"label": "unknown", "confidence": 0.0})
        return ToolInvokeResponse(
            outputs={"label": scene["label"], "confidence": scene["confidence"]}
        )
    if tool == "image_captioning":
        caption = (entry or {}).get("caption", FALLBACK_CAPTION)
        return ToolInvokeResponse(outputs={"caption": caption})
    if tool == "object_detection":
        detections = list((entry or {}).get("detections", []))
        if category is not None:
            detections = [d for d in detections if d.get("category") == category]
        files = [
            ProducedFile(
                name_hint="detections",
                mime="application/json",
                data=json.dumps({"detections": detections}).encode(),
            )
        ]
        return ToolInvokeResponse(outputs={"detections": detections}, files=files)
    # landuse_classification
    landuse = (entry or {}).get("landuse")
    if landuse is None:
        mask_png, palette = _all_background_mask(image)
        classes = ["background"]
    else:
        mask_png = base64.b64decode(landuse["mask_b64"])
        palette = Palette.from_json(json.dumps(landuse["palette"]))
        classes = _classes_present(mask_png, palette)
    files = [
        ProducedFile(name_hint="landuse_mask", mime="image/png", data=mask_png, palette=palette)
    ]
    return ToolInvokeResponse(outputs={"classes": classes}, files=files)


def _all_background_mask(image: InlinePayload) -> tuple[bytes, Palette]:
    try:
        raster = decode_raster(image.data, image.mime or "image/png")
        shape = (raster.height, raster.width)
    except Exception:
        shape = (1, 1)
    return encode_raster(Raster(np.zeros(shape, dtype=np.uint8))), _FALLBACK_PALETTE


def _classes_present(mask_png: bytes, palette: Palette) -> list[str]:
    raster = decode_raster(mask_png, "image/png")
    present = np.unique(raster.pixels)
    names = [palette.name_for(int(v)) for v in present]
    return [n for n in names if n is not None]


def run_fixture_server(manifest: dict, host: str = "127.0.0.1", port: int = 8766) -> None:
    import uvicorn

    uvicorn.run(create_fixture_app(manifest), host=host, port=port, log_level="warning")


class BackgroundServer:
    """A uvicorn server on a daemon thread, for tests and in-process benchmarks.

    port=0 binds an ephemeral port; start() blocks until the socket accepts
    and returns the base URL.
    """

    def __init__(self, app, host: str = "127.0.0.1", port: int = 0):
        import threading

        import uvicorn

        self._config = uvicorn.Config(app, host=host, port=port, log_level="warning")
        self._server = uvicorn.Server(self._config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)
        self._host = host

    def start(self, timeout: float = 10.0) -> str:
        import time

        self._thread.start()
        deadline = time.monotonic() + timeout
        while not self._server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("fixture server did not start in time")
            time.sleep(0.01)
        port = self._server.servers[0].sockets[0].getsockname()[1]
        return f"http://{self._host}:{port}"

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=5)
