"""Dispatch of validated invocations to native tools or remote tool servers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import httpx
import numpy as np

from .core import (
    MalformedImage,
    Raster,
    Session,
    decode_raster,
    detections_from_json,
    detections_to_json,
    encode_raster,
    polygons_from_json,
    polygons_to_json,
    to_gray,
)
from .registry import NativeExecution, ValidatedInvocation
from .remote import InlinePayload, ProducedFile, RemoteToolError, ToolInvokeRequest, invoke_remote
from .vision import CannyParams, CountRequest, MaskRegion, canny, count_objects, polygonize


class ToolExecutionError(Exception):
    """Tool-side failure; recoverable, its message reads as an observation."""


@dataclass
class ToolResult:
    outputs: dict = field(default_factory=dict)
    files: list[ProducedFile] = field(default_factory=list)


class ToolExecutor:
    """Runs validated invocations. Pure with respect to session file contents.

    transport, when given, routes every remote call through it (httpx
    MockTransport or ASGITransport), which is how tests and the desk-scale
    benchmark talk to in-process fixture servers.
    """

    def __init__(self, timeout: float = 30.0, transport: Optional[httpx.BaseTransport] = None):
        self.timeout = timeout
        self.transport = transport

    def run(self, session: Session, invocation: ValidatedInvocation) -> ToolResult:
        if isinstance(invocation.spec.execution, NativeExecution):
            native = _NATIVE_TOOLS.get(invocation.spec.execution.id)
            if native is None:
                raise ToolExecutionError(
                    f"no native implementation registered for {invocation.spec.execution.id!r}"
                )
            return native(session, invocation)
        return self._run_remote(session, invocation)

    def _run_remote(self, session: Session, invocation: ValidatedInvocation) -> ToolResult:
        inputs = {}
        for name, ref in invocation.files.items():
            inputs[name] = InlinePayload(data=session.read_file(ref.name), mime=ref.mime)
        request = ToolInvokeRequest(
            tool=invocation.spec.name, inputs=inputs, params=dict(invocation.params)
        )
        try:
            response = invoke_remote(
                invocation.spec.execution.url, request, timeout=self.timeout, transport=self.transport
            )
        except RemoteToolError as exc:
            raise ToolExecutionError(str(exc)) from exc
        return ToolResult(outputs=response.outputs, files=response.files)


def _decode_input(session: Session, invocation: ValidatedInvocation, name: str) -> Raster:
    ref = invocation.files[name]
    try:
        return decode_raster(session.read_file(ref.name), ref.mime)
    except MalformedImage as exc:
        raise ToolExecutionError(f"{ref.name} is not a decodable image: {exc}") from exc


def _run_canny(session: Session, invocation: ValidatedInvocation) -> ToolResult:
    gray = to_gray(_decode_input(session, invocation, "image"))
    params = invocation.params
    try:
        canny_params = CannyParams(
            sigma=params.get("sigma", 1.4),
            low_ratio=params.get("low", 0.10),
            high_ratio=params.get("high", 0.20),
        )
    except ValueError as exc:
        raise ToolExecutionError(str(exc)) from exc
    edges = canny(gray, canny_params)
    return ToolResult(
        outputs={"edge_pixels": int(np.count_nonzero(edges.pixels))},
        files=[ProducedFile(name_hint="edges", mime="image/png", data=encode_raster(edges))],
    )


def _run_polygonize(session: Session, invocation: ValidatedInvocation) -> ToolResult:
    mask_ref = invocation.files["mask"]
    raster = _decode_input(session, invocation, "mask")
    if raster.channels != 1:
        raise ToolExecutionError(f"{mask_ref.name} is not a single-channel label mask")
    class_name = invocation.params.get("class_name")
    if class_name is not None:
        palette = session.store.get_palette(session.session_id, mask_ref.name)
        if palette is None:
            raise ToolExecutionError(
                f"{mask_ref.name} has no class palette; cannot look up class {class_name!r}"
            )
        class_id = palette.id_for(class_name)
        if class_id is None:
            raise ToolExecutionError(
                f"mask {mask_ref.name} has no class {class_name!r}; "
                f"available classes: {', '.join(palette.names())}"
            )
        mask = raster
    else:
        mask = Raster((raster.pixels != 0).astype(np.uint8))
        class_id = 1
    epsilon = float(invocation.params.get("epsilon", 1.0))
    if epsilon < 0:
        raise ToolExecutionError("epsilon must be non-negative")
    polygons = polygonize(mask, class_id, epsilon)
    outputs = {"polygons": len(polygons)}
    if class_name is not None:
        outputs["class"] = class_name
    return ToolResult(
        outputs=outputs,
        files=[
            ProducedFile(
                name_hint="polygons", mime="application/json", data=polygons_to_json(polygons).encode()
            )
        ],
    )


def _run_count(session: Session, invocation: ValidatedInvocation) -> ToolResult:
    det_ref = invocation.files["detections"]
    try:
        detections = detections_from_json(session.read_file(det_ref.name).decode())
    except (ValueError, KeyError, TypeError) as exc:
        raise ToolExecutionError(f"{det_ref.name} is not a valid detections file: {exc}") from exc

    region = None
    region_ref = invocation.files.get("region")
    if region_ref is not None:
        if region_ref.mime == "application/json":
            try:
                polygons = polygons_from_json(session.read_file(region_ref.name).decode())
            except (ValueError, KeyError, TypeError) as exc:
                raise ToolExecutionError(
                    f"{region_ref.name} is not a valid polygons file: {exc}"
                ) from exc
            if not polygons:
                raise ToolExecutionError(f"region file {region_ref.name} contains no polygons")
            region = tuple(polygons)
        else:
            mask = decode_raster(session.read_file(region_ref.name), region_ref.mime)
            if mask.channels != 1:
                raise ToolExecutionError(f"{region_ref.name} is not a single-channel label mask")
            region_class = invocation.params.get("region_class")
            if region_class is None:
                raise ToolExecutionError(
                    "region_class is required when the region is a label mask"
                )
            palette = session.store.get_palette(session.session_id, region_ref.name)
            if palette is None:
                raise ToolExecutionError(f"{region_ref.name} has no class palette")
            class_id = palette.id_for(region_class)
            if class_id is None:
                raise ToolExecutionError(
                    f"mask {region_ref.name} has no class {region_class!r}; "
                    f"available classes: {', '.join(palette.names())}"
                )
            region = MaskRegion(mask=mask, class_id=class_id)

    result = count_objects(
        CountRequest(
            detections=detections,
            category=invocation.params.get("category"),
            region=region,
        )
    )
    return ToolResult(
        outputs={"count": result.count},
        files=[
            ProducedFile(
                name_hint="kept", mime="application/json", data=detections_to_json(result.kept).encode()
            )
        ],
    )


_NATIVE_TOOLS = {
    "canny": _run_canny,
    "polygonize": _run_polygonize,
    "count": _run_count,
}
