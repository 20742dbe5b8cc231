"""Wire protocol to out-of-process model tools.

Requests POST to {endpoint}/v1/invoke. Inputs travel inline as base64 (no
shared filesystem assumed) or as engine file references for co-located
servers. Responses carry structured outputs plus produced files; an optional
palette on a file entry becomes the mask's sidecar when the engine registers
it.
"""
from __future__ import annotations

import base64
from dataclasses import dataclass, field
from typing import Optional, Union

import httpx

from .core import Detection, Palette

MAX_INLINE_BYTES = 32 * 1024 * 1024


class RemoteToolError(Exception):
    """Base for remote invocation failures; message is observation-friendly."""


class ToolRejection(RemoteToolError):
    """HTTP 400 with a machine-readable code from the tool server."""

    def __init__(self, code: str, message: str, supported: Optional[list] = None):
        self.code = code
        self.supported = supported
        text = f"{code}: {message}"
        if supported:
            text += f" (supported: {', '.join(str(s) for s in supported)})"
        super().__init__(text)


class ToolServerError(RemoteToolError):
    pass


class ToolTransportError(RemoteToolError):
    pass


@dataclass(frozen=True)
class InlinePayload:
    data: bytes
    mime: str


@dataclass(frozen=True)
class RefPayload:
    name: str


InputPayload = Union[InlinePayload, RefPayload]


@dataclass
class ToolInvokeRequest:
    tool: str
    inputs: dict[str, InputPayload] = field(default_factory=dict)
    params: dict = field(default_factory=dict)


@dataclass
class ProducedFile:
    name_hint: str
    mime: str
    data: bytes
    palette: Optional[Palette] = None


@dataclass
class ToolInvokeResponse:
    outputs: dict = field(default_factory=dict)
    files: list[ProducedFile] = field(default_factory=list)


def serialize_request(request: ToolInvokeRequest) -> dict:
    inputs = {}
    for name, payload in request.inputs.items():
        if isinstance(payload, InlinePayload):
            if len(payload.data) > MAX_INLINE_BYTES:
                raise RemoteToolError(
                    f"input {name!r} is {len(payload.data)} bytes, over the "
                    f"{MAX_INLINE_BYTES}-byte inline cap"
                )
            inputs[name] = {"b64": base64.b64encode(payload.data).decode(), "mime": payload.mime}
        else:
            inputs[name] = {"ref": payload.name}
    return {"tool": request.tool, "inputs": inputs, "params": dict(request.params)}


def parse_request(doc: dict) -> ToolInvokeRequest:
    if not isinstance(doc, dict) or "tool" not in doc:
        raise ValueError("request must be an object with a 'tool' field")
    inputs: dict[str, InputPayload] = {}
    for name, payload in (doc.get("inputs") or {}).items():
        if "b64" in payload:
            inputs[name] = InlinePayload(
                data=base64.b64decode(payload["b64"]), mime=str(payload.get("mime", ""))
            )
        elif "ref" in payload:
            inputs[name] = RefPayload(name=str(payload["ref"]))
        else:
            raise ValueError(f"input {name!r} needs 'b64' or 'ref'")
    return ToolInvokeRequest(
        tool=str(doc["tool"]), inputs=inputs, params=dict(doc.get("params") or {})
    )


def serialize_response(response: ToolInvokeResponse) -> dict:
    files = []
    for f in response.files:
        entry = {"name_hint": f.name_hint, "mime": f.mime, "b64": base64.b64encode(f.data).decode()}
        if f.palette is not None:
            entry["palette"] = {
                "classes": [
                    {"id": c.id, "name": c.name, "color": list(c.color)} for c in f.palette.classes
                ]
            }
        files.append(entry)
    return {"outputs": dict(response.outputs), "files": files}


def parse_response(doc: dict) -> ToolInvokeResponse:
    if not isinstance(doc, dict):
        raise ValueError("response must be an object")
    outputs = dict(doc.get("outputs") or {})
    _validate_outputs(outputs)
    files = []
    for entry in doc.get("files") or []:
        palette = None
        if "palette" in entry:
            palette = Palette.from_json(_dump_palette(entry["palette"]))
        files.append(
            ProducedFile(
                name_hint=str(entry["name_hint"]),
                mime=str(entry["mime"]),
                data=base64.b64decode(entry["b64"]),
                palette=palette,
            )
        )
    return ToolInvokeResponse(outputs=outputs, files=files)


def _dump_palette(doc: dict) -> str:
    import json

    return json.dumps(doc)


def _validate_outputs(outputs: dict) -> None:
    """Enforce response invariants: detections well-formed, confidences in [0, 1]."""
    detections = outputs.get("detections")
    if detections is not None:
        if not isinstance(detections, list):
            raise ValueError("'detections' output must be a list")
        for det in detections:
            Detection(
                category=str(det["category"]),
                bbox=tuple(float(v) for v in det["bbox"]),
                score=float(det["score"]),
            )
    confidence = outputs.get("confidence")
    if confidence is not None and not (0.0 <= float(confidence) <= 1.0):
        raise ValueError(f"confidence {confidence} outside [0, 1]")


def invoke_remote(
    endpoint: str,
    request: ToolInvokeRequest,
    timeout: float = 30.0,
    transport: Optional[httpx.BaseTransport] = None,
) -> ToolInvokeResponse:
    """POST the request to {endpoint}/v1/invoke and parse the reply.

    400s become ToolRejection with the server's machine-readable code; 5xx
    becomes ToolServerError; transport trouble becomes ToolTransportError.
    """
    body = serialize_request(request)
    try:
        with httpx.Client(timeout=timeout, transport=transport) as client:
            response = client.post(f"{endpoint.rstrip('/')}/v1/invoke", json=body)
    except httpx.HTTPError as exc:
        raise ToolTransportError(f"tool server unreachable: {exc}") from exc
    if response.status_code == 400:
        try:
            error = response.json()["error"]
            raise ToolRejection(
                code=str(error.get("code", "bad_input")),
                message=str(error.get("message", "")),
                supported=error.get("supported"),
            )
        except (KeyError, ValueError) as exc:
            raise ToolRejection(code="bad_input", message=response.text[:200]) from exc
    if response.status_code >= 500:
        raise ToolServerError(f"tool server error (HTTP {response.status_code})")
    if response.status_code != 200:
        raise ToolServerError(f"unexpected HTTP {response.status_code} from tool server")
    try:
        return parse_response(response.json())
    except (ValueError, KeyError, TypeError) as exc:
        raise ToolServerError(f"malformed tool response: {exc}") from exc
