from __future__ import annotations

import base64
import hashlib
import json

import httpx
import pytest

from rsagent.core import Palette, PaletteClass, decode_raster
from rsagent.remote import (
    InlinePayload,
    MAX_INLINE_BYTES,
    ProducedFile,
    RefPayload,
    RemoteToolError,
    ToolInvokeRequest,
    ToolInvokeResponse,
    ToolRejection,
    ToolServerError,
    ToolTransportError,
    invoke_remote,
    parse_request,
    parse_response,
    serialize_request,
    serialize_response,
)


def detection_request(image_bytes, category="airplane"):
    return ToolInvokeRequest(
        tool="object_detection",
        inputs={"image": InlinePayload(data=image_bytes, mime="image/png")},
        params={"category": category},
    )


class TestWireSchema:
    def test_request_round_trip(self):
        request = ToolInvokeRequest(
            tool="object_detection",
            inputs={
                "image": InlinePayload(data=b"pixels", mime="image/png"),
                "prior": RefPayload(name="s001_mask.png"),
            },
            params={"category": "airplane", "epsilon": 1.5},
        )
        doc = serialize_request(request)
        again = parse_request(doc)
        assert again == request
        assert doc["inputs"]["image"]["b64"] == base64.b64encode(b"pixels").decode()
        assert doc["inputs"]["prior"] == {"ref": "s001_mask.png"}

    def test_response_round_trip_with_palette(self):
        palette = Palette(classes=(PaletteClass(0, "background", (0, 0, 0)),))
        response = ToolInvokeResponse(
            outputs={"classes": ["background"]},
            files=[ProducedFile(name_hint="mask", mime="image/png", data=b"m", palette=palette)],
        )
        doc = serialize_response(response)
        again = parse_response(doc)
        assert again == response
        # canonical body round-trip: serialize(parse(body)) == body
        assert serialize_response(parse_response(doc)) == doc

    def test_inline_size_cap(self):
        request = ToolInvokeRequest(
            tool="t", inputs={"image": InlinePayload(data=b"x" * (MAX_INLINE_BYTES + 1), mime="image/png")}
        )
        with pytest.raises(RemoteToolError):
            serialize_request(request)

    def test_response_detection_invariants_enforced(self):
        bad = {"outputs": {"detections": [{"category": "a", "bbox": [0, 0, 5, 5], "score": 2.0}]}, "files": []}
        with pytest.raises(ValueError):
            parse_response(bad)

    def test_request_needs_payload_variant(self):
        with pytest.raises(ValueError):
            parse_request({"tool": "t", "inputs": {"image": {"path": "/tmp/x"}}})


class TestFixtureServer:
    def test_detections_match_manifest_exactly(self, fixture_server_url, scenes, manifest):
        scene = scenes["airport"]
        response = invoke_remote(fixture_server_url, detection_request(scene.image_png))
        expected = manifest["entries"][scene.content_hash]["detections"]
        assert response.outputs["detections"] == expected
        saved = json.loads(response.files[0].data)
        assert saved == {"detections": expected}

    def test_category_filter_on_server(self, fixture_server_url, scenes):
        scene = scenes["airport"]
        response = invoke_remote(fixture_server_url, detection_request(scene.image_png, "ship"))
        assert response.outputs["detections"] == []

    def test_unsupported_category_rejected(self, fixture_server_url, scenes):
        scene = scenes["airport"]
        with pytest.raises(ToolRejection) as err:
            invoke_remote(fixture_server_url, detection_request(scene.image_png, "cultivated land"))
        assert err.value.code == "unsupported_category"
        assert "airplane" in err.value.supported

    def test_unknown_tool_rejected(self, fixture_server_url, scenes):
        request = ToolInvokeRequest(
            tool="teleportation",
            inputs={"image": InlinePayload(data=scenes["airport"].image_png, mime="image/png")},
        )
        with pytest.raises(ToolRejection) as err:
            invoke_remote(fixture_server_url, request)
        assert err.value.code == "unsupported_tool"

    def test_unknown_image_fallback(self, fixture_server_url):
        from rsagent.core import Raster, encode_raster
        import numpy as np

        unknown = encode_raster(Raster(np.full((7, 9, 3), 55, dtype=np.uint8)))
        caption = invoke_remote(
            fixture_server_url,
            ToolInvokeRequest(tool="image_captioning", inputs={"image": InlinePayload(unknown, "image/png")}),
        )
        assert caption.outputs["caption"] == "a remote sensing image"
        scene = invoke_remote(
            fixture_server_url,
            ToolInvokeRequest(tool="scene_classification", inputs={"image": InlinePayload(unknown, "image/png")}),
        )
        assert scene.outputs == {"label": "unknown", "confidence": 0.0}
        landuse = invoke_remote(
            fixture_server_url,
            ToolInvokeRequest(tool="landuse_classification", inputs={"image": InlinePayload(unknown, "image/png")}),
        )
        mask = decode_raster(landuse.files[0].data, "image/png")
        assert (mask.width, mask.height) == (9, 7)
        assert not mask.pixels.any()

    def test_landuse_delivers_mask_and_palette(self, fixture_server_url, scenes):
        scene = scenes["airport"]
        response = invoke_remote(
            fixture_server_url,
            ToolInvokeRequest(
                tool="landuse_classification",
                inputs={"image": InlinePayload(scene.image_png, "image/png")},
                params={"category": "runway"},
            ),
        )
        assert response.outputs["classes"] == ["background", "runway"]
        produced = response.files[0]
        assert produced.mime == "image/png"
        assert produced.palette is not None
        assert produced.palette.id_for("runway") == 1
        assert produced.data == scene.mask_png

    def test_scene_classification(self, fixture_server_url, scenes):
        scene = scenes["harbor"]
        response = invoke_remote(
            fixture_server_url,
            ToolInvokeRequest(tool="scene_classification", inputs={"image": InlinePayload(scene.image_png, "image/png")}),
        )
        assert response.outputs == {"label": "harbor", "confidence": 0.91}

    def test_repeated_requests_identical(self, fixture_server_url, scenes):
        request = detection_request(scenes["airport"].image_png)
        first = invoke_remote(fixture_server_url, request)
        second = invoke_remote(fixture_server_url, request)
        assert serialize_response(first) == serialize_response(second)

    def test_content_hash_keying_ignores_names(self, scenes):
        # Same bytes, same hash, regardless of what the engine called the file.
        scene = scenes["airport"]
        assert hashlib.sha256(scene.image_png).hexdigest() == scene.content_hash


class TestInvokeErrors:
    def test_unreachable_endpoint_is_transport_error(self, scenes):
        with pytest.raises(ToolTransportError):
            invoke_remote(
                "http://127.0.0.1:1",  # nothing listens there
                detection_request(scenes["airport"].image_png),
                timeout=0.5,
            )

    def test_5xx_is_server_error(self):
        transport = httpx.MockTransport(lambda request: httpx.Response(500))
        with pytest.raises(ToolServerError):
            invoke_remote("http://x.test", ToolInvokeRequest(tool="t"), transport=transport)

    def test_malformed_response_is_server_error(self):
        transport = httpx.MockTransport(lambda request: httpx.Response(200, json={"files": [{"nope": 1}]}))
        with pytest.raises(ToolServerError):
            invoke_remote("http://x.test", ToolInvokeRequest(tool="t"), transport=transport)

    def test_400_with_code_is_rejection(self):
        body = {"error": {"code": "bad_input", "message": "missing image"}}
        transport = httpx.MockTransport(lambda request: httpx.Response(400, json=body))
        with pytest.raises(ToolRejection) as err:
            invoke_remote("http://x.test", ToolInvokeRequest(tool="t"), transport=transport)
        assert err.value.code == "bad_input"
