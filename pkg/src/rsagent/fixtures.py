"""Deterministic demo scenes: synthetic imagery, masks, detections, captions.

Everything is generated, never stored as binary in the repo; the same pixels
(and therefore the same content hashes) come out on every run.
"""
from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Detection, Palette, PaletteClass, Raster, encode_raster


@dataclass
class FixtureScene:
    key: str
    image_png: bytes
    caption: str
    scene_label: str
    scene_confidence: float
    detections: list[Detection]
    mask_png: bytes
    palette: Palette

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.image_png).hexdigest()


def airport_scene() -> FixtureScene:
    """100x100 airport: a runway square covering (0,0)-(60,60) and three airplanes.

    Box centers (10,10) and (50,50) fall on the runway, (90,90) does not, so
    counting airplanes on the runway yields exactly 2.
    """
    px = np.full((100, 100, 3), 168, dtype=np.uint8)
    px[0:61, 0:61] = (90, 90, 95)  # runway pavement
    for cx, cy in [(10, 10), (50, 50), (90, 90)]:
        px[cy - 3 : cy + 4, cx - 3 : cx + 4] = (240, 240, 240)  # airplane blob
    mask = np.zeros((100, 100), dtype=np.uint8)
    mask[0:61, 0:61] = 1
    palette = Palette(
        classes=(
            PaletteClass(0, "background", (0, 0, 0)),
            PaletteClass(1, "runway", (200, 200, 200)),
        )
    )
    detections = [
        Detection("airplane", (6.0, 6.0, 14.0, 14.0), 0.95),
        Detection("airplane", (46.0, 46.0, 54.0, 54.0), 0.90),
        Detection("airplane", (86.0, 86.0, 94.0, 94.0), 0.85),
    ]
    return FixtureScene(
        key="airport",
        image_png=encode_raster(Raster(px)),
        caption="an airport with runways",
        scene_label="airport",
        scene_confidence=0.97,
        detections=detections,
        mask_png=encode_raster(Raster(mask)),
        palette=palette,
    )


def harbor_scene() -> FixtureScene:
    """80x80 harbor: water on the right half, two ships moored in it."""
    px = np.full((80, 80, 3), 150, dtype=np.uint8)
    px[:, 40:] = (60, 90, 160)  # water
    for cx, cy in [(55, 20), (62, 55)]:
        px[cy - 2 : cy + 3, cx - 5 : cx + 6] = (230, 230, 225)  # ship hull
    mask = np.zeros((80, 80), dtype=np.uint8)
    mask[:, 40:] = 1
    palette = Palette(
        classes=(
            PaletteClass(0, "background", (0, 0, 0)),
            PaletteClass(1, "water", (50, 80, 180)),
        )
    )
    detections = [
        Detection("ship", (50.0, 18.0, 61.0, 23.0), 0.92),
        Detection("ship", (57.0, 53.0, 68.0, 58.0), 0.88),
    ]
    return FixtureScene(
        key="harbor",
        image_png=encode_raster(Raster(px)),
        caption="boats docked in a harbor",
        scene_label="harbor",
        scene_confidence=0.91,
        detections=detections,
        mask_png=encode_raster(Raster(mask)),
        palette=palette,
    )


def default_scenes() -> list[FixtureScene]:
    return [airport_scene(), harbor_scene()]


def build_manifest(scenes: list[FixtureScene]) -> dict:
    """In-memory manifest for the fixture tool server, keyed by content hash."""
    entries = {}
    for scene in scenes:
        entries[scene.content_hash] = {
            "scene": {"label": scene.scene_label, "confidence": scene.scene_confidence},
            "caption": scene.caption,
            "detections": [
                {"category": d.category, "bbox": list(d.bbox), "score": d.score}
                for d in scene.detections
            ],
            "landuse": {
                "mask_b64": base64.b64encode(scene.mask_png).decode(),
                "palette": json.loads(scene.palette.to_json()),
            },
        }
    return {
        "entries": entries,
        "categories": {
            "object_detection": [
                "airplane", "ship", "storage_tank", "baseball_diamond", "tennis_court",
                "basketball_court", "ground_track_field", "harbor", "bridge", "large_vehicle",
                "small_vehicle", "helicopter", "roundabout", "soccer_ball_field", "swimming_pool",
            ],
            "landuse_classification": [
                "background", "building", "road", "water", "barren", "forest",
                "agriculture", "runway",
            ],
        },
    }


def write_fixture_tree(directory: Path | str) -> Path:
    """Write a self-contained demo tree: images, manifest.json, and the shipped
    benchmark dataset plus its scripted backends; returns the manifest path."""
    from importlib.resources import files as resource_files

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    scenes = default_scenes()
    for scene in scenes:
        (directory / f"{scene.key}.png").write_bytes(scene.image_png)
    manifest_path = directory / "manifest.json"
    manifest_path.write_text(json.dumps(build_manifest(scenes), indent=2, sort_keys=True))
    data = resource_files("rsagent.data")
    for name in ("queries.jsonl", "bench_script.yaml", "bench_script_sabotaged.yaml"):
        (directory / name).write_text(data.joinpath(name).read_text())
    return manifest_path
