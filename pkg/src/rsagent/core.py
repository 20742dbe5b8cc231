"""Session state, raster/vector interchange types, and the session file registry.

Every file an agent may legally name lives in the registry; lookups of
unregistered names fail loudly so a hallucinated filename can never reach
a tool or an answer unnoticed.
"""
from __future__ import annotations

import io
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError


class UnknownFile(KeyError):
    """Raised when a file name does not resolve in the session registry."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(name)

    def __str__(self) -> str:
        return f"unknown file {self.name!r}: no such file was uploaded or produced in this session"


class UnsupportedMime(ValueError):
    pass


class MalformedImage(ValueError):
    pass


# Formats the engine stores and processes. Everything is 8-bit.
_MIME_EXT = {
    "image/png": "png",
    "image/jpeg": "jpg",
    "application/json": "json",
    "text/plain": "txt",
}

# u{seq:03}_{stem}.{ext} for uploads, s{seq:03}_{stem}_{tool}.{ext} for tool
# outputs; seq is the session-wide registration counter.
FILE_NAME_PATTERN = re.compile(r"\b[us]\d{3}_[A-Za-z0-9_.-]+\.[A-Za-z0-9]+\b")


class FileOrigin(str, Enum):
    user_upload = "user_upload"
    tool_output = "tool_output"


@dataclass(frozen=True)
class FileRef:
    session_id: str
    name: str
    mime: str
    origin: FileOrigin
    producing_step: Optional[int] = None


@dataclass(eq=False)
class Raster:
    """8-bit image samples, shape (h, w) for grayscale/label or (h, w, 3) for RGB."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim == 2:
            pass
        elif px.ndim == 3 and px.shape[2] == 3:
            pass
        else:
            raise ValueError(f"raster must be (h, w) or (h, w, 3), got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("raster must be at least 1x1")
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()


@dataclass(frozen=True)
class Detection:
    category: str
    bbox: tuple[float, float, float, float]  # x_min, y_min, x_max, y_max
    score: float

    def __post_init__(self):
        x0, y0, x1, y1 = self.bbox
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"degenerate bbox {self.bbox}")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")

    @property
    def center(self) -> tuple[float, float]:
        x0, y0, x1, y1 = self.bbox
        return (x0 + x1) / 2.0, (y0 + y1) / 2.0


@dataclass(frozen=True)
class Polygon:
    """Closed ring of pixel-space points; the last vertex implicitly reconnects to the first."""

    ring: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.ring) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        n = len(self.ring)
        for i in range(n):
            if self.ring[i] == self.ring[(i + 1) % n]:
                raise ValueError(f"consecutive duplicate vertex at index {i}")
        object.__setattr__(self, "ring", tuple((float(x), float(y)) for x, y in self.ring))


@dataclass(frozen=True)
class PaletteClass:
    id: int
    name: str
    color: tuple[int, int, int]


@dataclass(frozen=True)
class Palette:
    """Class table for a label mask, stored as the mask's .palette.json sidecar."""

    classes: tuple[PaletteClass, ...]

    def id_for(self, name: str) -> Optional[int]:
        for c in self.classes:
            if c.name == name:
                return c.id
        return None

    def name_for(self, class_id: int) -> Optional[str]:
        for c in self.classes:
            if c.id == class_id:
                return c.name
        return None

    def names(self) -> list[str]:
        return [c.name for c in self.classes]

    def to_json(self) -> str:
        return json.dumps(
            {"classes": [{"id": c.id, "name": c.name, "color": list(c.color)} for c in self.classes]}
        )

    @classmethod
    def from_json(cls, text: str) -> "Palette":
        doc = json.loads(text)
        return cls(
            classes=tuple(
                PaletteClass(id=int(c["id"]), name=str(c["name"]), color=tuple(int(v) for v in c["color"]))
                for c in doc["classes"]
            )
        )


def detections_to_json(detections: list[Detection]) -> str:
    return json.dumps(
        {
            "detections": [
                {"category": d.category, "bbox": list(d.bbox), "score": d.score} for d in detections
            ]
        }
    )


def detections_from_json(text: str) -> list[Detection]:
    doc = json.loads(text)
    return [
        Detection(category=str(d["category"]), bbox=tuple(float(v) for v in d["bbox"]), score=float(d["score"]))
        for d in doc["detections"]
    ]


def polygons_to_json(polygons: list[Polygon]) -> str:
    return json.dumps({"polygons": [{"ring": [[x, y] for x, y in p.ring]} for p in polygons]})


def polygons_from_json(text: str) -> list[Polygon]:
    doc = json.loads(text)
    return [Polygon(ring=tuple((float(x), float(y)) for x, y in p["ring"])) for p in doc["polygons"]]


def decode_raster(data: bytes, mime: str) -> Raster:
    """Decode PNG or JPEG bytes into an 8-bit Raster (grayscale or RGB)."""
    if mime not in ("image/png", "image/jpeg"):
        raise UnsupportedMime(f"cannot decode {mime!r}; supported: image/png, image/jpeg")
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError) as exc:
        raise MalformedImage(f"cannot decode image: {exc}") from exc
    if img.mode in ("I", "I;16", "F"):
        raise MalformedImage(f"unsupported bit depth (mode {img.mode}); only 8-bit images are handled")
    if img.mode in ("L", "1"):
        img = img.convert("L")
    else:
        img = img.convert("RGB")
    return Raster(np.asarray(img, dtype=np.uint8))


def encode_raster(raster: Raster, mime: str = "image/png") -> bytes:
    if mime not in ("image/png", "image/jpeg"):
        raise UnsupportedMime(f"cannot encode {mime!r}")
    mode = "L" if raster.channels == 1 else "RGB"
    img = Image.fromarray(raster.pixels, mode=mode)
    buf = io.BytesIO()
    img.save(buf, format="PNG" if mime == "image/png" else "JPEG")
    return buf.getvalue()


def to_gray(raster: Raster) -> Raster:
    """ITU-R 601 luma, rounded to uint8. Grayscale input passes through."""
    if raster.channels == 1:
        return raster
    rgb = raster.pixels.astype(np.float64)
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return Raster(np.floor(luma + 0.5).astype(np.uint8))


class FileStore:
    """Flat per-session directories under a root: {root}/{session_id}/{name}."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _session_dir(self, session_id: str) -> Path:
        d = self.root / session_id
        d.mkdir(parents=True, exist_ok=True)
        return d

    def put(self, session_id: str, name: str, data: bytes) -> None:
        (self._session_dir(session_id) / name).write_bytes(data)

    def get(self, session_id: str, name: str) -> bytes:
        path = self.root / session_id / name
        if not path.is_file():
            raise UnknownFile(name)
        return path.read_bytes()

    def put_palette(self, session_id: str, mask_name: str, palette: Palette) -> None:
        self.put(session_id, f"{mask_name}.palette.json", palette.to_json().encode())

    def get_palette(self, session_id: str, mask_name: str) -> Optional[Palette]:
        try:
            raw = self.get(session_id, f"{mask_name}.palette.json")
        except UnknownFile:
            return None
        return Palette.from_json(raw.decode())


@dataclass
class ChatTurn:
    role: str  # "user" | "agent"
    text: str


@dataclass
class Session:
    """One conversation: registry of legal file names, visual cues, and plan history.

    A session is confined to one plan execution at a time; distinct sessions
    are independent.
    """

    session_id: str
    store: FileStore
    files: dict[str, FileRef] = field(default_factory=dict)
    visual_cues: list[tuple[str, str]] = field(default_factory=list)
    history: list[ChatTurn] = field(default_factory=list)
    traces: list = field(default_factory=list)
    _seq: int = 0

    def register_file(
        self,
        origin: FileOrigin,
        stem: str,
        mime: str,
        data: bytes,
        tool: Optional[str] = None,
        producing_step: Optional[int] = None,
    ) -> FileRef:
        """Store bytes under a fresh deterministic name and return its FileRef.

        Names embed the session-wide registration counter, so any sequence of
        registrations yields pairwise-distinct names reproducible from the
        session history alone.
        """
        if not data:
            raise ValueError("refusing to register an empty file")
        ext = _MIME_EXT.get(mime)
        if ext is None:
            raise UnsupportedMime(f"unsupported mime {mime!r}; supported: {sorted(_MIME_EXT)}")
        stem = _sanitize_stem(stem)
        if origin is FileOrigin.user_upload:
            name = f"u{self._seq:03d}_{stem}.{ext}"
        else:
            if not tool:
                raise ValueError("tool name required for tool_output files")
            name = f"s{self._seq:03d}_{stem}_{tool}.{ext}"
        self._seq += 1
        ref = FileRef(
            session_id=self.session_id,
            name=name,
            mime=mime,
            origin=origin,
            producing_step=producing_step,
        )
        self.store.put(self.session_id, name, data)
        self.files[name] = ref
        return ref

    def resolve_file(self, name: str) -> FileRef:
        """Exact, case-sensitive lookup; raises UnknownFile for anything never registered."""
        try:
            return self.files[name]
        except KeyError:
            raise UnknownFile(name) from None

    def read_file(self, name: str) -> bytes:
        ref = self.resolve_file(name)
        return self.store.get(self.session_id, ref.name)

    def add_visual_cue(self, name: str, caption: str) -> None:
        self.visual_cues.append((name, caption))


def _sanitize_stem(stem: str) -> str:
    cleaned = re.sub(r"[^A-Za-z0-9_-]+", "_", stem).strip("_")
    return cleaned or "file"
