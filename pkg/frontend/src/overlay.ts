import type { Detection, PaletteClass } from "./types";

// Pure overlay geometry. Coordinates live in original-image pixel space and
// are transformed to the viewport at render time, so zooming never mutates
// the underlying data.

export interface Viewport {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export const IDENTITY: Viewport = { scale: 1, offsetX: 0, offsetY: 0 };

export interface ViewRect {
  x: number;
  y: number;
  width: number;
  height: number;
}

export function toView(x: number, y: number, vp: Viewport): [number, number] {
  return [x * vp.scale + vp.offsetX, y * vp.scale + vp.offsetY];
}

export function detectionRect(detection: Detection, vp: Viewport): ViewRect {
  const [x0, y0, x1, y1] = detection.bbox;
  const [vx, vy] = toView(x0, y0, vp);
  return { x: vx, y: vy, width: (x1 - x0) * vp.scale, height: (y1 - y0) * vp.scale };
}

export function detectionLabel(detection: Detection): string {
  return `${detection.category} ${detection.score.toFixed(2)}`;
}

export function polygonViewPoints(
  ring: Array<[number, number]>,
  vp: Viewport,
): Array<[number, number]> {
  return ring.map(([x, y]) => toView(x, y, vp));
}

/** Palette lookup with a grayscale fallback when no palette is available. */
export function classColor(palette: PaletteClass[] | null, classId: number): [number, number, number] {
  if (palette) {
    const entry = palette.find((c) => c.id === classId);
    if (entry) return entry.color;
  }
  const v = ((classId * 37) % 256 + 256) % 256;
  return [v, v, v];
}

/**
 * Map a label raster (class ids, row-major) to RGBA bytes for a canvas
 * overlay. Class 0 is treated as background and left transparent.
 */
export function colorizeMask(
  ids: ArrayLike<number>,
  palette: PaletteClass[] | null,
): Uint8ClampedArray {
  const out = new Uint8ClampedArray(ids.length * 4);
  for (let i = 0; i < ids.length; i++) {
    const id = ids[i];
    if (id === 0) continue;
    const [r, g, b] = classColor(palette, id);
    out[i * 4] = r;
    out[i * 4 + 1] = g;
    out[i * 4 + 2] = b;
    out[i * 4 + 3] = 255;
  }
  return out;
}

export interface LayerVisibility {
  detections: boolean;
  mask: boolean;
  polygons: boolean;
}

export const ALL_VISIBLE: LayerVisibility = { detections: true, mask: true, polygons: true };

// Minimal drawing surfaces so tests can record calls instead of rasterizing.
export interface BoxSurface {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

export interface PathSurface {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
}

export function drawDetections(
  surface: BoxSurface,
  detections: Detection[],
  vp: Viewport,
  color = "#ff5533",
): void {
  surface.strokeStyle = color;
  surface.fillStyle = color;
  surface.lineWidth = 2;
  surface.font = "12px sans-serif";
  for (const detection of detections) {
    const rect = detectionRect(detection, vp);
    surface.strokeRect(rect.x, rect.y, rect.width, rect.height);
    surface.fillText(detectionLabel(detection), rect.x, Math.max(0, rect.y - 4));
  }
}

export function drawPolygons(
  surface: PathSurface,
  rings: Array<Array<[number, number]>>,
  vp: Viewport,
  color = "#22cc88",
): void {
  surface.strokeStyle = color;
  surface.lineWidth = 2;
  for (const ring of rings) {
    if (ring.length === 0) continue;
    surface.beginPath();
    const [sx, sy] = toView(ring[0][0], ring[0][1], vp);
    surface.moveTo(sx, sy);
    for (let i = 1; i < ring.length; i++) {
      const [x, y] = toView(ring[i][0], ring[i][1], vp);
      surface.lineTo(x, y);
    }
    surface.closePath();
    surface.stroke();
  }
}
