import { GatewayBusyError, GatewayClient } from "./api";
import {
  ALL_VISIBLE,
  colorizeMask,
  drawDetections,
  drawPolygons,
  IDENTITY,
  type LayerVisibility,
  type Viewport,
} from "./overlay";
import { renderApp } from "./render";
import { applyEvent, initialState, knownFiles, type UiEvent, type UiState } from "./state";
import type { Detection, PaletteClass } from "./types";

// Browser shell: owns the event log, persists it locally so a reload
// restores the conversation, and resolves file names to gateway URLs. All
// rendering goes through the pure renderApp; all state changes go through
// dispatch.

const GATEWAY_KEY = "rsagent.gateway";
const SESSION_KEY = "rsagent.session";
const LOG_KEY = "rsagent.log";

const gatewayUrl =
  new URLSearchParams(location.search).get("gateway") ??
  localStorage.getItem(GATEWAY_KEY) ??
  "http://127.0.0.1:8750";
localStorage.setItem(GATEWAY_KEY, gatewayUrl);
const gateway = new GatewayClient(gatewayUrl);

let state: UiState = initialState;
let log: UiEvent[] = [];

function dispatch(event: UiEvent): void {
  log.push(event);
  state = applyEvent(state, event);
  if (state.sessionId) {
    localStorage.setItem(SESSION_KEY, state.sessionId);
    localStorage.setItem(LOG_KEY, JSON.stringify(log));
  }
  draw();
}

function container(): HTMLElement {
  return document.getElementById("root")!;
}

function draw(): void {
  const root = renderApp(state, document);
  const session = state.sessionId;
  if (session) {
    const legal = knownFiles(state);
    root.querySelectorAll<HTMLImageElement>("img[data-file]").forEach((img) => {
      const name = img.getAttribute("data-file")!;
      if (legal.has(name)) img.src = gateway.fileUrl(session, name);
    });
    root.querySelectorAll<HTMLElement>(".file-chip[data-file]").forEach((chip) => {
      const name = chip.getAttribute("data-file")!;
      if (!legal.has(name)) return;
      chip.addEventListener("click", () => void openViewer(session, name));
    });
  }
  root.querySelector<HTMLFormElement>("form.composer")?.addEventListener("submit", (e) => {
    e.preventDefault();
    const input = root.querySelector<HTMLInputElement>("form.composer input")!;
    const text = input.value.trim();
    if (text) void send(text);
    input.value = "";
  });
  root.querySelector<HTMLButtonElement>("button.retry")?.addEventListener("click", () => void connect());
  container().replaceChildren(root);
  const focusTarget = root.querySelector<HTMLInputElement>("input[data-focus='true']");
  if (focusTarget && !state.inFlight) focusTarget.focus();
  wireUpload(root);
}

function wireUpload(root: HTMLElement): void {
  const composer = root.querySelector("form.composer");
  if (!composer || root.querySelector("#upload")) return;
  const picker = document.createElement("input");
  picker.type = "file";
  picker.id = "upload";
  picker.accept = "image/png,image/jpeg";
  picker.addEventListener("change", async () => {
    const file = picker.files?.[0];
    const session = state.sessionId;
    if (!file || !session) return;
    try {
      const uploaded = await gateway.uploadImage(session, file, file.name);
      dispatch({ type: "attachment", name: uploaded.file_name, caption: uploaded.caption });
    } catch (err) {
      dispatch({ type: "connect_failed", message: String(err) });
    }
  });
  composer.appendChild(picker);
}

async function connect(): Promise<void> {
  try {
    const storedSession = localStorage.getItem(SESSION_KEY);
    const storedLog = localStorage.getItem(LOG_KEY);
    const tools = await gateway.listTools();
    if (storedSession && storedLog) {
      // Restore the conversation by replaying the persisted event log.
      state = initialState;
      log = [];
      for (const event of JSON.parse(storedLog) as UiEvent[]) {
        log.push(event);
        state = applyEvent(state, event);
      }
      state = applyEvent(state, { type: "connected", sessionId: storedSession, tools });
      draw();
      return;
    }
    const sessionId = await gateway.createSession();
    dispatch({ type: "connected", sessionId, tools });
  } catch (err) {
    dispatch({ type: "connect_failed", message: String(err) });
  }
}

async function send(text: string): Promise<void> {
  const session = state.sessionId;
  if (!session || state.inFlight) return;
  let messageId: string;
  try {
    messageId = await gateway.postMessage(session, text);
  } catch (err) {
    if (err instanceof GatewayBusyError) return; // send is disabled anyway
    dispatch({ type: "connect_failed", message: String(err) });
    return;
  }
  dispatch({ type: "user_message", messageId, text });
  try {
    for await (const event of gateway.streamMessage(session, messageId)) {
      dispatch({ type: "stream", messageId, event });
    }
  } catch (err) {
    dispatch({
      type: "stream",
      messageId,
      event: { kind: "error", step: null, payload: { reason: "stream", text: String(err) } },
    });
  }
}

// ---------------------------------------------------------------------------
// Overlay viewer: base image + detections / mask / polygon layers with
// zoom, pan, opacity, and per-layer toggles.
// ---------------------------------------------------------------------------

interface ViewerLayers {
  detections: Detection[];
  maskImage: HTMLImageElement | null;
  palette: PaletteClass[] | null;
  polygons: Array<Array<[number, number]>>;
}

async function fetchJson(url: string): Promise<unknown | null> {
  const response = await fetch(url);
  return response.ok ? response.json() : null;
}

function loadImage(url: string): Promise<HTMLImageElement | null> {
  return new Promise((resolve) => {
    const img = new Image();
    img.crossOrigin = "anonymous";
    img.onload = () => resolve(img);
    img.onerror = () => resolve(null);
    img.src = url;
  });
}

async function collectLayers(session: string, name: string): Promise<ViewerLayers> {
  const layers: ViewerLayers = { detections: [], maskImage: null, palette: null, polygons: [] };
  const url = gateway.fileUrl(session, name);
  if (name.endsWith(".json")) {
    const doc = (await fetchJson(url)) as
      | { detections?: Detection[]; polygons?: Array<{ ring: Array<[number, number]> }> }
      | null;
    if (doc?.detections) layers.detections = doc.detections;
    if (doc?.polygons) layers.polygons = doc.polygons.map((p) => p.ring);
  } else {
    layers.maskImage = await loadImage(url);
    const palette = (await fetchJson(gateway.fileUrl(session, `${name}.palette.json`))) as {
      classes?: PaletteClass[];
    } | null;
    layers.palette = palette?.classes ?? null; // missing palette: grayscale fallback
  }
  return layers;
}

async function openViewer(session: string, name: string): Promise<void> {
  const base = state.attachments[0];
  if (!base) return;
  const baseImage = await loadImage(gateway.fileUrl(session, base.name));
  if (!baseImage) return;
  const layers = await collectLayers(session, name);

  const modal = document.createElement("div");
  modal.className = "viewer-modal";
  const panel = document.createElement("div");
  panel.className = "viewer-panel";
  const canvas = document.createElement("canvas");
  canvas.width = 640;
  canvas.height = 640;
  const controls = document.createElement("div");
  controls.className = "viewer-controls";

  const visibility: LayerVisibility = { ...ALL_VISIBLE };
  let vp: Viewport = { ...IDENTITY, scale: Math.min(600 / baseImage.width, 600 / baseImage.height) };
  let maskOpacity = 0.5;

  const maskCanvas = document.createElement("canvas");
  if (layers.maskImage) {
    maskCanvas.width = layers.maskImage.width;
    maskCanvas.height = layers.maskImage.height;
    const mctx = maskCanvas.getContext("2d")!;
    mctx.drawImage(layers.maskImage, 0, 0);
    const ids = mctx.getImageData(0, 0, maskCanvas.width, maskCanvas.height);
    const classIds = new Uint8ClampedArray(ids.data.length / 4);
    for (let i = 0; i < classIds.length; i++) classIds[i] = ids.data[i * 4];
    const rgba = colorizeMask(classIds, layers.palette);
    mctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), maskCanvas.width, maskCanvas.height), 0, 0);
  }

  function redraw(): void {
    const ctx = canvas.getContext("2d")!;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(
      baseImage!,
      vp.offsetX,
      vp.offsetY,
      baseImage!.width * vp.scale,
      baseImage!.height * vp.scale,
    );
    if (visibility.mask && layers.maskImage) {
      ctx.globalAlpha = maskOpacity;
      ctx.drawImage(maskCanvas, vp.offsetX, vp.offsetY, maskCanvas.width * vp.scale, maskCanvas.height * vp.scale);
      ctx.globalAlpha = 1;
    }
    if (visibility.polygons) drawPolygons(ctx, layers.polygons, vp);
    if (visibility.detections) drawDetections(ctx, layers.detections, vp);
  }

  for (const layer of ["detections", "mask", "polygons"] as const) {
    const label = document.createElement("label");
    const box = document.createElement("input");
    box.type = "checkbox";
    box.checked = visibility[layer];
    box.addEventListener("change", () => {
      visibility[layer] = box.checked;
      redraw();
    });
    label.appendChild(box);
    label.appendChild(document.createTextNode(layer));
    controls.appendChild(label);
  }
  const opacity = document.createElement("input");
  opacity.type = "range";
  opacity.min = "0";
  opacity.max = "100";
  opacity.value = "50";
  opacity.addEventListener("input", () => {
    maskOpacity = Number(opacity.value) / 100;
    redraw();
  });
  controls.appendChild(opacity);
  const close = document.createElement("button");
  close.textContent = "close";
  close.addEventListener("click", () => modal.remove());
  controls.appendChild(close);

  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    const factor = e.deltaY < 0 ? 1.2 : 1 / 1.2;
    const rect = canvas.getBoundingClientRect();
    const cx = e.clientX - rect.left;
    const cy = e.clientY - rect.top;
    vp = {
      scale: vp.scale * factor,
      offsetX: cx - (cx - vp.offsetX) * factor,
      offsetY: cy - (cy - vp.offsetY) * factor,
    };
    redraw();
  });
  let dragging: [number, number] | null = null;
  canvas.addEventListener("pointerdown", (e) => (dragging = [e.clientX, e.clientY]));
  canvas.addEventListener("pointermove", (e) => {
    if (!dragging) return;
    vp = { ...vp, offsetX: vp.offsetX + e.clientX - dragging[0], offsetY: vp.offsetY + e.clientY - dragging[1] };
    dragging = [e.clientX, e.clientY];
    redraw();
  });
  canvas.addEventListener("pointerup", () => (dragging = null));

  panel.appendChild(controls);
  panel.appendChild(canvas);
  modal.appendChild(panel);
  document.body.appendChild(modal);
  redraw();
}

void connect();
