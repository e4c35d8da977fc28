import { decodeBase64, ServiceClient } from "./api";
import { renderOverlay } from "./overlay";
import { canvasToImage } from "./strokes";
import { Mode, ServiceError } from "./types";
import { UiState } from "./state";

const SERVICE_URL =
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:7430";

const client = new ServiceClient(SERVICE_URL);
const state = new UiState();

const fileInput = document.getElementById("file") as HTMLInputElement;
const canvas = document.getElementById("canvas") as HTMLCanvasElement;
const submitBtn = document.getElementById("submit") as HTMLButtonElement;
const clearBtn = document.getElementById("new-image") as HTMLButtonElement;
const modeInputs = document.querySelectorAll<HTMLInputElement>("input[name=mode]");
const bannerEl = document.getElementById("banner") as HTMLDivElement;

const ctx = canvas.getContext("2d")!;
let image: ImageBitmap | null = null;
let maskBitmap: ImageBitmap | null = null;
let drawing = false;

function currentMode(): Mode {
  for (const input of modeInputs) {
    if (input.checked) {
      return input.value as Mode;
    }
  }
  return "fg";
}

function showBanner(text: string | null, kind: "error" | "info" = "error"): void {
  if (!text) {
    bannerEl.hidden = true;
    return;
  }
  bannerEl.hidden = false;
  bannerEl.textContent = text;
  bannerEl.className = `banner ${kind}`;
  bannerEl.onclick = () => {
    bannerEl.hidden = true;
  };
}

function redraw(): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (image) {
    ctx.drawImage(image, 0, 0);
  }
  if (maskBitmap) {
    ctx.drawImage(maskBitmap, 0, 0);
  }
  const scaleX = canvas.width / Math.max(state.imageWidth, 1);
  const scaleY = canvas.height / Math.max(state.imageHeight, 1);
  for (const stroke of state.strokes.submitted.concat(state.strokes.pending)) {
    ctx.strokeStyle = stroke.mode === "fg" ? "#22bb22" : "#cc3333";
    ctx.lineWidth = 2;
    ctx.beginPath();
    stroke.points.forEach(([x, y], i) => {
      if (i === 0) {
        ctx.moveTo(x * scaleX, y * scaleY);
      } else {
        ctx.lineTo(x * scaleX, y * scaleY);
      }
    });
    ctx.stroke();
  }
  submitBtn.disabled = state.submitBlockReason() !== null;
}

async function setMaskFromPng(png: Uint8Array): Promise<void> {
  // Decode through the browser, then recolor via the pure overlay renderer
  // so displayed pixels are exactly the service's mask pixels.
  const blob = new Blob([png.slice().buffer], { type: "image/png" });
  const decoded = await createImageBitmap(blob);
  const scratch = new OffscreenCanvas(decoded.width, decoded.height);
  const sctx = scratch.getContext("2d")!;
  sctx.drawImage(decoded, 0, 0);
  const data = sctx.getImageData(0, 0, decoded.width, decoded.height);
  const gray = new Uint8Array(decoded.width * decoded.height);
  for (let i = 0; i < gray.length; i++) {
    gray[i] = data.data[i * 4];
  }
  const overlay = renderOverlay({
    width: decoded.width,
    height: decoded.height,
    pixels: gray,
  });
  const rgba = new Uint8ClampedArray(overlay.length);
  rgba.set(overlay);
  sctx.putImageData(new ImageData(rgba, decoded.width, decoded.height), 0, 0);
  maskBitmap = await createImageBitmap(scratch);
}

fileInput.addEventListener("change", async () => {
  const file = fileInput.files?.[0];
  if (!file) {
    return;
  }
  try {
    const bytes = new Uint8Array(await file.arrayBuffer());
    const sid = await client.createSession(bytes);
    image = await createImageBitmap(new Blob([bytes.buffer], { type: file.type }));
    canvas.width = image.width;
    canvas.height = image.height;
    state.startSession(sid, image.width, image.height);
    maskBitmap = null;
    showBanner(null);
    redraw();
  } catch (err) {
    showBanner(err instanceof ServiceError ? err.message : `upload failed: ${err}`);
  }
});

canvas.addEventListener("pointerdown", (ev) => {
  if (!state.sessionId) {
    return;
  }
  drawing = true;
  canvas.setPointerCapture(ev.pointerId);
  const rect = canvas.getBoundingClientRect();
  state.strokes.begin(
    currentMode(),
    canvasToImage(
      ev.clientX - rect.left, ev.clientY - rect.top,
      rect.width, rect.height, state.imageWidth, state.imageHeight,
    ),
  );
  redraw();
});

canvas.addEventListener("pointermove", (ev) => {
  if (!drawing) {
    return;
  }
  const rect = canvas.getBoundingClientRect();
  state.strokes.extend(
    canvasToImage(
      ev.clientX - rect.left, ev.clientY - rect.top,
      rect.width, rect.height, state.imageWidth, state.imageHeight,
    ),
  );
  redraw();
});

canvas.addEventListener("pointerup", () => {
  drawing = false;
  state.strokes.finish();
  redraw();
});

submitBtn.addEventListener("click", async () => {
  const reason = state.submitBlockReason();
  if (reason !== null) {
    showBanner(reason, "info");
    return;
  }
  const payload = state.strokes.payload();
  state.beginSubmit();
  redraw();
  try {
    const result = await client.submitScribbles(state.sessionId!, payload, state.revision);
    const png = decodeBase64(result.maskBase64);
    state.completeSubmit(png, result.revision);
    await setMaskFromPng(png);
    showBanner(null);
  } catch (err) {
    state.failSubmit(err instanceof ServiceError ? err.message : String(err));
    showBanner(state.banner?.text ?? "submit failed");
  }
  redraw();
});

clearBtn.addEventListener("click", async () => {
  if (state.sessionId) {
    try {
      await client.deleteSession(state.sessionId);
    } catch {
      // session teardown is best-effort; a fresh upload starts a new one
    }
  }
  state.clear();
  image = null;
  maskBitmap = null;
  fileInput.value = "";
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  redraw();
});

redraw();
