/** Mask overlay rendering: a pure function of the service's mask pixels. */

export interface MaskImage {
  width: number;
  height: number;
  /** grayscale bytes, 0 = background, nonzero = foreground */
  pixels: Uint8Array;
}

export const OVERLAY_COLOR: [number, number, number] = [0, 220, 220];
export const OVERLAY_ALPHA = 128; // 50% opacity

/**
 * RGBA overlay for a mask: translucent cyan on foreground, fully
 * transparent elsewhere.  The mask bytes are never modified; the overlay is
 * a rendering of them, pixel for pixel.
 */
export function renderOverlay(mask: MaskImage): Uint8ClampedArray {
  const out = new Uint8ClampedArray(mask.width * mask.height * 4);
  const [r, g, b] = OVERLAY_COLOR;
  for (let i = 0; i < mask.pixels.length; i++) {
    if (mask.pixels[i] > 0) {
      out[i * 4] = r;
      out[i * 4 + 1] = g;
      out[i * 4 + 2] = b;
      out[i * 4 + 3] = OVERLAY_ALPHA;
    }
  }
  return out;
}

/** Foreground indicator per pixel, for comparisons in tests. */
export function overlayCoverage(overlay: Uint8ClampedArray): Uint8Array {
  const n = overlay.length / 4;
  const out = new Uint8Array(n);
  for (let i = 0; i < n; i++) {
    out[i] = overlay[i * 4 + 3] > 0 ? 1 : 0;
  }
  return out;
}
