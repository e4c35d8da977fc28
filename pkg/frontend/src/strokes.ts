import { Mode, Point, Polyline, ScribblePayload } from "./types";

export interface Stroke {
  mode: Mode;
  points: Point[];
}

/**
 * Map a canvas-space position to image pixel coordinates.
 *
 * The canvas may be zoomed/stretched by CSS; strokes are always stored and
 * sent in image pixel space so the payload is independent of the display.
 */
export function canvasToImage(
  canvasX: number,
  canvasY: number,
  canvasWidth: number,
  canvasHeight: number,
  imageWidth: number,
  imageHeight: number,
): Point {
  const x = (canvasX * imageWidth) / canvasWidth;
  const y = (canvasY * imageHeight) / canvasHeight;
  return [
    Math.min(Math.max(Math.round(x), 0), imageWidth - 1),
    Math.min(Math.max(Math.round(y), 0), imageHeight - 1),
  ];
}

function perpendicularDistance(p: Point, a: Point, b: Point): number {
  const dx = b[0] - a[0];
  const dy = b[1] - a[1];
  const len = Math.hypot(dx, dy);
  if (len === 0) {
    return Math.hypot(p[0] - a[0], p[1] - a[1]);
  }
  return Math.abs(dy * p[0] - dx * p[1] + b[0] * a[1] - b[1] * a[0]) / len;
}

/** Douglas-Peucker simplification; endpoints are always kept. */
export function simplifyPolyline(points: Polyline, tolerance = 1.0): Polyline {
  if (points.length <= 2) {
    return points.slice();
  }
  let maxDist = -1;
  let index = 0;
  const last = points.length - 1;
  for (let i = 1; i < last; i++) {
    const d = perpendicularDistance(points[i], points[0], points[last]);
    if (d > maxDist) {
      maxDist = d;
      index = i;
    }
  }
  if (maxDist <= tolerance) {
    return [points[0], points[last]];
  }
  const left = simplifyPolyline(points.slice(0, index + 1), tolerance);
  const right = simplifyPolyline(points.slice(index), tolerance);
  return left.slice(0, -1).concat(right);
}

/**
 * Accumulates strokes locally.  Pending strokes are the ones not yet
 * accepted by the service; submitted ones are kept for rendering.
 */
export class StrokeStore {
  submitted: Stroke[] = [];
  pending: Stroke[] = [];
  private active: Stroke | null = null;

  begin(mode: Mode, point: Point): void {
    this.active = { mode, points: [point] };
  }

  extend(point: Point): void {
    if (this.active) {
      this.active.points.push(point);
    }
  }

  finish(): void {
    if (this.active && this.active.points.length > 0) {
      this.pending.push(this.active);
    }
    this.active = null;
  }

  /** Pending strokes as the wire payload, simplified to 1 px tolerance. */
  payload(): ScribblePayload {
    const lines = (mode: Mode): Polyline[] =>
      this.pending
        .filter((s) => s.mode === mode)
        .map((s) => simplifyPolyline(s.points));
    return { foreground: lines("fg"), background: lines("bg") };
  }

  hasPending(): boolean {
    return this.pending.length > 0;
  }

  /** True when the accumulated set after submitting would cover both classes. */
  coversBothClasses(): boolean {
    const all = this.submitted.concat(this.pending);
    return all.some((s) => s.mode === "fg") && all.some((s) => s.mode === "bg");
  }

  markSubmitted(): void {
    this.submitted = this.submitted.concat(this.pending);
    this.pending = [];
  }

  reset(): void {
    this.submitted = [];
    this.pending = [];
    this.active = null;
  }
}
