import { StrokeStore } from "./strokes";

export type Banner = { kind: "error" | "info"; text: string } | null;

/**
 * UI session state machine.  Enforces: a session before strokes, both
 * classes before the first submit (mirrors the service's 422), and a single
 * in-flight submit.
 */
export class UiState {
  sessionId: string | null = null;
  revision: number | null = null;
  imageWidth = 0;
  imageHeight = 0;
  strokes = new StrokeStore();
  maskPng: Uint8Array | null = null;
  banner: Banner = null;
  private inFlight = false;

  startSession(sessionId: string, width: number, height: number): void {
    this.sessionId = sessionId;
    this.revision = 0;
    this.imageWidth = width;
    this.imageHeight = height;
    this.strokes.reset();
    this.maskPng = null;
    this.banner = null;
  }

  /** Reason the submit button is disabled, or null when allowed. */
  submitBlockReason(): string | null {
    if (!this.sessionId) {
      return "upload an image first";
    }
    if (this.inFlight) {
      return "a submit is already in flight";
    }
    if (!this.strokes.hasPending()) {
      return "draw at least one stroke before submitting";
    }
    if (!this.strokes.coversBothClasses()) {
      return "need at least one foreground and one background stroke";
    }
    return null;
  }

  beginSubmit(): boolean {
    if (this.submitBlockReason() !== null) {
      return false;
    }
    this.inFlight = true;
    return true;
  }

  completeSubmit(maskPng: Uint8Array, revision: number): void {
    this.maskPng = maskPng;
    this.revision = revision;
    this.strokes.markSubmitted();
    this.inFlight = false;
    this.banner = null;
  }

  failSubmit(message: string): void {
    this.inFlight = false;
    this.banner = { kind: "error", text: message };
  }

  isBusy(): boolean {
    return this.inFlight;
  }

  clear(): void {
    this.sessionId = null;
    this.revision = null;
    this.maskPng = null;
    this.strokes.reset();
    this.banner = null;
    this.inFlight = false;
  }
}
