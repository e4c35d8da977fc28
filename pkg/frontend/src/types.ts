export type Mode = "fg" | "bg";

export type Point = [number, number];

export type Polyline = Point[];

export interface ScribblePayload {
  foreground: Polyline[];
  background: Polyline[];
}

export interface SubmitResult {
  maskBase64: string;
  revision: number;
  retried: boolean;
}

export class ServiceError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(`${status}: ${message}`);
  }
}
