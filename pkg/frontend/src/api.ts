import { ScribblePayload, ServiceError, SubmitResult } from "./types";

async function errorMessage(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { error?: string };
    return body.error ?? resp.statusText;
  } catch {
    return resp.statusText;
  }
}

/** Thin client for the segmentation session service. */
export class ServiceClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  async createSession(png: ArrayBuffer | Uint8Array): Promise<string> {
    const body = png instanceof Uint8Array ? new Uint8Array(png) : png;
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "image/png" },
      body,
    });
    if (resp.status !== 201) {
      throw new ServiceError(resp.status, await errorMessage(resp));
    }
    const data = (await resp.json()) as { session_id: string };
    return data.session_id;
  }

  /**
   * Submit added scribbles with optimistic concurrency.
   *
   * Sends If-Match with the revision we last saw.  On a 409 (another update
   * won the race) the client refetches the current mask and retries exactly
   * once with the server's revision.
   */
  async submitScribbles(
    sessionId: string,
    payload: ScribblePayload,
    revision: number | null,
  ): Promise<SubmitResult> {
    const attempt = async (rev: number | null): Promise<Response> => {
      const headers: Record<string, string> = { "Content-Type": "application/json" };
      if (rev !== null) {
        headers["If-Match"] = String(rev);
      }
      return this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/scribbles`, {
        method: "POST",
        headers,
        body: JSON.stringify(payload),
      });
    };

    let resp = await attempt(revision);
    let retried = false;
    if (resp.status === 409) {
      const conflict = (await resp.json()) as { revision: number };
      await this.getMask(sessionId); // refresh our view of the server state
      resp = await attempt(conflict.revision);
      retried = true;
    }
    if (!resp.ok) {
      throw new ServiceError(resp.status, await errorMessage(resp));
    }
    const data = (await resp.json()) as { mask: string; revision: number };
    return { maskBase64: data.mask, revision: data.revision, retried };
  }

  async getMask(sessionId: string): Promise<Uint8Array> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/mask`);
    if (!resp.ok) {
      throw new ServiceError(resp.status, await errorMessage(resp));
    }
    return new Uint8Array(await resp.arrayBuffer());
  }

  async deleteSession(sessionId: string): Promise<void> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}`, {
      method: "DELETE",
    });
    if (resp.status !== 204 && resp.status !== 404) {
      throw new ServiceError(resp.status, await errorMessage(resp));
    }
  }
}

export function decodeBase64(b64: string): Uint8Array {
  if (typeof atob === "function") {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) {
      out[i] = bin.charCodeAt(i);
    }
    return out;
  }
  return new Uint8Array(Buffer.from(b64, "base64"));
}
