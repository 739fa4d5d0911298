/** Thin client over the pmuse inference API. The UI never computes colors
 * itself; every model decision comes from the server. */

import { Block, BLOCKS, PhraseEntry, SlotRecommendation, StudioCore } from "./types.js";

export class ApiError extends Error {
  constructor(message: string, readonly status: number | null) {
    super(message);
  }
}

interface RecommendResponse {
  recommendations: SlotRecommendation[];
}

interface GenerateResponse {
  colors: string[];
}

/** Trailing empty slots are dropped; interior ones are a request error the
 * server cannot express (its slot lists are positional). */
export function paletteSlots(core: StudioCore): Record<Block, (string | null)[]> {
  const out = {} as Record<Block, (string | null)[]>;
  for (const block of BLOCKS) {
    const slots = core.palettes[block];
    let end = slots.length;
    while (end > 0 && slots[end - 1].type === "empty") end--;
    out[block] = slots.slice(0, end).map((s) => {
      if (s.type === "empty") throw new ApiError(`empty slot inside ${block} palette`, null);
      return s.type === "color" ? s.hex : null;
    });
  }
  return out;
}

function describeDetail(detail: unknown): string {
  if (typeof detail === "string") return detail;
  if (Array.isArray(detail)) {
    return detail
      .map((e) => (e && typeof e === "object" ? `${(e as any).field}: ${(e as any).message}` : String(e)))
      .join("; ");
  }
  return JSON.stringify(detail);
}

export class PmuseClient {
  constructor(
    private readonly base: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async post<T>(path: string, body: unknown): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(`${this.base}${path}`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      });
    } catch (err) {
      throw new ApiError(`server unreachable: ${String(err)}`, null);
    }
    let payload: any = null;
    try {
      payload = await resp.json();
    } catch {
      // non-JSON error body; fall through with status only
    }
    if (!resp.ok) {
      const message = payload?.detail !== undefined ? describeDetail(payload.detail) : resp.statusText;
      throw new ApiError(`${resp.status}: ${message}`, resp.status);
    }
    return payload as T;
  }

  async recommend(core: StudioCore): Promise<SlotRecommendation[]> {
    const body = {
      palettes: paletteSlots(core),
      phrases: core.phrases.map((p: PhraseEntry) => ({ text: p.text, kind: p.kind })),
      k: core.k,
    };
    const resp = await this.post<RecommendResponse>("/v1/recommend", body);
    return resp.recommendations;
  }

  async generate(phrases: PhraseEntry[], postProcess: boolean, length = 5): Promise<string[]> {
    const body = {
      phrases: phrases.map((p) => ({ text: p.text, kind: p.kind })),
      length,
      post_process: postProcess,
    };
    const resp = await this.post<GenerateResponse>("/v1/generate", body);
    return resp.colors;
  }

  async health(): Promise<boolean> {
    try {
      const resp = await this.fetchFn(`${this.base}/v1/health`);
      return resp.ok;
    } catch {
      return false;
    }
  }
}
