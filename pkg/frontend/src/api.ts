import type { FieldPayload, ReportJson, SessionInfo } from "./types.js";

export class ApiError extends Error {
  status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.status = status;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function detailOf(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    // non-JSON error body, fall through
  }
  return `request failed with status ${res.status}`;
}

/** Thin typed wrapper over the service endpoints. All methods throw
 * ApiError with the server's detail string on non-2xx responses. */
export class ApiClient {
  private base: string;
  private fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/$/, "");
    const f = fetchImpl ?? globalThis.fetch;
    if (!f) throw new Error("no fetch implementation available");
    this.fetchImpl = f.bind(globalThis);
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const res = await this.fetchImpl(this.base + path, init);
    if (!res.ok && res.status !== 204) {
      throw new ApiError(res.status, await detailOf(res));
    }
    return res;
  }

  async createSession(): Promise<string> {
    const res = await this.request("/api/sessions", { method: "POST" });
    const body = await res.json();
    return body.id as string;
  }

  async sendPrompt(sessionId: string, text: string,
                   mode = "with_post_and_summary"): Promise<string> {
    const res = await this.request(`/api/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text, mode }),
    });
    const body = await res.json();
    return body.run_id as string;
  }

  async status(sessionId: string): Promise<SessionInfo> {
    const res = await this.request(`/api/sessions/${sessionId}`);
    return (await res.json()) as SessionInfo;
  }

  /** null while the run is still in flight (HTTP 204). */
  async report(sessionId: string): Promise<ReportJson | null> {
    const res = await this.request(`/api/sessions/${sessionId}/report`);
    if (res.status === 204) return null;
    return (await res.json()) as ReportJson;
  }

  async field(sessionId: string, name: string): Promise<FieldPayload> {
    const res = await this.request(
      `/api/sessions/${sessionId}/fields/${encodeURIComponent(name)}`);
    return (await res.json()) as FieldPayload;
  }
}
