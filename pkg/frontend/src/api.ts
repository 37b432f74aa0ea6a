import type {
  CancelAck,
  CasesPayload,
  EventBatch,
  SecondaryPayload,
  StudyDetail,
  StudySummary,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** 401: the server wants a bearer token we do not have (or have wrong). */
export class AuthError extends ApiError {
  constructor() {
    super(401, "authorization required");
    this.name = "AuthError";
  }
}

export class ApiClient {
  private token: string | null;

  constructor(
    private readonly base: string = "",
    token: string | null = null,
  ) {
    this.token = token;
  }

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const headers: Record<string, string> = { Accept: "application/json" };
    if (this.token) {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    const resp = await fetch(this.base + path, { ...init, headers });
    if (resp.status === 401) {
      throw new AuthError();
    }
    if (!resp.ok) {
      let message = `${resp.status}`;
      try {
        const body = (await resp.json()) as { error?: string };
        if (body.error) message = body.error;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, message);
    }
    return (await resp.json()) as T;
  }

  studies(): Promise<StudySummary[]> {
    return this.request("/api/studies");
  }

  study(name: string): Promise<StudyDetail> {
    return this.request(`/api/studies/${encodeURIComponent(name)}`);
  }

  cases(name: string): Promise<CasesPayload> {
    return this.request(`/api/studies/${encodeURIComponent(name)}/cases`);
  }

  secondary(name: string): Promise<SecondaryPayload> {
    return this.request(`/api/studies/${encodeURIComponent(name)}/secondary`);
  }

  events(study: string, since: number, timeout: number): Promise<EventBatch> {
    const query = new URLSearchParams({
      study,
      since: String(since),
      timeout: String(timeout),
    });
    return this.request(`/api/events?${query}`);
  }

  cancel(study: string, caseId: string): Promise<CancelAck> {
    return this.request(
      `/api/studies/${encodeURIComponent(study)}/cases/${encodeURIComponent(caseId)}/cancel`,
      { method: "POST" },
    );
  }
}
