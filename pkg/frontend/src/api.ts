// Thin typed client over the study service HTTP API.
// fetch is injected so tests can script the backend.

import type { Answers, ItemsResponse, StatusResponse } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: Record<string, unknown>,
  ) {
    super(`HTTP ${status}: ${JSON.stringify(body)}`);
  }

  /** Question id carried by an InvalidAnswer response, if any. */
  get questionId(): string | null {
    const qid = this.body["question_id"];
    return typeof qid === "string" ? qid : null;
  }

  get errorKind(): string {
    const kind = this.body["error"];
    return typeof kind === "string" ? kind : `http-${this.status}`;
  }
}

export class StudyApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    let body: Record<string, unknown> = {};
    try {
      body = (await response.json()) as Record<string, unknown>;
    } catch {
      // non-JSON body; keep it empty
    }
    if (!response.ok) {
      throw new ApiError(response.status, body);
    }
    return body as T;
  }

  private post<T>(path: string, payload?: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: payload === undefined ? undefined : JSON.stringify(payload),
    });
  }

  async createSession(): Promise<string> {
    const body = await this.post<{ session_id: string }>("/api/sessions");
    return body.session_id;
  }

  consent(sessionId: string): Promise<unknown> {
    return this.post(`/api/sessions/${sessionId}/consent`);
  }

  submitUsername(sessionId: string, username: string): Promise<unknown> {
    return this.post(`/api/sessions/${sessionId}/username`, { username });
  }

  getStatus(sessionId: string): Promise<StatusResponse> {
    return this.request<StatusResponse>(`/api/sessions/${sessionId}/status`);
  }

  getItems(sessionId: string): Promise<ItemsResponse> {
    return this.request<ItemsResponse>(`/api/sessions/${sessionId}/items`);
  }

  submitTrackResponse(sessionId: string, rank: number, answers: Answers): Promise<unknown> {
    return this.post(`/api/sessions/${sessionId}/responses/track`, { rank, answers });
  }

  submitGlobalResponse(sessionId: string, answers: Answers): Promise<unknown> {
    return this.post(`/api/sessions/${sessionId}/responses/global`, { answers });
  }
}
