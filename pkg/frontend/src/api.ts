/** Typed client for the advisor service. The only configuration is the base URL. */

import type { ApiError, DecisionDTO, DraftStateDTO, RecommendationDTO } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class AdvisorApiError extends Error {
  readonly status: number;
  readonly body: ApiError;

  constructor(status: number, body: ApiError) {
    super(`${body.code}: ${body.message}`);
    this.status = status;
    this.body = body;
  }
}

export class AdvisorClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn: FetchLike = (...args) => fetch(...args)) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  private async post<T>(path: string, payload: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (!response.ok) {
      let body: ApiError;
      try {
        body = (await response.json()) as ApiError;
      } catch {
        body = { code: "unknown_error", message: `HTTP ${response.status}` };
      }
      throw new AdvisorApiError(response.status, body);
    }
    return (await response.json()) as T;
  }

  recommend(state: DraftStateDTO): Promise<RecommendationDTO> {
    return this.post<RecommendationDTO>("/draft/recommend", state);
  }

  whatIf(state: DraftStateDTO, hypothetical: DecisionDTO): Promise<RecommendationDTO> {
    return this.post<RecommendationDTO>("/draft/what-if", { state, hypothetical });
  }

  async health(): Promise<{ status: string }> {
    const response = await this.fetchFn(`${this.baseUrl}/health`);
    return (await response.json()) as { status: string };
  }
}
