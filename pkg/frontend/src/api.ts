/** Thin client for the /v1 API with one in-flight request per endpoint:
 * starting a new request aborts the previous one on the same endpoint. */

import type {
  CommitResponse,
  CreateSessionResponse,
  Endpoint,
  HealthResponse,
  KeywordsResponse,
  ResponsesResponse,
} from './types.js';

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  private controllers: Partial<Record<Endpoint, AbortController>> = {};

  constructor(private base: string = '') {}

  private async request<T>(path: string, init?: RequestInit, endpoint?: Endpoint): Promise<T> {
    let signal: AbortSignal | undefined;
    if (endpoint) {
      this.controllers[endpoint]?.abort();
      const controller = new AbortController();
      this.controllers[endpoint] = controller;
      signal = controller.signal;
    }
    const response = await fetch(this.base + path, {
      headers: { 'content-type': 'application/json' },
      signal,
      ...init,
    });
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body: keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.request<HealthResponse>('/v1/health');
  }

  createSession(): Promise<CreateSessionResponse> {
    return this.request<CreateSessionResponse>('/v1/sessions', { method: 'POST' });
  }

  suggestKeywords(sessionId: string, partnerUtterance: string): Promise<KeywordsResponse> {
    return this.request<KeywordsResponse>(
      `/v1/sessions/${sessionId}/keywords`,
      { method: 'POST', body: JSON.stringify({ partner_utterance: partnerUtterance }) },
      'keywords',
    );
  }

  generateResponses(sessionId: string, keywords: string[], num = 3): Promise<ResponsesResponse> {
    return this.request<ResponsesResponse>(
      `/v1/sessions/${sessionId}/responses`,
      { method: 'POST', body: JSON.stringify({ keywords, num }) },
      'responses',
    );
  }

  commit(sessionId: string, text: string): Promise<CommitResponse> {
    return this.request<CommitResponse>(
      `/v1/sessions/${sessionId}/commit`,
      { method: 'POST', body: JSON.stringify({ text }) },
      'commit',
    );
  }
}
