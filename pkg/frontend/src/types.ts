/** DTOs of the /v1 JSON API. */

export interface KeywordChip {
  text: string;
  source: 'extractive' | 'generative' | 'human';
  score: number;
}

export interface ResponseCandidate {
  text: string;
  score: number;
  group: number;
}

export interface HealthResponse {
  status: 'ok' | 'loading';
  models: { name: string; loaded: boolean }[];
}

export interface CreateSessionResponse {
  session_id: string;
}

export interface KeywordsResponse {
  keywords: KeywordChip[];
}

export interface ResponsesResponse {
  responses: ResponseCandidate[];
  degenerate: boolean;
}

export interface CommitResponse {
  ok: boolean;
  history_length: number;
}

export type Endpoint = 'keywords' | 'responses' | 'commit';

export interface Message {
  speaker: 'partner' | 'user';
  text: string;
}

export interface EditLogEntry {
  candidate: string;
  committed: string;
  distance: number;
}
