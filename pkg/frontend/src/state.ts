/** UI state as a pure reduction over (server responses, user events).
 *
 * The reducer owns every rule the view needs: single in-flight request per
 * endpoint (stale responses are dropped by request id), committed messages
 * are immutable, and commits log the token edit distance between the chosen
 * candidate and the committed text.
 */

import { tokenEditDistance } from './editDistance.js';
import type {
  EditLogEntry,
  Endpoint,
  KeywordChip,
  Message,
  ResponseCandidate,
} from './types.js';

export interface UiState {
  sessionId: string | null;
  messages: Message[];
  chips: KeywordChip[];
  chipsStale: boolean;
  candidates: ResponseCandidate[];
  draft: string;
  pickedCandidate: string | null;
  pickedKeyword: string | null;
  pending: Record<Endpoint, number | null>;
  banner: string | null;
  editLog: EditLogEntry[];
  requestCounter: number;
}

export type UiEvent =
  | { type: 'session_created'; sessionId: string }
  | { type: 'partner_submitted'; text: string; requestId: number }
  | { type: 'suggestions_received'; requestId: number; keywords: KeywordChip[] }
  | { type: 'keyword_picked'; keyword: string; requestId: number }
  | { type: 'candidates_received'; requestId: number; candidates: ResponseCandidate[] }
  | { type: 'candidate_selected'; text: string }
  | { type: 'draft_edited'; text: string }
  | { type: 'commit_started'; requestId: number }
  | { type: 'commit_succeeded'; requestId: number; text: string }
  | { type: 'request_failed'; endpoint: Endpoint; requestId: number; message: string };

export function initialState(): UiState {
  return {
    sessionId: null,
    messages: [],
    chips: [],
    chipsStale: false,
    candidates: [],
    draft: '',
    pickedCandidate: null,
    pickedKeyword: null,
    pending: { keywords: null, responses: null, commit: null },
    banner: null,
    editLog: [],
    requestCounter: 0,
  };
}

export function nextRequestId(state: UiState): number {
  return state.requestCounter + 1;
}

export function reduce(state: UiState, event: UiEvent): UiState {
  switch (event.type) {
    case 'session_created':
      return { ...initialState(), sessionId: event.sessionId };

    case 'partner_submitted':
      // the partner turn is committed immediately; chips go stale until the
      // suggestion response lands
      return {
        ...state,
        messages: [...state.messages, { speaker: 'partner', text: event.text }],
        chipsStale: true,
        banner: null,
        pending: { ...state.pending, keywords: event.requestId },
        requestCounter: Math.max(state.requestCounter, event.requestId),
      };

    case 'suggestions_received':
      if (state.pending.keywords !== event.requestId) return state; // superseded
      return {
        ...state,
        chips: event.keywords,
        chipsStale: false,
        candidates: [],
        pickedKeyword: null,
        pickedCandidate: null,
        pending: { ...state.pending, keywords: null },
      };

    case 'keyword_picked':
      return {
        ...state,
        pickedKeyword: event.keyword,
        banner: null,
        pending: { ...state.pending, responses: event.requestId },
        requestCounter: Math.max(state.requestCounter, event.requestId),
      };

    case 'candidates_received':
      if (state.pending.responses !== event.requestId) return state; // superseded
      return {
        ...state,
        candidates: event.candidates,
        pending: { ...state.pending, responses: null },
      };

    case 'candidate_selected':
      return { ...state, pickedCandidate: event.text, draft: event.text };

    case 'draft_edited':
      return { ...state, draft: event.text };

    case 'commit_started':
      return {
        ...state,
        pending: { ...state.pending, commit: event.requestId },
        requestCounter: Math.max(state.requestCounter, event.requestId),
      };

    case 'commit_succeeded': {
      if (state.pending.commit !== event.requestId) return state;
      const entry: EditLogEntry = {
        candidate: state.pickedCandidate ?? '',
        committed: event.text,
        distance: tokenEditDistance(state.pickedCandidate ?? '', event.text),
      };
      return {
        ...state,
        messages: [...state.messages, { speaker: 'user', text: event.text }],
        chips: [],
        candidates: [],
        draft: '',
        pickedCandidate: null,
        pickedKeyword: null,
        pending: { ...state.pending, commit: null },
        editLog: [...state.editLog, entry],
      };
    }

    case 'request_failed':
      return {
        ...state,
        banner: `${event.endpoint}: ${event.message}`,
        chipsStale: event.endpoint === 'keywords' ? true : state.chipsStale,
        pending: { ...state.pending, [event.endpoint]: null },
      };
  }
}

export function replay(events: UiEvent[]): UiState {
  return events.reduce(reduce, initialState());
}

/** Rendered transcript: what the message list shows, one line per turn. */
export function renderTranscript(state: UiState): string[] {
  return state.messages.map((m) => `${m.speaker}: ${m.text}`);
}
