import { describe, expect, it } from 'vitest';

import {
  initialState,
  reduce,
  renderTranscript,
  replay,
  type UiEvent,
} from '../src/state.js';

const chip = (text: string, source: 'extractive' | 'generative' = 'extractive') => ({
  text, source, score: 0.5,
});
const candidate = (text: string) => ({ text, score: -0.5, group: 0 });

function scriptedSession(): UiEvent[] {
  return [
    { type: 'session_created', sessionId: 's000000' },
    { type: 'partner_submitted', text: 'how about some coffee ?', requestId: 1 },
    {
      type: 'suggestions_received', requestId: 1,
      keywords: [chip('coffee'), chip('tea', 'generative')],
    },
    { type: 'keyword_picked', keyword: 'coffee', requestId: 2 },
    {
      type: 'candidates_received', requestId: 2,
      candidates: [candidate('i will have the coffee now .'),
                   candidate('the coffee is just here .'),
                   candidate('we can do the coffee again .')],
    },
    { type: 'candidate_selected', text: 'i will have the coffee now .' },
    { type: 'draft_edited', text: 'i will have the coffee later .' },
    { type: 'commit_started', requestId: 3 },
    { type: 'commit_succeeded', requestId: 3, text: 'i will have the coffee later .' },
  ];
}

describe('reducer', () => {
  it('is pure: same events give identical states', () => {
    const a = replay(scriptedSession());
    const b = replay(scriptedSession());
    expect(a).toEqual(b);
  });

  it('replaying the event log reproduces the rendered transcript', () => {
    const events = scriptedSession();
    const live = events.reduce(reduce, initialState());
    const replayed = replay(events);
    expect(renderTranscript(replayed)).toEqual(renderTranscript(live));
    expect(renderTranscript(replayed)).toEqual([
      'partner: how about some coffee ?',
      'user: i will have the coffee later .',
    ]);
  });

  it('committed messages are immutable: later events never rewrite them', () => {
    const events = scriptedSession();
    const state = replay(events);
    const more = reduce(state, { type: 'partner_submitted', text: 'and tea ?', requestId: 4 });
    expect(more.messages.slice(0, 2)).toEqual(state.messages);
  });

  it('logs edit distance 0 for an unedited candidate commit', () => {
    const events = scriptedSession();
    // commit exactly the selected candidate, no edit
    events[6] = { type: 'draft_edited', text: 'i will have the coffee now .' };
    events[8] = { type: 'commit_succeeded', requestId: 3, text: 'i will have the coffee now .' };
    const state = replay(events);
    expect(state.editLog).toHaveLength(1);
    expect(state.editLog[0]?.distance).toBe(0);
  });

  it('logs positive edit distance for an edited commit', () => {
    const state = replay(scriptedSession());
    expect(state.editLog[0]?.distance).toBe(1); // now -> later
  });

  it('drops superseded suggestion responses (single in-flight per endpoint)', () => {
    let state = replay([
      { type: 'session_created', sessionId: 's0' },
      { type: 'partner_submitted', text: 'first ?', requestId: 1 },
      { type: 'partner_submitted', text: 'second ?', requestId: 2 },
    ]);
    state = reduce(state, {
      type: 'suggestions_received', requestId: 1, keywords: [chip('stale')],
    });
    expect(state.chips).toEqual([]); // request 1 superseded by 2
    state = reduce(state, {
      type: 'suggestions_received', requestId: 2, keywords: [chip('fresh')],
    });
    expect(state.chips.map((c) => c.text)).toEqual(['fresh']);
  });

  it('re-pick while pending supersedes the earlier candidates request', () => {
    let state = replay([
      { type: 'session_created', sessionId: 's0' },
      { type: 'partner_submitted', text: 'hello ?', requestId: 1 },
      { type: 'suggestions_received', requestId: 1, keywords: [chip('a'), chip('b')] },
      { type: 'keyword_picked', keyword: 'a', requestId: 2 },
      { type: 'keyword_picked', keyword: 'b', requestId: 3 },
    ]);
    state = reduce(state, {
      type: 'candidates_received', requestId: 2, candidates: [candidate('from a')],
    });
    expect(state.candidates).toEqual([]);
    state = reduce(state, {
      type: 'candidates_received', requestId: 3, candidates: [candidate('from b')],
    });
    expect(state.candidates.map((c) => c.text)).toEqual(['from b']);
  });

  it('failure sets the banner, clears the pending slot, keeps the draft', () => {
    let state = replay(scriptedSession().slice(0, 7));
    expect(state.draft).toBe('i will have the coffee later .');
    state = reduce(state, { type: 'commit_started', requestId: 9 });
    state = reduce(state, {
      type: 'request_failed', endpoint: 'commit', requestId: 9, message: 'network down',
    });
    expect(state.banner).toContain('network down');
    expect(state.pending.commit).toBeNull();
    expect(state.draft).toBe('i will have the coffee later .');
  });

  it('marks chips stale while a keyword request is pending', () => {
    const state = replay([
      { type: 'session_created', sessionId: 's0' },
      { type: 'partner_submitted', text: 'hello ?', requestId: 1 },
    ]);
    expect(state.chipsStale).toBe(true);
    const after = reduce(state, {
      type: 'suggestions_received', requestId: 1, keywords: [chip('x')],
    });
    expect(after.chipsStale).toBe(false);
  });
});
