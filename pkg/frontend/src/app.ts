/** DOM wiring for the cue -> response loop.
 *
 * Layout: transcript, partner-utterance input, keyword chips (plus a
 * free-text keyword field as fallback), editable response candidates, a
 * draft editor and commit button. Everything is reachable with the keyboard
 * alone: chips and candidates are real buttons, the banner is a live
 * region, and focus moves to the next step after each action.
 */

import { ApiClient, ApiError } from './api.js';
import {
  initialState,
  nextRequestId,
  reduce,
  renderTranscript,
  type UiEvent,
  type UiState,
} from './state.js';

export class App {
  private state: UiState = initialState();
  private log: UiEvent[] = [];

  constructor(
    private api: ApiClient,
    private root: HTMLElement,
  ) {}

  dispatch(event: UiEvent): void {
    this.log.push(event);
    this.state = reduce(this.state, event);
    this.render();
  }

  eventLog(): UiEvent[] {
    return [...this.log];
  }

  async start(): Promise<void> {
    try {
      const health = await this.api.health();
      if (health.status !== 'ok') {
        this.renderBanner('models loading, retry shortly');
        return;
      }
      const session = await this.api.createSession();
      this.dispatch({ type: 'session_created', sessionId: session.session_id });
    } catch (error) {
      if (error instanceof ApiError && error.status === 503) {
        this.renderBanner('models loading, retry shortly');
      } else {
        this.renderBanner(`cannot reach service: ${String(error)}`);
      }
    }
  }

  async submitPartnerUtterance(text: string): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId || !text.trim()) return;
    const requestId = nextRequestId(this.state);
    this.dispatch({ type: 'partner_submitted', text: text.trim(), requestId });
    try {
      const body = await this.api.suggestKeywords(sessionId, text.trim());
      this.dispatch({ type: 'suggestions_received', requestId, keywords: body.keywords });
    } catch (error) {
      if (this.isAbort(error)) return;
      this.dispatch({
        type: 'request_failed', endpoint: 'keywords', requestId,
        message: this.describe(error),
      });
    }
  }

  async pickKeyword(keyword: string): Promise<void> {
    const sessionId = this.state.sessionId;
    if (!sessionId || !keyword.trim()) return;
    const requestId = nextRequestId(this.state);
    this.dispatch({ type: 'keyword_picked', keyword: keyword.trim(), requestId });
    try {
      const body = await this.api.generateResponses(sessionId, [keyword.trim()], 3);
      this.dispatch({ type: 'candidates_received', requestId, candidates: body.responses });
    } catch (error) {
      if (this.isAbort(error)) return;
      this.dispatch({
        type: 'request_failed', endpoint: 'responses', requestId,
        message: this.describe(error),
      });
    }
  }

  async commitDraft(): Promise<void> {
    const sessionId = this.state.sessionId;
    const text = this.state.draft.trim();
    if (!sessionId || !text) return; // blocked client-side
    const requestId = nextRequestId(this.state);
    this.dispatch({ type: 'commit_started', requestId });
    try {
      await this.api.commit(sessionId, text);
      this.dispatch({ type: 'commit_succeeded', requestId, text });
      this.focus('#partner-input');
    } catch (error) {
      if (this.isAbort(error)) return;
      // draft preserved in state; banner offers retry
      this.dispatch({
        type: 'request_failed', endpoint: 'commit', requestId,
        message: this.describe(error),
      });
    }
  }

  private isAbort(error: unknown): boolean {
    return error instanceof DOMException && error.name === 'AbortError';
  }

  private describe(error: unknown): string {
    if (error instanceof ApiError) return `${error.status} ${error.message}`;
    return String(error);
  }

  private focus(selector: string): void {
    const el = this.root.querySelector<HTMLElement>(selector);
    el?.focus();
  }

  private renderBanner(text: string): void {
    const banner = this.root.querySelector<HTMLElement>('#banner');
    if (banner) {
      banner.textContent = text;
      banner.hidden = !text;
    }
  }

  render(): void {
    const transcript = this.root.querySelector<HTMLElement>('#transcript');
    if (transcript) {
      transcript.replaceChildren(
        ...renderTranscript(this.state).map((line) => {
          const item = document.createElement('li');
          item.textContent = line;
          return item;
        }),
      );
    }

    this.renderBanner(this.state.banner ?? '');

    const chipBox = this.root.querySelector<HTMLElement>('#chips');
    if (chipBox) {
      chipBox.replaceChildren(
        ...this.state.chips.map((chip) => {
          const button = document.createElement('button');
          button.type = 'button';
          button.className = `chip chip-${chip.source}`;
          button.textContent = `${chip.text} (${chip.source})`;
          button.setAttribute('aria-label', `keyword ${chip.text}, ${chip.source}`);
          button.disabled = this.state.chipsStale;
          button.addEventListener('click', () => void this.pickKeyword(chip.text));
          return button;
        }),
      );
      chipBox.classList.toggle('stale', this.state.chipsStale);
    }
    const freeKeyword = this.root.querySelector<HTMLElement>('#keyword-free');
    if (freeKeyword) {
      freeKeyword.classList.toggle('highlight', this.state.chips.length === 0);
    }

    const candidateBox = this.root.querySelector<HTMLElement>('#candidates');
    if (candidateBox) {
      candidateBox.replaceChildren(
        ...this.state.candidates.map((candidate) => {
          const button = document.createElement('button');
          button.type = 'button';
          button.className = 'candidate';
          button.textContent = candidate.text;
          button.setAttribute('aria-label', `candidate response: ${candidate.text}`);
          button.addEventListener('click', () => {
            this.dispatch({ type: 'candidate_selected', text: candidate.text });
            this.focus('#draft');
          });
          return button;
        }),
      );
    }

    const draft = this.root.querySelector<HTMLTextAreaElement>('#draft');
    if (draft && draft.value !== this.state.draft) {
      draft.value = this.state.draft;
    }
    const commit = this.root.querySelector<HTMLButtonElement>('#commit');
    if (commit) {
      commit.disabled = !this.state.draft.trim();
    }
  }

  wire(): void {
    const partnerInput = this.root.querySelector<HTMLInputElement>('#partner-input');
    const partnerSend = this.root.querySelector<HTMLButtonElement>('#partner-send');
    const send = () => {
      if (partnerInput) {
        void this.submitPartnerUtterance(partnerInput.value);
        partnerInput.value = '';
      }
    };
    partnerSend?.addEventListener('click', send);
    partnerInput?.addEventListener('keydown', (e) => {
      if (e.key === 'Enter') send();
    });

    const freeInput = this.root.querySelector<HTMLInputElement>('#keyword-free');
    freeInput?.addEventListener('keydown', (e) => {
      if (e.key === 'Enter' && freeInput.value.trim()) {
        void this.pickKeyword(freeInput.value);
        freeInput.value = '';
      }
    });

    const draft = this.root.querySelector<HTMLTextAreaElement>('#draft');
    draft?.addEventListener('input', () => {
      this.dispatch({ type: 'draft_edited', text: draft.value });
    });

    const commit = this.root.querySelector<HTMLButtonElement>('#commit');
    commit?.addEventListener('click', () => void this.commitDraft());
  }
}

export function boot(): void {
  const root = document.getElementById('app');
  if (!root) throw new Error('missing #app root');
  const app = new App(new ApiClient(''), root);
  app.wire();
  app.render();
  void app.start();
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  boot();
}
