/** Study session state machine: one pair on screen, votes strictly in order. */

import { ApiError, PairInfo, StudyApi, Winner, isDone } from './api.js';

export type Phase = 'start' | 'comparing' | 'done' | 'error';

export interface SessionState {
  phase: Phase;
  observerId: string;
  sessionId: string;
  totalPairs: number;
  pair: PairInfo | null;
  /** pairs answered so far (the server cursor) */
  completed: number;
  submitting: boolean;
  errorMessage: string;
}

export type Listener = (state: SessionState) => void;

const INITIAL: SessionState = {
  phase: 'start',
  observerId: '',
  sessionId: '',
  totalPairs: 0,
  pair: null,
  completed: 0,
  submitting: false,
  errorMessage: '',
};

export class StudySession {
  private state: SessionState = { ...INITIAL };
  private listeners: Listener[] = [];

  constructor(private readonly api: StudyApi) {}

  getState(): SessionState {
    return this.state;
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
    listener(this.state);
  }

  private update(patch: Partial<SessionState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  /** Create or resume the observer's session and load its current pair. */
  async start(observerId: string): Promise<void> {
    const trimmed = observerId.trim();
    if (!trimmed) {
      this.update({ phase: 'start', errorMessage: 'Please enter a name.' });
      return;
    }
    try {
      const info = await this.api.createSession(trimmed);
      this.update({
        observerId: trimmed,
        sessionId: info.session_id,
        totalPairs: info.total_pairs,
        errorMessage: '',
      });
      await this.refresh();
    } catch (err) {
      this.update({ phase: 'error', errorMessage: describe(err) });
    }
  }

  /** Re-read the server cursor; used on load and to recover from conflicts. */
  async refresh(): Promise<void> {
    try {
      const next = await this.api.nextPair(this.state.sessionId);
      if (isDone(next)) {
        this.update({
          phase: 'done',
          pair: null,
          completed: this.state.totalPairs,
          submitting: false,
        });
      } else {
        this.update({
          phase: 'comparing',
          pair: next,
          totalPairs: next.total_pairs,
          completed: next.pair_index,
          submitting: false,
        });
      }
    } catch (err) {
      this.update({ phase: 'error', errorMessage: describe(err), submitting: false });
    }
  }

  /** Submit the forced choice for the pair on screen. */
  async vote(winner: Winner): Promise<void> {
    const { pair, submitting, sessionId } = this.state;
    if (!pair || submitting) return; // one in-flight vote at a time
    this.update({ submitting: true });
    try {
      const result = await this.api.vote(sessionId, pair.pair_index, winner);
      this.update({ completed: result.progress.completed });
      await this.refresh();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        await this.refresh(); // lost a race with ourselves; trust the server cursor
        return;
      }
      this.update({ phase: 'error', errorMessage: describe(err), submitting: false });
    }
  }

  retry(): Promise<void> {
    if (this.state.sessionId) return this.refresh();
    this.update({ ...INITIAL });
    return Promise.resolve();
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return err.status === 0 ? 'Cannot reach the study server.' : `Server error: ${err.message}`;
  }
  return String(err);
}
