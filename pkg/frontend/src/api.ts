/** Typed client for the study service's /api contract. */

export interface SessionInfo {
  session_id: string;
  total_pairs: number;
}

export interface PairInfo {
  pair_index: number;
  total_pairs: number;
  left_image_url: string;
  right_image_url: string;
  reference_image_url: string;
}

export type NextResponse = PairInfo | { done: true };

export interface VoteProgress {
  completed: number;
  total: number;
}

export interface VoteResult {
  accepted: boolean;
  progress: VoteProgress;
}

export type Winner = 'left' | 'right';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    throw new ApiError(0, `network error: ${String(err)}`);
  }
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

/** What the UI needs from the server; ApiClient is the HTTP implementation. */
export interface StudyApi {
  createSession(observerId: string): Promise<SessionInfo>;
  nextPair(sessionId: string): Promise<NextResponse>;
  vote(sessionId: string, pairIndex: number, winner: Winner): Promise<VoteResult>;
  imageUrl(path: string): string;
}

export class ApiClient implements StudyApi {
  constructor(private readonly baseUrl: string = '') {}

  private url(path: string): string {
    return this.baseUrl + path;
  }

  createSession(observerId: string): Promise<SessionInfo> {
    return request<SessionInfo>(this.url('/api/sessions'), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ observer_id: observerId }),
    });
  }

  nextPair(sessionId: string): Promise<NextResponse> {
    return request<NextResponse>(this.url(`/api/sessions/${sessionId}/next`));
  }

  vote(sessionId: string, pairIndex: number, winner: Winner): Promise<VoteResult> {
    return request<VoteResult>(this.url(`/api/sessions/${sessionId}/votes`), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ pair_index: pairIndex, winner }),
    });
  }

  /** Absolute URL for an image path returned by the API. */
  imageUrl(path: string): string {
    return this.url(path);
  }
}

export function isDone(next: NextResponse): next is { done: true } {
  return (next as { done?: boolean }).done === true;
}
