import type {
  ActedSessionView,
  ActionBody,
  FramesDoc,
  SessionView,
  TaskDetail,
  TaskRow,
  TrajectoryRow,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function toApiError(res: Response): Promise<ApiError> {
  let code = `HTTP${res.status}`;
  let message = res.statusText;
  try {
    const body = (await res.json()) as { detail?: unknown };
    const detail = body?.detail;
    if (detail && typeof detail === 'object' && !Array.isArray(detail)) {
      const d = detail as { error?: unknown; message?: unknown };
      if (d.error !== undefined) code = String(d.error);
      if (d.message !== undefined) message = String(d.message);
    } else if (detail !== undefined) {
      message = JSON.stringify(detail);
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(res.status, code, message);
}

export class Api {
  constructor(
    readonly base = '',
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async req<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(this.base + path, {
      headers: { 'Content-Type': 'application/json' },
      ...init,
    });
    if (!res.ok) throw await toApiError(res);
    return res.json() as Promise<T>;
  }

  listTasks(): Promise<{ tasks: TaskRow[] }> {
    return this.req('/tasks');
  }

  task(taskId: string): Promise<TaskDetail> {
    return this.req(`/tasks/${encodeURIComponent(taskId)}`);
  }

  createSession(taskId: string, testIndex = 0): Promise<SessionView> {
    return this.req('/sessions', {
      method: 'POST',
      body: JSON.stringify({ task_id: taskId, test_index: testIndex }),
    });
  }

  session(sessionId: string): Promise<SessionView> {
    return this.req(`/sessions/${encodeURIComponent(sessionId)}`);
  }

  act(sessionId: string, body: ActionBody): Promise<ActedSessionView> {
    return this.req(`/sessions/${encodeURIComponent(sessionId)}/actions`, {
      method: 'POST',
      body: JSON.stringify(body),
    });
  }

  // Raw text, not parsed JSON: a downloaded file must byte-match this endpoint.
  async trajectoryText(sessionId: string): Promise<string> {
    const res = await this.fetchFn(
      `${this.base}/sessions/${encodeURIComponent(sessionId)}/trajectory`,
      { headers: { 'Content-Type': 'application/json' } },
    );
    if (!res.ok) throw await toApiError(res);
    return res.text();
  }

  listTrajectories(): Promise<{ trajectories: TrajectoryRow[] }> {
    return this.req('/trajectories');
  }

  frames(trajectoryId: string): Promise<FramesDoc> {
    return this.req(`/trajectories/${encodeURIComponent(trajectoryId)}/frames`);
  }

  analytics(taskId: string): Promise<Record<string, unknown>> {
    return this.req(`/analytics/tasks/${encodeURIComponent(taskId)}`);
  }
}
