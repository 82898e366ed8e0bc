import { Api, ApiError } from './api.js';
import { cellKey } from './gridview.js';
import type { ActionBody, Outcome, SessionView } from './types.js';

// The server is authoritative. This store never edits a grid or a
// selection; it only adopts payloads the service returned, and views
// render from whatever was adopted last.
export class UiSession {
  color = 0; // palette choice, client-side only
  readonly outcomes: Outcome[] = [];
  lastError: ApiError | null = null;
  private listeners: ((view: SessionView) => void)[] = [];

  private constructor(
    private readonly client: Api,
    private view_: SessionView,
  ) {}

  static async start(client: Api, taskId: string, testIndex = 0): Promise<UiSession> {
    return new UiSession(client, await client.createSession(taskId, testIndex));
  }

  get view(): SessionView {
    return this.view_;
  }

  onAdopt(fn: (view: SessionView) => void): void {
    this.listeners.push(fn);
  }

  private adopt(view: SessionView): void {
    this.view_ = view;
    for (const fn of this.listeners) fn(view);
  }

  async dispatch(body: ActionBody): Promise<Outcome> {
    const next = await this.client.act(this.view_.session_id, body).catch((err) => {
      if (err instanceof ApiError) this.lastError = err;
      throw err;
    });
    this.lastError = null;
    this.outcomes.push(next.outcome);
    this.adopt(next);
    return next.outcome;
  }

  async refresh(): Promise<void> {
    this.adopt(await this.client.session(this.view_.session_id));
  }

  selectionSet(): Set<string> {
    return new Set(this.view_.selection.map(([r, c]) => cellKey(r, c)));
  }
}
