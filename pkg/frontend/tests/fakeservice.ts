import type { ActionBody, Cell, Outcome, SessionView } from '../src/types.js';
import { jsonResponse } from './helpers.js';

const clone = <T>(x: T): T => JSON.parse(JSON.stringify(x)) as T;

// In-memory stand-in for the recording service. It owns all state, like
// the real server; the client under test only ever sees its payloads.
export class FakeService {
  posted: ActionBody[] = [];
  accepted: ActionBody[] = [];
  served: string[] = []; // every state payload handed out, as JSON text
  failTrajectoryOnce = false;

  private grid: number[][];
  private selection: Cell[] = [];
  private stepCount = 0;
  private submitted = false;
  private readonly sid = 'fake-session';

  constructor(
    private readonly taskId = 't1',
    private readonly start: number[][] = [
      [0, 0],
      [0, 0],
    ],
    private readonly target: number[][] = [
      [3, 0],
      [0, 3],
    ],
    private readonly demos = [
      {
        input: [
          [0, 0],
          [0, 3],
        ],
        output: [
          [3, 0],
          [0, 3],
        ],
      },
    ],
  ) {
    this.grid = clone(start);
  }

  fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    const path = url.replace(/^https?:\/\/[^/]+/, '');
    const method = init?.method ?? 'GET';
    if (method === 'GET' && path === `/tasks/${this.taskId}`) {
      return jsonResponse(200, {
        task_id: this.taskId,
        demos: clone(this.demos),
        tests: [
          {
            input: clone(this.start),
            target_height: this.target.length,
            target_width: this.target[0]?.length ?? 0,
          },
        ],
      });
    }
    if (method === 'GET' && path === '/tasks') {
      return jsonResponse(200, {
        tasks: [
          {
            task_id: this.taskId,
            demos: this.demos.length,
            tests: 1,
            test_dims: [[this.start.length, this.start[0]?.length ?? 0]],
          },
        ],
      });
    }
    if (method === 'POST' && path === '/sessions') {
      return this.respond(201, this.state());
    }
    if (method === 'POST' && path === `/sessions/${this.sid}/actions`) {
      const body = JSON.parse(String(init?.body ?? '{}')) as ActionBody;
      return this.step(body);
    }
    if (method === 'GET' && path === `/sessions/${this.sid}`) {
      return this.respond(200, this.state());
    }
    if (method === 'GET' && path === `/sessions/${this.sid}/trajectory`) {
      if (this.failTrajectoryOnce) {
        this.failTrajectoryOnce = false;
        throw new TypeError('fetch failed');
      }
      return jsonResponse(200, this.trajectoryDoc());
    }
    if (method === 'GET' && path === '/trajectories') {
      return jsonResponse(200, {
        trajectories: [
          { trajectory_id: 'demo1', task_id: this.taskId, actions: 3, success: true },
        ],
      });
    }
    if (method === 'GET' && /^\/trajectories\/[^/]+\/frames$/.test(path)) {
      return jsonResponse(404, {
        detail: { error: 'TrajectoryNotFound', message: path.split('/')[2] },
      });
    }
    return jsonResponse(404, { detail: { error: 'NotFound', message: path } });
  };

  trajectoryDoc(): Record<string, unknown> {
    return {
      trajectory_id: this.sid,
      task_id: this.taskId,
      user_id: 'live',
      success: this.submitted && this.solved(),
      actionSequence: this.accepted.map((a) => ({ operation: a.operation })),
    };
  }

  private solved(): boolean {
    return JSON.stringify(this.grid) === JSON.stringify(this.target);
  }

  private state(): SessionView {
    return {
      session_id: this.sid,
      task_id: this.taskId,
      test_index: 0,
      created_at: 1000.0,
      last_active: 1000.0 + this.stepCount,
      grid: clone(this.grid),
      height: this.grid.length,
      width: this.grid[0]?.length ?? 0,
      selection: clone(this.selection).sort((a, b) => a[0] - b[0] || a[1] - b[1]),
      step_count: this.stepCount,
      submitted: this.submitted,
      target_height: this.target.length,
      target_width: this.target[0]?.length ?? 0,
    };
  }

  private respond(status: number, payload: SessionView | (SessionView & { outcome: Outcome })): Response {
    const text = JSON.stringify(payload);
    this.served.push(text);
    return new Response(text, {
      status,
      headers: { 'content-type': 'application/json' },
    });
  }

  private error(status: number, code: string, message: string): Response {
    return jsonResponse(status, { detail: { error: code, message } });
  }

  private step(body: ActionBody): Response {
    this.posted.push(clone(body));
    if (this.submitted) {
      return this.error(409, 'AlreadySubmitted', 'session is over');
    }
    let outcome: Outcome = { reward: 0, overlapped: false, terminal: false, note: null };
    const op = body.operation;
    if (op === 'SelectCell' || op === 'SelectObject') {
      this.selection = [body.position as Cell];
    } else if (op === 'SelectGrid') {
      this.selection = [];
      if (body.position && body.dims) {
        const [top, left] = body.position;
        const [h, w] = body.dims;
        for (let r = top; r < top + h; r++) {
          for (let c = left; c < left + w; c++) this.selection.push([r, c]);
        }
      } else {
        for (let r = 0; r < this.grid.length; r++) {
          for (let c = 0; c < (this.grid[0]?.length ?? 0); c++) this.selection.push([r, c]);
        }
      }
    } else if (op === 'Paint') {
      if (this.selection.length === 0) {
        return this.error(422, 'EmptySelectionForOperation', 'Paint needs a selection');
      }
      for (const [r, c] of this.selection) {
        const row = this.grid[r];
        if (row) row[c] = body.color ?? 0;
      }
    } else if (op === 'Submit') {
      this.submitted = true;
      outcome = { reward: this.solved() ? 1 : 0, overlapped: false, terminal: true, note: null };
    }
    // other operations are accepted as no-ops by this double
    this.accepted.push(clone(body));
    this.stepCount += 1;
    return this.respond(200, { ...this.state(), outcome });
  }
}
