import { Api, ApiError } from './api.js';
import { PALETTE, marqueeBody, renderGrid, type GridGestures } from './gridview.js';
import { CONTROLS, controlForKey, type ControlInputs } from './keymap.js';
import { UiSession } from './session.js';
import type { ActionBody, Outcome, TaskDetail } from './types.js';

export type SaveFile = (name: string, text: string) => void;

export interface SolveOptions {
  save?: SaveFile;
}

function browserSave(doc: Document): SaveFile {
  return (name, text) => {
    const url = URL.createObjectURL(new Blob([text], { type: 'application/json' }));
    const a = doc.createElement('a');
    a.href = url;
    a.download = name;
    a.click();
    URL.revokeObjectURL(url);
  };
}

function describeOutcome(o: Outcome): string {
  let line = `reward ${o.reward}`;
  if (o.overlapped) line += ', overlapped';
  if (o.note) line += `, ${o.note}`;
  return line;
}

export class SolveView {
  private readonly doc: Document;
  private readonly save: SaveFile;
  private readonly onKey = (ev: KeyboardEvent) => this.handleKey(ev);

  constructor(
    private readonly root: HTMLElement,
    private readonly client: Api,
    readonly session: UiSession,
    readonly task: TaskDetail,
    opts: SolveOptions = {},
  ) {
    this.doc = root.ownerDocument;
    this.save = opts.save ?? browserSave(this.doc);
    this.buildSkeleton();
    this.session.onAdopt(() => this.renderState());
    this.renderState();
    this.doc.addEventListener('keydown', this.onKey);
  }

  dispose(): void {
    this.doc.removeEventListener('keydown', this.onKey);
  }

  private byId<T extends HTMLElement = HTMLElement>(id: string): T {
    const el = this.root.querySelector(`#${id}`);
    if (!el) throw new Error(`missing #${id}`);
    return el as T;
  }

  private buildSkeleton(): void {
    this.root.innerHTML = `
      <section id="solve">
        <h2 id="solve-title"></h2>
        <div id="demos"></div>
        <div id="board">
          <div id="solve-grid"></div>
          <div id="side">
            <div id="target-hint"></div>
            <div id="status"></div>
          </div>
        </div>
        <div id="palette"></div>
        <div id="controls"></div>
        <div id="resize-panel">
          rows <input id="resize-rows" type="number" min="1" max="30">
          cols <input id="resize-cols" type="number" min="1" max="30">
        </div>
        <div id="error-box" hidden></div>
        <div id="reward-banner" hidden></div>
        <div id="download-panel">
          <button id="download">Download trajectory</button>
          <span id="download-note" hidden></span>
        </div>
        <ol id="outcome-log"></ol>
      </section>`;
    this.byId('solve-title').textContent = `task ${this.task.task_id}`;
    const demos = this.byId('demos');
    for (const pair of this.task.demos) {
      const wrap = this.doc.createElement('div');
      wrap.className = 'demo-pair';
      const input = this.doc.createElement('div');
      input.className = 'demo-input';
      renderGrid(input, pair.input);
      const arrow = this.doc.createElement('span');
      arrow.textContent = '→';
      const output = this.doc.createElement('div');
      output.className = 'demo-output';
      renderGrid(output, pair.output);
      wrap.append(input, arrow, output);
      demos.appendChild(wrap);
    }
    const palette = this.byId('palette');
    for (let n = 0; n < PALETTE.length; n++) {
      const b = this.doc.createElement('button');
      b.className = 'swatch';
      b.dataset.color = String(n);
      b.style.backgroundColor = PALETTE[n] ?? '';
      b.title = `color ${n} (key ${n})`;
      b.addEventListener('click', () => this.setColor(n));
      palette.appendChild(b);
    }
    const controls = this.byId('controls');
    for (const control of CONTROLS) {
      const b = this.doc.createElement('button');
      b.id = control.id;
      b.textContent = control.label;
      b.title = `key: ${control.key}`;
      b.addEventListener('click', () => {
        void this.issue(control.body(this.inputs()));
      });
      controls.appendChild(b);
    }
    const view = this.session.view;
    this.byId<HTMLInputElement>('resize-rows').value = String(view.target_height);
    this.byId<HTMLInputElement>('resize-cols').value = String(view.target_width);
    this.byId('download').addEventListener('click', () => {
      void this.downloadTrajectory();
    });
    this.setColor(0);
  }

  setColor(n: number): void {
    this.session.color = n;
    for (const el of Array.from(this.root.querySelectorAll('.swatch'))) {
      el.classList.toggle('active', el.getAttribute('data-color') === String(n));
    }
  }

  private inputs(): ControlInputs {
    return {
      color: this.session.color,
      resizeDims: () => [
        Number(this.byId<HTMLInputElement>('resize-rows').value) || this.session.view.target_height,
        Number(this.byId<HTMLInputElement>('resize-cols').value) || this.session.view.target_width,
      ],
    };
  }

  private gestures(): GridGestures {
    return {
      onClick: (row, col, shift) => {
        const body: ActionBody = shift
          ? { operation: 'SelectCell', position: [row, col] }
          : { operation: 'SelectObject', position: [row, col] };
        void this.issue(body);
      },
      onMarquee: (anchor, extent) => {
        void this.issue(marqueeBody(anchor, extent));
      },
    };
  }

  private handleKey(ev: KeyboardEvent): void {
    const target = ev.target as { tagName?: string } | null;
    if (target?.tagName === 'INPUT') return; // typing in the resize fields
    if (/^[0-9]$/.test(ev.key)) {
      this.setColor(Number(ev.key));
      return;
    }
    const control = controlForKey(ev.key);
    if (!control) return;
    ev.preventDefault();
    void this.issue(control.body(this.inputs()));
  }

  async issue(body: ActionBody): Promise<void> {
    const box = this.byId('error-box');
    try {
      await this.session.dispatch(body);
      box.hidden = true;
      box.textContent = '';
    } catch (err) {
      box.hidden = false;
      box.textContent =
        err instanceof ApiError
          ? `${err.code}: ${err.message}`
          : 'network error, action not applied';
    }
  }

  // Saves exactly the bytes the trajectory endpoint returned.
  async downloadTrajectory(): Promise<string | null> {
    const note = this.byId('download-note');
    try {
      const text = await this.client.trajectoryText(this.session.view.session_id);
      this.save(`${this.session.view.session_id}.json`, text);
      note.hidden = false;
      note.textContent = 'saved';
      return text;
    } catch {
      note.hidden = false;
      note.textContent = 'download failed ';
      const retry = this.doc.createElement('button');
      retry.id = 'download-retry';
      retry.textContent = 'Retry';
      retry.addEventListener('click', () => {
        void this.downloadTrajectory();
      });
      note.appendChild(retry);
      return null;
    }
  }

  private renderState(): void {
    const view = this.session.view;
    renderGrid(this.byId('solve-grid'), view.grid, this.session.selectionSet(), this.gestures());
    this.byId('status').textContent = `step ${view.step_count}${view.submitted ? ', submitted' : ''}`;
    this.byId('target-hint').textContent = `target ${view.target_height} x ${view.target_width}`;
    const log = this.byId('outcome-log');
    log.textContent = '';
    for (const outcome of this.session.outcomes) {
      const li = this.doc.createElement('li');
      li.textContent = describeOutcome(outcome);
      log.appendChild(li);
    }
    const banner = this.byId('reward-banner');
    const last = this.session.outcomes[this.session.outcomes.length - 1];
    if (view.submitted && last) {
      banner.hidden = false;
      banner.textContent = last.reward === 1 ? 'solved, reward 1' : 'submitted, reward 0';
      banner.className = last.reward === 1 ? 'banner ok' : 'banner bad';
    } else {
      banner.hidden = true;
    }
  }
}

export async function mountSolve(
  root: HTMLElement,
  client: Api,
  taskId: string,
  opts: SolveOptions = {},
): Promise<SolveView> {
  const task = await client.task(taskId);
  const session = await UiSession.start(client, taskId);
  return new SolveView(root, client, session, task, opts);
}
