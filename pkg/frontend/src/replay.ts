import { Api, ApiError } from './api.js';
import { renderGrid } from './gridview.js';
import type { FramesDoc } from './types.js';

export interface ReplayTimer {
  set(fn: () => void, ms: number): unknown;
  clear(handle: unknown): void;
}

const realTimer: ReplayTimer = {
  set: (fn, ms) => setInterval(fn, ms),
  clear: (handle) => clearInterval(handle as ReturnType<typeof setInterval>),
};

export interface ReplayOptions {
  intervalMs?: number;
  timer?: ReplayTimer;
}

export class ReplayView {
  frame = 0;
  private handle: unknown = null;
  private readonly domDoc: Document;
  private readonly timer: ReplayTimer;
  private readonly intervalMs: number;

  constructor(
    private readonly root: HTMLElement,
    readonly doc: FramesDoc,
    opts: ReplayOptions = {},
  ) {
    this.domDoc = root.ownerDocument;
    this.timer = opts.timer ?? realTimer;
    this.intervalMs = opts.intervalMs ?? 500;
    this.buildSkeleton();
    this.show(0);
  }

  get frameCount(): number {
    return this.doc.frames.length;
  }

  private byId<T extends HTMLElement = HTMLElement>(id: string): T {
    const el = this.root.querySelector(`#${id}`);
    if (!el) throw new Error(`missing #${id}`);
    return el as T;
  }

  private buildSkeleton(): void {
    const last = this.frameCount - 1;
    this.root.innerHTML = `
      <section id="replay">
        <h2 id="replay-title"></h2>
        <div id="replay-board">
          <div id="replay-grid"></div>
          <div id="target-panel" hidden>
            <div class="panel-caption">target</div>
            <div id="target-grid"></div>
          </div>
        </div>
        <div id="replay-controls">
          <button id="play">▶</button>
          <input id="scrub" type="range" min="0" value="0">
          <span id="frame-label"></span>
          <span id="diverged-badge" hidden>diverged</span>
        </div>
        <div id="ticks"></div>
        <div id="replay-action"></div>
      </section>`;
    this.byId('replay-title').textContent =
      `trajectory ${this.doc.trajectory_id} (task ${this.doc.task_id})`;
    const scrub = this.byId<HTMLInputElement>('scrub');
    scrub.max = String(last);
    scrub.addEventListener('input', () => {
      this.pause();
      this.show(Number(scrub.value));
    });
    this.byId('play').addEventListener('click', () => this.toggle());
    const ticks = this.byId('ticks');
    for (const frame of this.doc.frames) {
      const tick = this.domDoc.createElement('span');
      tick.className = frame.diverged ? 'tick diverged' : 'tick';
      tick.title = `frame ${frame.step}`;
      ticks.appendChild(tick);
    }
    // Viewer mode reveals the target; the last frame of a verified
    // success is the test output itself.
    if (this.doc.success_check) {
      const lastFrame = this.doc.frames[last];
      if (lastFrame) {
        this.byId('target-panel').hidden = false;
        renderGrid(this.byId('target-grid'), lastFrame.grid);
      }
    }
  }

  show(i: number): void {
    const clamped = Math.max(0, Math.min(this.frameCount - 1, i));
    this.frame = clamped;
    const frame = this.doc.frames[clamped];
    if (!frame) return;
    renderGrid(this.byId('replay-grid'), frame.grid);
    this.byId<HTMLInputElement>('scrub').value = String(clamped);
    this.byId('frame-label').textContent = `frame ${clamped} / ${this.frameCount - 1}`;
    this.byId('diverged-badge').hidden = !frame.diverged;
    this.byId('replay-action').textContent = frame.action
      ? `step ${frame.step}: ${frame.action.operation}`
      : 'initial grid';
    const ticks = Array.from(this.byId('ticks').children);
    ticks.forEach((tick, idx) => tick.classList.toggle('current', idx === clamped));
  }

  playing(): boolean {
    return this.handle !== null;
  }

  play(): void {
    if (this.playing()) return;
    this.byId('play').textContent = '⏸';
    this.handle = this.timer.set(() => {
      if (this.frame >= this.frameCount - 1) {
        this.pause();
        return;
      }
      this.show(this.frame + 1);
    }, this.intervalMs);
  }

  pause(): void {
    if (this.handle !== null) {
      this.timer.clear(this.handle);
      this.handle = null;
    }
    this.byId('play').textContent = '▶';
  }

  toggle(): void {
    if (this.playing()) this.pause();
    else this.play();
  }
}

export async function mountReplay(
  root: HTMLElement,
  client: Api,
  trajectoryId: string,
  opts: ReplayOptions = {},
): Promise<ReplayView | null> {
  try {
    const doc = await client.frames(trajectoryId);
    return new ReplayView(root, doc, opts);
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) {
      root.innerHTML = `<section id="not-found">no such trajectory</section>`;
      const section = root.querySelector('#not-found');
      if (section) section.textContent = `no such trajectory: ${trajectoryId}`;
      return null;
    }
    throw err;
  }
}
