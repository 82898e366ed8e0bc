import { Window } from 'happy-dom';

export interface Dom {
  win: Window;
  doc: Document;
  root: HTMLElement;
}

export function dom(): Dom {
  const win = new Window({ url: 'http://localhost/' });
  const doc = win.document as unknown as Document;
  const root = doc.createElement('div');
  root.id = 'app';
  doc.body.appendChild(root);
  return { win, doc, root };
}

export function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}

export function textResponse(status: number, text: string): Response {
  return new Response(text, { status });
}

export async function until(cond: () => boolean, ms = 3000): Promise<void> {
  const deadline = Date.now() + ms;
  while (!cond()) {
    if (Date.now() > deadline) throw new Error('condition not met in time');
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
}

type WindowCtors = {
  MouseEvent: typeof MouseEvent;
  KeyboardEvent: typeof KeyboardEvent;
};

function ctors(doc: Document): WindowCtors {
  return doc.defaultView as unknown as WindowCtors;
}

export function fireMouse(el: Element, type: string, opts: { shiftKey?: boolean } = {}): void {
  const { MouseEvent } = ctors(el.ownerDocument);
  el.dispatchEvent(new MouseEvent(type, { bubbles: true, cancelable: true, ...opts }));
}

export function click(el: Element): void {
  fireMouse(el, 'click');
}

export function fireKey(target: EventTarget, doc: Document, key: string): void {
  const { KeyboardEvent } = ctors(doc);
  target.dispatchEvent(new KeyboardEvent('keydown', { key, bubbles: true, cancelable: true }));
}

export function cellAt(root: ParentNode, row: number, col: number): HTMLElement {
  const el = root.querySelector(`.grid-cell[data-row="${row}"][data-col="${col}"]`);
  if (!el) throw new Error(`no cell at ${row},${col}`);
  return el as HTMLElement;
}

// Colors as the DOM reports them, normalized by a scratch element so the
// comparison is independent of how the engine serializes CSS values.
export function gridColors(el: ParentNode): string[][] {
  return Array.from(el.querySelectorAll('.grid-row')).map((row) =>
    Array.from(row.querySelectorAll('.grid-cell')).map(
      (cell) => (cell as HTMLElement).style.backgroundColor,
    ),
  );
}

export function normalizeColor(doc: Document, value: string): string {
  const scratch = doc.createElement('div');
  scratch.style.backgroundColor = value;
  return scratch.style.backgroundColor;
}
