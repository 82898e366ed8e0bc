import type { ActionBody, Cell } from './types.js';

// Display colors for the ten cell values.
export const PALETTE = [
  '#000000',
  '#0074d9',
  '#ff4136',
  '#2ecc40',
  '#ffdc00',
  '#aaaaaa',
  '#f012be',
  '#ff851b',
  '#7fdbff',
  '#870c25',
] as const;

export function cellKey(row: number, col: number): string {
  return `${row},${col}`;
}

export interface GridGestures {
  onClick?(row: number, col: number, shift: boolean): void;
  onMarquee?(anchor: Cell, extent: Cell): void;
}

export function renderGrid(
  el: HTMLElement,
  grid: number[][],
  selected?: ReadonlySet<string>,
  gestures?: GridGestures,
): void {
  const doc = el.ownerDocument;
  el.textContent = '';
  el.classList.add('grid');
  // Drag state is shared by all cells of this grid element.
  let anchor: Cell | null = null;
  let left = false;
  for (let r = 0; r < grid.length; r++) {
    const rowEl = doc.createElement('div');
    rowEl.className = 'grid-row';
    const row = grid[r] ?? [];
    for (let c = 0; c < row.length; c++) {
      const cell = doc.createElement('div');
      cell.className = 'grid-cell';
      cell.dataset.row = String(r);
      cell.dataset.col = String(c);
      cell.style.backgroundColor = PALETTE[row[c] ?? 0] ?? PALETTE[0];
      if (selected?.has(cellKey(r, c))) cell.classList.add('selected');
      if (gestures) {
        cell.addEventListener('mousedown', (ev) => {
          anchor = [r, c];
          left = false;
          ev.preventDefault();
        });
        cell.addEventListener('mouseenter', () => {
          if (anchor && (anchor[0] !== r || anchor[1] !== c)) left = true;
        });
        cell.addEventListener('mouseup', (ev) => {
          if (!anchor) return;
          const [ar, ac] = anchor;
          anchor = null;
          if (left || ar !== r || ac !== c) {
            gestures.onMarquee?.([ar, ac], [r, c]);
          } else {
            gestures.onClick?.(r, c, (ev as MouseEvent).shiftKey);
          }
        });
      }
      rowEl.appendChild(cell);
    }
    el.appendChild(rowEl);
  }
}

// A dragged rectangle becomes one explicit selection action.
export function marqueeBody(anchor: Cell, extent: Cell): ActionBody {
  const top = Math.min(anchor[0], extent[0]);
  const leftCol = Math.min(anchor[1], extent[1]);
  const height = Math.abs(anchor[0] - extent[0]) + 1;
  const width = Math.abs(anchor[1] - extent[1]) + 1;
  return { operation: 'SelectGrid', position: [top, leftCol], dims: [height, width] };
}
