import type { ActionBody } from './types.js';

export interface ControlInputs {
  color: number;
  resizeDims(): [number, number];
}

export interface Control {
  id: string;
  label: string;
  key: string;
  body(inputs: ControlInputs): ActionBody;
}

// One table drives both the buttons and the keyboard handler, so a key
// press and a button click cannot produce different request payloads.
export const CONTROLS: readonly Control[] = [
  { id: 'move-up', label: 'Move ↑', key: 'ArrowUp', body: () => ({ operation: 'Move', direction: 'up' }) },
  { id: 'move-down', label: 'Move ↓', key: 'ArrowDown', body: () => ({ operation: 'Move', direction: 'down' }) },
  { id: 'move-left', label: 'Move ←', key: 'ArrowLeft', body: () => ({ operation: 'Move', direction: 'left' }) },
  { id: 'move-right', label: 'Move →', key: 'ArrowRight', body: () => ({ operation: 'Move', direction: 'right' }) },
  { id: 'rotate-cw', label: 'Rotate ⟳', key: 'r', body: () => ({ operation: 'Rotate', rotation: 'cw' }) },
  { id: 'rotate-ccw', label: 'Rotate ⟲', key: 'R', body: () => ({ operation: 'Rotate', rotation: 'ccw' }) },
  { id: 'flip-h', label: 'Flip H', key: 'h', body: () => ({ operation: 'Flip', axis: 'horizontal' }) },
  { id: 'flip-v', label: 'Flip V', key: 'v', body: () => ({ operation: 'Flip', axis: 'vertical' }) },
  { id: 'paint', label: 'Paint', key: 'f', body: (i) => ({ operation: 'Paint', color: i.color }) },
  { id: 'copy', label: 'Copy', key: 'c', body: () => ({ operation: 'Copy' }) },
  { id: 'paste', label: 'Paste', key: 'p', body: () => ({ operation: 'Paste' }) },
  { id: 'undo', label: 'Undo', key: 'z', body: () => ({ operation: 'Undo' }) },
  { id: 'redo', label: 'Redo', key: 'y', body: () => ({ operation: 'Redo' }) },
  { id: 'select-all', label: 'Select all', key: 'a', body: () => ({ operation: 'SelectGrid' }) },
  { id: 'resize', label: 'Resize', key: 'g', body: (i) => ({ operation: 'ResizeGrid', dims: i.resizeDims() }) },
  { id: 'submit', label: 'Submit', key: 's', body: () => ({ operation: 'Submit' }) },
];

export function controlForKey(key: string): Control | undefined {
  return CONTROLS.find((c) => c.key === key);
}
