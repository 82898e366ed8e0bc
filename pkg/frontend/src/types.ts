// Wire contracts for the trajectory service JSON API.
// Positions and cells travel as [row, col]; grids as row-major arrays.

export type Cell = [number, number];

export const OPERATIONS = [
  'SelectCell',
  'SelectObject',
  'SelectGrid',
  'Paint',
  'Move',
  'Rotate',
  'Flip',
  'Copy',
  'Paste',
  'Undo',
  'Redo',
  'ResizeGrid',
  'Submit',
] as const;

export type Operation = (typeof OPERATIONS)[number];

export interface ActionBody {
  operation: Operation;
  position?: Cell;
  cells?: Cell[];
  color?: number;
  direction?: 'up' | 'down' | 'left' | 'right';
  rotation?: 'cw' | 'ccw';
  axis?: 'horizontal' | 'vertical';
  dims?: [number, number];
}

export interface Outcome {
  reward: number;
  overlapped: boolean;
  terminal: boolean;
  note: string | null;
}

export interface SessionView {
  session_id: string;
  task_id: string;
  test_index: number;
  created_at: number;
  last_active: number;
  grid: number[][];
  height: number;
  width: number;
  selection: Cell[];
  step_count: number;
  submitted: boolean;
  target_height: number;
  target_width: number;
}

export interface ActedSessionView extends SessionView {
  outcome: Outcome;
}

export interface TaskRow {
  task_id: string;
  demos: number;
  tests: number;
  test_dims: [number, number][];
}

export interface DemoPair {
  input: number[][];
  output: number[][];
}

export interface TestPair {
  input: number[][];
  target_height: number;
  target_width: number;
}

export interface TaskDetail {
  task_id: string;
  demos: DemoPair[];
  tests: TestPair[];
}

export interface TrajectoryRow {
  trajectory_id: string;
  task_id: string;
  actions: number;
  success: boolean | null;
}

export interface FrameAction {
  operation: string;
  position?: Cell;
  cells?: Cell[];
  color?: number;
  direction?: string;
  rotation?: string;
  axis?: string;
  dims?: [number, number];
}

export interface FrameView {
  step: number;
  grid: number[][];
  action: FrameAction | null;
  diverged: boolean;
}

export interface FramesDoc {
  trajectory_id: string;
  task_id: string;
  mode: string;
  success_check: boolean | null;
  frames: FrameView[];
}
