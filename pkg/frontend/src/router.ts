import { Api } from './api.js';
import { mountReplay } from './replay.js';
import { mountSolve } from './solve.js';

async function renderHome(root: HTMLElement, client: Api): Promise<void> {
  const [tasks, trajectories] = await Promise.all([
    client.listTasks(),
    client.listTrajectories(),
  ]);
  const doc = root.ownerDocument;
  root.innerHTML = `
    <section id="home">
      <h2>tasks</h2>
      <ul id="task-list"></ul>
      <h2>recorded trajectories</h2>
      <ul id="trajectory-list"></ul>
    </section>`;
  const taskList = root.querySelector('#task-list');
  for (const row of tasks.tasks) {
    const li = doc.createElement('li');
    const a = doc.createElement('a');
    a.href = `#/solve/${encodeURIComponent(row.task_id)}`;
    a.textContent = `${row.task_id} (${row.demos} demos, ${row.tests} tests)`;
    li.appendChild(a);
    taskList?.appendChild(li);
  }
  const trajectoryList = root.querySelector('#trajectory-list');
  for (const row of trajectories.trajectories) {
    const li = doc.createElement('li');
    const a = doc.createElement('a');
    a.href = `#/replay/${encodeURIComponent(row.trajectory_id)}`;
    const flag = row.success === null ? '?' : row.success ? 'solved' : 'failed';
    a.textContent = `${row.trajectory_id} on ${row.task_id} (${row.actions} actions, ${flag})`;
    li.appendChild(a);
    trajectoryList?.appendChild(li);
  }
}

export async function route(root: HTMLElement, client: Api, hash: string): Promise<void> {
  const solve = hash.match(/^#\/solve\/(.+)$/);
  if (solve && solve[1]) {
    await mountSolve(root, client, decodeURIComponent(solve[1]));
    return;
  }
  const replay = hash.match(/^#\/replay\/(.+)$/);
  if (replay && replay[1]) {
    await mountReplay(root, client, decodeURIComponent(replay[1]));
    return;
  }
  await renderHome(root, client);
}
