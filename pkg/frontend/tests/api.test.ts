import { describe, expect, it } from 'vitest';

import { Api, ApiError } from '../src/api.js';
import { jsonResponse, textResponse } from './helpers.js';

interface Call {
  url: string;
  init?: RequestInit;
}

function capture(handler: (url: string, init?: RequestInit) => Response | Promise<Response>) {
  const calls: Call[] = [];
  const fetchFn = async (url: string, init?: RequestInit) => {
    calls.push({ url, init });
    return handler(url, init);
  };
  return { calls, fetchFn };
}

describe('Api', () => {
  it('requests the task listing from /tasks', async () => {
    const { calls, fetchFn } = capture(() => jsonResponse(200, { tasks: [] }));
    const api = new Api('http://svc', fetchFn);
    const doc = await api.listTasks();
    expect(doc.tasks).toEqual([]);
    expect(calls[0]?.url).toBe('http://svc/tasks');
  });

  it('posts actions as JSON with a content type', async () => {
    const { calls, fetchFn } = capture(() =>
      jsonResponse(200, { outcome: { reward: 0 } }),
    );
    const api = new Api('', fetchFn);
    await api.act('s1', { operation: 'Paint', color: 3 });
    const call = calls[0];
    expect(call?.url).toBe('/sessions/s1/actions');
    expect(call?.init?.method).toBe('POST');
    expect(JSON.parse(String(call?.init?.body))).toEqual({ operation: 'Paint', color: 3 });
    const headers = call?.init?.headers as Record<string, string>;
    expect(headers['Content-Type']).toBe('application/json');
  });

  it('maps structured error details onto ApiError', async () => {
    const { fetchFn } = capture(() =>
      jsonResponse(409, { detail: { error: 'AlreadySubmitted', message: 'over' } }),
    );
    const api = new Api('', fetchFn);
    const err = await api.act('s1', { operation: 'Submit' }).catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.code).toBe('AlreadySubmitted');
    expect(err.message).toBe('over');
  });

  it('falls back to the status when the error body is not JSON', async () => {
    const { fetchFn } = capture(() => textResponse(500, 'boom'));
    const api = new Api('', fetchFn);
    const err = await api.listTasks().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(500);
    expect(err.code).toBe('HTTP500');
  });

  it('returns trajectory text verbatim, not reparsed', async () => {
    const raw = '{"trajectory_id": "s1",  "actionSequence": []}';
    const { fetchFn } = capture(() => textResponse(200, raw));
    const api = new Api('', fetchFn);
    expect(await api.trajectoryText('s1')).toBe(raw);
  });

  it('percent-encodes ids spliced into paths', async () => {
    const { calls, fetchFn } = capture(() => jsonResponse(200, {}));
    const api = new Api('', fetchFn);
    await api.task('a/b c');
    expect(calls[0]?.url).toBe('/tasks/a%2Fb%20c');
  });
});
