/**
 * Replays the committed decision log against a freshly seeded live server;
 * the fetched candidate images must hash byte-identically to the recorded
 * values, twice in a row.
 */
import { createHash } from 'node:crypto';
import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import type { DecisionLogDoc } from '../src/log.js';
import { compareOutcomes, replayLog } from '../src/replay.js';
import { startServer, type RunningServer } from '../scripts/server.js';

const here = dirname(fileURLToPath(import.meta.url));
const logPath = join(here, 'fixtures', 'decision-log.json');

const hooks = {
  fetchImpl: fetch,
  hash: async (bytes: ArrayBuffer) =>
    createHash('sha256').update(Buffer.from(bytes)).digest('hex'),
};

let server: RunningServer;

beforeAll(async () => {
  server = await startServer(8973);
});

afterAll(async () => {
  await server?.stop();
});

describe('decision log replay', () => {
  it('reproduces byte-identical candidates from the recorded log', async () => {
    const log: DecisionLogDoc = JSON.parse(readFileSync(logPath, 'utf-8'));
    const recorded = log.steps.filter((s) => s.action === 'fetch_candidates');
    expect(recorded.length).toBeGreaterThan(0);
    expect(recorded.every((s) => (s.sha256?.length ?? 0) > 0)).toBe(true);

    const first = await replayLog(log, server.baseUrl, hooks);
    expect(compareOutcomes(log, first)).toEqual([]);

    // a second replay against the same server reproduces the same bytes
    const second = await replayLog(log, server.baseUrl, hooks);
    expect(compareOutcomes(log, second)).toEqual([]);
  });
});
