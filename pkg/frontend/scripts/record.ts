/**
 * Records the committed fixture decision log: drives the ApiClient exactly
 * as a workbench session would (upload fixture image, confirm caption,
 * fine-tune, sweep, fetch candidates), then replays the recorded log once to
 * capture candidate hashes, and writes test/fixtures/decision-log.json.
 *
 * Run via `npm run record-log` (builds first).
 */

import { createHash } from 'node:crypto';
import { readFileSync, writeFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import { ApiClient } from '../src/api.js';
import { replayLog } from '../src/replay.js';
import { startServer } from './server.js';

const here = dirname(fileURLToPath(import.meta.url));
const repoRoot = join(here, '..', '..', '..');
const outPath = join(here, '..', '..', 'test', 'fixtures', 'decision-log.json');

const FINETUNE = { kind: 'joint' as const, seed: 123, min_steps: 1, max_steps: 6,
                   loss_threshold: 0.0, batch_repeat: 2 };
const SWEEP = { target_prompt: 'a red square right on gray', combination: 'subtraction' as const,
                strategy: 'none', seed: 9, ddim_steps: 6 };

async function main(): Promise<void> {
  const server = await startServer(8974);
  try {
    const client = new ApiClient(server.baseUrl);
    const png = readFileSync(join(repoRoot, 'src', 'forgedit', 'data', 'images', 'edit_000.png'));
    const session = await client.createSession(png.toString('base64'));
    console.log(`session ${session.session_id}, caption "${session.caption}"`);

    const ftJob = await client.startFinetune(session.session_id, FINETUNE);
    const ftDone = await client.waitJob(ftJob.job_id);
    if (ftDone.state !== 'done') throw new Error(`finetune failed: ${ftDone.error}`);
    const runId = String(ftDone.result!.run_id);

    const swJob = await client.startSweep(session.session_id, { run_id: runId, ...SWEEP });
    const swDone = await client.waitJob(swJob.job_id);
    if (swDone.state !== 'done') throw new Error(`sweep failed: ${swDone.error}`);
    await client.getCandidates(String(swDone.result!.sweep_id));

    const doc = client.log.toDoc('fixture workbench session: upload, caption, fine-tune, sweep');
    const outcomes = await replayLog(doc, server.baseUrl, {
      fetchImpl: fetch,
      hash: async (bytes) =>
        createHash('sha256').update(Buffer.from(bytes)).digest('hex'),
    });
    doc.steps.forEach((step, i) => {
      if (step.action === 'fetch_candidates') step.sha256 = outcomes[i].sha256;
    });
    writeFileSync(outPath, JSON.stringify(doc, null, 2) + '\n');
    console.log(`wrote ${outPath}`);
  } finally {
    await server.stop();
  }
}

main().catch((err) => {
  console.error(err);
  process.exit(1);
});
