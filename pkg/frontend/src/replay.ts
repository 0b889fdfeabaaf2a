/**
 * Decision-log replay: executes a recorded step sequence against a live
 * server, rebinding server-generated ids, and hashes every fetched candidate
 * image. In verify mode the fresh hashes must equal the recorded ones, which
 * pins the whole pipeline (seeds included) to byte-identical outputs.
 */

import { dig, substitute } from './log.js';
import type { DecisionLogDoc, LogStep } from './log.js';

export interface ReplayHooks {
  fetchImpl: typeof fetch;
  hash: (bytes: ArrayBuffer) => Promise<string>;
  pollMs?: number;
}

export interface StepOutcome {
  action: string;
  sha256?: string[];
}

async function requestJson(
  hooks: ReplayHooks,
  baseUrl: string,
  method: string,
  path: string,
  body?: unknown,
): Promise<any> {
  const resp = await hooks.fetchImpl(baseUrl + path, {
    method,
    headers: body !== undefined ? { 'content-type': 'application/json' } : undefined,
    body: body !== undefined ? JSON.stringify(body) : undefined,
  });
  if (!resp.ok) {
    throw new Error(`${method} ${path} -> ${resp.status}: ${await resp.text()}`);
  }
  return resp.json();
}

async function waitJob(hooks: ReplayHooks, baseUrl: string, jobId: string): Promise<any> {
  for (;;) {
    const doc = await requestJson(hooks, baseUrl, 'GET', `/jobs/${jobId}`);
    if (doc.state === 'done') return doc;
    if (doc.state === 'failed') throw new Error(`job ${jobId} failed: ${doc.error}`);
    await new Promise((r) => setTimeout(r, hooks.pollMs ?? 200));
  }
}

function ref(vars: Record<string, string>, token: string | undefined, what: string): string {
  if (!token) throw new Error(`step missing ${what}`);
  const name = token.startsWith('$') ? token.slice(1) : token;
  if (!(name in vars)) throw new Error(`unbound ${what} variable ${token}`);
  return vars[name];
}

function bind(
  vars: Record<string, string>,
  save: Record<string, string> | undefined,
  doc: unknown,
): void {
  for (const [name, path] of Object.entries(save ?? {})) {
    const value = dig(doc, path);
    if (typeof value !== 'string') {
      throw new Error(`save ${name}: ${path} is not a string in the response`);
    }
    vars[name] = value;
  }
}

export async function replayLog(
  log: DecisionLogDoc,
  baseUrl: string,
  hooks: ReplayHooks,
): Promise<StepOutcome[]> {
  const vars: Record<string, string> = {};
  const outcomes: StepOutcome[] = [];
  for (const step of log.steps) {
    outcomes.push(await runStep(step, vars, baseUrl, hooks));
  }
  return outcomes;
}

async function runStep(
  step: LogStep,
  vars: Record<string, string>,
  baseUrl: string,
  hooks: ReplayHooks,
): Promise<StepOutcome> {
  const body = step.body !== undefined ? substitute(step.body, vars) : undefined;
  switch (step.action) {
    case 'create_session': {
      const doc = await requestJson(hooks, baseUrl, 'POST', '/sessions', body);
      bind(vars, step.save, doc);
      return { action: step.action };
    }
    case 'finetune':
    case 'sweep':
    case 'auto': {
      const session = ref(vars, step.session, 'session');
      const path =
        step.action === 'finetune'
          ? `/sessions/${session}/finetune`
          : step.action === 'sweep'
            ? `/sessions/${session}/sweeps`
            : `/sessions/${session}/auto`;
      const jobDoc = await requestJson(hooks, baseUrl, 'POST', path, body);
      const finished = await waitJob(hooks, baseUrl, jobDoc.job_id);
      bind(vars, step.save, finished);
      return { action: step.action };
    }
    case 'fetch_candidates': {
      const sweepId = ref(vars, step.sweep, 'sweep');
      const manifest = await requestJson(hooks, baseUrl, 'GET', `/sweeps/${sweepId}/candidates`);
      const hashes: string[] = [];
      for (const cand of manifest.candidates) {
        const resp = await hooks.fetchImpl(baseUrl + cand.image_url);
        if (!resp.ok) throw new Error(`image fetch failed: ${resp.status}`);
        hashes.push(await hooks.hash(await resp.arrayBuffer()));
      }
      return { action: step.action, sha256: hashes };
    }
    default:
      throw new Error(`unknown log action ${(step as LogStep).action}`);
  }
}

/** Verify recorded hashes; returns the mismatching step indices (empty = ok). */
export function compareOutcomes(log: DecisionLogDoc, outcomes: StepOutcome[]): number[] {
  const bad: number[] = [];
  log.steps.forEach((step, i) => {
    if (step.action !== 'fetch_candidates' || !step.sha256) return;
    const got = outcomes[i]?.sha256 ?? [];
    if (got.length !== step.sha256.length || got.some((h, k) => h !== step.sha256![k])) {
      bad.push(i);
    }
  });
  return bad;
}
