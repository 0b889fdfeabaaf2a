/**
 * Page wiring: upload -> caption review -> fine-tune -> sweep grid ->
 * strategy picker -> re-sweep / auto workflow. All math lives server-side;
 * this file only moves documents and DOM around. Every API action lands in
 * the decision log, downloadable for replay.
 */

import { ApiClient } from './api.js';
import { renderCaptionReview } from './caption.js';
import { renderSweepGrid } from './grid.js';
import { initialState, pollOnce, pendingJobs } from './state.js';
import { nextSweepRequest, renderStrategyPicker } from './strategy.js';
import type { JobDoc } from './types.js';

const api = new ApiClient('');
const state = initialState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function setStatus(text: string): void {
  el('status').textContent = text;
}

function renderJobs(): void {
  const list = el('jobs');
  list.replaceChildren();
  for (const job of state.jobs.values()) {
    const row = document.createElement('li');
    row.className = `job job-${job.state}`;
    const bar = document.createElement('progress');
    bar.max = 1;
    bar.value = job.progress;
    row.append(`${job.kind} ${job.job_id} [${job.state}] `, bar);
    if (job.error) row.append(` ${job.error}`);
    list.appendChild(row);
  }
}

async function onJobSettled(job: JobDoc): Promise<void> {
  if (job.state === 'failed') {
    setStatus(`job ${job.job_id} failed: ${job.error}`);
    return;
  }
  if (job.kind === 'finetune') {
    state.activeRun = String(job.result?.run_id ?? '');
    el<HTMLElement>('edit-panel').hidden = false;
    setStatus(`fine-tune done: run ${state.activeRun}`);
  } else if (job.kind === 'sweep') {
    const sweepId = String(job.result?.sweep_id ?? '');
    state.latestSweep = await api.getCandidates(sweepId);
    const grid = renderSweepGrid(state.latestSweep, (_c, detail) => {
      el('detail').replaceChildren(detail);
    });
    el('grid').replaceChildren(grid);
    setStatus(`sweep ${sweepId}: ${state.latestSweep.count} candidates`);
  } else if (job.kind === 'auto') {
    const trace = job.result?.trace;
    const pre = document.createElement('pre');
    pre.textContent = JSON.stringify(trace, null, 2);
    el('detail').replaceChildren(pre);
    setStatus(`auto workflow done (cleared=${(trace as any)?.cleared})`);
  }
}

async function fileToBase64(file: File): Promise<string> {
  const bytes = new Uint8Array(await file.arrayBuffer());
  let binary = '';
  bytes.forEach((b) => (binary += String.fromCharCode(b)));
  return btoa(binary);
}

function wireUpload(): void {
  el<HTMLInputElement>('upload').addEventListener('change', async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    try {
      state.session = await api.createSession(await fileToBase64(file));
    } catch (err) {
      setStatus(`upload failed: ${err}`);
      return;
    }
    el<HTMLImageElement>('original').src = state.session.image_url;
    el('caption-slot').replaceChildren(
      renderCaptionReview(state.session, async (caption) => {
        if (caption !== state.session!.caption) {
          // editing the caption fixes it for the next run via a fresh session
          state.session = await api.createSession(
            await fileToBase64(file), caption,
          );
        }
        el<HTMLElement>('finetune-panel').hidden = false;
        setStatus(`caption confirmed: "${caption}"`);
      }),
    );
    setStatus(`session ${state.session.session_id} (caption: "${state.session.caption}")`);
  });
}

function wireFinetune(): void {
  el('finetune-go').addEventListener('click', async () => {
    if (!state.session) return;
    const seed = Number(el<HTMLInputElement>('seed').value || '0');
    const job = await api.startFinetune(state.session.session_id, { kind: 'joint', seed });
    state.jobs.set(job.job_id, job);
    renderJobs();
  });
}

function wireEditing(): void {
  const strategies = ['none', 'encoderattn', 'decoderattn', 'decoder-keep-crossattn',
                      'decoder-keep-attn-block2', 'encoder-keep-none', 'encoder-keep-attn-block1'];
  el('strategy-slot').replaceChildren(
    renderStrategyPicker(strategies, async (choice) => {
      if (!state.session || !state.activeRun) return;
      state.selectedStrategy = choice.strategy;
      state.selectedCombination = choice.combination;
      const target = el<HTMLInputElement>('target').value;
      const job = await api.startSweep(
        state.session.session_id,
        nextSweepRequest(state.activeRun, target, choice,
                         Number(el<HTMLInputElement>('seed').value || '0')),
      );
      state.jobs.set(job.job_id, job);
      renderJobs();
    }),
  );
  el('auto-go').addEventListener('click', async () => {
    if (!state.session || !state.activeRun) return;
    const job = await api.startAuto(state.session.session_id, {
      run_id: state.activeRun,
      target_prompt: el<HTMLInputElement>('target').value,
      min_fidelity: Number(el<HTMLInputElement>('min-fidelity').value),
      min_alignment: Number(el<HTMLInputElement>('min-alignment').value),
      seed: Number(el<HTMLInputElement>('seed').value || '0'),
    });
    state.jobs.set(job.job_id, job);
    renderJobs();
  });
}

function wireLogDownload(): void {
  el('download-log').addEventListener('click', () => {
    const blob = new Blob([api.log.toJSON()], { type: 'application/json' });
    const a = document.createElement('a');
    a.href = URL.createObjectURL(blob);
    a.download = 'decision-log.json';
    a.click();
    URL.revokeObjectURL(a.href);
  });
}

export function start(): void {
  wireUpload();
  wireFinetune();
  wireEditing();
  wireLogDownload();
  setInterval(async () => {
    if (pendingJobs(state).length === 0) return;
    await pollOnce((id) => api.getJob(id), state, (doc) => void onJobSettled(doc));
    renderJobs();
  }, 700);
}

if (typeof document !== 'undefined' && document.readyState !== 'loading') {
  start();
} else if (typeof document !== 'undefined') {
  document.addEventListener('DOMContentLoaded', start);
}
