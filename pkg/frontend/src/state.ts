/**
 * Workbench state: one session at a time, pending jobs with progress,
 * the latest sweep grid, and the user's current strategy/combination
 * choices. Concurrent poll responses apply last-write-wins keyed by job id.
 */

import type { JobDoc, SessionDoc, SweepManifest } from './types.js';

export interface WorkbenchState {
  session: SessionDoc | null;
  activeRun: string | null;
  latestSweep: SweepManifest | null;
  selectedStrategy: string;
  selectedCombination: 'subtraction' | 'projection';
  jobs: Map<string, JobDoc>;
}

export function initialState(): WorkbenchState {
  return {
    session: null,
    activeRun: null,
    latestSweep: null,
    selectedStrategy: 'none',
    selectedCombination: 'subtraction',
    jobs: new Map(),
  };
}

/** Apply a poll response; the newest response for a job id always wins. */
export function applyJobUpdate(state: WorkbenchState, doc: JobDoc): WorkbenchState {
  state.jobs.set(doc.job_id, doc);
  return state;
}

export function pendingJobs(state: WorkbenchState): JobDoc[] {
  return [...state.jobs.values()].filter(
    (j) => j.state === 'queued' || j.state === 'running',
  );
}

/**
 * Poll every pending job once; resolves after all responses are applied.
 * Safe to call on an interval: responses land keyed by job id, so overlapping
 * ticks cannot corrupt unrelated entries.
 */
export async function pollOnce(
  getJob: (id: string) => Promise<JobDoc>,
  state: WorkbenchState,
  onSettled?: (doc: JobDoc) => void,
): Promise<void> {
  await Promise.all(
    pendingJobs(state).map(async (job) => {
      const doc = await getJob(job.job_id);
      const before = state.jobs.get(doc.job_id);
      applyJobUpdate(state, doc);
      const settledNow =
        (doc.state === 'done' || doc.state === 'failed') &&
        before !== undefined &&
        before.state !== 'done' &&
        before.state !== 'failed';
      if (settledNow && onSettled) onSettled(doc);
    }),
  );
}
