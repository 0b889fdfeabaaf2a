/**
 * Types mirroring the session-service HTTP documents. The server is the
 * single source of math truth; the client never computes scores or grids.
 */

export interface SessionDoc {
  session_id: string;
  caption: string;
  caption_overridden: boolean;
  runs: string[];
  sweeps: string[];
  autos: string[];
  image_id: string;
  image_url: string;
}

export interface JobDoc {
  job_id: string;
  kind: 'finetune' | 'sweep' | 'auto';
  session_id: string;
  state: 'queued' | 'running' | 'done' | 'failed';
  progress: number;
  result: Record<string, unknown> | null;
  error: string | null;
}

export interface CandidateRecord {
  index: number;
  gamma?: number;
  alpha?: number;
  beta?: number;
  seed: number;
  fidelity: number;
  alignment: number;
  file: string;
  image_id: string;
  image_url: string;
}

export interface SweepManifest {
  sweep_id: string;
  run_id: string;
  target_prompt: string;
  combination: 'subtraction' | 'projection';
  strategy: string;
  sigma: number;
  seed: number;
  count: number;
  candidates: CandidateRecord[];
}

export interface FinetuneRequest {
  kind?: 'joint' | 'dreambooth';
  seed?: number;
  lr_embedding?: number;
  lr_unet?: number;
  batch_repeat?: number;
  min_steps?: number;
  max_steps?: number;
  loss_threshold?: number;
  steps?: number;
  batch?: number;
  lr?: number;
  variant?: string;
}

export interface SweepRequest {
  run_id: string;
  target_prompt: string;
  combination?: 'subtraction' | 'projection';
  strategy?: string;
  seed?: number;
  guidance_scale?: number;
  ddim_steps?: number;
  gammas?: number[];
}

export interface AutoRequest {
  run_id: string;
  target_prompt: string;
  min_fidelity: number;
  min_alignment: number;
  strategy_order?: string[];
  seed?: number;
  guidance_scale?: number;
  ddim_steps?: number;
}

/** Declared gamma ranges; the picker pre-fills these, the server re-validates. */
export const GAMMA_RANGE_PLAIN: [number, number] = [0.8, 1.6];
export const GAMMA_RANGE_FORGETTING: [number, number] = [0.0, 1.4];

export function gammaRangeFor(strategy: string): [number, number] {
  return strategy === 'none' ? GAMMA_RANGE_PLAIN : GAMMA_RANGE_FORGETTING;
}

export function gridLabel(c: CandidateRecord): string {
  if (c.gamma !== undefined && c.gamma !== null) {
    return `γ=${c.gamma.toFixed(1)}`;
  }
  return `α=${c.alpha!.toFixed(1)} β=${c.beta!.toFixed(1)}`;
}
