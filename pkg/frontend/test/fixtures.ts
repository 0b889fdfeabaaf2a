/** Deterministic fixture manifests for renderer tests (shapes mirror the
 * server's sweep manifest documents). */

import type { CandidateRecord, SweepManifest } from '../src/types.js';

function round1(x: number): number {
  return Math.round(x * 10) / 10;
}

export function subtractionManifest(forgetting = false): SweepManifest {
  const lo = forgetting ? 0.0 : 0.8;
  const count = forgetting ? 15 : 9;
  const candidates: CandidateRecord[] = [];
  for (let i = 0; i < count; i++) {
    const gamma = round1(lo + 0.1 * i);
    candidates.push({
      index: i,
      gamma,
      seed: 3,
      fidelity: -0.05 - 0.01 * i,
      alignment: -1.5 + 0.12 * i - 0.02 * i * i,
      file: `candidate_${String(i).padStart(2, '0')}.png`,
      image_id: `sweep-fix_${String(i).padStart(2, '0')}`,
      image_url: `/images/sweep-fix_${String(i).padStart(2, '0')}.png`,
    });
  }
  return {
    sweep_id: 'sweep-fix',
    run_id: 'run-fix',
    target_prompt: 'a red square right on gray',
    combination: 'subtraction',
    strategy: forgetting ? 'decoderattn' : 'none',
    sigma: 0,
    seed: 3,
    count,
    candidates,
  };
}

export function projectionManifest(): SweepManifest {
  const candidates: CandidateRecord[] = [];
  let i = 0;
  for (const alpha of [0.8, 1.1]) {
    for (let b = 0; b < 6; b++) {
      const beta = round1(1.0 + 0.1 * b);
      candidates.push({
        index: i,
        alpha,
        beta,
        seed: 3,
        fidelity: -0.08 - 0.005 * i,
        alignment: -1.0 - 0.07 * i,
        file: `candidate_${String(i).padStart(2, '0')}.png`,
        image_id: `sweep-proj_${String(i).padStart(2, '0')}`,
        image_url: `/images/sweep-proj_${String(i).padStart(2, '0')}.png`,
      });
      i++;
    }
  }
  return {
    sweep_id: 'sweep-proj',
    run_id: 'run-fix',
    target_prompt: 'a red square right on gray',
    combination: 'projection',
    strategy: 'none',
    sigma: 0,
    seed: 3,
    count: 12,
    candidates,
  };
}
