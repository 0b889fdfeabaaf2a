/**
 * Sweep grid: one tile per candidate, ordered by grid position, labelled
 * with its γ or (α, β) point. Scores render as relative bars (the proxies
 * only support ordering, so absolute numbers are hidden behind a tooltip).
 * Clicking a tile opens the detail pane with the full request parameters.
 */

import { gridLabel } from './types.js';
import type { CandidateRecord, SweepManifest } from './types.js';

function relativeWidths(values: number[]): number[] {
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo;
  return values.map((v) => (span === 0 ? 100 : Math.round(((v - lo) / span) * 100)));
}

function scoreBar(kind: string, width: number, value: number): HTMLElement {
  const wrap = document.createElement('div');
  wrap.className = `score score-${kind}`;
  wrap.title = `${kind}: ${value}`;
  const bar = document.createElement('div');
  bar.className = 'score-bar';
  bar.style.width = `${width}%`;
  bar.dataset.width = String(width);
  wrap.appendChild(bar);
  return wrap;
}

export function candidateDetail(manifest: SweepManifest, c: CandidateRecord): HTMLElement {
  const pane = document.createElement('dl');
  pane.className = 'candidate-detail';
  const rows: Array<[string, string]> = [
    ['sweep', manifest.sweep_id],
    ['run', manifest.run_id],
    ['target_prompt', manifest.target_prompt],
    ['combination', manifest.combination],
    ['strategy', manifest.strategy],
    ['sigma', String(manifest.sigma)],
    ['grid point', gridLabel(c)],
    ['seed', String(c.seed)],
    ['fidelity', String(c.fidelity)],
    ['alignment', String(c.alignment)],
    ['image', c.image_url],
  ];
  for (const [k, v] of rows) {
    const dt = document.createElement('dt');
    dt.textContent = k;
    const dd = document.createElement('dd');
    dd.textContent = v;
    pane.append(dt, dd);
  }
  return pane;
}

export function renderSweepGrid(
  manifest: SweepManifest,
  onSelect?: (c: CandidateRecord, detail: HTMLElement) => void,
): HTMLElement {
  const root = document.createElement('section');
  root.className = 'sweep-grid';
  root.dataset.sweepId = manifest.sweep_id;

  const header = document.createElement('header');
  header.textContent =
    `${manifest.combination} · strategy ${manifest.strategy} · ` +
    `"${manifest.target_prompt}" · ${manifest.count} candidates`;
  root.appendChild(header);

  const tiles = document.createElement('div');
  tiles.className = 'tiles';
  const ordered = [...manifest.candidates].sort((a, b) => a.index - b.index);
  const fidelityWidths = relativeWidths(ordered.map((c) => c.fidelity));
  const alignmentWidths = relativeWidths(ordered.map((c) => c.alignment));

  ordered.forEach((cand, i) => {
    const tile = document.createElement('figure');
    tile.className = 'tile';
    tile.dataset.index = String(cand.index);

    const img = document.createElement('img');
    img.src = cand.image_url;
    img.alt = `candidate ${gridLabel(cand)}`;
    img.width = 96;
    img.height = 96;

    const caption = document.createElement('figcaption');
    caption.className = 'tile-label';
    caption.textContent = gridLabel(cand);

    tile.append(
      img,
      caption,
      scoreBar('fidelity', fidelityWidths[i], cand.fidelity),
      scoreBar('alignment', alignmentWidths[i], cand.alignment),
    );
    tile.addEventListener('click', () => {
      if (onSelect) onSelect(cand, candidateDetail(manifest, cand));
    });
    tiles.appendChild(tile);
  });

  root.appendChild(tiles);
  return root;
}
