// @vitest-environment jsdom
import { describe, expect, it } from 'vitest';

import { renderSweepGrid } from '../src/grid.js';
import type { CandidateRecord } from '../src/types.js';
import { projectionManifest, subtractionManifest } from './fixtures.js';

describe('sweep grid rendering', () => {
  it('renders 9 tiles with gamma labels for the plain subtraction sweep', () => {
    const grid = renderSweepGrid(subtractionManifest(false));
    const tiles = grid.querySelectorAll('.tile');
    expect(tiles.length).toBe(9);
    const labels = [...grid.querySelectorAll('.tile-label')].map((n) => n.textContent);
    expect(labels[0]).toBe('γ=0.8');
    expect(labels[8]).toBe('γ=1.6');
  });

  it('renders 15 tiles for the forgetting sweep', () => {
    const grid = renderSweepGrid(subtractionManifest(true));
    expect(grid.querySelectorAll('.tile').length).toBe(15);
    const labels = [...grid.querySelectorAll('.tile-label')].map((n) => n.textContent);
    expect(labels[0]).toBe('γ=0.0');
    expect(labels[14]).toBe('γ=1.4');
  });

  it('renders 12 tiles with alpha/beta labels for the projection sweep', () => {
    const grid = renderSweepGrid(projectionManifest());
    const labels = [...grid.querySelectorAll('.tile-label')].map((n) => n.textContent);
    expect(labels.length).toBe(12);
    expect(labels[0]).toBe('α=0.8 β=1.0');
    expect(labels[6]).toBe('α=1.1 β=1.0');
    expect(labels[11]).toBe('α=1.1 β=1.5');
  });

  it('orders tiles by grid index regardless of manifest order', () => {
    const manifest = subtractionManifest(false);
    manifest.candidates = [...manifest.candidates].reverse();
    const grid = renderSweepGrid(manifest);
    const indices = [...grid.querySelectorAll<HTMLElement>('.tile')].map(
      (t) => t.dataset.index,
    );
    expect(indices).toEqual(['0', '1', '2', '3', '4', '5', '6', '7', '8']);
  });

  it('score bars are relative: best 100%, worst 0%', () => {
    const grid = renderSweepGrid(subtractionManifest(false));
    const widths = [...grid.querySelectorAll<HTMLElement>('.score-fidelity .score-bar')].map(
      (b) => Number(b.dataset.width),
    );
    // fixture fidelity decreases with index
    expect(widths[0]).toBe(100);
    expect(widths[8]).toBe(0);
    expect(Math.max(...widths)).toBe(100);
    expect(Math.min(...widths)).toBe(0);
  });

  it('clicking a tile opens the detail pane with the request parameters', () => {
    const manifest = subtractionManifest(false);
    let selected: CandidateRecord | null = null;
    let pane: HTMLElement | null = null;
    const grid = renderSweepGrid(manifest, (c, detail) => {
      selected = c;
      pane = detail;
    });
    grid.querySelectorAll<HTMLElement>('.tile')[3].click();
    expect(selected!.index).toBe(3);
    const text = pane!.textContent ?? '';
    expect(text).toContain('γ=1.1');
    expect(text).toContain('a red square right on gray');
    expect(text).toContain('strategy');
    expect(text).toContain(manifest.candidates[3].image_url);
  });

  it('rendering is deterministic for a fixed manifest (golden snapshot)', () => {
    const html = renderSweepGrid(subtractionManifest(false)).outerHTML;
    expect(renderSweepGrid(subtractionManifest(false)).outerHTML).toBe(html);
    expect(html).toMatchSnapshot();
  });
});
