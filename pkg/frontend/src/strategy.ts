/**
 * Strategy picker: after inspecting an overfit grid the user chooses a
 * forgetting strategy (or a custom path-glob spec using the CLI grammar) and
 * a combination mechanism; the picker emits the next sweep request with the
 * matching γ range pre-filled (0.8-1.6 without forgetting, 0.0-1.4 with).
 */

import { gammaRangeFor } from './types.js';
import type { SweepRequest } from './types.js';

export interface StrategyChoice {
  strategy: string;
  combination: 'subtraction' | 'projection';
  gammaRange: [number, number];
}

export function nextSweepRequest(
  runId: string,
  targetPrompt: string,
  choice: StrategyChoice,
  seed = 0,
): SweepRequest {
  return {
    run_id: runId,
    target_prompt: targetPrompt,
    combination: choice.combination,
    strategy: choice.strategy,
    seed,
  };
}

export function renderStrategyPicker(
  builtinNames: string[],
  onPick: (choice: StrategyChoice) => void,
): HTMLElement {
  const root = document.createElement('section');
  root.className = 'strategy-picker';

  const select = document.createElement('select');
  select.className = 'strategy-select';
  for (const name of builtinNames) {
    const opt = document.createElement('option');
    opt.value = name;
    opt.textContent = name;
    select.appendChild(opt);
  }

  const custom = document.createElement('input');
  custom.type = 'text';
  custom.className = 'strategy-custom';
  custom.placeholder = 'custom:<path-globs>[;sigma=v]';

  const combo = document.createElement('select');
  combo.className = 'combination-select';
  for (const c of ['subtraction', 'projection']) {
    const opt = document.createElement('option');
    opt.value = c;
    opt.textContent = c;
    combo.appendChild(opt);
  }

  const range = document.createElement('output');
  range.className = 'gamma-range';

  const refreshRange = () => {
    const strategy = custom.value.trim() || select.value;
    const [lo, hi] = gammaRangeFor(strategy);
    range.value = `γ ∈ [${lo.toFixed(1)}, ${hi.toFixed(1)}]`;
    range.dataset.lo = lo.toFixed(1);
    range.dataset.hi = hi.toFixed(1);
  };
  select.addEventListener('change', refreshRange);
  custom.addEventListener('input', refreshRange);
  refreshRange();

  const go = document.createElement('button');
  go.className = 'strategy-go';
  go.textContent = 'Sweep with this strategy';
  go.addEventListener('click', () => {
    const strategy = custom.value.trim() || select.value;
    onPick({
      strategy,
      combination: combo.value as 'subtraction' | 'projection',
      gammaRange: gammaRangeFor(strategy),
    });
  });

  root.append(select, custom, combo, range, go);
  return root;
}
