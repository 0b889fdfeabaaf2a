/**
 * Decision log: every API action the workbench performs, recorded as a
 * replayable step sequence. Server-generated ids are captured into named
 * variables and referenced as "$name" in later steps, so a replay against a
 * fresh server rebinds them. Candidate fetches record content hashes; a
 * verifying replay asserts the fresh bytes hash identically.
 */

export interface LogStep {
  action: 'create_session' | 'finetune' | 'sweep' | 'auto' | 'fetch_candidates';
  body?: Record<string, unknown>;
  session?: string;
  sweep?: string;
  save?: Record<string, string>; // var name -> dotted path into the response
  sha256?: string[]; // recorded candidate hashes (fetch_candidates only)
}

export interface DecisionLogDoc {
  note: string;
  steps: LogStep[];
}

export class DecisionLog {
  steps: LogStep[] = [];

  record(step: LogStep): void {
    this.steps.push(step);
  }

  toDoc(note = 'recorded workbench session'): DecisionLogDoc {
    return { note, steps: this.steps };
  }

  toJSON(): string {
    return JSON.stringify(this.toDoc(), null, 2);
  }
}

export function dig(doc: unknown, path: string): unknown {
  let cur: any = doc;
  for (const part of path.split('.')) {
    if (cur == null) return undefined;
    cur = cur[part];
  }
  return cur;
}

export function substitute(value: unknown, vars: Record<string, string>): unknown {
  if (typeof value === 'string' && value.startsWith('$')) {
    const name = value.slice(1);
    if (!(name in vars)) throw new Error(`unbound log variable $${name}`);
    return vars[name];
  }
  if (Array.isArray(value)) return value.map((v) => substitute(v, vars));
  if (value && typeof value === 'object') {
    const out: Record<string, unknown> = {};
    for (const [k, v] of Object.entries(value)) out[k] = substitute(v, vars);
    return out;
  }
  return value;
}
