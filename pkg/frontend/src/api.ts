/**
 * Thin typed client for the session-service HTTP API. Every action is
 * recorded into the decision log so a session is reproducible as a request
 * sequence.
 */

import { DecisionLog } from './log.js';
import type {
  AutoRequest,
  FinetuneRequest,
  JobDoc,
  SessionDoc,
  SweepManifest,
  SweepRequest,
} from './types.js';

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(`${status}: ${message}`);
  }
}

export class ApiClient {
  constructor(
    public baseUrl: string = '',
    public log: DecisionLog = new DecisionLog(),
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { 'content-type': 'application/json' } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, await resp.text());
    }
    return (await resp.json()) as T;
  }

  async createSession(imageB64: string, caption?: string): Promise<SessionDoc> {
    const body: Record<string, unknown> = { image_b64: imageB64 };
    if (caption !== undefined) body.caption = caption;
    const doc = await this.request<SessionDoc>('POST', '/sessions', body);
    this.log.record({
      action: 'create_session',
      body,
      save: { session: 'session_id' },
    });
    return doc;
  }

  getSession(id: string): Promise<SessionDoc> {
    return this.request('GET', `/sessions/${id}`);
  }

  async startFinetune(sessionId: string, body: FinetuneRequest): Promise<JobDoc> {
    const doc = await this.request<JobDoc>('POST', `/sessions/${sessionId}/finetune`, body);
    this.log.record({
      action: 'finetune',
      session: '$session',
      body: body as Record<string, unknown>,
      save: { run: 'result.run_id' },
    });
    return doc;
  }

  async startSweep(sessionId: string, body: SweepRequest): Promise<JobDoc> {
    const doc = await this.request<JobDoc>('POST', `/sessions/${sessionId}/sweeps`, body);
    this.log.record({
      action: 'sweep',
      session: '$session',
      body: { ...body, run_id: '$run' },
      save: { sweep: 'result.sweep_id' },
    });
    return doc;
  }

  async startAuto(sessionId: string, body: AutoRequest): Promise<JobDoc> {
    const doc = await this.request<JobDoc>('POST', `/sessions/${sessionId}/auto`, body);
    this.log.record({
      action: 'auto',
      session: '$session',
      body: { ...body, run_id: '$run' },
    });
    return doc;
  }

  getJob(id: string): Promise<JobDoc> {
    return this.request('GET', `/jobs/${id}`);
  }

  async waitJob(id: string, pollMs = 300, timeoutMs = 600_000): Promise<JobDoc> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const doc = await this.getJob(id);
      if (doc.state === 'done' || doc.state === 'failed') return doc;
      if (Date.now() > deadline) throw new Error(`job ${id} timed out`);
      await new Promise((r) => setTimeout(r, pollMs));
    }
  }

  async getCandidates(sweepId: string): Promise<SweepManifest> {
    const doc = await this.request<SweepManifest>('GET', `/sweeps/${sweepId}/candidates`);
    this.log.record({ action: 'fetch_candidates', sweep: '$sweep' });
    return doc;
  }

  async fetchImageBytes(imageUrl: string): Promise<ArrayBuffer> {
    const resp = await this.fetchImpl(this.baseUrl + imageUrl);
    if (!resp.ok) throw new ApiError(resp.status, await resp.text());
    return resp.arrayBuffer();
  }

  getStrategies(): Promise<{ strategies: Array<Record<string, unknown>> }> {
    return this.request('GET', '/strategies');
  }
}
