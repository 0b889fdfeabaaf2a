/**
 * Spawns a disposable forgedit session service for recording/replaying
 * decision logs: seeds a fresh data dir with a deterministic quick pretrain
 * (seeded, so every invocation produces identical checkpoint bytes), writes
 * a service.toml, boots `python -m forgedit.service`, and waits for /healthz.
 */

import { spawn, spawnSync, type ChildProcess } from 'node:child_process';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

export interface RunningServer {
  baseUrl: string;
  dataDir: string;
  stop: () => Promise<void>;
}

export const PRETRAIN_ARGS = ['--steps', '60', '--batch', '8', '--seed', '7'];

export async function startServer(port: number): Promise<RunningServer> {
  const dataDir = mkdtempSync(join(tmpdir(), 'forgedit-ui-'));
  const pretrain = spawnSync('forgedit', ['pretrain', ...PRETRAIN_ARGS], {
    env: { ...process.env, FORGEDIT_DATA_DIR: dataDir },
    encoding: 'utf-8',
    timeout: 180_000,
  });
  if (pretrain.status !== 0) {
    throw new Error(`pretrain failed: ${pretrain.stderr || pretrain.stdout}`);
  }

  const configPath = join(dataDir, 'service.toml');
  writeFileSync(
    configPath,
    `[service]\ndata_dir = "${dataDir}"\nport = ${port}\nworkers = 1\ncaption_provider = "fixture"\n`,
  );
  const proc: ChildProcess = spawn('python3', ['-m', 'forgedit.service'], {
    env: { ...process.env, FORGEDIT_CONFIG: configPath },
    stdio: ['ignore', 'pipe', 'pipe'],
  });
  let stderr = '';
  proc.stderr?.on('data', (chunk) => (stderr += chunk));

  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      const resp = await fetch(`${baseUrl}/healthz`);
      if (resp.ok) break;
    } catch {
      // not up yet
    }
    if (proc.exitCode !== null) {
      throw new Error(`service exited early: ${stderr}`);
    }
    if (Date.now() > deadline) {
      proc.kill();
      throw new Error(`service did not come up: ${stderr}`);
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  return {
    baseUrl,
    dataDir,
    stop: () =>
      new Promise<void>((resolve) => {
        proc.on('exit', () => resolve());
        proc.kill('SIGTERM');
        setTimeout(() => {
          if (proc.exitCode === null) proc.kill('SIGKILL');
          resolve();
        }, 5_000);
      }),
  };
}
