/**
 * Spawns a real nirhub server for the integration tests and provides its
 * base URL. Unit tests never touch it.
 */

import { spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync } from 'node:fs';
import { createServer } from 'node:net';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import type { TestProject } from 'vitest/node';

declare module 'vitest' {
  interface ProvidedContext {
    serverBaseUrl: string;
  }
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, '127.0.0.1', () => {
      const address = srv.address();
      if (address === null || typeof address === 'string') {
        reject(new Error('no port assigned'));
        return;
      }
      srv.close(() => resolve(address.port));
    });
  });
}

async function waitReady(baseUrl: string, proc: ChildProcess, timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (proc.exitCode !== null) {
      throw new Error(`server exited with code ${proc.exitCode} during startup`);
    }
    try {
      const resp = await fetch(`${baseUrl}/api/instances`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error('server did not become ready in time');
}

export default async function setup(project: TestProject): Promise<() => Promise<void>> {
  const port = await freePort();
  const storage = mkdtempSync(join(tmpdir(), 'nirhub-dashboard-test-'));
  const proc = spawn(
    'python3',
    [
      '-m',
      'nirhub.server.app',
      '--host',
      '127.0.0.1',
      '--port',
      String(port),
      '--storage-root',
      storage,
    ],
    { stdio: 'ignore' },
  );
  const baseUrl = `http://127.0.0.1:${port}`;
  await waitReady(baseUrl, proc);
  project.provide('serverBaseUrl', baseUrl);
  return async () => {
    proc.kill('SIGTERM');
    await new Promise((resolve) => {
      proc.once('exit', resolve);
      setTimeout(resolve, 5000);
    });
  };
}
