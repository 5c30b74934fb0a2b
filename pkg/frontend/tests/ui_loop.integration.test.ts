// @vitest-environment happy-dom
//
// Scripted review loop against a real service instance: load the queue,
// accept one referral, reject another, and check that the service state
// and the metrics panel both reflect the decisions.

import { spawn, spawnSync, type ChildProcess } from 'node:child_process';
import { mkdtempSync, rmSync } from 'node:fs';
import { createServer, Socket } from 'node:net';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { initApp } from '../src/app.js';
import type { MetricsEnvelope, Referral } from '../src/types.js';

const SEED_SCRIPT = `
import json
from corax.bundles import bundle_to_doc
from corax.errorsim import ErrorSpec, inject_errors
from corax.labeling import Abnormality
from corax.synth import generate_cases

cases = [sc.bundle for sc in generate_cases(2, seed=60101, positives={Abnormality.EDEMA: 2})]
altered, _ = inject_errors(cases, ErrorSpec(rates={Abnormality.EDEMA: 1.0}, seed=1))
print(json.dumps([bundle_to_doc(c) for c in altered]))
`;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, '127.0.0.1', () => {
      const address = srv.address();
      if (address && typeof address === 'object') {
        const port = address.port;
        srv.close(() => resolve(port));
      } else {
        reject(new Error('no port'));
      }
    });
  });
}

const haveService = spawnSync('corax', ['--help'], { encoding: 'utf-8' }).status === 0;

describe.skipIf(!haveService)('review loop against a live service', () => {
  let child: ChildProcess;
  let base = '';
  let dataDir = '';

  beforeAll(async () => {
    const port = await freePort();
    base = `http://127.0.0.1:${port}`;
    dataDir = mkdtempSync(join(tmpdir(), 'corax-ui-test-'));
    child = spawn('corax', ['serve', '--port', String(port), '--data-dir', dataDir], {
      stdio: 'ignore',
    });
    let up = false;
    for (let i = 0; i < 100 && !up; i++) {
      up = await new Promise<boolean>((resolve) => {
        const sock = new Socket();
        sock.once('connect', () => {
          sock.destroy();
          resolve(true);
        });
        sock.once('error', () => resolve(false));
        sock.connect(port, '127.0.0.1');
      });
      if (!up) await new Promise((r) => setTimeout(r, 100));
    }
    expect(up).toBe(true);

    const seeded = spawnSync('python3', ['-c', SEED_SCRIPT], { encoding: 'utf-8' });
    expect(seeded.status).toBe(0);
    const docs = JSON.parse(seeded.stdout) as Array<Record<string, unknown>>;
    for (const doc of docs) {
      const ingest = await fetch(`${base}/cases`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(doc),
      });
      expect(ingest.status).toBe(201);
      const analyze = await fetch(`${base}/cases/${doc.case_id}/analyze`, { method: 'POST' });
      expect(analyze.status).toBe(200);
    }
  }, 60000);

  afterAll(() => {
    child?.kill();
    if (dataDir) rmSync(dataDir, { recursive: true, force: true });
  });

  it('accepts one referral and rejects one; service and panel agree', async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const app = await initApp(document, base);

    const listItems = document.querySelectorAll('#queue-list li');
    expect(listItems.length).toBe(2);
    const firstId = app.queue.selected;
    expect(firstId).not.toBeNull();

    // accept via keyboard shortcut, reject via button
    document.dispatchEvent(new KeyboardEvent('keydown', { key: 'a' }));
    await vi_waitUntil(() => app.queue.items.length === 1);
    const secondId = app.queue.selected;
    expect(secondId).not.toBe(firstId);

    (document.getElementById('reject-btn') as HTMLButtonElement).click();
    await vi_waitUntil(() => app.queue.items.length === 0);

    const referrals = (await (await fetch(`${base}/referrals`)).json()) as Referral[];
    const byId = new Map(referrals.map((r) => [r.referral_id, r.status]));
    expect(byId.get(firstId!)).toBe('accepted');
    expect(byId.get(secondId!)).toBe('rejected');

    const metrics = (await (await fetch(`${base}/metrics`)).json()) as MetricsEnvelope;
    expect(metrics.pending_referrals).toBe(0);
    expect(metrics.report).not.toBeNull();
    const meanText = metrics.report!.ru_true_mean!.toFixed(4);

    await vi_waitUntil(() =>
      (document.getElementById('metrics-summary')?.textContent ?? '').includes(meanText),
    );
    const summary = document.getElementById('metrics-summary')!.textContent!;
    expect(summary).toContain(`n=${metrics.report!.ru_true_n}`);

    // queue view is exhausted and says so
    expect(document.getElementById('case-title')!.textContent).toBe('Queue empty');
  }, 60000);
});

async function vi_waitUntil(cond: () => boolean, timeoutMs = 15000): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > timeoutMs) throw new Error('condition never became true');
    await new Promise((r) => setTimeout(r, 50));
  }
}
