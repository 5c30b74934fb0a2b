import type { CaseSummary, MetricsEnvelope, Referral, ReferralStatus, RoiMode } from './types.js';

export type DecisionOutcome =
  | { kind: 'ok'; referral: Referral }
  | { kind: 'conflict'; message: string }
  | { kind: 'error'; status: number; message: string };

/**
 * Thin typed client over the review service HTTP API. Every mutation the
 * UI performs goes through here; there is no other write path.
 */
export class ApiClient {
  constructor(private readonly base: string = '') {}

  url(path: string): string {
    return this.base + path;
  }

  roiUrl(referral: Referral, mode?: RoiMode): string {
    const suffix = mode && mode !== referral.roi_mode ? `?mode=${mode}` : '';
    return this.url(referral.roi_url + suffix);
  }

  caseImageUrl(caseId: string): string {
    return this.url(`/cases/${caseId}/image`);
  }

  async listReferrals(status?: ReferralStatus): Promise<Referral[]> {
    const query = status ? `?status=${status}` : '';
    const res = await fetch(this.url(`/referrals${query}`));
    if (!res.ok) throw new Error(`referral list failed: ${res.status}`);
    return res.json();
  }

  async getCase(caseId: string): Promise<CaseSummary> {
    const res = await fetch(this.url(`/cases/${caseId}`));
    if (!res.ok) throw new Error(`case fetch failed: ${res.status}`);
    return res.json();
  }

  async ingestCase(doc: unknown): Promise<string> {
    const res = await fetch(this.url('/cases'), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(doc),
    });
    if (!res.ok) throw new Error(`ingest failed: ${res.status}`);
    return (await res.json()).case_id;
  }

  async analyzeCase(caseId: string, roiMode: RoiMode = 'mean'): Promise<unknown> {
    const res = await fetch(this.url(`/cases/${caseId}/analyze?roi_mode=${roiMode}`), {
      method: 'POST',
    });
    if (!res.ok) throw new Error(`analyze failed: ${res.status}`);
    return res.json();
  }

  /** 409 (someone else decided first) is an expected outcome, not an exception. */
  async decide(referralId: string, decision: 'accept' | 'reject'): Promise<DecisionOutcome> {
    const res = await fetch(this.url(`/referrals/${referralId}/decision`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ decision, actor: 'human' }),
    });
    if (res.status === 409) {
      const body = await res.json().catch(() => ({ message: 'already decided' }));
      return { kind: 'conflict', message: body.message ?? 'already decided' };
    }
    if (!res.ok) {
      return { kind: 'error', status: res.status, message: await res.text() };
    }
    return { kind: 'ok', referral: await res.json() };
  }

  async getMetrics(): Promise<MetricsEnvelope> {
    const res = await fetch(this.url('/metrics'));
    if (!res.ok) throw new Error(`metrics fetch failed: ${res.status}`);
    return res.json();
  }
}
