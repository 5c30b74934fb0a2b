import type { ApiClient, DecisionOutcome } from './api.js';
import type { Referral } from './types.js';

export interface QueueEvent {
  kind: 'decided' | 'conflict' | 'error';
  message: string;
}

/**
 * The pending-referral work queue. Holds no authoritative state: every
 * refresh re-reads the server, and a 409 conflict simply triggers one.
 */
export class ReviewQueue {
  items: Referral[] = [];
  selected: string | null = null;

  constructor(private readonly api: ApiClient) {}

  async refresh(): Promise<void> {
    this.items = await this.api.listReferrals('pending');
    if (this.selected && !this.items.some((r) => r.referral_id === this.selected)) {
      this.selected = null;
    }
    if (this.selected === null && this.items.length > 0) {
      this.selected = this.items[0].referral_id;
    }
  }

  get current(): Referral | null {
    return this.items.find((r) => r.referral_id === this.selected) ?? null;
  }

  select(referralId: string): void {
    if (this.items.some((r) => r.referral_id === referralId)) {
      this.selected = referralId;
    }
  }

  /** Decide the selected referral, then advance to the next pending one. */
  async decideCurrent(decision: 'accept' | 'reject'): Promise<QueueEvent> {
    const current = this.current;
    if (!current) {
      return { kind: 'error', message: 'nothing selected' };
    }
    const outcome: DecisionOutcome = await this.api.decide(current.referral_id, decision);
    await this.refresh();
    switch (outcome.kind) {
      case 'ok':
        return {
          kind: 'decided',
          message: `${outcome.referral.referral_id} ${outcome.referral.status}`,
        };
      case 'conflict':
        return { kind: 'conflict', message: outcome.message };
      default:
        return { kind: 'error', message: outcome.message };
    }
  }
}
