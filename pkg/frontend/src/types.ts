/** Wire types mirrored from the review service JSON. */

export type ReferralStatus = 'pending' | 'accepted' | 'rejected';
export type RoiMode = 'mean' | 'static';

export interface Referral {
  referral_id: string;
  case_id: string;
  abnormality: string;
  interval: { t_start_ms: number; t_end_ms: number };
  roi_mode: RoiMode;
  status: ReferralStatus;
  actor: string | null;
  decided_at?: string | null;
  roi_url: string;
}

export interface FixationDoc {
  start_ms: number;
  end_ms: number;
  x_norm: number;
  y_norm: number;
}

export interface CaseSummary {
  case_id: string;
  report_text: string;
  total_duration_ms: number;
  fixations: FixationDoc[];
  analyzed: boolean;
  image_url: string;
}

export interface AbnormalityMetrics {
  counts: { tr: number; fr: number; fd: number; td: number };
  pecr: number | null;
  oder: number | null;
  ru_mean: number | null;
  ru_ci: [number, number] | null;
  ru_n: number;
}

export interface MetricsDoc {
  per_abnormality: Record<string, AbnormalityMetrics>;
  ru_true_mean: number | null;
  ru_true_ci: [number, number] | null;
  ru_true_n: number;
  cdf_ru: [number, number][];
  cdf_tu: [number, number][];
  interactions: Record<string, number>;
  undefined: string[];
}

export interface MetricsEnvelope {
  pending_referrals: number;
  report: MetricsDoc | null;
}
