import type { MetricsDoc, MetricsEnvelope } from './types.js';

export interface TableRow {
  abnormality: string;
  tr: number;
  fd: number;
  pecr: string;
  fr: number;
  td: number;
  oder: string;
}

export interface DashboardModel {
  pending: number;
  hasData: boolean;
  ruMeanText: string;
  ruCiText: string;
  ruN: number;
  rows: TableRow[];
  cdfRu: [number, number][];
  cdfTu: [number, number][];
}

const fmt = (v: number | null) => (v === null ? '-' : v.toFixed(4));

/** Flatten the /metrics payload into exactly what the panel renders. */
export function dashboardModel(envelope: MetricsEnvelope): DashboardModel {
  const report: MetricsDoc | null = envelope.report;
  if (!report) {
    return {
      pending: envelope.pending_referrals,
      hasData: false,
      ruMeanText: '-',
      ruCiText: '-',
      ruN: 0,
      rows: [],
      cdfRu: [],
      cdfTu: [],
    };
  }
  const rows = Object.entries(report.per_abnormality)
    .sort(([a], [b]) => a.localeCompare(b))
    .map(([abnormality, m]) => ({
      abnormality,
      tr: m.counts.tr,
      fd: m.counts.fd,
      pecr: fmt(m.pecr),
      fr: m.counts.fr,
      td: m.counts.td,
      oder: fmt(m.oder),
    }));
  return {
    pending: envelope.pending_referrals,
    hasData: true,
    ruMeanText: fmt(report.ru_true_mean),
    ruCiText: report.ru_true_ci
      ? `[${fmt(report.ru_true_ci[0])}, ${fmt(report.ru_true_ci[1])}]`
      : '-',
    ruN: report.ru_true_n,
    rows,
    cdfRu: report.cdf_ru,
    cdfTu: report.cdf_tu,
  };
}
