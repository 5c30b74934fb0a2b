import type { FixationDoc } from './types.js';

/**
 * Client-side presentation helpers for the case view. The service stays
 * ignorant of presentation: overlays are alpha-composited here from the
 * case PNG and the ROI PNG.
 */

export function drawOverlay(
  canvas: HTMLCanvasElement,
  base: HTMLImageElement,
  roi: HTMLImageElement | null,
  opacity: number,
): void {
  const ctx = canvas.getContext('2d');
  if (!ctx) return; // headless test environments have no raster backend
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.globalAlpha = 1;
  ctx.drawImage(base, 0, 0, canvas.width, canvas.height);
  if (roi) {
    ctx.globalAlpha = Math.max(0, Math.min(1, opacity));
    ctx.drawImage(roi, 0, 0, canvas.width, canvas.height);
    ctx.globalAlpha = 1;
  }
}

export interface TimelineSegment {
  x0: number;
  x1: number;
  highlighted: boolean;
}

/**
 * Map fixation dwells onto a horizontal timeline strip, flagging the ones
 * inside the referral's grounded interval.
 */
export function timelineSegments(
  fixations: FixationDoc[],
  totalMs: number,
  interval: { t_start_ms: number; t_end_ms: number } | null,
  width: number,
): TimelineSegment[] {
  if (totalMs <= 0) return [];
  const sx = (t: number) => (t / totalMs) * width;
  return fixations.map((f) => ({
    x0: sx(f.start_ms),
    x1: Math.max(sx(f.end_ms), sx(f.start_ms) + 1),
    highlighted:
      interval !== null &&
      f.start_ms <= interval.t_end_ms &&
      f.end_ms >= interval.t_start_ms,
  }));
}

export function drawTimeline(
  canvas: HTMLCanvasElement,
  segments: TimelineSegment[],
  interval: { x0: number; x1: number } | null,
): void {
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = '#223';
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (interval) {
    ctx.fillStyle = 'rgba(255, 196, 0, 0.25)';
    ctx.fillRect(interval.x0, 0, interval.x1 - interval.x0, canvas.height);
  }
  for (const seg of segments) {
    ctx.fillStyle = seg.highlighted ? '#ffc400' : '#5588cc';
    ctx.fillRect(seg.x0, canvas.height * 0.3, seg.x1 - seg.x0, canvas.height * 0.4);
  }
}
