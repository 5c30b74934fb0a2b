/** Geometry helpers for drawing empirical CDF step plots on a canvas. */

export interface PlotPoint {
  x: number;
  y: number;
}

/**
 * Convert right-continuous CDF points into a pixel-space step path.
 * The path starts at F=0 on the left edge and ends at F=1 on the right.
 */
export function stepPath(
  points: [number, number][],
  width: number,
  height: number,
  xMin = 0,
  xMax = 1,
): PlotPoint[] {
  if (points.length === 0) return [];
  const sx = (x: number) => ((x - xMin) / (xMax - xMin)) * width;
  const sy = (f: number) => height - f * height;

  const path: PlotPoint[] = [{ x: sx(xMin), y: sy(0) }];
  let prevF = 0;
  for (const [x, f] of points) {
    path.push({ x: sx(x), y: sy(prevF) }); // horizontal run
    path.push({ x: sx(x), y: sy(f) }); // vertical step
    prevF = f;
  }
  path.push({ x: sx(xMax), y: sy(prevF) });
  return path;
}

/** Count of samples strictly above a threshold, read off the CDF. */
export function exceedanceCount(
  points: [number, number][],
  n: number,
  threshold: number,
): number {
  let fAt = 0;
  for (const [x, f] of points) {
    if (x <= threshold) fAt = f;
    else break;
  }
  return Math.round(n * (1 - fAt));
}
