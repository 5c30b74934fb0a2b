import { describe, expect, it } from 'vitest';

import { exceedanceCount, stepPath } from '../src/cdf.js';

describe('stepPath', () => {
  it('returns an empty path for no points', () => {
    expect(stepPath([], 100, 50)).toEqual([]);
  });

  it('starts at F=0, ends at F=1, and never moves left', () => {
    const points: [number, number][] = [[0.2, 0.25], [0.5, 0.75], [0.9, 1.0]];
    const path = stepPath(points, 200, 100);
    expect(path[0]).toEqual({ x: 0, y: 100 });
    expect(path[path.length - 1]).toEqual({ x: 200, y: 0 });
    for (let i = 1; i < path.length; i++) {
      expect(path[i].x).toBeGreaterThanOrEqual(path[i - 1].x);
      expect(path[i].y).toBeLessThanOrEqual(path[i - 1].y);
    }
  });

  it('draws one horizontal run and one vertical step per point', () => {
    const path = stepPath([[0.5, 1.0]], 100, 100);
    expect(path).toEqual([
      { x: 0, y: 100 },
      { x: 50, y: 100 },
      { x: 50, y: 0 },
      { x: 100, y: 0 },
    ]);
  });
});

describe('exceedanceCount', () => {
  const samples = [0.1, 0.1, 0.4, 0.7, 0.7, 0.9];
  const points: [number, number][] = [
    [0.1, 2 / 6],
    [0.4, 3 / 6],
    [0.7, 5 / 6],
    [0.9, 1.0],
  ];

  it('matches a direct count at assorted thresholds', () => {
    for (const thr of [-0.5, 0.05, 0.1, 0.3, 0.4, 0.69, 0.7, 0.89, 0.95]) {
      const direct = samples.filter((v) => v > thr).length;
      expect(exceedanceCount(points, samples.length, thr)).toBe(direct);
    }
  });
});
