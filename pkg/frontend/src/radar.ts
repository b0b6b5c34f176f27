/** Geometry for the five-axis personality radar chart. */

export const TRAIT_AXES = [
  'Openness',
  'Conscientiousness',
  'Extraversion',
  'Agreeableness',
  'Neuroticism',
] as const;

/** Polygon vertices for scores in [0,1], starting at 12 o'clock. */
export function radarPoints(
  scores: number[],
  cx: number,
  cy: number,
  radius: number,
): [number, number][] {
  return scores.map((score, index) => {
    const angle = -Math.PI / 2 + (2 * Math.PI * index) / scores.length;
    const r = radius * Math.max(0, Math.min(1, score));
    return [cx + r * Math.cos(angle), cy + r * Math.sin(angle)];
  });
}

export function polygonPath(points: [number, number][]): string {
  return points
    .map(([x, y], i) => `${i === 0 ? 'M' : 'L'}${x.toFixed(1)},${y.toFixed(1)}`)
    .join(' ') + ' Z';
}

/** Standalone SVG markup for a profile's radar, grid rings included. */
export function radarSvg(scores: number[], size = 140): string {
  const cx = size / 2;
  const cy = size / 2;
  const radius = size / 2 - 16;
  const rings = [0.25, 0.5, 0.75, 1]
    .map((f) => {
      const ring = polygonPath(radarPoints(scores.map(() => f), cx, cy, radius));
      return `<path d="${ring}" class="radar-ring"/>`;
    })
    .join('');
  const axes = radarPoints(scores.map(() => 1), cx, cy, radius)
    .map(([x, y]) => `<line x1="${cx}" y1="${cy}" x2="${x.toFixed(1)}" y2="${y.toFixed(1)}" class="radar-axis"/>`)
    .join('');
  const shape = polygonPath(radarPoints(scores, cx, cy, radius));
  return (
    `<svg viewBox="0 0 ${size} ${size}" class="radar">` +
    `${rings}${axes}<path d="${shape}" class="radar-shape"/></svg>`
  );
}
