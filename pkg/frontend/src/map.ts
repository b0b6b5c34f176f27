/** Tile renderer for the traversability matrix.
 *
 * 0-cells paint as walls, 1-cells as floor, agent ids as colored sprites;
 * door cells get their own tint so connections read at a glance.
 */

import type { StateView } from './types.js';

const AGENT_COLORS = ['#e4572e', '#17bebb', '#ffc914', '#76b041', '#b267e6',
  '#ff6f91', '#4d8b31', '#2e86ab'];

export function agentColor(agentId: number): string {
  return AGENT_COLORS[(agentId - 2) % AGENT_COLORS.length];
}

export function drawState(canvas: HTMLCanvasElement, view: StateView): void {
  const { matrix, doors } = view;
  const tile = Math.max(
    2,
    Math.floor(Math.min(canvas.width / matrix.width, canvas.height / matrix.height)),
  );
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const doorSet = new Set(doors.map(([x, y]) => `${x},${y}`));

  for (let y = 0; y < matrix.height; y += 1) {
    for (let x = 0; x < matrix.width; x += 1) {
      const value = matrix.values[y][x];
      if (value === 0) ctx.fillStyle = '#3b3a44';
      else if (doorSet.has(`${x},${y}`)) ctx.fillStyle = '#c9b458';
      else ctx.fillStyle = '#efede4';
      ctx.fillRect(x * tile, y * tile, tile, tile);
    }
  }

  for (const entity of view.entities) {
    if (entity.location[0] === 'carried') continue;
    const [x, y] = entity.location as [number, number];
    ctx.fillStyle = entity.id.startsWith('victim')
      ? (entity.state['condition'] === 'rescued' ? '#8fd18b' : '#d64550')
      : '#7a6c5d';
    ctx.beginPath();
    ctx.arc(x * tile + tile / 2, y * tile + tile / 2, tile * 0.28, 0, Math.PI * 2);
    ctx.fill();
  }

  for (const agent of view.agents) {
    const [x, y] = agent.location;
    ctx.fillStyle = agentColor(agent.id);
    ctx.fillRect(x * tile + 1, y * tile + 1, tile - 2, tile - 2);
    if (tile >= 10) {
      ctx.fillStyle = '#fff';
      ctx.font = `${tile - 4}px sans-serif`;
      ctx.textAlign = 'center';
      ctx.textBaseline = 'middle';
      ctx.fillText(String(agent.id), x * tile + tile / 2, y * tile + tile / 2 + 1);
    }
  }
}
