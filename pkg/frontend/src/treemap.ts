/** Order-preserving squarified treemap.
 *
 * Tiles are laid out in input order (the caller passes topics in spectre
 * order), packed into rows against the shorter side of the remaining space.
 * A row is closed when adding the next tile would worsen its worst aspect
 * ratio, which keeps tiles close to square without reordering them.
 */

export interface Rect {
  x: number;
  y: number;
  width: number;
  height: number;
}

export interface TileInput {
  id: string;
  weight: number;
}

export interface Tile extends Rect {
  id: string;
}

function worstAspect(areas: number[], side: number): number {
  const total = areas.reduce((a, b) => a + b, 0);
  if (total <= 0 || side <= 0) return Infinity;
  const thickness = total / side;
  let worst = 1;
  for (const area of areas) {
    if (area <= 0) continue;
    const length = area / thickness;
    worst = Math.max(worst, length / thickness, thickness / length);
  }
  return worst;
}

function layoutRow(areas: number[], free: Rect): { rects: Rect[]; rest: Rect } {
  const total = areas.reduce((a, b) => a + b, 0);
  const horizontal = free.width >= free.height;
  const side = horizontal ? free.height : free.width;
  const thickness = side > 0 ? total / side : 0;
  const rects: Rect[] = [];
  let cursor = horizontal ? free.y : free.x;
  for (const area of areas) {
    const length = thickness > 0 ? area / thickness : 0;
    if (horizontal) {
      rects.push({ x: free.x, y: cursor, width: thickness, height: length });
    } else {
      rects.push({ x: cursor, y: free.y, width: length, height: thickness });
    }
    cursor += length;
  }
  const rest: Rect = horizontal
    ? {
        x: free.x + thickness,
        y: free.y,
        width: free.width - thickness,
        height: free.height,
      }
    : {
        x: free.x,
        y: free.y + thickness,
        width: free.width,
        height: free.height - thickness,
      };
  return { rects, rest };
}

export function layoutTreemap(items: TileInput[], bounds: Rect): Tile[] {
  if (items.length === 0) return [];
  for (const item of items) {
    if (!(item.weight >= 0)) {
      throw new Error(`tile ${item.id} has invalid weight ${item.weight}`);
    }
  }
  const boundsArea = bounds.width * bounds.height;
  let total = items.reduce((sum, item) => sum + item.weight, 0);
  let weights = items.map((item) => item.weight);
  if (total <= 0) {
    weights = items.map(() => 1);
    total = items.length;
  }
  const areas = weights.map((w) => (w / total) * boundsArea);

  const tiles: Tile[] = [];
  let free = { ...bounds };
  let row: number[] = [];
  let rowStart = 0;

  const flush = (upTo: number) => {
    const { rects, rest } = layoutRow(row, free);
    rects.forEach((rect, offset) => {
      const item = items[rowStart + offset];
      if (item === undefined) throw new Error("row exceeds item count");
      tiles.push({ id: item.id, ...rect });
    });
    free = rest;
    row = [];
    rowStart = upTo;
  };

  for (let i = 0; i < areas.length; i++) {
    const area = areas[i] ?? 0;
    const side = Math.min(free.width, free.height);
    if (row.length > 0 && worstAspect([...row, area], side) > worstAspect(row, side)) {
      flush(i);
    }
    row.push(area);
  }
  if (row.length > 0) flush(areas.length);
  return tiles;
}
