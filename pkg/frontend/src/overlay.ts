/**
 * Canvas overlay model: element outlines coloured by kind, selection state
 * and point hit-testing. Pure data in, pure data out; the canvas renderer
 * in app.ts consumes the shapes this module produces.
 */

import type { DiagramDoc, LayoutElement } from "./api.js";

/** Fixed colour per element kind, matching the corpus convention. */
export const KIND_COLORS: Record<LayoutElement["kind"], string> = {
  text: "blue",
  blob: "red",
  arrow: "green",
  arrowhead: "orange",
  imageConstant: "navajowhite",
};

export type LayerTab = "grouping" | "connectivity" | "rst";

export interface OverlayShape {
  id: string;
  kind: LayoutElement["kind"];
  color: string;
  outline: [number, number][];
  label: string | null;
  selected: boolean;
  highlighted: boolean;
}

export interface OverlayModel {
  width: number;
  height: number;
  shapes: OverlayShape[];
}

export function buildOverlay(
  doc: DiagramDoc,
  selection: ReadonlySet<string>,
  highlight: ReadonlySet<string> = new Set(),
): OverlayModel {
  const shapes = doc.layout.elements.map((element) => ({
    id: element.id,
    kind: element.kind,
    color: KIND_COLORS[element.kind],
    outline: element.outline,
    label: element.text,
    selected: selection.has(element.id),
    highlighted: highlight.has(element.id),
  }));
  return { width: doc.layout.width, height: doc.layout.height, shapes };
}

function boundingBox(outline: [number, number][]): [number, number, number, number] {
  let [minX, minY] = outline[0];
  let [maxX, maxY] = outline[0];
  for (const [x, y] of outline) {
    minX = Math.min(minX, x);
    minY = Math.min(minY, y);
    maxX = Math.max(maxX, x);
    maxY = Math.max(maxY, y);
  }
  return [minX, minY, maxX, maxY];
}

function pointInPolygon(x: number, y: number, outline: [number, number][]): boolean {
  // 2-point outlines are rectangles; test the box directly
  if (outline.length === 2) {
    const [minX, minY, maxX, maxY] = boundingBox(outline);
    return x >= minX && x <= maxX && y >= minY && y <= maxY;
  }
  let inside = false;
  for (let i = 0, j = outline.length - 1; i < outline.length; j = i++) {
    const [xi, yi] = outline[i];
    const [xj, yj] = outline[j];
    const crosses =
      yi > y !== yj > y && x < ((xj - xi) * (y - yi)) / (yj - yi) + xi;
    if (crosses) inside = !inside;
  }
  return inside;
}

/**
 * Topmost element under a point. Image constants cover everything, so they
 * only win when nothing else is hit.
 */
export function hitTest(model: OverlayModel, x: number, y: number): string | null {
  let fallback: string | null = null;
  for (const shape of model.shapes) {
    if (!pointInPolygon(x, y, shape.outline)) continue;
    if (shape.kind === "imageConstant") {
      fallback = shape.id;
      continue;
    }
    return shape.id;
  }
  return fallback;
}

export function toggleSelection(
  selection: ReadonlySet<string>,
  id: string,
): Set<string> {
  const next = new Set(selection);
  if (next.has(id)) next.delete(id);
  else next.add(id);
  return next;
}
