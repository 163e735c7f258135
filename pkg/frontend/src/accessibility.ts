/** Font scaling in discrete steps applied to the document root. */

export const BASE_FONT_PX = 16;
export const STEP_FACTOR = 0.125; // +12.5% per step
export const MIN_STEPS = -2;
export const MAX_STEPS = 6;

export function clampSteps(steps: number): number {
  return Math.min(MAX_STEPS, Math.max(MIN_STEPS, Math.round(steps)));
}

export function rootFontSizePx(steps: number, basePx: number = BASE_FONT_PX): number {
  return basePx * (1 + clampSteps(steps) * STEP_FACTOR);
}

export function applyFontScale(doc: Document, steps: number): number {
  const px = rootFontSizePx(steps);
  doc.documentElement.style.fontSize = `${px}px`;
  return px;
}
