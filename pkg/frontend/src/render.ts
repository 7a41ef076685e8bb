/** View-model construction for the probability panel. */

import type { MapName, RecommendationDTO } from "./types.js";
import { MAP_POOL } from "./types.js";

export interface DistributionBar {
  map: MapName;
  probability: number;
  /** Percentage with one decimal, e.g. "71.0%". */
  label: string;
  /** Bar width in percent of the widest bar. */
  widthPct: number;
  available: boolean;
}

export interface DistributionView {
  kind: RecommendationDTO["kind"];
  teamToAct: string | null;
  bars: DistributionBar[];
  /** Greyed-out maps no longer in the pool. */
  unavailable: MapName[];
  decider: MapName | null;
}

export function renderDistribution(rec: RecommendationDTO): DistributionView {
  if (rec.kind === "decider") {
    return {
      kind: rec.kind,
      teamToAct: null,
      bars: [],
      unavailable: MAP_POOL.filter((m) => m !== rec.decider),
      decider: rec.decider ?? null,
    };
  }
  const sorted = [...rec.probabilities].sort(
    (a, b) => b.probability - a.probability || a.map.localeCompare(b.map),
  );
  const top = sorted.length > 0 ? sorted[0]!.probability : 0;
  const listed = new Set(sorted.map((p) => p.map));
  const tenths = allocateTenths(sorted.map((p) => p.probability));
  return {
    kind: rec.kind,
    teamToAct: rec.team_to_act,
    bars: sorted.map((p, i) => ({
      map: p.map,
      probability: p.probability,
      label: `${(tenths[i]! / 10).toFixed(1)}%`,
      widthPct: top > 0 ? (p.probability / top) * 100 : 0,
      available: true,
    })),
    unavailable: MAP_POOL.filter((m) => !listed.has(m)),
    decider: null,
  };
}

/** Largest-remainder allotment of percentage tenths, so labels sum to 100.0.
 *
 * Plain per-bar rounding can drift to 100.3 across seven bars; distributing
 * the residual tenths to the largest remainders keeps every label within one
 * tenth of the naive rounding and the displayed total exact.
 */
function allocateTenths(probabilities: number[]): number[] {
  const exact = probabilities.map((p) => p * 1000);
  const floors = exact.map(Math.floor);
  let shortfall = 1000 - floors.reduce((a, b) => a + b, 0);
  const order = exact
    .map((value, index) => ({ index, remainder: value - Math.floor(value) }))
    .sort((a, b) => b.remainder - a.remainder || a.index - b.index);
  for (const { index } of order) {
    if (shortfall <= 0) break;
    floors[index]! += 1;
    shortfall -= 1;
  }
  return floors;
}

/** Sum of the rendered one-decimal percentages, accumulated in exact tenths. */
export function renderedPercentageSum(view: DistributionView): number {
  const tenths = view.bars.reduce((acc, bar) => acc + Math.round(parseFloat(bar.label) * 10), 0);
  return tenths / 10;
}
