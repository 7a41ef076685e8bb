/** Client-side veto schedule: ban, ban, pick, pick, ban, ban, then the decider.
 *
 * The server remains the authority; this duplicate exists so out-of-turn
 * clicks are rejected instantly without a network round trip.
 */

import type { ActionName, DecisionDTO, MapName } from "./types.js";
import { MAP_POOL } from "./types.js";

export type Slot = "A" | "B";

export const SCHEDULE: ReadonlyArray<readonly [Slot, ActionName]> = [
  ["A", "ban"],
  ["B", "ban"],
  ["A", "pick"],
  ["B", "pick"],
  ["A", "ban"],
  ["B", "ban"],
];

export interface Turn {
  team: string;
  action: ActionName;
  step: number;
}

export function expectedTurn(teamA: string, teamB: string, decisions: readonly DecisionDTO[]): Turn | null {
  if (decisions.length >= SCHEDULE.length) return null;
  const entry = SCHEDULE[decisions.length]!;
  return {
    team: entry[0] === "A" ? teamA : teamB,
    action: entry[1],
    step: decisions.length,
  };
}

export function availableMaps(decisions: readonly DecisionDTO[]): MapName[] {
  const used = new Set(decisions.map((d) => d.map));
  return MAP_POOL.filter((m) => !used.has(m));
}

export function deciderMap(decisions: readonly DecisionDTO[]): MapName | null {
  if (decisions.length !== SCHEDULE.length) return null;
  const left = availableMaps(decisions);
  return left.length === 1 ? left[0]! : null;
}

export type LegalityError =
  | { kind: "complete" }
  | { kind: "wrong-team"; expected: string }
  | { kind: "wrong-action"; expected: ActionName }
  | { kind: "map-unavailable" };

export function checkLegal(
  teamA: string,
  teamB: string,
  decisions: readonly DecisionDTO[],
  attempt: DecisionDTO,
): LegalityError | null {
  const turn = expectedTurn(teamA, teamB, decisions);
  if (turn === null) return { kind: "complete" };
  if (attempt.team !== turn.team) return { kind: "wrong-team", expected: turn.team };
  if (attempt.action !== turn.action) return { kind: "wrong-action", expected: turn.action };
  if (!availableMaps(decisions).includes(attempt.map)) return { kind: "map-unavailable" };
  return null;
}
