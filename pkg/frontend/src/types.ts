/** Wire types mirroring the advisor service's JSON API. */

export const MAP_POOL = [
  "dust2",
  "inferno",
  "mirage",
  "nuke",
  "overpass",
  "train",
  "vertigo",
] as const;

export type MapName = (typeof MAP_POOL)[number];

export type ActionName = "ban" | "pick";

export interface DecisionDTO {
  team: string;
  action: ActionName;
  map: MapName;
}

export interface DraftStateDTO {
  team_a: string;
  team_b: string;
  decisions: DecisionDTO[];
  model_id?: string | null;
}

export interface MapProbability {
  map: MapName;
  probability: number;
}

export interface RecommendationDTO {
  model_id: string;
  variant: string;
  kind: ActionName | "decider";
  team_to_act: string | null;
  mask_applied: boolean;
  cold_start: boolean;
  probabilities: MapProbability[];
  decider?: MapName | null;
}

export interface ApiError {
  code: string;
  message: string;
  step?: number;
}

export function isMapName(value: string): value is MapName {
  return (MAP_POOL as readonly string[]).includes(value);
}
