/** Draft board state machine: one live veto, one optional what-if branch.
 *
 * The board validates every decision against the schedule locally before any
 * request leaves the browser, keeps snapshot history for undo (including the
 * recommendation that was on screen), and tags requests with a sequence
 * number so a response superseded by a newer decision is discarded.
 */

import { AdvisorApiError, AdvisorClient } from "./api.js";
import { availableMaps, checkLegal, deciderMap, expectedTurn, type Turn } from "./schedule.js";
import type { DecisionDTO, DraftStateDTO, MapName, RecommendationDTO } from "./types.js";

export interface BoardState {
  teamA: string;
  teamB: string;
  modelId: string | null;
  decisions: DecisionDTO[];
  recommendation: RecommendationDTO | null;
  complete: boolean;
  decider: MapName | null;
}

export interface WhatIfBranch {
  hypothetical: DecisionDTO;
  recommendation: RecommendationDTO;
}

export type SubmitResult =
  | { ok: true }
  | { ok: false; reason: string; rejectedLocally: boolean };

function cloneState(state: BoardState): BoardState {
  return structuredClone(state);
}

export class DraftBoard {
  private state: BoardState;
  private history: BoardState[] = [];
  private branch: WhatIfBranch | null = null;
  private seq = 0;
  private inFlight = 0;
  lastError: string | null = null;

  constructor(
    private readonly client: AdvisorClient,
    teamA: string,
    teamB: string,
    modelId: string | null = null,
  ) {
    this.state = {
      teamA,
      teamB,
      modelId,
      decisions: [],
      recommendation: null,
      complete: false,
      decider: null,
    };
  }

  snapshot(): BoardState {
    return cloneState(this.state);
  }

  get liveBranch(): WhatIfBranch | null {
    return this.branch;
  }

  get busy(): boolean {
    return this.inFlight > 0;
  }

  expectedTurn(): Turn | null {
    return expectedTurn(this.state.teamA, this.state.teamB, this.state.decisions);
  }

  availableMaps(): MapName[] {
    return availableMaps(this.state.decisions);
  }

  private toDto(decisions: DecisionDTO[]): DraftStateDTO {
    return {
      team_a: this.state.teamA,
      team_b: this.state.teamB,
      decisions,
      model_id: this.state.modelId,
    };
  }

  /** Fetch the recommendation for the current live state. */
  async refresh(): Promise<void> {
    const requestSeq = this.seq;
    this.inFlight += 1;
    try {
      const recommendation = await this.client.recommend(this.toDto(this.state.decisions));
      if (this.seq !== requestSeq) return; // superseded while in flight
      this.applyRecommendation(recommendation);
    } finally {
      this.inFlight -= 1;
    }
  }

  private applyRecommendation(recommendation: RecommendationDTO): void {
    this.state.recommendation = recommendation;
    if (recommendation.kind === "decider") {
      this.state.complete = true;
      this.state.decider = recommendation.decider ?? deciderMap(this.state.decisions);
    }
  }

  /** Append one pick/ban. Illegal attempts never reach the server. */
  async submitDecision(team: string, action: DecisionDTO["action"], map: MapName): Promise<SubmitResult> {
    const attempt: DecisionDTO = { team, action, map };
    const illegal = checkLegal(this.state.teamA, this.state.teamB, this.state.decisions, attempt);
    if (illegal !== null) {
      this.lastError = describeIllegal(illegal);
      return { ok: false, reason: this.lastError, rejectedLocally: true };
    }
    const before = cloneState(this.state);
    const nextDecisions = [...this.state.decisions, attempt];
    const requestSeq = ++this.seq;
    this.inFlight += 1;
    try {
      const recommendation = await this.client.recommend(this.toDto(nextDecisions));
      if (this.seq !== requestSeq) {
        return { ok: false, reason: "superseded by a newer decision", rejectedLocally: false };
      }
      this.history.push(before);
      this.state.decisions = nextDecisions;
      this.applyRecommendation(recommendation);
      this.branch = null;
      this.lastError = null;
      return { ok: true };
    } catch (error) {
      if (this.seq === requestSeq) {
        this.seq = requestSeq - 1; // the decision never happened
      }
      this.lastError =
        error instanceof AdvisorApiError ? error.message : `request failed: ${String(error)}`;
      return { ok: false, reason: this.lastError, rejectedLocally: false };
    } finally {
      this.inFlight -= 1;
    }
  }

  /** Evaluate a hypothetical next decision side by side; replaces any open branch. */
  async exploreWhatIf(team: string, action: DecisionDTO["action"], map: MapName): Promise<SubmitResult> {
    const hypothetical: DecisionDTO = { team, action, map };
    const illegal = checkLegal(this.state.teamA, this.state.teamB, this.state.decisions, hypothetical);
    if (illegal !== null) {
      this.lastError = describeIllegal(illegal);
      return { ok: false, reason: this.lastError, rejectedLocally: true };
    }
    const requestSeq = this.seq;
    this.inFlight += 1;
    try {
      const recommendation = await this.client.whatIf(this.toDto(this.state.decisions), hypothetical);
      if (this.seq !== requestSeq) {
        return { ok: false, reason: "superseded by a newer decision", rejectedLocally: false };
      }
      this.branch = { hypothetical, recommendation };
      return { ok: true };
    } catch (error) {
      this.branch = null;
      this.lastError =
        error instanceof AdvisorApiError ? error.message : `request failed: ${String(error)}`;
      return { ok: false, reason: this.lastError, rejectedLocally: false };
    } finally {
      this.inFlight -= 1;
    }
  }

  dismissWhatIf(): void {
    this.branch = null;
  }

  /** Promote the open branch into the live draft. */
  async commitWhatIf(): Promise<SubmitResult> {
    if (this.branch === null) {
      return { ok: false, reason: "no what-if branch to commit", rejectedLocally: true };
    }
    const { team, action, map } = this.branch.hypothetical;
    return this.submitDecision(team, action, map);
  }

  get canUndo(): boolean {
    return this.history.length > 0;
  }

  /** Restore the exact prior board, including its recommendation. */
  undo(): boolean {
    const previous = this.history.pop();
    if (previous === undefined) return false;
    this.state = previous;
    this.branch = null;
    this.lastError = null;
    this.seq += 1; // invalidate any in-flight responses
    return true;
  }
}

function describeIllegal(error: NonNullable<ReturnType<typeof checkLegal>>): string {
  switch (error.kind) {
    case "complete":
      return "the draft is complete; only the decider remains";
    case "wrong-team":
      return `it is ${error.expected}'s turn`;
    case "wrong-action":
      return `the schedule expects a ${error.expected} at this step`;
    case "map-unavailable":
      return "that map has already been picked or banned";
  }
}
