/** DOM wiring for the draft board: map grid, live panel, what-if panel, undo. */

import { AdvisorClient } from "./api.js";
import { DraftBoard } from "./board.js";
import { renderDistribution } from "./render.js";
import type { MapName, RecommendationDTO } from "./types.js";
import { MAP_POOL } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function distributionPanel(title: string, rec: RecommendationDTO | null): HTMLElement {
  const panel = el("div", "panel");
  panel.appendChild(el("h3", undefined, title));
  if (rec === null) {
    panel.appendChild(el("p", "muted", "waiting for the advisor..."));
    return panel;
  }
  const view = renderDistribution(rec);
  if (view.kind === "decider") {
    panel.appendChild(el("p", "decider", `decider: ${view.decider ?? "?"}`));
    return panel;
  }
  panel.appendChild(el("p", "muted", `${view.kind} by ${view.teamToAct ?? "?"}`));
  for (const bar of view.bars) {
    const row = el("div", "bar-row");
    row.appendChild(el("span", "bar-map", bar.map));
    const track = el("div", "bar-track");
    const fill = el("div", "bar-fill");
    fill.style.width = `${bar.widthPct}%`;
    track.appendChild(fill);
    row.appendChild(track);
    row.appendChild(el("span", "bar-label", bar.label));
    panel.appendChild(row);
  }
  for (const map of view.unavailable) {
    panel.appendChild(el("div", "bar-row struck", map));
  }
  return panel;
}

export function mountBoard(root: HTMLElement, baseUrl: string, teamA: string, teamB: string): DraftBoard {
  const board = new DraftBoard(new AdvisorClient(baseUrl), teamA, teamB);

  const render = () => {
    root.textContent = "";
    const state = board.snapshot();
    const header = el("div", "header");
    header.appendChild(el("h2", undefined, `${state.teamA} vs ${state.teamB}`));
    const turn = board.expectedTurn();
    header.appendChild(
      el(
        "p",
        "muted",
        state.complete
          ? `draft complete - decider ${state.decider ?? "?"}`
          : turn
            ? `step ${turn.step}: ${turn.action} by ${turn.team}`
            : "",
      ),
    );
    if (board.lastError) header.appendChild(el("p", "error", board.lastError));
    root.appendChild(header);

    const grid = el("div", "map-grid");
    const available = new Set(board.availableMaps());
    for (const map of MAP_POOL) {
      const struck = !available.has(map);
      const cell = el("div", struck ? "map struck" : "map");
      cell.appendChild(el("span", undefined, map));
      if (!struck && !state.complete && turn) {
        const act = el("button", undefined, turn.action);
        act.onclick = () => void board.submitDecision(turn.team, turn.action, map).then(render);
        const what = el("button", "ghost", "what if?");
        what.onclick = () => void board.exploreWhatIf(turn.team, turn.action, map).then(render);
        cell.appendChild(act);
        cell.appendChild(what);
      }
      grid.appendChild(cell);
    }
    root.appendChild(grid);

    const panels = el("div", "panels");
    panels.appendChild(distributionPanel("live", state.recommendation));
    const branch = board.liveBranch;
    if (branch) {
      const side = distributionPanel(
        `what if ${branch.hypothetical.team} ${branch.hypothetical.action}s ${branch.hypothetical.map}?`,
        branch.recommendation,
      );
      const commit = el("button", undefined, "commit");
      commit.onclick = () => void board.commitWhatIf().then(render);
      const dismiss = el("button", "ghost", "dismiss");
      dismiss.onclick = () => {
        board.dismissWhatIf();
        render();
      };
      side.appendChild(commit);
      side.appendChild(dismiss);
      panels.appendChild(side);
    }
    root.appendChild(panels);

    const undo = el("button", "ghost", "undo");
    undo.disabled = !board.canUndo;
    undo.onclick = () => {
      board.undo();
      void board.refresh().then(render);
      render();
    };
    root.appendChild(undo);
  };

  void board.refresh().then(render);
  render();
  return board;
}

declare global {
  interface Window {
    vetoBoard?: DraftBoard;
  }
}

if (typeof document !== "undefined" && document.getElementById("board-root")) {
  const root = document.getElementById("board-root")!;
  const params = new URLSearchParams(window.location.search);
  window.vetoBoard = mountBoard(
    root,
    params.get("api") ?? "http://127.0.0.1:8720",
    params.get("team_a") ?? "Team A",
    params.get("team_b") ?? "Team B",
  );
}
