import { describe, expect, it } from "vitest";

import { AdvisorClient } from "../src/api.js";
import { DraftBoard } from "../src/board.js";
import { renderedPercentageSum, renderDistribution } from "../src/render.js";
import { mockAdvisor } from "./mock_advisor.js";

const WALK = [
  ["A", "ban", "nuke"],
  ["B", "ban", "dust2"],
  ["A", "pick", "mirage"],
  ["B", "pick", "inferno"],
  ["A", "ban", "overpass"],
  ["B", "ban", "train"],
] as const;

function makeBoard(options = {}) {
  const advisor = mockAdvisor(options);
  const board = new DraftBoard(new AdvisorClient("http://advisor", advisor.fetchFn), "A", "B");
  return { advisor, board };
}

describe("scripted six-decision draft", () => {
  it("walks the schedule with correct availability and rendered sums", async () => {
    const { board } = makeBoard();
    await board.refresh();
    for (const [i, [team, action, map]] of WALK.entries()) {
      expect(board.availableMaps()).toHaveLength(7 - i);
      expect(board.expectedTurn()).toMatchObject({ team, action });
      const result = await board.submitDecision(team, action, map);
      expect(result.ok).toBe(true);
      const rec = board.snapshot().recommendation!;
      if (rec.kind !== "decider") {
        const sum = renderedPercentageSum(renderDistribution(rec));
        expect(Math.abs(sum - 100.0)).toBeLessThanOrEqual(0.2);
        expect(rec.probabilities).toHaveLength(7 - i - 1);
      }
    }
    const final = board.snapshot();
    expect(final.complete).toBe(true);
    expect(final.decider).toBe("vertigo");
    expect(board.availableMaps()).toEqual(["vertigo"]);
  });
});

describe("client-side legality", () => {
  it("rejects out-of-turn clicks before any request", async () => {
    const { advisor, board } = makeBoard();
    const before = advisor.calls.recommend;
    const result = await board.submitDecision("B", "ban", "nuke");
    expect(result).toMatchObject({ ok: false, rejectedLocally: true });
    expect(advisor.calls.recommend).toBe(before);
    expect(board.snapshot().decisions).toHaveLength(0);
    expect(board.lastError).toContain("turn");
  });

  it("keeps state unchanged and shows an inline error on a server 422", async () => {
    // bypass local checks by corrupting the mock's view of legality: use a
    // board whose team names disagree with what the server replays.
    const advisor = mockAdvisor();
    const client = new AdvisorClient("http://advisor", async (url, init) => {
      if (String(url).endsWith("/draft/recommend") && init?.body) {
        const payload = JSON.parse(String(init.body));
        if (payload.decisions.length > 0) {
          return new Response(
            JSON.stringify({ code: "illegal_draft_state", message: "server said no", step: 0 }),
            { status: 422, headers: { "content-type": "application/json" } },
          );
        }
      }
      return advisor.fetchFn(String(url), init);
    });
    const board = new DraftBoard(client, "A", "B");
    await board.refresh();
    const snapshot = JSON.stringify(board.snapshot());
    const result = await board.submitDecision("A", "ban", "nuke");
    expect(result.ok).toBe(false);
    expect(board.lastError).toContain("illegal_draft_state");
    expect(JSON.stringify(board.snapshot())).toBe(snapshot);
  });
});

describe("what-if branches", () => {
  it("explore then dismiss leaves the live state bit-identical", async () => {
    const { board } = makeBoard();
    await board.refresh();
    const before = JSON.stringify(board.snapshot());
    const result = await board.exploreWhatIf("A", "ban", "nuke");
    expect(result.ok).toBe(true);
    expect(board.liveBranch?.hypothetical.map).toBe("nuke");
    board.dismissWhatIf();
    expect(board.liveBranch).toBeNull();
    expect(JSON.stringify(board.snapshot())).toBe(before);
  });

  it("a branch banning the top pick excludes it from the branch distribution", async () => {
    // weight the first available map heavily so it is the model's top choice
    const { board } = makeBoard({
      weights: (maps: string[]) => maps.map((_, i) => (i === 0 ? 10 : 1)),
    });
    await board.refresh();
    const top = board.snapshot().recommendation!.probabilities[0]!.map;
    await board.exploreWhatIf("A", "ban", top);
    const branch = board.liveBranch!;
    expect(branch.recommendation.probabilities.every((p) => p.map !== top)).toBe(true);
  });

  it("keeps only one active branch (replace semantics)", async () => {
    const { board } = makeBoard();
    await board.exploreWhatIf("A", "ban", "nuke");
    await board.exploreWhatIf("A", "ban", "dust2");
    expect(board.liveBranch?.hypothetical.map).toBe("dust2");
  });

  it("commit promotes the branch into the live draft", async () => {
    const { board } = makeBoard();
    await board.refresh();
    await board.exploreWhatIf("A", "ban", "nuke");
    const result = await board.commitWhatIf();
    expect(result.ok).toBe(true);
    expect(board.snapshot().decisions).toEqual([{ team: "A", action: "ban", map: "nuke" }]);
    expect(board.liveBranch).toBeNull();
  });

  it("a chain of six legal what-ifs reaches the decider", async () => {
    const { board } = makeBoard();
    for (const [team, action, map] of WALK.slice(0, 5)) {
      await board.submitDecision(team, action, map);
    }
    await board.exploreWhatIf("B", "ban", "train");
    expect(board.liveBranch?.recommendation.kind).toBe("decider");
    expect(board.liveBranch?.recommendation.decider).toBe("vertigo");
  });

  it("rejects illegal hypotheticals locally", async () => {
    const { advisor, board } = makeBoard();
    const before = advisor.calls.whatIf;
    const result = await board.exploreWhatIf("B", "ban", "nuke");
    expect(result).toMatchObject({ ok: false, rejectedLocally: true });
    expect(advisor.calls.whatIf).toBe(before);
  });
});

describe("undo", () => {
  it("restores the exact prior board including the prior recommendation", async () => {
    const { board } = makeBoard();
    await board.refresh();
    await board.submitDecision("A", "ban", "nuke");
    const afterFirst = JSON.stringify(board.snapshot());
    await board.submitDecision("B", "ban", "dust2");
    expect(board.undo()).toBe(true);
    expect(JSON.stringify(board.snapshot())).toBe(afterFirst);
    expect(board.undo()).toBe(true);
    expect(board.snapshot().decisions).toHaveLength(0);
    expect(board.undo()).toBe(false);
  });
});

describe("sequence numbers", () => {
  it("discards responses superseded by a newer decision", async () => {
    const { advisor, board } = makeBoard();
    await board.refresh();
    const gate = advisor.defer(); // the next request hangs until released
    const slowRefresh = board.refresh(); // captures the current sequence
    await board.submitDecision("A", "ban", "nuke"); // bumps the sequence
    const afterSubmit = JSON.stringify(board.snapshot());
    gate.release();
    await slowRefresh;
    // the stale refresh (for the empty draft) must not overwrite anything
    expect(JSON.stringify(board.snapshot())).toBe(afterSubmit);
    expect(board.snapshot().recommendation!.probabilities).toHaveLength(6);
  });
});
