import { describe, expect, it } from "vitest";

import { availableMaps, checkLegal, deciderMap, expectedTurn, SCHEDULE } from "../src/schedule.js";
import type { DecisionDTO } from "../src/types.js";

const WALK: DecisionDTO[] = [
  { team: "A", action: "ban", map: "nuke" },
  { team: "B", action: "ban", map: "dust2" },
  { team: "A", action: "pick", map: "mirage" },
  { team: "B", action: "pick", map: "inferno" },
  { team: "A", action: "ban", map: "overpass" },
  { team: "B", action: "ban", map: "train" },
];

describe("schedule", () => {
  it("is ban, ban, pick, pick, ban, ban", () => {
    expect(SCHEDULE.map(([, a]) => a)).toEqual(["ban", "ban", "pick", "pick", "ban", "ban"]);
    expect(SCHEDULE.map(([s]) => s)).toEqual(["A", "B", "A", "B", "A", "B"]);
  });

  it("tracks the expected turn through a full walk", () => {
    for (let step = 0; step < 6; step++) {
      const turn = expectedTurn("A", "B", WALK.slice(0, step));
      expect(turn).toEqual({ team: WALK[step]!.team, action: WALK[step]!.action, step });
    }
    expect(expectedTurn("A", "B", WALK)).toBeNull();
  });

  it("keeps 7 - step maps available at every step", () => {
    for (let step = 0; step <= 6; step++) {
      expect(availableMaps(WALK.slice(0, step))).toHaveLength(7 - step);
    }
  });

  it("identifies the decider only after six decisions", () => {
    expect(deciderMap(WALK.slice(0, 5))).toBeNull();
    expect(deciderMap(WALK)).toBe("vertigo");
  });

  it("rejects out-of-turn, wrong-action, and used-map attempts", () => {
    expect(checkLegal("A", "B", [], { team: "B", action: "ban", map: "nuke" })).toEqual({
      kind: "wrong-team",
      expected: "A",
    });
    expect(checkLegal("A", "B", [], { team: "A", action: "pick", map: "nuke" })).toEqual({
      kind: "wrong-action",
      expected: "ban",
    });
    expect(
      checkLegal("A", "B", WALK.slice(0, 1), { team: "B", action: "ban", map: "nuke" }),
    ).toEqual({ kind: "map-unavailable" });
    expect(checkLegal("A", "B", WALK, { team: "A", action: "ban", map: "vertigo" })).toEqual({
      kind: "complete",
    });
    expect(checkLegal("A", "B", [], { team: "A", action: "ban", map: "nuke" })).toBeNull();
  });
});
