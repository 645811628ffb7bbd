import { describe, expect, it } from "vitest";

import {
  ProofExplorerView,
  summarizeRenderedSequent,
  summarizeSequent,
} from "../src/proofExplorer.js";
import { STATUS_ICONS, TheoryExplorerView } from "../src/theoryExplorer.js";
import type { ProofNodeWire, ProofTreeWire, TheoryTreeWire } from "../src/wire.js";

const THEORIES: TheoryTreeWire = {
  theories: [
    {
      uri: "file:///ws/logic.pvs",
      name: "logic",
      formulas: [
        { name: "excluded", kind: "theorem", status: "unchecked" },
        { name: "both", kind: "lemma", status: "proved" },
      ],
    },
    {
      uri: "file:///ws/arith.pvs",
      name: "arith",
      formulas: [{ name: "ratio_TCC1", kind: "tcc", status: "unfinished" }],
    },
  ],
};

function node(
  id: number,
  overrides: Partial<ProofNodeWire> = {},
): ProofNodeWire {
  return {
    id,
    sequent: { antecedents: [], consequents: [`goal ${id}`] },
    command: null,
    state: "open",
    children: [],
    ...overrides,
  };
}

function tree(
  root: ProofNodeWire,
  overrides: Partial<ProofTreeWire> = {},
): ProofTreeWire {
  return {
    theory: "t",
    formula: "f",
    root,
    activeLeafId: 0,
    history: [],
    proved: false,
    abandoned: false,
    ...overrides,
  };
}

describe("theory explorer", () => {
  it("mirrors the last pvs/theories response", () => {
    const view = new TheoryExplorerView();
    view.update(THEORIES);
    expect(view.roots.map((t) => t.label)).toEqual(["logic", "arith"]);
    const logic = view.roots[0]!;
    expect(logic.formulas.map((f) => f.label)).toEqual(["excluded", "both"]);
    expect(logic.formulas[0]!.icon).toBe(STATUS_ICONS.unchecked);
    expect(logic.formulas[1]!.icon).toBe(STATUS_ICONS.proved);
    expect(view.roots[1]!.formulas[0]!.kind).toBe("tcc");
  });

  it("gives each row an actionable click target", () => {
    const view = new TheoryExplorerView();
    view.update(THEORIES);
    expect(view.roots[0]!.click).toEqual({
      command: "pvs.typecheck",
      uri: "file:///ws/logic.pvs",
    });
    expect(view.roots[0]!.formulas[0]!.click).toEqual({
      command: "pvs.prove",
      uri: "file:///ws/logic.pvs",
      theory: "logic",
      formula: "excluded",
    });
  });

  it("applies proof-status deltas in place", () => {
    const view = new TheoryExplorerView();
    view.update(THEORIES);
    view.applyStatus({ theory: "logic", formula: "excluded", status: "proved" });
    expect(view.statusOf("logic", "excluded")).toBe("proved");
    expect(view.roots[0]!.formulas[0]!.icon).toBe(STATUS_ICONS.proved);
  });

  it("ignores status deltas for formulas outside the tree", () => {
    const view = new TheoryExplorerView();
    view.update(THEORIES);
    const before = JSON.stringify(view.serialize());
    view.applyStatus({ theory: "scratch", formula: "t1", status: "proved" });
    expect(JSON.stringify(view.serialize())).toBe(before);
  });
});

describe("proof explorer", () => {
  it("marks exactly the server's active leaf as active", () => {
    const view = new ProofExplorerView();
    const wire = tree(
      node(0, {
        command: "split",
        children: [node(1), node(2, { state: "closed" })],
      }),
      { activeLeafId: 1 },
    );
    view.applyTree(wire);
    expect(view.activeNodes().map((n) => n.id)).toEqual([1]);
    expect(view.find(2)!.marker).toBe("closed");
    expect(view.find(0)!.marker).toBe("open");
  });

  it("labels nodes with their command, falling back to the sequent", () => {
    const view = new ProofExplorerView();
    view.applyTree(
      tree(node(0, { command: "flatten", children: [node(1)] }), {
        activeLeafId: 1,
      }),
    );
    expect(view.find(0)!.label).toBe("flatten");
    expect(view.find(1)!.label).toBe("goal 1");
  });

  it("shows no active node once the proof is closed", () => {
    const view = new ProofExplorerView();
    view.applyTree(
      tree(node(0, { command: "grind", state: "closed" }), {
        activeLeafId: null,
        proved: true,
      }),
    );
    expect(view.activeNodes()).toEqual([]);
    expect(view.find(0)!.marker).toBe("closed");
  });

  it("preserves collapse flags across tree updates", () => {
    const view = new ProofExplorerView();
    const wire = tree(
      node(0, { command: "split", children: [node(1), node(2)] }),
      { activeLeafId: 1 },
    );
    view.applyTree(wire);
    view.setCollapsed(0, true);
    view.applyTree(
      tree(
        node(0, {
          command: "split",
          children: [node(1, { command: "flatten", children: [node(3)] }), node(2)],
        }),
        { activeLeafId: 3 },
      ),
    );
    expect(view.find(0)!.collapsed).toBe(true);
    expect(view.find(1)!.collapsed).toBe(false);
  });

  it("seeds a lone active root before any command runs", () => {
    const view = new ProofExplorerView();
    view.seed("|-------\n[1] p OR NOT p");
    expect(view.nodeCount()).toBe(1);
    expect(view.root!.marker).toBe("active");
    expect(view.root!.label).toBe("p OR NOT p");
  });

  it("keeps the view equal to a fresh build after every update", () => {
    // The server ships its whole tree with each response; applying it to
    // the previous view state must land on the same picture as building
    // from scratch, collapse flags aside.
    const stages: ProofTreeWire[] = [
      tree(node(0)),
      tree(node(0, { command: "flatten", children: [node(1)] }), {
        activeLeafId: 1,
      }),
      tree(
        node(0, {
          command: "flatten",
          children: [
            node(1, { command: "split", children: [node(2), node(3)] }),
          ],
        }),
        { activeLeafId: 2 },
      ),
      tree(
        node(0, {
          command: "flatten",
          state: "closed",
          children: [
            node(1, {
              command: "split",
              state: "closed",
              children: [
                node(2, { state: "closed", command: "assert" }),
                node(3, { state: "closed", command: "assert" }),
              ],
            }),
          ],
        }),
        { activeLeafId: null, proved: true },
      ),
    ];
    const live = new ProofExplorerView();
    live.seed("|-------\n[1] whatever");
    for (const [i, stage] of stages.entries()) {
      live.applyTree(stage);
      if (i === 1) {
        live.setCollapsed(1, true);
      }
      const fresh = new ProofExplorerView();
      if (i >= 1) {
        fresh.setCollapsed(1, true);
      }
      fresh.applyTree(stage);
      expect(live.serialize()).toEqual(fresh.serialize());
    }
    expect(live.nodeCount()).toBe(4);
    expect(live.activeNodes()).toEqual([]);
  });
});

describe("sequent summaries", () => {
  it("prefers the first consequent", () => {
    expect(
      summarizeSequent({ antecedents: ["p"], consequents: ["q", "r"] }),
    ).toBe("q");
    expect(summarizeSequent({ antecedents: ["p"], consequents: [] })).toBe("p");
  });

  it("truncates long formulas", () => {
    const long = "x".repeat(200);
    expect(summarizeSequent({ antecedents: [], consequents: [long] }).length).toBe(60);
  });

  it("reads the first consequent out of a rendered sequent", () => {
    expect(summarizeRenderedSequent("[-1] p\n|-------\n[1] q IMPLIES r")).toBe(
      "q IMPLIES r",
    );
  });
});
