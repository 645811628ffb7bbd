/**
 * Proof Explorer view model: the live proof tree of one session.
 *
 * Each pvs/proof-command response carries the server's whole tree; the
 * view rebuilds from it while preserving which nodes the user collapsed.
 * At most one node is marked active (the server's active leaf); once the
 * proof closes, no leaf is active and every marker reads "closed".
 */

import type { ProofNodeWire, ProofTreeWire, SequentWire } from "./wire.js";

export type ProofNodeMarker = "open" | "closed" | "active";

export interface ProofExplorerNode {
  id: number;
  /** The command applied at this node, or a summary of its sequent. */
  label: string;
  marker: ProofNodeMarker;
  collapsed: boolean;
  children: ProofExplorerNode[];
}

const SUMMARY_WIDTH = 60;

function truncate(text: string): string {
  return text.length <= SUMMARY_WIDTH ? text : text.slice(0, SUMMARY_WIDTH - 1) + "…";
}

export function summarizeSequent(sequent: SequentWire): string {
  const focus = sequent.consequents[0] ?? sequent.antecedents[0];
  return truncate(focus ?? "⊢");
}

/**
 * Pull a one-line summary out of a server-rendered sequent: the first
 * formula below the turnstile row, without its index tag.
 */
export function summarizeRenderedSequent(rendered: string): string {
  const rows = rendered.split("\n");
  const bar = rows.findIndex((row) => row.startsWith("|---"));
  const focus = rows[bar + 1] ?? rows[0] ?? "";
  return truncate(focus.replace(/^\[-?\d+\]\s*/, ""));
}

export class ProofExplorerView {
  private _root: ProofExplorerNode | null = null;
  private readonly collapsedIds = new Set<number>();

  get root(): ProofExplorerNode | null {
    return this._root;
  }

  /** Show just the root goal, before any command has run. */
  seed(renderedSequent: string): void {
    this._root = {
      id: 0,
      label: summarizeRenderedSequent(renderedSequent),
      marker: "active",
      collapsed: false,
      children: [],
    };
  }

  /** Rebuild the view from a server tree, keeping collapse state. */
  applyTree(tree: ProofTreeWire): void {
    const build = (node: ProofNodeWire): ProofExplorerNode => ({
      id: node.id,
      label: node.command ?? summarizeSequent(node.sequent),
      marker: node.id === tree.activeLeafId ? "active" : node.state,
      collapsed: this.collapsedIds.has(node.id),
      children: node.children.map(build),
    });
    this._root = build(tree.root);
  }

  setCollapsed(id: number, collapsed: boolean): void {
    if (collapsed) {
      this.collapsedIds.add(id);
    } else {
      this.collapsedIds.delete(id);
    }
    const node = this.find(id);
    if (node !== null) {
      node.collapsed = collapsed;
    }
  }

  find(id: number): ProofExplorerNode | null {
    for (const node of this.walk()) {
      if (node.id === id) {
        return node;
      }
    }
    return null;
  }

  *walk(): Generator<ProofExplorerNode> {
    const stack = this._root === null ? [] : [this._root];
    while (stack.length > 0) {
      const node = stack.pop()!;
      yield node;
      stack.push(...node.children);
    }
  }

  nodeCount(): number {
    return [...this.walk()].length;
  }

  activeNodes(): ProofExplorerNode[] {
    return [...this.walk()].filter((node) => node.marker === "active");
  }

  /** Plain-data snapshot for consistency checks and host serialization. */
  serialize(): unknown {
    const strip = (node: ProofExplorerNode): unknown => ({
      id: node.id,
      label: node.label,
      marker: node.marker,
      collapsed: node.collapsed,
      children: node.children.map(strip),
    });
    return this._root === null ? null : strip(this._root);
  }
}
