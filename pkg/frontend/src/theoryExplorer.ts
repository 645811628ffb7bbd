/**
 * Theory Explorer view model.
 *
 * The tree mirrors the most recent pvs/theories response: one node per
 * theory, one child row per formula (including proof obligations), each
 * carrying a status icon. pvs/proof-status notifications update rows in
 * place, so a proof finishing in a terminal flips the icon without a full
 * refresh.
 */

import type {
  FormulaStatus,
  ProofStatusWire,
  TheoryTreeWire,
} from "./wire.js";

export const STATUS_ICONS: Record<FormulaStatus, string> = {
  unchecked: "○", // open circle
  unfinished: "◐", // half circle
  proved: "✓", // check mark
  failed: "✗", // cross
};

/** What clicking a row should do; the host dispatches these as commands. */
export type ClickTarget =
  | { command: "pvs.typecheck"; uri: string }
  | { command: "pvs.prove"; uri: string; theory: string; formula: string };

export interface FormulaListItem {
  label: string;
  kind: string;
  status: FormulaStatus;
  icon: string;
  click: ClickTarget;
}

export interface TheoryListItem {
  label: string;
  uri: string;
  click: ClickTarget;
  formulas: FormulaListItem[];
}

export class TheoryExplorerView {
  private theories: TheoryListItem[] = [];

  get roots(): readonly TheoryListItem[] {
    return this.theories;
  }

  /** Replace the tree with a fresh pvs/theories response. */
  update(wire: TheoryTreeWire): void {
    this.theories = wire.theories.map((theory) => ({
      label: theory.name,
      uri: theory.uri,
      click: { command: "pvs.typecheck", uri: theory.uri },
      formulas: theory.formulas.map((row) => ({
        label: row.name,
        kind: row.kind,
        status: row.status,
        icon: STATUS_ICONS[row.status],
        click: {
          command: "pvs.prove",
          uri: theory.uri,
          theory: theory.name,
          formula: row.name,
        },
      })),
    }));
  }

  /** Apply one pvs/proof-status delta; unknown rows are ignored. */
  applyStatus(delta: ProofStatusWire): void {
    const theory = this.theories.find((t) => t.label === delta.theory);
    const row = theory?.formulas.find((f) => f.label === delta.formula);
    if (row === undefined) {
      return; // a formula outside the workspace (scratch buffer)
    }
    row.status = delta.status;
    row.icon = STATUS_ICONS[delta.status];
  }

  statusOf(theory: string, formula: string): FormulaStatus | null {
    const node = this.theories.find((t) => t.label === theory);
    const row = node?.formulas.find((f) => f.label === formula);
    return row?.status ?? null;
  }

  /** Plain-data snapshot for tests and host serialization. */
  serialize(): unknown {
    return this.theories.map((theory) => ({
      label: theory.label,
      uri: theory.uri,
      formulas: theory.formulas.map((row) => ({
        label: row.label,
        kind: row.kind,
        status: row.status,
        icon: row.icon,
      })),
    }));
  }
}
