/**
 * Shapes that travel over the language-server wire.
 *
 * Everything here mirrors what the server actually sends; the client never
 * computes any of these values itself. protocol.md in the repository root
 * is the authoritative description.
 */

export interface PositionWire {
  /** Zero-based line. */
  line: number;
  /** Zero-based column. */
  character: number;
}

export interface RangeWire {
  start: PositionWire;
  end: PositionWire;
}

export interface DiagnosticWire {
  range: RangeWire;
  /** 1 error, 2 warning, 3 information, 4 hint. */
  severity: number;
  message: string;
  source: string;
}

export interface PublishDiagnosticsWire {
  uri: string;
  version?: number | null;
  diagnostics: DiagnosticWire[];
}

/** Lifecycle of a formula in the workspace views. */
export type FormulaStatus = "unchecked" | "unfinished" | "proved" | "failed";

export interface FormulaRowWire {
  name: string;
  /** Declaration flavor as the server reports it (lowercase). */
  kind: string;
  status: FormulaStatus;
}

export interface TheoryNodeWire {
  uri: string;
  name: string;
  formulas: FormulaRowWire[];
}

export interface TheoryTreeWire {
  theories: TheoryNodeWire[];
}

/** Params of the pvs/proof-status notification. */
export interface ProofStatusWire {
  uri?: string;
  theory: string;
  formula: string;
  status: FormulaStatus;
}

export interface SequentWire {
  antecedents: string[];
  consequents: string[];
}

export interface ProofNodeWire {
  id: number;
  sequent: SequentWire;
  command: string | null;
  state: "open" | "closed";
  children: ProofNodeWire[];
}

export interface ProofTreeWire {
  theory: string;
  formula: string;
  root: ProofNodeWire;
  activeLeafId: number | null;
  history: string[];
  proved: boolean;
  abandoned: boolean;
}

export interface ProverResultWire {
  outcome: "branched" | "closed" | "no-change" | "error";
  message: string | null;
  children: number[];
  newActiveLeaf: number | null;
  errorKind: string | null;
}

/** Response of pvs/proof-command. */
export interface ProofCommandResponseWire {
  result: ProverResultWire;
  state: "active" | "quiescent" | "done" | "abandoned";
  tree: ProofTreeWire;
  /** Rendered active sequent, or null once nothing is open. */
  goal: string | null;
}

/** Response of pvs/prove-formula. */
export interface ProveFormulaResponseWire {
  sessionId: string;
  /** Rendered root sequent. */
  sequent: string;
}

export interface FormulaTargetWire {
  uri: string;
  theory: string;
  formula: string;
}

/** One code-lens row: an actionable "prove" anchor above a formula. */
export interface CodeLensWire {
  range: RangeWire;
  command: string;
  target: FormulaTargetWire;
}

export interface EvaluateResponseWire {
  value: string;
}

/** Domain error codes the client reacts to (full table in protocol.md). */
export const ERROR_TYPECHECK_FAILED = 2008;
export const ERROR_DUPLICATE_SESSION = 2009;
export const ERROR_UNKNOWN_SESSION = 2010;
export const ERROR_SESSION_DONE = 2011;
export const ERROR_FUEL_EXHAUSTED = 2015;
