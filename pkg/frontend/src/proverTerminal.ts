/**
 * The interactive prover terminal: one per proof session.
 *
 * Every line is shipped to the server as a pvs/proof-command request; the
 * terminal renders sequents, branch events, and engine errors inline, and
 * prints Q.E.D. the moment the server reports the proof complete. The
 * exact "Q.E.D." text is a client affordance; the server only flips the
 * proved flag.
 */

import { ResponseError } from "./jsonrpc.js";
import { ReplTerminal } from "./repl.js";
import {
  ERROR_SESSION_DONE,
  ERROR_UNKNOWN_SESSION,
  type ProofCommandResponseWire,
} from "./wire.js";

/** The prover's command vocabulary, used for tab completion. */
export const PROVER_COMMANDS: readonly string[] = [
  "assert",
  "expand",
  "flatten",
  "grind",
  "inst",
  "postpone",
  "prop",
  "quit",
  "skolem",
  "split",
  "undo",
];

/** What the terminal needs from its bound proof session. */
export interface ProverSessionHandle {
  readonly sessionId: string;
  readonly theory: string;
  readonly formula: string;
  /** Rendered root sequent, as returned by pvs/prove-formula. */
  readonly rootSequent: string;
  command(cmd: string): Promise<ProofCommandResponseWire>;
}

export interface ProverTerminalEvents {
  /** Fires after every successful pvs/proof-command round trip. */
  onResponse?: (response: ProofCommandResponseWire) => void;
  /** Fires once when the session ends (proved or abandoned). */
  onEnded?: (proved: boolean) => void;
}

export class ProverTerminal extends ReplTerminal {
  /** The most recent proof-command response, for host inspection. */
  lastResponse: ProofCommandResponseWire | null = null;
  private ended = false;

  constructor(
    private readonly session: ProverSessionHandle,
    private readonly events: ProverTerminalEvents = {},
  ) {
    super("Rule? ", PROVER_COMMANDS);
  }

  protected banner(): string {
    const head = `Proof session for ${this.session.theory}.${this.session.formula}`;
    const sequent = this.session.rootSequent.split("\n").join("\r\n");
    return `${head}\r\n\r\n${sequent}\r\n\r\n`;
  }

  protected async execute(line: string): Promise<void> {
    let response: ProofCommandResponseWire;
    try {
      response = await this.session.command(line);
    } catch (err) {
      if (
        err instanceof ResponseError &&
        (err.code === ERROR_SESSION_DONE || err.code === ERROR_UNKNOWN_SESSION)
      ) {
        this.println(err.message);
        this.markClosed("this proof session is closed.");
        this.finish(false);
        return;
      }
      this.println(`error: ${err instanceof Error ? err.message : String(err)}`);
      return; // transport hiccup; the session itself is still alive
    }
    this.lastResponse = response;
    this.events.onResponse?.(response);
    this.render(response);
  }

  private render(response: ProofCommandResponseWire): void {
    const { result, tree } = response;
    switch (result.outcome) {
      case "error":
        // Engine rejection: report and keep the session alive.
        this.println(result.message ?? "the command failed");
        return;
      case "branched":
        this.println(`${result.children.length} subgoals generated.`);
        break;
      case "closed":
        if (!tree.proved) {
          this.println("branch closed; moving to the next open goal.");
        }
        break;
      case "no-change":
        if (result.message !== null) {
          this.println(result.message);
        }
        break;
    }
    if (tree.proved) {
      this.println();
      this.println(`This completes the proof of ${tree.formula}.`);
      this.println("Q.E.D.");
      this.markClosed("the proof is complete; this session is closed.");
      this.finish(true);
      return;
    }
    if (tree.abandoned) {
      this.markClosed("the proof was abandoned; this session is closed.");
      this.finish(false);
      return;
    }
    if (response.goal !== null) {
      this.println();
      this.printBlock(response.goal);
    }
  }

  private finish(proved: boolean): void {
    if (this.ended) {
      return;
    }
    this.ended = true;
    this.events.onEnded?.(proved);
  }
}
