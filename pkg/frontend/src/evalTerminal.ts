/**
 * The ground-evaluator terminal.
 *
 * Lines go to the server as pvs/evaluate requests against one fixed
 * theory; values come back already formatted. Failures (including fuel
 * exhaustion on runaway recursion) are printed inline and the terminal
 * keeps accepting input.
 */

import { ResponseError } from "./jsonrpc.js";
import { ReplTerminal } from "./repl.js";

/** What the terminal needs from the evaluation backend. */
export interface EvaluatorBackend {
  readonly theory: string;
  evaluate(expr: string): Promise<string>;
}

export class EvaluatorTerminal extends ReplTerminal {
  constructor(private readonly backend: EvaluatorBackend) {
    super("<Eval> ");
  }

  protected banner(): string {
    return (
      `Ground evaluator for theory ${this.backend.theory}.\r\n` +
      "Type an expression and press Enter.\r\n\r\n"
    );
  }

  protected async execute(line: string): Promise<void> {
    let value: string;
    try {
      value = await this.backend.evaluate(line);
    } catch (err) {
      if (err instanceof ResponseError) {
        this.println(err.message);
        return;
      }
      throw err;
    }
    this.println(`==> ${value}`);
  }
}
