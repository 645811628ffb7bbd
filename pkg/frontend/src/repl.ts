/**
 * Line-oriented REPL machinery shared by the prover and evaluator
 * terminals: prompt, line editing, history recall on the arrow keys, tab
 * completion, and a per-terminal submission queue.
 *
 * The queue is the concurrency story: the UI thread never blocks, every
 * submitted line is executed strictly after the previous one resolves, so
 * command order is preserved per session no matter how fast the user
 * types.
 */

import type { TerminalDevice, TerminalIO } from "./host.js";

const UP = "[A";
const DOWN = "[B";
const CLEAR_LINE = "\r[K";

/** Split raw input into keystrokes, keeping escape sequences whole. */
export function splitKeys(data: string): string[] {
  const keys: string[] = [];
  let i = 0;
  while (i < data.length) {
    const ch = data[i]!;
    if (ch === "" && data[i + 1] === "[") {
      // CSI sequence: ESC [ parameters final-byte
      let j = i + 2;
      while (j < data.length && !/[@-~]/.test(data[j]!)) {
        j += 1;
      }
      keys.push(data.slice(i, Math.min(j + 1, data.length)));
      i = j + 1;
      continue;
    }
    if (ch === "\r" && data[i + 1] === "\n") {
      keys.push("\r");
      i += 2;
      continue;
    }
    keys.push(ch);
    i += 1;
  }
  return keys;
}

export abstract class ReplTerminal implements TerminalDevice {
  private io: TerminalIO | null = null;
  private line = "";
  private readonly history: string[] = [];
  /** Index into history while browsing with the arrows; null otherwise. */
  private browse: number | null = null;
  private stash = "";
  private queue: Promise<void> = Promise.resolve();
  private closedNote: string | null = null;
  private disposed = false;

  protected constructor(
    private readonly prompt: string,
    private readonly completions: readonly string[] = [],
  ) {}

  /** Text printed once when the host opens the terminal. */
  protected abstract banner(): string;

  /** Run one submitted line; rendering happens through println/write. */
  protected abstract execute(line: string): Promise<void>;

  open(io: TerminalIO): void {
    this.io = io;
    this.write(this.banner());
    this.writePrompt();
  }

  dispose(): void {
    this.disposed = true;
    this.io = null;
  }

  /** The line being edited right now (exposed for scripted hosts). */
  get currentLine(): string {
    return this.line;
  }

  get historyEntries(): readonly string[] {
    return this.history;
  }

  /** Resolves once every line submitted so far has finished executing. */
  idle(): Promise<void> {
    return this.queue;
  }

  /** Stop accepting commands; later submissions print the note instead. */
  protected markClosed(note: string): void {
    this.closedNote = note;
  }

  get isClosed(): boolean {
    return this.closedNote !== null;
  }

  // -- output ------------------------------------------------------------

  protected write(text: string): void {
    this.io?.write(text);
  }

  protected println(text = ""): void {
    this.write(text + "\r\n");
  }

  /** Write server-rendered multi-line text with terminal line endings. */
  protected printBlock(text: string): void {
    for (const row of text.split("\n")) {
      this.println(row);
    }
  }

  private writePrompt(): void {
    this.write(this.prompt);
  }

  // -- input -------------------------------------------------------------

  handleInput(data: string): void {
    if (this.disposed) {
      return;
    }
    for (const key of splitKeys(data)) {
      this.handleKey(key);
    }
  }

  private handleKey(key: string): void {
    if (key === "\r" || key === "\n") {
      this.write("\r\n");
      const line = this.line.trim();
      this.line = "";
      this.browse = null;
      if (line === "") {
        this.writePrompt();
        return;
      }
      this.history.push(line);
      this.submit(line);
      return;
    }
    if (key === "\t") {
      this.complete();
      return;
    }
    if (key === "" || key === "\b") {
      if (this.line.length > 0) {
        this.line = this.line.slice(0, -1);
        this.write("\b \b");
      }
      return;
    }
    if (key === UP) {
      this.recall(-1);
      return;
    }
    if (key === DOWN) {
      this.recall(1);
      return;
    }
    if (key.length === 1 && key >= " ") {
      this.line += key;
      this.write(key);
    }
    // other control sequences are ignored
  }

  private submit(line: string): void {
    this.queue = this.queue
      .then(() => {
        if (this.closedNote !== null) {
          this.println(this.closedNote);
          return;
        }
        return this.execute(line);
      })
      .catch((err: unknown) => {
        this.println(`error: ${err instanceof Error ? err.message : String(err)}`);
      })
      .then(() => {
        this.writePrompt();
      });
  }

  /**
   * Complete the command word under the cursor: extend to the longest
   * common prefix of the matching names, all the way when unique.
   */
  private complete(): void {
    if (this.line.includes(" ") || this.completions.length === 0) {
      return; // arguments are not completed client-side
    }
    const matches = this.completions.filter((name) => name.startsWith(this.line));
    if (matches.length === 0) {
      return;
    }
    let prefix = matches[0]!;
    for (const name of matches.slice(1)) {
      let k = 0;
      while (k < prefix.length && k < name.length && prefix[k] === name[k]) {
        k += 1;
      }
      prefix = prefix.slice(0, k);
    }
    if (prefix.length > this.line.length) {
      const added = prefix.slice(this.line.length);
      this.line = prefix;
      this.write(added);
    }
  }

  private recall(step: -1 | 1): void {
    if (this.history.length === 0) {
      return;
    }
    if (this.browse === null) {
      if (step === 1) {
        return; // nothing newer than the line being edited
      }
      this.stash = this.line;
      this.browse = this.history.length;
    }
    const next = this.browse + step;
    if (next >= this.history.length) {
      this.browse = null;
      this.setLine(this.stash);
      return;
    }
    if (next < 0) {
      return; // already at the oldest entry
    }
    this.browse = next;
    this.setLine(this.history[next]!);
  }

  private setLine(text: string): void {
    this.line = text;
    this.write(CLEAR_LINE + this.prompt + text);
  }
}
