/**
 * The slice of a host editor the extension needs.
 *
 * A production host would adapt these calls onto its own view, terminal,
 * and command registries; the test suite drives a scripted in-memory host.
 * Keeping the surface this small is what makes the extension fully
 * scriptable: every user gesture arrives through executeCommand or a
 * terminal's handleInput.
 */

import type { DiagnosticWire } from "./wire.js";

/** Where terminal output goes; the host owns the actual screen. */
export interface TerminalIO {
  write(data: string): void;
}

/**
 * A pseudo-terminal device owned by the extension. The host calls open()
 * once with the output channel and forwards raw keystrokes to
 * handleInput() (printable characters, "\r", "\t", backspace, and arrow
 * escape sequences).
 */
export interface TerminalDevice {
  open(io: TerminalIO): void;
  handleInput(data: string): void;
  dispose(): void;
}

/** The host's handle on a created terminal. */
export interface TerminalHandle {
  readonly name: string;
  dispose(): void;
}

export type CommandHandler = (...args: never[]) => unknown;

export interface HostEditor {
  /** Filesystem path of the opened workspace folder, if any. */
  readonly workspaceRoot: string | null;

  /** Configuration lookup, e.g. "pvs.serverPath" or "pvs.debounceMs". */
  getConfig(key: string): unknown;

  /** Surface an error to the user (notification toast or equivalent). */
  showError(message: string): void;

  /** Render diagnostics for a document (squiggles in a real editor). */
  publishDiagnostics(
    uri: string,
    version: number | null,
    diagnostics: DiagnosticWire[],
  ): void;

  registerCommand(id: string, handler: (...args: any[]) => unknown): void;

  executeCommand(id: string, ...args: unknown[]): Promise<unknown>;

  /** Expose a tree view model under a stable id. */
  registerTreeView(id: string, view: unknown): void;

  createTerminal(name: string, device: TerminalDevice): TerminalHandle;
}
