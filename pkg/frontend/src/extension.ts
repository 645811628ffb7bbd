/**
 * Extension activation: wires the language client, the Theory Explorer,
 * proof sessions with their terminals and Proof Explorers, and the
 * evaluator terminal onto a host editor.
 *
 * All intelligence lives on the server; this module only moves wire
 * payloads between the connection and the host's views. It runs entirely
 * on the host's single-threaded event loop, with every server round trip
 * asynchronous.
 */

import { readFile } from "node:fs/promises";

import { LanguageClient, pathToUri } from "./client.js";
import { EvaluatorTerminal } from "./evalTerminal.js";
import type { HostEditor, TerminalHandle } from "./host.js";
import { ResponseError } from "./jsonrpc.js";
import { ProofExplorerView } from "./proofExplorer.js";
import { ProverTerminal } from "./proverTerminal.js";
import { TheoryExplorerView } from "./theoryExplorer.js";
import {
  ERROR_TYPECHECK_FAILED,
  type CodeLensWire,
  type DiagnosticWire,
  type EvaluateResponseWire,
  type FormulaTargetWire,
  type ProofCommandResponseWire,
  type ProofStatusWire,
  type ProveFormulaResponseWire,
  type PublishDiagnosticsWire,
  type TheoryTreeWire,
} from "./wire.js";

export const DEFAULT_SERVER_COMMAND = "mupvs";
export const THEORY_VIEW_ID = "pvs.theories";

/** Everything the extension keeps per live proof session. */
export interface ProverSessionUi {
  sessionId: string;
  theory: string;
  formula: string;
  terminal: TerminalHandle;
  device: ProverTerminal;
  explorer: ProofExplorerView;
  explorerViewId: string;
  ended: boolean;
  /** Settles once the session has been closed on the server. */
  cleanup: Promise<void> | null;
}

export interface EvaluatorUi {
  theory: string;
  terminal: TerminalHandle;
  device: EvaluatorTerminal;
}

export interface ExtensionApi {
  /** Null when the server could not be started. */
  readonly client: LanguageClient | null;
  readonly theoryExplorer: TheoryExplorerView;
  readonly sessions: ReadonlyMap<string, ProverSessionUi>;
  readonly evaluators: readonly EvaluatorUi[];
  /** Open a file from disk in the editor (didOpen); returns its uri. */
  openFile(fsPath: string): Promise<string>;
  /** Replace an open document's text (didChange, full sync). */
  editFile(uri: string, text: string): void;
  closeFile(uri: string): void;
  codeLenses(uri: string): Promise<CodeLensWire[]>;
  /** Re-request pvs/theories; refreshes are serialized. */
  refreshTheories(): Promise<void>;
  deactivate(): Promise<void>;
}

function readServerCommand(host: HostEditor): string[] {
  const configured = host.getConfig("pvs.serverPath");
  const path =
    typeof configured === "string" && configured.trim() !== ""
      ? configured
      : DEFAULT_SERVER_COMMAND;
  return [...path.split(/\s+/).filter(Boolean), "serve", "--stdio"];
}

export async function activateExtension(host: HostEditor): Promise<ExtensionApi> {
  const theoryExplorer = new TheoryExplorerView();
  const sessions = new Map<string, ProverSessionUi>();
  const evaluators: EvaluatorUi[] = [];
  let sessionCounter = 0;

  const debounceMs = host.getConfig("pvs.debounceMs");
  const initializationOptions: Record<string, unknown> = {};
  if (typeof debounceMs === "number") {
    initializationOptions.debounceMs = debounceMs;
  }

  let client: LanguageClient | null = new LanguageClient({
    command: readServerCommand(host),
    rootPath: host.workspaceRoot,
    initializationOptions,
  });
  try {
    await client.start();
  } catch (err) {
    const detail = err instanceof Error ? err.message : String(err);
    host.showError(
      `cannot start the muPVS language server (${detail}); ` +
        "check the pvs.serverPath setting",
    );
    await client.stop();
    client = null;
  }

  host.registerTreeView(THEORY_VIEW_ID, theoryExplorer);

  // Serialized pvs/theories refresh: responses apply in request order.
  let refreshChain: Promise<void> = Promise.resolve();
  const refreshTheories = (): Promise<void> => {
    if (client === null) {
      return Promise.resolve();
    }
    const live = client;
    refreshChain = refreshChain
      .then(() => live.request<TheoryTreeWire>("pvs/theories", {}))
      .then((wire) => theoryExplorer.update(wire))
      .catch(() => {
        // a refresh racing shutdown is not an error worth surfacing
      });
    return refreshChain;
  };

  if (client !== null) {
    client.onNotification("textDocument/publishDiagnostics", (params) => {
      const wire = params as PublishDiagnosticsWire;
      host.publishDiagnostics(wire.uri, wire.version ?? null, wire.diagnostics);
      void refreshTheories(); // new or repaired theories change the tree
    });
    client.onNotification("pvs/proof-status", (params) => {
      theoryExplorer.applyStatus(params as ProofStatusWire);
    });
  }

  const proveHandler = async (
    target: FormulaTargetWire,
  ): Promise<ProverSessionUi | null> => {
    if (client === null) {
      host.showError("the muPVS language server is not running");
      return null;
    }
    const live = client;
    let opened: ProveFormulaResponseWire;
    try {
      opened = await live.request<ProveFormulaResponseWire>(
        "pvs/prove-formula",
        target,
      );
    } catch (err) {
      if (err instanceof ResponseError && err.code === ERROR_TYPECHECK_FAILED) {
        // The formula's theory has errors: surface them, start nothing.
        const diagnostics = Array.isArray(err.data)
          ? (err.data as DiagnosticWire[])
          : [];
        host.publishDiagnostics(target.uri, null, diagnostics);
        return null;
      }
      host.showError(err instanceof Error ? err.message : String(err));
      return null;
    }

    const explorer = new ProofExplorerView();
    explorer.seed(opened.sequent);
    sessionCounter += 1;
    const explorerViewId = `pvs.proof.${sessionCounter}`;
    host.registerTreeView(explorerViewId, explorer);

    const ui: ProverSessionUi = {
      sessionId: opened.sessionId,
      theory: target.theory,
      formula: target.formula,
      terminal: null as unknown as TerminalHandle, // assigned just below
      device: null as unknown as ProverTerminal,
      explorer,
      explorerViewId,
      ended: false,
      cleanup: null,
    };

    const device = new ProverTerminal(
      {
        sessionId: opened.sessionId,
        theory: target.theory,
        formula: target.formula,
        rootSequent: opened.sequent,
        command: (cmd: string) =>
          live.request<ProofCommandResponseWire>("pvs/proof-command", {
            sessionId: opened.sessionId,
            cmd,
          }),
      },
      {
        onResponse: (response) => explorer.applyTree(response.tree),
        onEnded: (proved) => {
          ui.ended = true;
          ui.cleanup = live
            .request("pvs/quit-proof", {
              sessionId: opened.sessionId,
              persist: proved,
            })
            .then(
              () => undefined,
              () => undefined, // the pool may have dropped it already
            );
        },
      },
    );
    ui.device = device;
    ui.terminal = host.createTerminal(
      `prove: ${target.theory}.${target.formula}`,
      device,
    );
    sessions.set(opened.sessionId, ui);
    return ui;
  };

  const typecheckHandler = async (uri: string): Promise<unknown> => {
    if (client === null) {
      host.showError("the muPVS language server is not running");
      return null;
    }
    const result = await client.request("pvs/typecheck", { uri });
    await refreshTheories();
    return result;
  };

  const evaluatorHandler = (theory: string): EvaluatorUi => {
    const device = new EvaluatorTerminal({
      theory,
      evaluate: async (expr: string): Promise<string> => {
        if (client === null) {
          throw new Error("the muPVS language server is not running");
        }
        const response = await client.request<EvaluateResponseWire>(
          "pvs/evaluate",
          { theory, expr },
        );
        return response.value;
      },
    });
    const terminal = host.createTerminal(`eval: ${theory}`, device);
    const ui: EvaluatorUi = { theory, terminal, device };
    evaluators.push(ui);
    return ui;
  };

  host.registerCommand("pvs.prove", proveHandler);
  host.registerCommand("pvs.typecheck", typecheckHandler);
  host.registerCommand("pvs.evaluator", evaluatorHandler);

  if (client !== null) {
    await refreshTheories();
  }

  const api: ExtensionApi = {
    client,
    theoryExplorer,
    sessions,
    evaluators,

    async openFile(fsPath: string): Promise<string> {
      if (client === null) {
        throw new Error("the muPVS language server is not running");
      }
      const text = await readFile(fsPath, "utf8");
      const uri = pathToUri(fsPath);
      client.openDocument(uri, text);
      return uri;
    },

    editFile(uri: string, text: string): void {
      client?.changeDocument(uri, text);
    },

    closeFile(uri: string): void {
      client?.closeDocument(uri);
    },

    codeLenses(uri: string): Promise<CodeLensWire[]> {
      if (client === null) {
        return Promise.resolve([]);
      }
      return client.request<CodeLensWire[]>("textDocument/codeLens", {
        textDocument: { uri },
      });
    },

    refreshTheories,

    async deactivate(): Promise<void> {
      for (const ui of sessions.values()) {
        if (!ui.ended && client !== null) {
          try {
            await client.request("pvs/quit-proof", {
              sessionId: ui.sessionId,
              persist: false,
            });
          } catch {
            // already closed on the server
          }
          ui.ended = true;
        }
        if (ui.cleanup !== null) {
          await ui.cleanup;
        }
        ui.device.dispose();
        ui.terminal.dispose();
      }
      for (const ui of evaluators) {
        ui.device.dispose();
        ui.terminal.dispose();
      }
      if (client !== null) {
        await client.stop();
      }
    },
  };
  return api;
}
