/**
 * Language client: owns the server process and the JSON-RPC session.
 *
 * The client never inspects document text; it ships whole buffers to the
 * server and renders whatever comes back. Document versions count edits
 * within one open/close cycle, matching the server's notion of staleness.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { pathToFileURL } from "node:url";
import { resolve } from "node:path";

import { ConnectionClosedError, JsonRpcConnection } from "./jsonrpc.js";

export class ServerStartError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ServerStartError";
  }
}

export interface LanguageClientOptions {
  /** argv for the server process; argv[0] is the executable. */
  command: string[];
  /** Filesystem path of the workspace root, if any. */
  rootPath?: string | null;
  /** Forwarded verbatim as initializationOptions. */
  initializationOptions?: Record<string, unknown>;
}

export interface InitializeResultWire {
  capabilities: Record<string, unknown>;
  serverInfo?: { name: string; version: string };
}

export type ClientState = "idle" | "running" | "failed" | "stopped";

export function pathToUri(fsPath: string): string {
  return pathToFileURL(resolve(fsPath)).toString();
}

export class LanguageClient {
  private child: ChildProcess | null = null;
  private connection: JsonRpcConnection | null = null;
  private readonly versions = new Map<string, number>();
  private stderrTail = "";
  private exited: Promise<void> | null = null;
  state: ClientState = "idle";
  capabilities: Record<string, unknown> | null = null;

  constructor(private readonly options: LanguageClientOptions) {}

  /** Spawn the server and run the initialize handshake. */
  async start(): Promise<InitializeResultWire> {
    const [executable, ...args] = this.options.command;
    if (executable === undefined) {
      this.state = "failed";
      throw new ServerStartError("empty server command");
    }
    const child = spawn(executable, args, { stdio: ["pipe", "pipe", "pipe"] });
    this.child = child;
    child.stderr?.on("data", (chunk: Buffer) => {
      this.stderrTail = (this.stderrTail + chunk.toString("utf8")).slice(-2000);
    });
    this.exited = new Promise((res) => {
      child.on("exit", () => res());
      child.on("error", () => res());
    });

    const spawnFailure = new Promise<never>((_, reject) => {
      child.on("error", (err) =>
        reject(new ServerStartError(`cannot launch '${executable}': ${err.message}`)),
      );
      child.on("exit", (code) =>
        reject(
          new ServerStartError(
            `server exited during startup (code ${code}): ${this.stderrTail.trim()}`,
          ),
        ),
      );
    });

    const connection = new JsonRpcConnection(child.stdout!, child.stdin!);
    this.connection = connection;
    const rootPath = this.options.rootPath;
    const params = {
      processId: process.pid,
      rootUri: rootPath == null ? null : pathToUri(rootPath),
      capabilities: {},
      initializationOptions: this.options.initializationOptions ?? {},
    };
    let result: InitializeResultWire;
    try {
      result = (await Promise.race([
        connection.request("initialize", params),
        spawnFailure,
      ])) as InitializeResultWire;
    } catch (err) {
      this.state = "failed";
      connection.dispose("startup failed");
      child.kill("SIGKILL");
      throw err instanceof ServerStartError
        ? err
        : new ServerStartError(err instanceof Error ? err.message : String(err));
    }
    connection.notify("initialized", {});
    this.capabilities = result.capabilities ?? null;
    this.state = "running";
    return result;
  }

  // -- plumbing ----------------------------------------------------------

  private live(): JsonRpcConnection {
    if (this.connection === null || this.state !== "running") {
      throw new ConnectionClosedError("client is not running");
    }
    return this.connection;
  }

  request<T>(method: string, params: unknown): Promise<T> {
    return this.live().request(method, params) as Promise<T>;
  }

  notify(method: string, params: unknown): void {
    this.live().notify(method, params);
  }

  onNotification(method: string, handler: (params: unknown) => void): () => void {
    if (this.connection === null) {
      throw new ConnectionClosedError("client is not running");
    }
    return this.connection.onNotification(method, handler);
  }

  // -- document sync -----------------------------------------------------

  openDocument(uri: string, text: string): void {
    this.versions.set(uri, 1);
    this.notify("textDocument/didOpen", {
      textDocument: { uri, languageId: "mupvs", version: 1, text },
    });
  }

  changeDocument(uri: string, text: string): number {
    const version = (this.versions.get(uri) ?? 0) + 1;
    this.versions.set(uri, version);
    this.notify("textDocument/didChange", {
      textDocument: { uri, version },
      contentChanges: [{ text }],
    });
    return version;
  }

  closeDocument(uri: string): void {
    this.versions.delete(uri);
    this.notify("textDocument/didClose", { textDocument: { uri } });
  }

  documentVersion(uri: string): number | null {
    return this.versions.get(uri) ?? null;
  }

  // -- teardown ----------------------------------------------------------

  /** Polite shutdown; falls back to SIGKILL if the process lingers. */
  async stop(): Promise<void> {
    const connection = this.connection;
    const child = this.child;
    if (connection !== null && this.state === "running") {
      try {
        await Promise.race([
          connection.request("shutdown", null),
          new Promise((res) => setTimeout(res, 2000)),
        ]);
        connection.notify("exit", {});
      } catch {
        // the transport may already be gone; the kill below still runs
      }
    }
    this.state = this.state === "failed" ? "failed" : "stopped";
    if (child !== null) {
      const killTimer = setTimeout(() => child.kill("SIGKILL"), 2000);
      await this.exited;
      clearTimeout(killTimer);
    }
    connection?.dispose("client stopped");
    this.connection = null;
    this.child = null;
  }
}
