/**
 * JSON-RPC 2.0 over length-prefixed frames.
 *
 * Each message is preceded by an HTTP-style header block; the only header
 * that matters is Content-Length, which counts the UTF-8 bytes of the JSON
 * body. Framing survives arbitrary chunk boundaries in both directions.
 */

import type { Readable, Writable } from "node:stream";

const HEADER_END = Buffer.from("\r\n\r\n", "ascii");

/** An error response from the peer, surfaced as a rejection. */
export class ResponseError extends Error {
  constructor(
    public readonly code: number,
    message: string,
    public readonly data?: unknown,
  ) {
    super(message);
    this.name = "ResponseError";
  }
}

/** The transport dropped while requests were still waiting. */
export class ConnectionClosedError extends Error {
  constructor(detail: string) {
    super(`connection closed: ${detail}`);
    this.name = "ConnectionClosedError";
  }
}

type NotificationHandler = (params: unknown) => void;
type RequestHandler = (params: unknown) => unknown | Promise<unknown>;

interface Pending {
  resolve: (value: unknown) => void;
  reject: (err: Error) => void;
}

export function encodeFrame(message: object): Buffer {
  const body = Buffer.from(JSON.stringify(message), "utf8");
  const header = Buffer.from(
    `Content-Length: ${body.length}\r\n\r\n`,
    "ascii",
  );
  return Buffer.concat([header, body]);
}

export class JsonRpcConnection {
  private buffer: Buffer = Buffer.alloc(0);
  private nextId = 1;
  private readonly pending = new Map<number, Pending>();
  private readonly notificationHandlers = new Map<
    string,
    Set<NotificationHandler>
  >();
  private readonly requestHandlers = new Map<string, RequestHandler>();
  private closed = false;

  constructor(
    private readonly input: Readable,
    private readonly output: Writable,
  ) {
    input.on("data", (chunk: Buffer) => this.feed(chunk));
    const drop = (why: string) => this.dispose(why);
    input.on("end", () => drop("stream ended"));
    input.on("close", () => drop("stream closed"));
    input.on("error", (err) => drop(String(err)));
  }

  /** Send a request and await the matching response. */
  request(method: string, params: unknown): Promise<unknown> {
    if (this.closed) {
      return Promise.reject(new ConnectionClosedError("already closed"));
    }
    const id = this.nextId++;
    const promise = new Promise<unknown>((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
    });
    this.send({ jsonrpc: "2.0", id, method, params });
    return promise;
  }

  notify(method: string, params: unknown): void {
    if (this.closed) {
      return;
    }
    this.send({ jsonrpc: "2.0", method, params });
  }

  /** Subscribe to a notification method; returns an unsubscribe thunk. */
  onNotification(method: string, handler: NotificationHandler): () => void {
    let handlers = this.notificationHandlers.get(method);
    if (handlers === undefined) {
      handlers = new Set();
      this.notificationHandlers.set(method, handlers);
    }
    handlers.add(handler);
    return () => handlers?.delete(handler);
  }

  /** Serve requests from the peer (used by tests; the server sends none). */
  onRequest(method: string, handler: RequestHandler): void {
    this.requestHandlers.set(method, handler);
  }

  dispose(reason = "disposed"): void {
    if (this.closed) {
      return;
    }
    this.closed = true;
    const waiting = [...this.pending.values()];
    this.pending.clear();
    for (const entry of waiting) {
      entry.reject(new ConnectionClosedError(reason));
    }
  }

  get isClosed(): boolean {
    return this.closed;
  }

  // -- outgoing ----------------------------------------------------------

  private send(message: object): void {
    this.output.write(encodeFrame(message));
  }

  // -- incoming ----------------------------------------------------------

  private feed(chunk: Buffer): void {
    this.buffer = Buffer.concat([this.buffer, chunk]);
    while (true) {
      const headerEnd = this.buffer.indexOf(HEADER_END);
      if (headerEnd < 0) {
        return;
      }
      const header = this.buffer.subarray(0, headerEnd).toString("ascii");
      const match = /Content-Length:\s*(\d+)/i.exec(header);
      if (match === null) {
        this.dispose("missing Content-Length header");
        return;
      }
      const length = Number(match[1]);
      const bodyStart = headerEnd + HEADER_END.length;
      if (this.buffer.length < bodyStart + length) {
        return; // body still in flight
      }
      const body = this.buffer.subarray(bodyStart, bodyStart + length);
      this.buffer = this.buffer.subarray(bodyStart + length);
      let message: Record<string, unknown>;
      try {
        message = JSON.parse(body.toString("utf8"));
      } catch {
        this.dispose("undecodable message body");
        return;
      }
      this.route(message);
    }
  }

  private route(message: Record<string, unknown>): void {
    if (typeof message.method === "string") {
      if ("id" in message) {
        this.serveRequest(message.id as number | string, message.method, message.params);
      } else {
        const handlers = this.notificationHandlers.get(message.method);
        if (handlers !== undefined) {
          for (const handler of [...handlers]) {
            handler(message.params);
          }
        }
      }
      return;
    }
    const id = message.id;
    if (typeof id !== "number") {
      return;
    }
    const waiter = this.pending.get(id);
    if (waiter === undefined) {
      return; // response to a request we gave up on
    }
    this.pending.delete(id);
    if (message.error !== undefined && message.error !== null) {
      const err = message.error as { code: number; message: string; data?: unknown };
      waiter.reject(new ResponseError(err.code, err.message, err.data));
    } else {
      waiter.resolve(message.result);
    }
  }

  private serveRequest(
    id: number | string,
    method: string,
    params: unknown,
  ): void {
    const handler = this.requestHandlers.get(method);
    if (handler === undefined) {
      this.send({
        jsonrpc: "2.0",
        id,
        error: { code: -32601, message: `unknown method ${method}` },
      });
      return;
    }
    Promise.resolve()
      .then(() => handler(params))
      .then(
        (result) => this.send({ jsonrpc: "2.0", id, result: result ?? null }),
        (err: unknown) => {
          const code = err instanceof ResponseError ? err.code : -32603;
          this.send({
            jsonrpc: "2.0",
            id,
            error: { code, message: err instanceof Error ? err.message : String(err) },
          });
        },
      );
  }
}
