/**
 * Shared test plumbing: fixture workspace copies, the server launch
 * command, and polling utilities for asynchronous UI state.
 */

import { cpSync, mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";

/** Repository root (the directory holding src/mupvs and tests/). */
export const PKG_ROOT = fileURLToPath(new URL("../..", import.meta.url));

/** The proved fixture workspace shipped with the server's test suite. */
export const FIXTURE_WS = join(PKG_ROOT, "tests", "fixtures", "ws");

/** How tests launch the server without relying on a console script. */
export const SERVER_COMMAND = `${process.env.MUPVS_PYTHON ?? "python3"} -m mupvs.cli`;

export interface TempWorkspace {
  dir: string;
  cleanup(): void;
}

/** Copy the fixture workspace into a throwaway directory. */
export function copyFixtureWorkspace(): TempWorkspace {
  const dir = mkdtempSync(join(tmpdir(), "mupvs-client-"));
  cpSync(FIXTURE_WS, dir, { recursive: true });
  return {
    dir,
    cleanup: () => rmSync(dir, { recursive: true, force: true }),
  };
}

/** Poll until the predicate holds; fails loudly on timeout. */
export async function until(
  predicate: () => boolean,
  timeoutMs = 5000,
  label = "condition",
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!predicate()) {
    if (Date.now() > deadline) {
      throw new Error(`timed out after ${timeoutMs}ms waiting for ${label}`);
    }
    await new Promise((res) => setTimeout(res, 10));
  }
}

export function sleep(ms: number): Promise<void> {
  return new Promise((res) => setTimeout(res, ms));
}
