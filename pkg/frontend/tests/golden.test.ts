/**
 * Conformance against the shared golden corpus (../tests/golden): every
 * request line must yield an equivalent reply. Equivalence is numeric at
 * 1e-12; "*" in the expected reply matches any string.
 */

import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { readFileSync, readdirSync, writeFileSync, mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import * as readline from "node:readline";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

const GOLDEN_DIR = resolve(__dirname, "..", "..", "tests", "golden");
const MAIN = resolve(__dirname, "..", "dist", "main.js");

function matchGolden(expected: unknown, actual: unknown, path = ""): void {
  if (typeof expected === "string") {
    if (expected !== "*") expect(actual, path).toBe(expected);
    return;
  }
  if (typeof expected === "number") {
    expect(typeof actual, path).toBe("number");
    expect(Math.abs((actual as number) - expected), path).toBeLessThanOrEqual(
      1e-12 * Math.max(1, Math.abs(expected)),
    );
    return;
  }
  if (Array.isArray(expected)) {
    expect(Array.isArray(actual), path).toBe(true);
    expect((actual as unknown[]).length, path).toBe(expected.length);
    expected.forEach((e, i) => matchGolden(e, (actual as unknown[])[i], `${path}[${i}]`));
    return;
  }
  if (expected !== null && typeof expected === "object") {
    expect(typeof actual, path).toBe("object");
    const eKeys = Object.keys(expected as object).sort();
    const aKeys = Object.keys(actual as object).sort();
    expect(aKeys, path).toEqual(eKeys);
    for (const key of eKeys) {
      matchGolden((expected as any)[key], (actual as any)[key], `${path}.${key}`);
    }
    return;
  }
  expect(actual, path).toBe(expected);
}

describe("golden protocol corpus", () => {
  let proc: ChildProcessWithoutNullStreams;
  let replies: AsyncIterator<string>;

  beforeAll(() => {
    const dir = mkdtempSync(join(tmpdir(), "adapter-golden-"));
    const modelPath = join(dir, "linear.json");
    writeFileSync(modelPath, '{"kind":"linear","coef":[2,3],"intercept":0}\n');
    proc = spawn("node", [MAIN, "--model", modelPath], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    const rl = readline.createInterface({ input: proc.stdout });
    replies = rl[Symbol.asyncIterator]();
  });

  afterAll(() => {
    proc.stdin.end();
  });

  const cases = readdirSync(GOLDEN_DIR).filter((f) => f.endsWith(".txt")).sort();
  it("has the corpus", () => {
    expect(cases.length).toBeGreaterThanOrEqual(8);
  });

  for (const name of cases) {
    it(`replies equivalently for ${name}`, async () => {
      const [request, expected] = readFileSync(join(GOLDEN_DIR, name), "utf-8")
        .trim()
        .split("\n");
      proc.stdin.write(request + "\n");
      const { value } = await replies.next();
      matchGolden(JSON.parse(expected), JSON.parse(value as string), name);
    });
  }
});
