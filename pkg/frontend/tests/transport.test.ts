import { spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import * as net from "node:net";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import * as readline from "node:readline";
import { describe, expect, it } from "vitest";

const MAIN = resolve(__dirname, "..", "dist", "main.js");

function linearModelFile(): string {
  const dir = mkdtempSync(join(tmpdir(), "adapter-net-"));
  const path = join(dir, "linear.json");
  writeFileSync(path, '{"kind":"linear","coef":[2,3],"intercept":0}\n');
  return path;
}

describe("stdio transport", () => {
  it("survives malformed lines and keeps serving", async () => {
    const proc = spawn("node", [MAIN, "--model", linearModelFile()], {
      stdio: ["pipe", "pipe", "inherit"],
    });
    const rl = readline.createInterface({ input: proc.stdout });
    const replies = rl[Symbol.asyncIterator]();
    proc.stdin.write("garbage garbage\n");
    proc.stdin.write('{"op":"predict","X":[[1,1]]}\n');
    const first = JSON.parse((await replies.next()).value as string);
    expect(first.ok).toBe(false);
    const second = JSON.parse((await replies.next()).value as string);
    expect(second).toEqual({ ok: true, y: [5] });
    proc.stdin.end();
    await new Promise((done) => proc.on("exit", done));
    expect(proc.exitCode).toBe(0); // clean shutdown on stdin EOF
  });

  it("exits nonzero when the model cannot load", async () => {
    const proc = spawn("node", [MAIN, "--model", "/nonexistent/model.json"], {
      stdio: ["pipe", "pipe", "pipe"],
    });
    const code = await new Promise((done) => proc.on("exit", done));
    expect(code).not.toBe(0);
  });
});

describe("tcp transport", () => {
  it("serves the protocol over a socket", async () => {
    const proc = spawn(
      "node",
      [MAIN, "--model", linearModelFile(), "--transport", "tcp", "--port", "0"],
      { stdio: ["ignore", "ignore", "pipe"] },
    );
    const port = await new Promise<number>((resolvePort, reject) => {
      const rl = readline.createInterface({ input: proc.stderr });
      rl.on("line", (line) => {
        const match = /listening (\d+)/.exec(line);
        if (match) resolvePort(Number(match[1]));
      });
      proc.on("exit", () => reject(new Error("server exited early")));
    });
    try {
      const socket = net.createConnection({ host: "127.0.0.1", port });
      const rl = readline.createInterface({ input: socket });
      const replies = rl[Symbol.asyncIterator]();
      socket.write('{"op":"handshake"}\n');
      const handshake = JSON.parse((await replies.next()).value as string);
      expect(handshake.n_features).toBe(2);
      expect(handshake.version).toBe(1);
      socket.write('{"op":"predict","X":[[0.5,-1.25],[3,4]]}\n');
      const predict = JSON.parse((await replies.next()).value as string);
      expect(predict.y).toEqual([-2.75, 18]);
      socket.end();
    } finally {
      proc.kill("SIGTERM");
      await new Promise((done) => proc.on("exit", done));
    }
  });
});
