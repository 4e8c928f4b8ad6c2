/**
 * Protocol loop: newline-delimited JSON, one object per line, one reply per
 * request, replies strictly in request order. NaN/Infinity never cross the
 * wire; a prediction that is not finite becomes an ok:false reply.
 */

import * as net from "node:net";
import * as readline from "node:readline";
import type { Readable, Writable } from "node:stream";
import type { Model } from "./models.js";

export const PROTOCOL_VERSION = 1;

type Reply =
  | { ok: true; name: string; n_features: number; version: number }
  | { ok: true; y: number[] }
  | { ok: false; error: string };

export function handleLine(line: string, model: Model): Reply {
  let request: any;
  try {
    request = JSON.parse(line);
  } catch {
    return { ok: false, error: "unparseable request line" };
  }
  if (typeof request !== "object" || request === null) {
    return { ok: false, error: "request must be a JSON object" };
  }
  if (request.op === "handshake") {
    return {
      ok: true,
      name: model.name,
      n_features: model.nFeatures,
      version: PROTOCOL_VERSION,
    };
  }
  if (request.op === "predict") {
    const X = request.X;
    if (!Array.isArray(X)) {
      return { ok: false, error: "predict needs an X matrix" };
    }
    for (const row of X) {
      if (!Array.isArray(row) || row.length !== model.nFeatures) {
        return { ok: false, error: "bad row width" };
      }
      if (!row.every((v: unknown) => typeof v === "number" && Number.isFinite(v))) {
        return { ok: false, error: "non-finite input value" };
      }
    }
    let y: number[];
    try {
      y = model.predict(X as number[][]);
    } catch (exc) {
      return { ok: false, error: `model failure: ${String(exc)}` };
    }
    if (y.length !== X.length) {
      return { ok: false, error: "model returned wrong-length output" };
    }
    if (!y.every((v) => Number.isFinite(v))) {
      return { ok: false, error: "model returned non-finite prediction" };
    }
    return { ok: true, y };
  }
  return { ok: false, error: `unknown op ${JSON.stringify(request.op)}` };
}

export function serveStream(input: Readable, output: Writable, model: Model): Promise<void> {
  return new Promise((resolve) => {
    const rl = readline.createInterface({ input, crlfDelay: Infinity });
    rl.on("line", (line) => {
      if (line.trim().length === 0) return;
      output.write(JSON.stringify(handleLine(line, model)) + "\n");
    });
    rl.on("close", resolve);
  });
}

export function serveTcp(model: Model, port: number, onListen?: (port: number) => void): net.Server {
  const server = net.createServer((socket) => {
    void serveStream(socket, socket, model);
  });
  server.listen(port, "127.0.0.1", () => {
    const address = server.address();
    if (address && typeof address === "object" && onListen) onListen(address.port);
  });
  return server;
}
