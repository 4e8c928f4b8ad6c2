#!/usr/bin/env node
/** CLI: predictor-adapter --model <file> [--n-features N] [--transport stdio|tcp] [--port P] */

import { parseArgs } from "node:util";
import { stdin, stdout, stderr, exit } from "node:process";
import { loadModel } from "./models.js";
import { serveStream, serveTcp } from "./server.js";

async function main(): Promise<void> {
  const { values } = parseArgs({
    options: {
      model: { type: "string" },
      "n-features": { type: "string" },
      transport: { type: "string", default: "stdio" },
      port: { type: "string", default: "0" },
    },
  });
  if (!values.model) {
    stderr.write("usage: predictor-adapter --model <file> [--n-features N] [--transport stdio|tcp] [--port P]\n");
    exit(2);
  }
  const arity = values["n-features"] ? Number(values["n-features"]) : undefined;
  const model = await loadModel(values.model!, arity);
  stderr.write(`serving model '${model.name}' (${model.nFeatures} features)\n`);

  if (values.transport === "tcp") {
    const server = serveTcp(model, Number(values.port), (port) => {
      stderr.write(`listening ${port}\n`);
    });
    const shutdown = () => server.close(() => exit(0));
    process.on("SIGTERM", shutdown);
    process.on("SIGINT", shutdown);
    return;
  }
  if (values.transport !== "stdio") {
    stderr.write(`unknown transport ${values.transport}\n`);
    exit(2);
  }
  process.on("SIGTERM", () => exit(0));
  await serveStream(stdin, stdout, model); // resolves on stdin EOF
}

main().catch((exc) => {
  stderr.write(`fatal: ${String(exc)}\n`);
  exit(1);
});
