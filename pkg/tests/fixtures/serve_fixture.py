#!/usr/bin/env python3
"""Native protocol fixture server for bridge tests. No package imports.

Models:
  sum            y_i = sum of row i
  linear:a,b,... y_i = row . [a, b, ...]
Behaviors for error-path tests:
  --version N          report protocol version N in the handshake
  --wrong-length       reply with one prediction too few
  --sleep S            sleep S seconds before every reply
  --reply-nan          reply with a NaN token in y
  --garbage            reply with unparseable bytes once, then behave
"""

import argparse
import json
import socket
import sys
import time


def build_model(spec, n_features):
    if spec == "sum":
        return lambda X: [sum(row) for row in X]
    if spec.startswith("linear:"):
        coef = [float(v) for v in spec.split(":", 1)[1].split(",")]
        return lambda X: [sum(c * v for c, v in zip(coef, row)) for row in X]
    raise SystemExit(f"unknown model {spec!r}")


def handle(line, model, args, state):
    try:
        request = json.loads(line)
        op = request.get("op")
        if op == "handshake":
            return {
                "ok": True,
                "name": f"fixture-{args.model}",
                "n_features": args.n_features,
                "version": args.version,
            }
        if op == "predict":
            X = request["X"]
            if any(len(row) != args.n_features for row in X):
                return {"ok": False, "error": "bad row width"}
            y = model(X)
            if args.wrong_length:
                y = y[:-1]
            return {"ok": True, "y": y}
        return {"ok": False, "error": f"unknown op {op!r}"}
    except Exception as exc:  # noqa: BLE001 - fixture must stay alive
        return {"ok": False, "error": str(exc)}


def serve_stream(rfile, wfile, model, args):
    state = {}
    for raw in rfile:
        line = raw.strip()
        if not line:
            continue
        if args.sleep:
            time.sleep(args.sleep)
        reply = handle(line, model, args, state)
        if args.garbage and not state.get("garbage_sent"):
            state["garbage_sent"] = True
            wfile.write("this is not json\n")
            wfile.flush()
            continue
        if args.reply_nan and reply.get("ok") and "y" in reply:
            wfile.write('{"ok":true,"y":[NaN]}\n')
            wfile.flush()
            continue
        wfile.write(json.dumps(reply) + "\n")
        wfile.flush()


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--model", default="sum")
    parser.add_argument("--n-features", type=int, default=3)
    parser.add_argument("--version", type=int, default=1)
    parser.add_argument("--transport", choices=("stdio", "tcp"), default="stdio")
    parser.add_argument("--port", type=int, default=0)
    parser.add_argument("--sleep", type=float, default=0.0)
    parser.add_argument("--wrong-length", action="store_true")
    parser.add_argument("--reply-nan", action="store_true")
    parser.add_argument("--garbage", action="store_true")
    args = parser.parse_args()
    model = build_model(args.model, args.n_features)

    if args.transport == "stdio":
        serve_stream(sys.stdin, sys.stdout, model, args)
        return

    server = socket.create_server(("127.0.0.1", args.port))
    print(f"listening {server.getsockname()[1]}", file=sys.stderr, flush=True)
    conn, _ = server.accept()
    with conn:
        rfile = conn.makefile("r", encoding="utf-8")
        wfile = conn.makefile("w", encoding="utf-8")
        serve_stream(rfile, wfile, model, args)


if __name__ == "__main__":
    main()
