"""Newline-delimited JSON scorer service over TCP or a unix socket.

Request:  {"id": <u64>, "mode": "sequence"|"pair", "tokens": [...]}
Response: {"id": ..., "probs": [[pO, pI], ...]} | {"id": ..., "score": p}
Error:    {"id": ..., "error": "<message>"}

One JSON object per line. Connections are handled concurrently; requests
within a connection are answered in order.
"""

from __future__ import annotations

import argparse
import json
import socketserver
import sys

from .model import RequestError, TokenScorer


def handle_request(scorer: TokenScorer, obj) -> dict:
    request_id = obj.get("id") if isinstance(obj, dict) else None
    if not isinstance(obj, dict):
        return {"id": None, "error": "request must be a JSON object"}
    mode = obj.get("mode")
    if mode not in ("sequence", "pair"):
        return {"id": request_id, "error": f"unknown or missing mode: {mode!r}"}
    tokens = obj.get("tokens")
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        return {"id": request_id, "error": "tokens must be a list of strings"}
    try:
        if mode == "sequence":
            rows = scorer.predict_sequence(tokens)
            return {"id": request_id, "probs": [[p_o, p_i] for p_o, p_i in rows]}
        score = scorer.predict_pair(tokens)
        return {"id": request_id, "score": score}
    except RequestError as exc:
        return {"id": request_id, "error": str(exc)}


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        scorer = self.server.scorer  # type: ignore[attr-defined]
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                response = {"id": None, "error": f"unparseable request: {exc}"}
            else:
                response = handle_request(scorer, obj)
            self.wfile.write(json.dumps(response).encode("utf-8") + b"\n")
            self.wfile.flush()


class _TcpServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class _UnixServer(socketserver.ThreadingUnixStreamServer):
    daemon_threads = True


def serve(model_path: str, address: str):
    """Load the model and return a bound, ready server (not yet serving)."""
    scorer = TokenScorer(model_path)
    if address.startswith("unix:"):
        server = _UnixServer(address[len("unix:") :], _Handler)
    else:
        host, _, port = address.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad address {address!r} (expected host:port or unix:/path)")
        server = _TcpServer((host, int(port)), _Handler)
    server.scorer = scorer  # type: ignore[attr-defined]
    return server


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="taxassign-scorer-service", description=__doc__
    )
    parser.add_argument("--model", required=True, help="model directory")
    parser.add_argument("--address", default="127.0.0.1:8765")
    args = parser.parse_args(argv)
    try:
        server = serve(args.model, args.address)
    except OSError as exc:
        print(f"scorer-service: cannot bind {args.address}: {exc}", file=sys.stderr)
        return 1
    bound = server.server_address
    if isinstance(bound, tuple):
        bound = f"{bound[0]}:{bound[1]}"
    print(f"scorer-service: listening on {bound}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
