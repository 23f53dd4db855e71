"""Newline-delimited JSON scorer transport and its conformance checks.

Request:  {"id": <u64>, "mode": "sequence"|"pair", "tokens": [<string>...]}
Response: {"id": <u64>, "probs": [[pO, pI], ...]}   (sequence)
          {"id": <u64>, "score": p}                 (pair)
          {"id": ...,  "error": "<message>"}        (failure)

One JSON object per line, UTF-8. Marker tokens travel verbatim in
``tokens``. Addresses are ``host:port`` (TCP) or ``unix:/path``.
"""

from __future__ import annotations

import json
import random
import socket
import threading
from dataclasses import dataclass, field

from .errors import ScorerError
from .seqframe import MARKER_TOKENS, LabelSeq, TaggedSequence

PROB_TOLERANCE = 1e-6


def parse_address(address: str) -> tuple[int, tuple | str]:
    """Split an address string into a socket family and connect argument."""
    if address.startswith("unix:"):
        return socket.AF_UNIX, address[len("unix:") :]
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise ScorerError(f"bad scorer address {address!r} (expected host:port or unix:/path)")
    return socket.AF_INET, (host, int(port))


class RemoteScorer:
    """Synchronous client for the scorer wire protocol.

    Requests carry monotonically increasing ids; the response id must echo
    the request id. Thread-safe via an internal lock (one in-flight request
    per connection).
    """

    capabilities = frozenset({"sequence", "pair"})

    def __init__(self, address: str, timeout: float = 60.0):
        self.address = address
        family, target = parse_address(address)
        try:
            self._sock = socket.socket(family, socket.SOCK_STREAM)
            self._sock.settimeout(timeout)
            self._sock.connect(target)
        except OSError as exc:
            raise ScorerError(f"cannot connect to scorer at {address}: {exc}") from exc
        self._reader = self._sock.makefile("r", encoding="utf-8", newline="\n")
        self._writer = self._sock.makefile("w", encoding="utf-8", newline="\n")
        self._lock = threading.Lock()
        self._next_id = 0

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "RemoteScorer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def request(self, mode: str, tokens: list[str]) -> dict:
        with self._lock:
            request_id = self._next_id
            self._next_id += 1
            payload = json.dumps(
                {"id": request_id, "mode": mode, "tokens": tokens}, ensure_ascii=False
            )
            try:
                self._writer.write(payload + "\n")
                self._writer.flush()
                line = self._reader.readline()
            except OSError as exc:
                raise ScorerError(f"transport failure: {exc}", request_id) from exc
        if not line:
            raise ScorerError("connection closed by scorer", request_id)
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ScorerError(f"unparseable response: {exc}", request_id) from exc
        if response.get("id") != request_id:
            raise ScorerError(
                f"response id {response.get('id')!r} does not echo request", request_id
            )
        if "error" in response:
            raise ScorerError(f"scorer error: {response['error']}", request_id)
        return response

    def score_sequence(self, tagged: TaggedSequence) -> LabelSeq:
        response = self.request("sequence", tagged.tokens)
        probs = response.get("probs")
        if not isinstance(probs, list) or len(probs) != len(tagged.tokens):
            raise ScorerError(
                f"expected {len(tagged.tokens)} prob rows, got "
                f"{len(probs) if isinstance(probs, list) else type(probs).__name__}"
            )
        return [(float(row[0]), float(row[1])) for row in probs]

    def score_pair(self, tagged: TaggedSequence) -> float:
        response = self.request("pair", tagged.tokens)
        score = response.get("score")
        if not isinstance(score, (int, float)) or not 0.0 <= float(score) <= 1.0:
            raise ScorerError(f"pair score out of range: {score!r}")
        return float(score)


# ---------------------------------------------------------------------------
# Conformance suite, run against any implementation of the protocol
# ---------------------------------------------------------------------------


@dataclass
class ConformanceReport:
    requests_sent: int = 0
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


class _RawClient:
    """Line-level client that can send malformed requests on purpose."""

    def __init__(self, address: str, timeout: float = 60.0):
        family, target = parse_address(address)
        self._sock = socket.socket(family, socket.SOCK_STREAM)
        self._sock.settimeout(timeout)
        self._sock.connect(target)
        self._reader = self._sock.makefile("r", encoding="utf-8", newline="\n")
        self._writer = self._sock.makefile("w", encoding="utf-8", newline="\n")

    def exchange(self, payload: str) -> dict:
        self._writer.write(payload + "\n")
        self._writer.flush()
        line = self._reader.readline()
        if not line:
            raise ScorerError("connection closed during conformance run")
        return json.loads(line)

    def close(self) -> None:
        self._sock.close()


def _random_tokens(rng: random.Random) -> list[str]:
    words = ["the", "gene", "BRCA1", "mouse", "human", "coli", "expression", "cells"]
    n = rng.randint(3, 24)
    tokens = [rng.choice(words) for _ in range(n)]
    # wrap one span in gene markers, another in species markers
    g = rng.randrange(len(tokens))
    tokens[g:g] = [MARKER_TOKENS[0]]
    tokens.insert(g + 2, MARKER_TOKENS[1])
    s = rng.randrange(len(tokens) + 1)
    tokens[s:s] = [MARKER_TOKENS[2], rng.choice(words), MARKER_TOKENS[3]]
    return tokens


def run_conformance(
    address: str, request_count: int = 1000, seed: int = 0
) -> ConformanceReport:
    """Exercise id echo, row counts, normalization, determinism and error
    shape over ``request_count`` requests."""
    rng = random.Random(seed)
    report = ConformanceReport()
    raw = _RawClient(address)

    def check(condition: bool, message: str) -> None:
        if not condition:
            report.failures.append(message)

    next_id = 0

    def send(obj: dict) -> dict:
        nonlocal next_id
        response = raw.exchange(json.dumps(obj))
        report.requests_sent += 1
        return response

    try:
        while report.requests_sent < request_count:
            roll = rng.random()
            request_id = next_id
            next_id += 1
            if roll < 0.05:
                # error shape: missing/bad mode, empty tokens
                bad = rng.choice(
                    [
                        {"id": request_id, "tokens": ["x"]},
                        {"id": request_id, "mode": "bogus", "tokens": ["x"]},
                        {"id": request_id, "mode": "sequence", "tokens": []},
                    ]
                )
                response = send(bad)
                check("error" in response, f"id {request_id}: expected error response")
                check(
                    response.get("id") == request_id,
                    f"id {request_id}: error response must echo id",
                )
            elif roll < 0.25:
                tokens = _random_tokens(rng)
                response = send({"id": request_id, "mode": "pair", "tokens": tokens})
                check(response.get("id") == request_id, f"id {request_id}: id echo")
                score = response.get("score")
                check(
                    isinstance(score, (int, float)) and 0.0 <= score <= 1.0,
                    f"id {request_id}: pair score {score!r} out of range",
                )
                repeat_id = next_id
                next_id += 1
                repeat = send({"id": repeat_id, "mode": "pair", "tokens": tokens})
                check(
                    repeat.get("score") == score,
                    f"id {repeat_id}: pair response not deterministic",
                )
            else:
                tokens = _random_tokens(rng)
                response = send({"id": request_id, "mode": "sequence", "tokens": tokens})
                check(response.get("id") == request_id, f"id {request_id}: id echo")
                probs = response.get("probs")
                if not isinstance(probs, list) or len(probs) != len(tokens):
                    report.failures.append(
                        f"id {request_id}: expected {len(tokens)} rows"
                    )
                    continue
                for r, row in enumerate(probs):
                    if abs(row[0] + row[1] - 1.0) > PROB_TOLERANCE:
                        report.failures.append(
                            f"id {request_id}: row {r} sums to {row[0] + row[1]}"
                        )
                        break
                if rng.random() < 0.2:
                    repeat_id = next_id
                    next_id += 1
                    repeat = send(
                        {"id": repeat_id, "mode": "sequence", "tokens": tokens}
                    )
                    check(
                        repeat.get("probs") == probs,
                        f"id {repeat_id}: sequence response not deterministic",
                    )
    finally:
        raw.close()
    return report
