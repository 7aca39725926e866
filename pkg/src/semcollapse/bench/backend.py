"""External token-model backend over a local socket.

Wire format: newline-delimited JSON, one request in flight per connection.

Requests::

    {"op": "info"}
    {"op": "generate", "prompt": str, "mode": "greedy"|"stochastic",
     "temperature": float, "top_p": float, "top_k": int, "max_tokens": int,
     "seed": int, "report_temperature": 1.0}

Responses::

    {"ok": true, "model_id": str, "vocab_size": int}                 # info
    {"ok": true, "model_id": str, "pieces": [str], "boundary": [float]}  # generate
    {"ok": false, "error": str}

The client joins ``pieces`` and trims surrounding whitespace. :func:`serve`
exposes any local :class:`~semcollapse.bench.decoding.TokenModel` with the
same protocol, which is how the adapter is exercised without a real GGUF
server.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading

import numpy as np

from ..errors import BackendError
from .decoding import REPORT_TEMPERATURE, DecodeConfig, TokenModel, generate_pieces
from .metrics import as_prob_vector

log = logging.getLogger(__name__)


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, sep, port = endpoint.rpartition(":")
    if not sep or not port.isdigit():
        raise BackendError(f"endpoint must look like host:port, got {endpoint!r}")
    return host or "127.0.0.1", int(port)


def encode_request(prompt: str, cfg: DecodeConfig, max_tokens: int, seed: int) -> dict:
    return {
        "op": "generate",
        "prompt": prompt,
        "mode": cfg.mode,
        "temperature": cfg.temperature,
        "top_p": cfg.top_p,
        "top_k": cfg.top_k,
        "max_tokens": max_tokens,
        "seed": seed,
        "report_temperature": REPORT_TEMPERATURE,
    }


class ExternalBackend:
    def __init__(self, endpoint: str, timeout: float = 60.0):
        self.endpoint = endpoint
        self.host, self.port = parse_endpoint(endpoint)
        self.timeout = timeout
        self._sock: socket.socket | None = None
        self._file = None
        self._lock = threading.Lock()
        self._model_id: str | None = None

    def _connect(self):
        if self._sock is None:
            try:
                self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
            except OSError as exc:
                raise BackendError(f"cannot reach backend at {self.endpoint}: {exc}") from exc
            self._file = self._sock.makefile("rwb")

    def close(self):
        if self._sock is not None:
            self._file.close()
            self._sock.close()
            self._sock = self._file = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def request(self, payload: dict) -> dict:
        with self._lock:
            self._connect()
            try:
                self._file.write(json.dumps(payload, sort_keys=True).encode() + b"\n")
                self._file.flush()
                line = self._file.readline()
            except OSError as exc:
                self.close()
                raise BackendError(f"transport failure talking to {self.endpoint}: {exc}") from exc
        if not line:
            self.close()
            raise BackendError(f"backend at {self.endpoint} closed the connection")
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendError(f"malformed reply from {self.endpoint}: {line[:80]!r}") from exc
        if not reply.get("ok"):
            raise BackendError(f"backend error from {self.endpoint}: {reply.get('error', 'unknown')}")
        return reply

    @property
    def model_id(self) -> str:
        if self._model_id is None:
            self._model_id = str(self.request({"op": "info"})["model_id"])
        return self._model_id

    def generate(self, prompt: str, cfg: DecodeConfig, max_tokens: int, seed: int) -> tuple[str, np.ndarray]:
        reply = self.request(encode_request(prompt, cfg, max_tokens, seed))
        try:
            pieces = reply["pieces"]
            boundary = as_prob_vector(reply["boundary"])
        except (KeyError, ValueError) as exc:
            raise BackendError(f"bad generate reply from {self.endpoint}: {exc}") from exc
        return "".join(pieces).strip(), boundary


def handle_request(model: TokenModel, req: dict) -> dict:
    op = req.get("op")
    if op == "info":
        return {"ok": True, "model_id": model.model_id, "vocab_size": len(model.next_distribution(""))}
    if op == "generate":
        try:
            cfg = DecodeConfig(req["mode"], req["temperature"], req["top_p"], req["top_k"])
            rng = np.random.default_rng(int(req["seed"]))
            pieces, boundary = generate_pieces(model, req["prompt"], cfg, int(req["max_tokens"]), rng)
        except (KeyError, ValueError, TypeError) as exc:
            return {"ok": False, "error": f"bad request: {exc}"}
        return {"ok": True, "model_id": model.model_id, "pieces": pieces, "boundary": boundary.tolist()}
    return {"ok": False, "error": f"unknown op {op!r}"}


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        for line in self.rfile:
            try:
                req = json.loads(line)
            except json.JSONDecodeError:
                reply = {"ok": False, "error": "malformed JSON"}
            else:
                reply = handle_request(self.server.model, req)
            self.wfile.write(json.dumps(reply, sort_keys=True).encode() + b"\n")
            self.wfile.flush()


class BackendServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, model: TokenModel, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _Handler)
        self.model = model

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"


def serve(model: TokenModel, host: str = "127.0.0.1", port: int = 0, background: bool = False) -> BackendServer:
    server = BackendServer(model, host, port)
    log.info("serving %s on %s", model.model_id, server.endpoint)
    if background:
        threading.Thread(target=server.serve_forever, daemon=True).start()
    else:
        server.serve_forever()
    return server
