"""Price-suggestion inference and its HTTP front end."""

from __future__ import annotations

import json
import logging
import math
import numbers
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import List, Optional

import numpy as np

from .data import lookup_stats
from .trainer import Checkpoint
from .types import DimensionMismatch, GatedPriceError

log = logging.getLogger(__name__)


class BadRequest(GatedPriceError):
    pass


class BindFailure(GatedPriceError):
    pass


@dataclass(frozen=True)
class PriceRequest:
    visual_features: List[float]
    category_id: int
    seller_id: str

    @classmethod
    def from_dict(cls, obj) -> "PriceRequest":
        if not isinstance(obj, dict):
            raise BadRequest("request body must be an object")
        missing = {"visual_features", "category_id", "seller_id"} - set(obj)
        if missing:
            raise BadRequest(f"missing field(s): {', '.join(sorted(missing))}")
        feats = obj["visual_features"]
        if not isinstance(feats, list) or not all(
            isinstance(v, numbers.Real) and not isinstance(v, bool) and math.isfinite(v) for v in feats
        ):
            raise BadRequest("visual_features must be an array of finite numbers")
        cat = obj["category_id"]
        if isinstance(cat, bool) or not isinstance(cat, int):
            raise BadRequest("category_id must be an integer")
        seller = obj["seller_id"]
        if not isinstance(seller, (str, int)) or isinstance(seller, bool):
            raise BadRequest("seller_id must be a string")
        return cls([float(v) for v in feats], cat, str(seller))


@dataclass(frozen=True)
class PriceResponse:
    qualified: bool
    score: float
    suggested_price: Optional[float] = None

    def to_dict(self, model_version: Optional[str] = None) -> dict:
        out = {"qualified": self.qualified, "score": self.score}
        if self.suggested_price is not None:
            out["suggested_price"] = self.suggested_price
        if model_version is not None:
            out["model_version"] = model_version
        return out


def predict(checkpoint: Checkpoint, request: PriceRequest) -> PriceResponse:
    if len(request.visual_features) != checkpoint.d_v:
        raise DimensionMismatch(
            f"expected {checkpoint.d_v} visual features, got {len(request.visual_features)}"
        )
    if checkpoint.stat_index is None:
        raise GatedPriceError("checkpoint carries no statistics index")
    stats = lookup_stats(checkpoint.stat_index, request.category_id, request.seller_id).to_array()
    x = np.concatenate([np.asarray(request.visual_features, dtype=np.float64), stats])
    scores, preds = checkpoint.outputs(x)
    score = float(scores[0])
    if score >= 0.5:
        return PriceResponse(True, score, float(math.exp(preds[0])))
    return PriceResponse(False, score)


def response_body(checkpoint: Checkpoint, payload: dict) -> str:
    """Serialized response shared by the CLI and the HTTP endpoint."""
    resp = predict(checkpoint, PriceRequest.from_dict(payload))
    return json.dumps(resp.to_dict(checkpoint.model_version), sort_keys=True)


def _handler(checkpoint: Checkpoint):
    health = json.dumps({"status": "ok", "checksum": f"{checkpoint.checksum:08x}",
                         "model_version": checkpoint.model_version}, sort_keys=True)

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def _send(self, status, body):
            data = body.encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _error(self, status, msg):
            self._send(status, json.dumps({"error": msg}))

        def do_GET(self):
            if self.path == "/v1/health":
                self._send(200, health)
            else:
                self._error(404, f"no route {self.path}")

        def do_POST(self):
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length)
            if self.path != "/v1/price":
                self._error(404, f"no route {self.path}")
                return
            try:
                payload = json.loads(raw.decode("utf-8"))
                body = response_body(checkpoint, payload)
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                self._error(400, f"malformed body: {exc}")
            except BadRequest as exc:
                self._error(400, str(exc))
            except DimensionMismatch as exc:
                self._error(422, str(exc))
            else:
                self._send(200, body)

        def log_message(self, fmt, *args):
            log.debug("%s - %s", self.address_string(), fmt % args)

    return Handler


def make_server(checkpoint: Checkpoint, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    try:
        server = ThreadingHTTPServer((host, port), _handler(checkpoint))
    except OSError as exc:
        raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
    server.daemon_threads = True
    return server


def serve(checkpoint: Checkpoint, bind_address: str = "127.0.0.1:8080") -> None:
    host, _, port = bind_address.rpartition(":")
    server = make_server(checkpoint, host or "127.0.0.1", int(port))
    log.info("serving on %s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
