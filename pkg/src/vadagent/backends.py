"""Model backends: a scripted stand-in for tests and an HTTP chat-completions client.

Every backend instance owns a lock so that at most one request is in flight
per instance, which lets worker threads for different videos share a model
server safely.
"""

from __future__ import annotations

import base64
import io
import json
import logging
import os
import socket
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)


class BackendError(RuntimeError):
    """Transport failure, bad status, or malformed server reply."""


class BackendTimeout(BackendError):
    pass


@dataclass(frozen=True)
class ModelRequest:
    system_prompt: str
    user_text: str = ""
    images: tuple[str, ...] | None = None  # base64 PNG payloads
    max_new_tokens: int = 512
    temperature: float = 0.0

    def __post_init__(self):
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "scripted"          # "scripted" or "http"
    endpoint: str = ""
    model: str = ""
    timeout: float = 120.0
    retries: int = 1
    auth_env: str = ""              # name of env var holding a bearer token
    scenario: str = ""              # scripted-kind scenario file

    def violations(self, prefix: str) -> list[str]:
        out = []
        if self.kind not in ("scripted", "http"):
            out.append(f"{prefix}.kind: must be 'scripted' or 'http'")
        if self.kind == "http" and not (self.endpoint and self.model):
            out.append(f"{prefix}: http backend requires endpoint and model")
        if self.timeout <= 0:
            out.append(f"{prefix}.timeout: must be positive")
        if self.retries < 0:
            out.append(f"{prefix}.retries: must be >= 0")
        return out


class ModelBackend(Protocol):
    retries: int

    def complete(self, req: ModelRequest) -> str: ...


def encode_frames(frames: Sequence) -> list[str]:
    """Base64 PNG payload for each frame, order preserved.

    Accepts ``Frame`` objects or bare 2-D uint8 arrays.
    """
    payloads = []
    for f in frames:
        pixels = np.asarray(getattr(f, "pixels", f), dtype=np.uint8)
        buf = io.BytesIO()
        Image.fromarray(pixels, mode="L").save(buf, format="PNG")
        payloads.append(base64.b64encode(buf.getvalue()).decode("ascii"))
    return payloads


def decode_frame(payload: str) -> np.ndarray:
    with Image.open(io.BytesIO(base64.b64decode(payload))) as img:
        return np.array(img.convert("L"))


@dataclass
class ScriptRule:
    match: str
    reply: str
    consume_once: bool = False


def load_scenario(path: str | Path) -> list[ScriptRule]:
    """Read a JSON list of ``{match, reply, consume_once}`` rules."""
    items = json.loads(Path(path).read_text())
    if not isinstance(items, list):
        raise ValueError(f"{path}: scenario must be a JSON list")
    return [ScriptRule(str(it["match"]), str(it["reply"]), bool(it.get("consume_once", False))) for it in items]


class ScriptedBackend:
    """Replies by substring dispatch over ``system_prompt + user_text``.

    Rules are tried in order; the first whose ``match`` occurs wins. A
    ``consume_once`` rule is removed after it fires. No match gives ``""``.
    Every request is appended to ``calls`` for inspection.
    """

    def __init__(self, rules: Sequence[ScriptRule | dict] = (), retries: int = 1, lock: threading.Lock | None = None):
        self.rules = [r if isinstance(r, ScriptRule) else ScriptRule(**r) for r in rules]
        self.retries = retries
        self.calls: list[ModelRequest] = []
        self._lock = lock or threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path, **kw) -> "ScriptedBackend":
        return cls(load_scenario(path), **kw)

    def complete(self, req: ModelRequest) -> str:
        with self._lock:
            self.calls.append(req)
            haystack = req.system_prompt + req.user_text
            for i, rule in enumerate(self.rules):
                if rule.match in haystack:
                    if rule.consume_once:
                        del self.rules[i]
                    return rule.reply
            return ""


def _post_json(url: str, body: dict, timeout: float, auth_env: str = "") -> dict:
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(auth_env) if auth_env else None
    if token:
        headers["Authorization"] = f"Bearer {token}"
    req = urllib.request.Request(url, data=json.dumps(body).encode("utf-8"), headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            raw = resp.read()
    except urllib.error.HTTPError as exc:
        raise BackendError(f"{url}: HTTP {exc.code}") from exc
    except urllib.error.URLError as exc:
        if isinstance(exc.reason, (socket.timeout, TimeoutError)):
            raise BackendTimeout(f"{url}: timed out after {timeout}s") from exc
        raise BackendError(f"{url}: {exc.reason}") from exc
    except (socket.timeout, TimeoutError) as exc:
        raise BackendTimeout(f"{url}: timed out after {timeout}s") from exc
    except OSError as exc:
        raise BackendError(f"{url}: {exc}") from exc
    try:
        return json.loads(raw)
    except ValueError as exc:
        raise BackendError(f"{url}: reply is not JSON") from exc


def chat_payload(req: ModelRequest, model: str) -> dict:
    """OpenAI-compatible chat-completions body; images ride as data-URL parts."""
    if req.images:
        content: str | list = [
            {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{img}"}} for img in req.images
        ]
        if req.user_text:
            content.append({"type": "text", "text": req.user_text})
    else:
        content = req.user_text
    return {
        "model": model,
        "messages": [
            {"role": "system", "content": req.system_prompt},
            {"role": "user", "content": content},
        ],
        "max_tokens": req.max_new_tokens,
        "temperature": req.temperature,
    }


class HttpBackend:
    """Client for ``POST {endpoint}/v1/chat/completions``."""

    def __init__(self, cfg: BackendConfig, lock: threading.Lock | None = None):
        if not (cfg.endpoint and cfg.model):
            raise ValueError("http backend requires endpoint and model")
        self.cfg = cfg
        self.retries = cfg.retries
        self.url = cfg.endpoint.rstrip("/") + "/v1/chat/completions"
        self._lock = lock or threading.Lock()

    def complete(self, req: ModelRequest) -> str:
        body = chat_payload(req, self.cfg.model)
        with self._lock:
            reply = _post_json(self.url, body, self.cfg.timeout, self.cfg.auth_env)
        try:
            content = reply["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"{self.url}: reply has no choices[0].message.content") from exc
        return content if isinstance(content, str) else ""


class HttpEmbedder:
    """Sentence encoder behind ``POST {endpoint}/v1/embeddings``.

    Sends ``{"input": text}`` and accepts either ``{"embedding": [...]}`` or
    the OpenAI-style ``{"data": [{"embedding": [...]}]}``. The vector is
    re-normalized to unit length. Safe to share across threads.
    """

    def __init__(self, cfg: BackendConfig, dim: int = 384):
        if not cfg.endpoint:
            raise ValueError("http embedder requires an endpoint")
        self.cfg = cfg
        self.dim = dim
        self.url = cfg.endpoint.rstrip("/") + "/v1/embeddings"

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise ValueError("empty embedding input")
        body = {"input": text}
        if self.cfg.model:
            body["model"] = self.cfg.model
        reply = call_with_retry(lambda: _post_json(self.url, body, self.cfg.timeout, self.cfg.auth_env), self.cfg.retries)
        vec = reply.get("embedding")
        if vec is None and reply.get("data"):
            vec = reply["data"][0].get("embedding")
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise BackendError(f"{self.url}: embedding shape {vec.shape}, expected ({self.dim},)")
        norm = np.linalg.norm(vec)
        if not np.isfinite(norm) or norm == 0:
            raise BackendError(f"{self.url}: degenerate embedding")
        return vec / norm


def call_with_retry(fn, retries: int):
    """Call ``fn``; on ``BackendError`` retry up to ``retries`` more times."""
    for attempt in range(retries + 1):
        try:
            return fn()
        except BackendError as exc:
            if attempt == retries:
                raise
            log.warning("backend call failed (%s); retrying", exc)


def complete_with_retry(backend: ModelBackend, req: ModelRequest) -> str:
    return call_with_retry(lambda: backend.complete(req), getattr(backend, "retries", 1))


def make_backend(cfg: BackendConfig, lock: threading.Lock | None = None) -> ModelBackend:
    if cfg.kind == "http":
        return HttpBackend(cfg, lock)
    if cfg.kind == "scripted":
        rules = load_scenario(cfg.scenario) if cfg.scenario else []
        return ScriptedBackend(rules, retries=cfg.retries, lock=lock)
    raise ValueError(f"unknown backend kind {cfg.kind!r}")


@dataclass
class Backends:
    """The perception model, the reasoning model, and an optional encoder."""

    vlm: ModelBackend
    llm: ModelBackend
    embedder: object | None = None
