import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from vadagent.agent import DialogueTurn
from vadagent.frames import Frame, SelectedClip


def make_clip(n=8, size=(16, 16), start=0, seed=0):
    rng = np.random.default_rng(seed)
    frames = [Frame(start + i, rng.integers(0, 256, size, dtype=np.uint8)) for i in range(n)]
    return SelectedClip(frames, start)


def verdict_json(flag, conf, reasoning="r", crime="none"):
    return json.dumps({"anomaly_score": flag, "confidence": conf, "reasoning": reasoning, "crime_type": crime})


def synthetic_video(n_frames, height=24, width=32, seed=0, block=None):
    """Static noisy background with an optional moving bright block.

    ``block`` is ``(first_frame, last_frame)`` during which an 6x6 block
    sweeps across the frame.
    """
    rng = np.random.default_rng(seed)
    bg = rng.integers(40, 90, (height, width), dtype=np.uint8)
    video = np.repeat(bg[None], n_frames, axis=0)
    if block:
        lo, hi = block
        for t in range(lo, min(hi + 1, n_frames)):
            x = (t * 3) % (width - 6)
            video[t, 8:14, x:x + 6] = 240
    return video


@pytest.fixture
def clip():
    return make_clip()


@pytest.fixture
def turns():
    return [DialogueTurn("Is anyone running?", "No."), DialogueTurn("Is a bag left behind?", "Yes, near the door.")]


class StubServer:
    """Loopback chat-completions / embeddings server recording every request."""

    def __init__(self):
        self.requests = []
        self.content = "stub reply"
        self.delay = 0.0
        self.status = 200
        self.embedding = [1.0] + [0.0] * 383
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length))
                stub.requests.append({"path": self.path, "headers": dict(self.headers), "body": body})
                if stub.delay:
                    time.sleep(stub.delay)
                if self.path.endswith("/embeddings"):
                    payload = {"embedding": stub.embedding}
                else:
                    payload = {"choices": [{"index": 0, "message": {"role": "assistant", "content": stub.content}}]}
                data = json.dumps(payload).encode()
                try:
                    self.send_response(stub.status)
                    self.send_header("Content-Type", "application/json")
                    self.send_header("Content-Length", str(len(data)))
                    self.end_headers()
                    self.wfile.write(data)
                except (BrokenPipeError, ConnectionResetError):
                    pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.httpd.daemon_threads = True
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}"
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def stub_server():
    server = StubServer()
    yield server
    server.close()


ANOMALOUS_STARTS = (256, 320, 384)


def replay_rules(anomalous_starts=ANOMALOUS_STARTS):
    """Scenario rules marking the given window starts anomalous (p=0.9), the rest confidently normal."""
    vlm = [{"match": f"window starting at frame {t}.", "reply": "Two people fighting in the street."}
           for t in anomalous_starts]
    vlm.append({"match": "", "reply": "An empty street with parked cars."})
    llm = [
        {"match": "fighting", "reply": verdict_json(1, 0.9, "physical fight", "Fighting")},
        {"match": "", "reply": verdict_json(0, 0.95, "routine scene")},
    ]
    return vlm, llm


def build_dataset(root, n_videos=2, n_frames=640, config_extra="", poison=()):
    """Write raw videos, labels, scenarios, a manifest and a config under ``root``.

    Video ``k`` carries a moving block over frames 256..511 with seed ``k``;
    labels mark the same span. Ids listed in ``poison`` get a truncated raw file.
    """
    from pathlib import Path

    from vadagent.io import write_labels, write_raw

    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    vlm, llm = replay_rules()
    (root / "vlm.json").write_text(json.dumps(vlm))
    (root / "llm.json").write_text(json.dumps(llm))
    manifest = {}
    labels = np.zeros(n_frames, dtype=np.int64)
    labels[256:512] = 1
    for k in range(n_videos):
        vid = f"video{k:02d}"
        write_raw(root / f"{vid}.raw", synthetic_video(n_frames, seed=k, block=(256, 511)), fps=30)
        write_labels(root / f"{vid}.txt", labels)
        if vid in poison:
            (root / f"{vid}.raw").write_bytes(b"\0" * 10)
        manifest[vid] = {"frames": f"{vid}.raw", "labels": f"{vid}.txt"}
    (root / "manifest.json").write_text(json.dumps(manifest))
    (root / "engine.ini").write_text(
        "[engine]\nprofile = ucf\n\n[post]\nsigma1 = 5\n\n"
        "[backend.vlm]\nkind = scripted\nscenario = vlm.json\n\n"
        "[backend.llm]\nkind = scripted\nscenario = llm.json\n" + config_extra
    )
    return root / "engine.ini", root / "manifest.json"


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(module.RESULTS, key=lambda s: s.split("]")[0].split("[")[1].strip().zfill(2)):
            terminalreporter.write_line(line)
