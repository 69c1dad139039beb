import json
import subprocess
import sys
import threading

import pytest

BRIDGE_ARGV = [sys.executable, "-m", "victim_bridge"]
TOOLKIT_ARGV = [sys.executable, "-m", "trajattack.cli"]


def make_request(
    request_id="q0",
    frames=6,
    start=(40.0, 50.0),
    step=(3.0, 2.0),
    half=8.0,
    size=256.0,
    seed=3,
    track_points=4,
):
    boxes = []
    for t in range(frames):
        cx = start[0] + step[0] * t
        cy = start[1] + step[1] * t
        boxes.append([cx - half, cy - half, cx + half, cy + half])
    return {
        "id": request_id,
        "frame_width": size,
        "frame_height": size,
        "boxes": boxes,
        "seed": seed,
        "track_points": track_points,
        "image_ref": None,
    }


class LineServer:
    """A stdio line server under test; ask() round-trips one line."""

    def __init__(self, argv):
        self.proc = subprocess.Popen(
            argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def send(self, line: str) -> None:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def read_line(self, timeout=10.0) -> str:
        got = []
        reader = threading.Thread(
            target=lambda: got.append(self.proc.stdout.readline()), daemon=True
        )
        reader.start()
        reader.join(timeout)
        if not got or not got[0]:
            raise AssertionError(f"no response within {timeout}s (server died?)")
        return got[0]

    def ask(self, payload, timeout=10.0) -> dict:
        line = payload if isinstance(payload, str) else json.dumps(payload)
        self.send(line)
        return json.loads(self.read_line(timeout))

    def close(self) -> None:
        self.proc.terminate()
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


@pytest.fixture
def echo_server():
    server = LineServer(BRIDGE_ARGV + ["--callback", "echo"])
    yield server
    server.close()
