import os
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

import httpx
import pytest

# makes tests/oracles.py importable from every test module
sys.path.insert(0, str(Path(__file__).parent))


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class ServerProcess:
    """A real nirhub server subprocess on loopback, killable mid-workload."""

    def __init__(self, storage_root: Path, session_timeout: float = 1800.0):
        self.storage_root = Path(storage_root)
        self.session_timeout = session_timeout
        self.port = free_port()
        self.base_url = f"http://127.0.0.1:{self.port}"
        self.proc: subprocess.Popen | None = None

    def start(self, timeout: float = 20.0) -> "ServerProcess":
        self.proc = subprocess.Popen(
            [
                sys.executable,
                "-m",
                "nirhub.server.app",
                "--host",
                "127.0.0.1",
                "--port",
                str(self.port),
                "--storage-root",
                str(self.storage_root),
                "--session-timeout",
                str(self.session_timeout),
            ],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
        )
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            try:
                if httpx.get(f"{self.base_url}/api/instances", timeout=1.0).status_code == 200:
                    return self
            except httpx.TransportError:
                pass
            if self.proc.poll() is not None:
                raise RuntimeError("server process exited during startup")
            time.sleep(0.05)
        raise RuntimeError("server did not become ready in time")

    def kill(self) -> None:
        """SIGKILL: no graceful shutdown, no snapshot on exit."""
        if self.proc and self.proc.poll() is None:
            os.kill(self.proc.pid, signal.SIGKILL)
            self.proc.wait(timeout=10)

    def stop(self) -> None:
        if self.proc and self.proc.poll() is None:
            self.proc.terminate()
            try:
                self.proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait(timeout=10)

    def restart(self) -> "ServerProcess":
        """Fresh process over the same storage root (and the same port)."""
        old_port = self.port
        self.port = old_port
        self.proc = None
        return self.start()


@pytest.fixture
def server(tmp_path):
    srv = ServerProcess(tmp_path / "server-data").start()
    yield srv
    srv.stop()
