import os
import subprocess
import sys
from pathlib import Path

import pytest

from robot_brain.server import make_server
from robot_brain.service import ServerConfig

FIXTURES = Path(__file__).parent / "fixtures"
SRC = Path(__file__).parents[1] / "src"

_RESULTS_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS_KEY] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    results = item.config.stash[_RESULTS_KEY]
    passed, _ = results.get(number, (True, title))
    results[number] = (passed and report.passed, title)


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_RESULTS_KEY]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        passed, title = results[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {title}")


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def serve(tmp_path):
    """Start in-process servers; all are stopped at teardown."""
    servers = []

    def _serve(store_path=None, **config):
        config.setdefault("port", 0)
        cfg = ServerConfig(store_path=str(store_path or tmp_path / "users.jsonl"), **config)
        server = make_server(cfg)
        server.start_background()
        servers.append(server)
        return server

    yield _serve
    for server in servers:
        server.stop()


def subprocess_env():
    env = dict(os.environ)
    env["PYTHONPATH"] = os.pathsep.join(filter(None, [str(SRC), env.get("PYTHONPATH")]))
    return env


class ServerProcess:
    def __init__(self, store_path):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "robot_brain.server", "--port", "0", "--store", str(store_path)],
            stdout=subprocess.PIPE, stderr=subprocess.DEVNULL, text=True, env=subprocess_env())
        line = self.proc.stdout.readline()
        if "listening on" not in line:
            self.proc.kill()
            raise RuntimeError(f"server failed to start: {line!r}")
        self.url = line.rsplit(" ", 1)[1].strip()

    def stop(self):
        if self.proc.poll() is None:
            self.proc.terminate()
            self.proc.wait(timeout=10)
        return self.proc.returncode


@pytest.fixture
def server_process():
    procs = []

    def _start(store_path):
        proc = ServerProcess(store_path)
        procs.append(proc)
        return proc

    yield _start
    for proc in procs:
        if proc.proc.poll() is None:
            proc.proc.kill()
            proc.proc.wait()
