"""HTTP front-end for :class:`~robot_brain.service.Brain`.

Endpoints (JSON bodies in the v1 wire format)::

    POST /v1/session                 SessionHello  -> GreetingResponse
    GET  /v1/session/{id}/question                 -> QuestionMessage
    POST /v1/session/{id}/answer     AnswerMessage -> AnswerAck
    POST /v1/session/{id}/frames     FrameBatch    -> Directive
    POST /v1/session/{id}/end                      -> SessionSummary
    GET  /v1/users/{id}                            -> UserRecord

Errors come back with the status of the raised
:class:`~robot_brain.errors.BrainError` and an ``ErrorMessage`` body.
"""

from __future__ import annotations

import argparse
import logging
import re
import signal
import sys
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional, Tuple

from .errors import BrainError, ConfigurationError, NotFoundError, StorageError
from .protocol import (
    AnswerMessage,
    ErrorMessage,
    FrameBatch,
    SessionHello,
    decode_message,
    encode_message,
)
from .service import Brain, ServerConfig, load_config

log = logging.getLogger(__name__)

MAX_BODY = 8 * 1024 * 1024

_ROUTES = [
    ("POST", re.compile(r"^/v1/session$"), "start"),
    ("GET", re.compile(r"^/v1/session/([^/]+)/question$"), "question"),
    ("POST", re.compile(r"^/v1/session/([^/]+)/answer$"), "answer"),
    ("POST", re.compile(r"^/v1/session/([^/]+)/frames$"), "frames"),
    ("POST", re.compile(r"^/v1/session/([^/]+)/end$"), "end"),
    ("GET", re.compile(r"^/v1/users/([^/]+)$"), "user"),
]


class _MethodNotAllowed(BrainError):
    code = "method_not_allowed"
    http_status = 405


class BrainHandler(BaseHTTPRequestHandler):
    server_version = "robot-brain/1"
    protocol_version = "HTTP/1.1"

    @property
    def brain(self) -> Brain:
        return self.server.brain

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_BODY:
            raise BrainError("request body too large")
        return self.rfile.read(length) if length else b""

    def _route(self, method: str) -> Tuple[str, Optional[str]]:
        path = self.path.split("?", 1)[0]
        allowed = False
        for verb, pattern, name in _ROUTES:
            match = pattern.match(path)
            if match:
                if verb == method:
                    return name, match.group(1) if pattern.groups else None
                allowed = True
        if allowed:
            raise _MethodNotAllowed(f"{method} not allowed on {path}")
        raise NotFoundError(f"no route for {method} {path}")

    def _dispatch(self, method: str) -> None:
        try:
            body = self._body()
            name, ident = self._route(method)
            brain = self.brain
            if name == "start":
                reply = brain.start_session(decode_message(body, SessionHello))
            elif name == "question":
                reply = brain.next_question(ident)
            elif name == "answer":
                reply = brain.post_answer(ident, decode_message(body, AnswerMessage))
            elif name == "frames":
                reply = brain.post_frames(ident, decode_message(body, FrameBatch))
            elif name == "end":
                reply = brain.end_session(ident)
            else:
                reply = brain.get_user(ident)
            self._send(HTTPStatus.OK, encode_message(reply))
        except BrainError as exc:
            if exc.http_status >= 500:
                log.error("%s %s failed: %s", method, self.path, exc)
            self._send(exc.http_status, encode_message(ErrorMessage.from_exception(exc)))
        except Exception as exc:  # noqa: BLE001 - last-resort 500 with a body
            log.exception("unhandled error on %s %s", method, self.path)
            err = ErrorMessage("internal_error", f"{type(exc).__name__}: {exc}")
            self._send(HTTPStatus.INTERNAL_SERVER_ERROR, encode_message(err))

    def _send(self, status: int, payload: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)


class BrainServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, brain: Brain, address: Optional[Tuple[str, int]] = None):
        self.brain = brain
        super().__init__(address or (brain.config.host, brain.config.port), BrainHandler)
        self._stop = threading.Event()
        self._reaper = threading.Thread(target=self._reap_loop, name="session-reaper",
                                        daemon=True)

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def _reap_loop(self) -> None:
        interval = min(1.0, self.brain.config.idle_timeout / 2)
        while not self._stop.wait(interval):
            self.brain.reap_idle()

    def serve_forever(self, poll_interval: float = 0.5) -> None:
        self._reaper.start()
        try:
            super().serve_forever(poll_interval)
        finally:
            self._stop.set()

    def start_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, kwargs={"poll_interval": 0.05},
                                  name="robot-brain", daemon=True)
        thread.start()
        return thread

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        self.brain.close()


def make_server(config: ServerConfig, **brain_kwargs) -> BrainServer:
    return BrainServer(Brain(config, **brain_kwargs))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="robot-brain", description="Run the robot brain server.")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--host")
    parser.add_argument("--port", type=int)
    parser.add_argument("--store", dest="store_path")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config, host=args.host, port=args.port,
                             store_path=args.store_path)
        server = make_server(config)
    except (ConfigurationError, StorageError) as exc:
        print(f"robot-brain: {exc}", file=sys.stderr)
        return 2

    def _terminate(signum, frame):
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGTERM, _terminate)
    print(f"robot-brain listening on {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        server.brain.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
