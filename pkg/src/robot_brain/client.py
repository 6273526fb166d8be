"""Minimal HTTP client for the brain's v1 endpoints."""

from __future__ import annotations

import socket
import time
import urllib.error
import urllib.request
from typing import Optional, Sequence, Type, TypeVar

from .errors import ParseError, ValidationError
from .perception import EmotionFrame
from .protocol import (
    AnswerAck,
    AnswerMessage,
    Directive,
    ErrorMessage,
    FrameBatch,
    GreetingResponse,
    QuestionMessage,
    SessionHello,
    SessionSummary,
    decode_message,
    encode_message,
)
from .usermodel import FaceTemplate, UserRecord

M = TypeVar("M")


class ClientError(Exception):
    pass


class ConnectionFailed(ClientError):
    pass


class ServerError(ClientError):
    """The server answered with an error body."""

    def __init__(self, status: int, error: ErrorMessage):
        super().__init__(f"HTTP {status} {error.code}: {error.message}")
        self.status = status
        self.error = error


class BrainClient:
    def __init__(self, base_url: str, timeout: float = 10.0):
        if "://" not in base_url:
            base_url = "http://" + base_url
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _call(self, method: str, path: str, reply_type: Type[M], body: Optional[bytes] = None) -> M:
        request = urllib.request.Request(self.base_url + path, data=body, method=method)
        if body is not None:
            request.add_header("Content-Type", "application/json; charset=utf-8")
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                data = response.read()
        except urllib.error.HTTPError as exc:
            data = exc.read()
            try:
                error = decode_message(data, ErrorMessage)
            except (ParseError, ValidationError):
                error = ErrorMessage("http_error", data.decode("utf-8", "replace") or exc.reason)
            raise ServerError(exc.code, error) from None
        except (urllib.error.URLError, ConnectionError, socket.timeout) as exc:
            raise ConnectionFailed(f"cannot reach {self.base_url}: {exc}") from None
        return decode_message(data, reply_type)

    def start_session(self, probe: FaceTemplate, client_id: str = "simulator",
                      timestamp: Optional[int] = None) -> GreetingResponse:
        stamp = int(time.time() * 1000) if timestamp is None else timestamp
        hello = SessionHello(client_id, tuple(probe), stamp)
        return self._call("POST", "/v1/session", GreetingResponse, encode_message(hello))

    def next_question(self, session_id: str) -> QuestionMessage:
        return self._call("GET", f"/v1/session/{session_id}/question", QuestionMessage)

    def post_answer(self, session_id: str, answer: AnswerMessage) -> AnswerAck:
        return self._call("POST", f"/v1/session/{session_id}/answer", AnswerAck,
                          encode_message(answer))

    def post_frames(self, session_id: str, frames: Sequence[EmotionFrame]) -> Directive:
        return self._call("POST", f"/v1/session/{session_id}/frames", Directive,
                          encode_message(FrameBatch(tuple(frames))))

    def end_session(self, session_id: str) -> SessionSummary:
        return self._call("POST", f"/v1/session/{session_id}/end", SessionSummary, b"")

    def get_user(self, user_id: str) -> UserRecord:
        return self._call("GET", f"/v1/users/{user_id}", UserRecord)
