"""Versioned JSON wire format between the robot client and the brain.

Every top-level message is a JSON object with ``"v": "v1"`` plus the
message fields. Encoding is canonical (sorted keys, no whitespace, UTF-8)
so equal values always produce identical bytes. Binary payloads travel as
base64 strings.
"""

from __future__ import annotations

import base64
import binascii
import json
from dataclasses import dataclass
from typing import Optional, Tuple, Type, TypeVar, Union

from . import wire
from .errors import BrainError, ParseError, ValidationError
from .perception import EmotionFrame, make_template, parse_frames
from .usermodel import FaceTemplate, UserRecord
from .vocab import (
    EMOTIONS,
    EXPRESSIONS,
    MODALITIES,
    NEUTRAL,
    PROTOCOL_VERSION,
    QUESTION_KINDS,
    REGISTERS,
    SPEAKERS,
    TONES,
)


@dataclass(frozen=True)
class Directive:
    register: str = "formal"
    tone: str = "serious"
    expression: str = NEUTRAL

    def __post_init__(self):
        wire.as_enum(self.register, "register", REGISTERS)
        wire.as_enum(self.tone, "tone", TONES)
        wire.as_enum(self.expression, "expression", EXPRESSIONS)

    def to_wire(self) -> dict:
        return {"register": self.register, "tone": self.tone, "expression": self.expression}

    @classmethod
    def from_wire(cls, obj, path: str = "") -> "Directive":
        obj = wire.expect_object(obj, path, ("register", "tone", "expression"))
        return cls(*(wire.as_enum(wire.field(obj, name, path), wire.join(path, name), vocab)
                     for name, vocab in (("register", REGISTERS), ("tone", TONES),
                                         ("expression", EXPRESSIONS))))


@dataclass(frozen=True)
class SessionHello:
    client_id: str
    face_probe: FaceTemplate
    timestamp: int

    def to_wire(self) -> dict:
        return {"client_id": self.client_id, "face_probe": list(self.face_probe),
                "timestamp": self.timestamp}

    @classmethod
    def from_wire(cls, obj, path: str = "") -> "SessionHello":
        obj = wire.expect_object(obj, path, ("client_id", "face_probe", "timestamp"))
        probe = wire.as_list(wire.field(obj, "face_probe", path), wire.join(path, "face_probe"))
        return cls(
            client_id=wire.as_str(wire.field(obj, "client_id", path), wire.join(path, "client_id")),
            face_probe=make_template(probe, path=wire.join(path, "face_probe")),
            timestamp=wire.as_int(wire.field(obj, "timestamp", path), wire.join(path, "timestamp"),
                                  minimum=0),
        )


@dataclass(frozen=True)
class GreetingResponse:
    session_id: str
    recognized: bool
    user_id: str
    greeting_text: str
    directive: Directive

    def __post_init__(self):
        wire.as_str(self.greeting_text, "greeting_text", non_empty=True)

    def to_wire(self) -> dict:
        return {"session_id": self.session_id, "recognized": self.recognized,
                "user_id": self.user_id, "greeting_text": self.greeting_text,
                "directive": self.directive.to_wire()}

    @classmethod
    def from_wire(cls, obj, path: str = "") -> "GreetingResponse":
        names = ("session_id", "recognized", "user_id", "greeting_text", "directive")
        obj = wire.expect_object(obj, path, names)
        get = lambda n: wire.field(obj, n, path)  # noqa: E731
        return cls(
            session_id=wire.as_str(get("session_id"), wire.join(path, "session_id"), non_empty=True),
            recognized=wire.as_bool(get("recognized"), wire.join(path, "recognized")),
            user_id=wire.as_str(get("user_id"), wire.join(path, "user_id"), non_empty=True),
            greeting_text=wire.as_str(get("greeting_text"), wire.join(path, "greeting_text"),
                                      non_empty=True),
            directive=Directive.from_wire(get("directive"), wire.join(path, "directive")),
        )


@dataclass(frozen=True)
class QuestionMessage:
    question_id: str = ""
    prompt_text: str = ""
    attribute_key: str = ""
    kind: str = ""
    done: bool = False

    def __post_init__(self):
        if self.done:
            for name in ("question_id", "prompt_text", "attribute_key", "kind"):
                if getattr(self, name):
                    raise ValidationError(name, "must be empty when done is true")
        else:
            for name in ("question_id", "prompt_text", "attribute_key"):
                wire.as_str(getattr(self, name), name, non_empty=True)
            wire.as_enum(self.kind, "kind", QUESTION_KINDS)

    @classmethod
    def finished(cls) -> "QuestionMessage":
        return cls(done=True)

    def to_wire(self) -> dict:
        return {"question_id": self.question_id, "prompt_text": self.prompt_text,
                "attribute_key": self.attribute_key, "kind": self.kind, "done": self.done}

    @classmethod
    def from_wire(cls, obj, path: str = "") -> "QuestionMessage":
        names = ("question_id", "prompt_text", "attribute_key", "kind", "done")
        obj = wire.expect_object(obj, path, names)
        done = wire.as_bool(wire.field(obj, "done", path), wire.join(path, "done"))
        values = {n: wire.as_str(wire.field(obj, n, path), wire.join(path, n)) for n in names[:4]}
        if not done and values["kind"] not in QUESTION_KINDS:
            wire.as_enum(values["kind"], wire.join(path, "kind"), QUESTION_KINDS)
        return cls(done=done, **values)


@dataclass(frozen=True)
class AnswerMessage:
    question_id: str
    modality: str
    payload: bytes

    def __post_init__(self):
        wire.as_enum(self.modality, "modality", MODALITIES)
        if not isinstance(self.payload, bytes) or not self.payload:
            raise ValidationError("payload", "must be non-empty bytes")

    @classmethod
    def text(cls, question_id: str, text: str) -> "AnswerMessage":
        return cls(question_id, "text", text.encode("utf-8"))

    @classmethod
    def audio(cls, question_id: str, audio: bytes) -> "AnswerMessage":
        return cls(question_id, "audio", audio)

    def to_wire(self) -> dict:
        return {"question_id": self.question_id, "modality": self.modality,
                "payload": base64.b64encode(self.payload).decode("ascii")}

    @classmethod
    def from_wire(cls, obj, path: str = "") -> "AnswerMessage":
        obj = wire.expect_object(obj, path, ("question_id", "modality", "payload"))
        raw = wire.as_str(wire.field(obj, "payload", path), wire.join(path, "payload"))
        try:
            payload = base64.b64decode(raw.encode("ascii"), validate=True)
        except (binascii.Error, UnicodeEncodeError):
            raise ValidationError(wire.join(path, "payload"), "not valid base64") from None
        if not payload:
            raise ValidationError(wire.join(path, "payload"), "must not be empty")
        return cls(
            question_id=wire.as_str(wire.field(obj, "question_id", path),
                                    wire.join(path, "question_id"), non_empty=True),
            modality=wire.as_enum(wire.field(obj, "modality", path), wire.join(path, "modality"),
                                  MODALITIES),
            payload=payload,
        )


@dataclass(frozen=True)
class FrameBatch:
    frames: Tuple[EmotionFrame, ...]

    def __post_init__(self):
        _check_ordered(self.frames, "frames")

    def to_wire(self) -> dict:
        return {"frames": [f.to_wire() for f in self.frames]}

    @classmethod
    def from_wire(cls, obj, path: str = "") -> "FrameBatch":
        obj = wire.expect_object(obj, path, ("frames",))
        return cls(tuple(parse_frames(wire.field(obj, "frames", path), wire.join(path, "frames"))))


def _check_ordered(frames, path: str) -> None:
    for i in range(1, len(frames)):
        if frames[i].timestamp < frames[i - 1].timestamp:
            raise ValidationError(f"{path}[{i}].timestamp", "timestamps must be non-decreasing")


@dataclass(frozen=True)
class AnswerAck:
    """Reply to an answer: whether it was accepted, plus the current directive."""

    accepted: bool
    directive: Directive

    def to_wire(self) -> dict:
        return {"accepted": self.accepted, "directive": self.directive.to_wire()}

    @classmethod
    def from_wire(cls, obj, path: str = "") -> "AnswerAck":
        obj = wire.expect_object(obj, path, ("accepted", "directive"))
        return cls(wire.as_bool(wire.field(obj, "accepted", path), wire.join(path, "accepted")),
                   Directive.from_wire(wire.field(obj, "directive", path),
                                       wire.join(path, "directive")))


@dataclass(frozen=True)
class SessionSummary:
    user_id: str
    predominant: Optional[Tuple[str, float]]
    interaction_count: int
    transcript: Tuple[Tuple[str, str], ...]

    def to_wire(self) -> dict:
        pred = None
        if self.predominant is not None:
            pred = {"emotion": self.predominant[0], "score": self.predominant[1]}
        return {"user_id": self.user_id, "predominant": pred,
                "interaction_count": self.interaction_count,
                "transcript": [list(line) for line in self.transcript]}

    @classmethod
    def from_wire(cls, obj, path: str = "") -> "SessionSummary":
        names = ("user_id", "predominant", "interaction_count", "transcript")
        obj = wire.expect_object(obj, path, names)
        pred = wire.field(obj, "predominant", path)
        if pred is not None:
            pp = wire.join(path, "predominant")
            pred = wire.expect_object(pred, pp, ("emotion", "score"))
            pred = (wire.as_enum(wire.field(pred, "emotion", pp), wire.join(pp, "emotion"), EMOTIONS),
                    wire.as_unit(wire.field(pred, "score", pp), wire.join(pp, "score")))
        lines = []
        tp = wire.join(path, "transcript")
        for i, line in enumerate(wire.as_list(wire.field(obj, "transcript", path), tp)):
            line = wire.as_list(line, f"{tp}[{i}]")
            if len(line) != 2:
                raise ValidationError(f"{tp}[{i}]", "expected [speaker, text]")
            lines.append((wire.as_enum(line[0], f"{tp}[{i}][0]", SPEAKERS),
                          wire.as_str(line[1], f"{tp}[{i}][1]")))
        return cls(
            user_id=wire.as_str(wire.field(obj, "user_id", path), wire.join(path, "user_id"),
                                non_empty=True),
            predominant=pred,
            interaction_count=wire.as_int(wire.field(obj, "interaction_count", path),
                                          wire.join(path, "interaction_count"), minimum=0),
            transcript=tuple(lines),
        )


@dataclass(frozen=True)
class ErrorMessage:
    code: str
    message: str
    field: Optional[str] = None

    @classmethod
    def from_exception(cls, exc: BrainError) -> "ErrorMessage":
        return cls(exc.code, exc.message, exc.field)

    def to_wire(self) -> dict:
        return {"error": {"code": self.code, "message": self.message, "field": self.field}}

    @classmethod
    def from_wire(cls, obj, path: str = "") -> "ErrorMessage":
        obj = wire.expect_object(obj, path, ("error",))
        ep = wire.join(path, "error")
        err = wire.expect_object(wire.field(obj, "error", path), ep, ("code", "message", "field"))
        fld = wire.field(err, "field", ep)
        return cls(wire.as_str(wire.field(err, "code", ep), wire.join(ep, "code"), non_empty=True),
                   wire.as_str(wire.field(err, "message", ep), wire.join(ep, "message")),
                   None if fld is None else wire.as_str(fld, wire.join(ep, "field")))


Message = Union[SessionHello, GreetingResponse, QuestionMessage, AnswerMessage, FrameBatch,
                Directive, AnswerAck, SessionSummary, ErrorMessage, UserRecord]
MESSAGE_TYPES = (SessionHello, GreetingResponse, QuestionMessage, AnswerMessage, FrameBatch,
                 Directive, AnswerAck, SessionSummary, ErrorMessage, UserRecord)
M = TypeVar("M")


def encode_message(message: Message) -> bytes:
    if not isinstance(message, MESSAGE_TYPES):
        raise TypeError(f"not a protocol message: {type(message).__name__}")
    body = message.to_wire()
    body["v"] = PROTOCOL_VERSION
    return wire.canonical_json(body)


def decode_message(data: bytes, expected_type: Type[M]) -> M:
    """Parse ``data`` as a ``expected_type`` message.

    Raises :class:`ParseError` for bytes that are not UTF-8 JSON and
    :class:`ValidationError` (naming the field) for anything that parses but
    breaks the message's invariants.
    """
    if expected_type not in MESSAGE_TYPES:
        raise TypeError(f"not a protocol message type: {expected_type!r}")
    try:
        obj = json.loads(bytes(data).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"malformed message: {exc}") from exc
    obj = wire.expect_object(obj, "")
    if "v" in obj and obj["v"] != PROTOCOL_VERSION:
        raise ValidationError("v", f"unsupported protocol version {obj['v']!r}")
    message = expected_type.from_wire({k: v for k, v in obj.items() if k != "v"}, "")
    if "v" not in obj:
        raise ValidationError("v", "missing protocol version")
    return message
