"""Slot-filling registration dialogue.

The engine is pure: each function takes the current ``(SessionState,
UserRecord)`` pair and returns updated copies, so many sessions can run
through it concurrently without sharing anything.
"""

from __future__ import annotations

import dataclasses
import json
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import FrozenSet, NamedTuple, Optional, Sequence, Tuple

from . import wire
from .errors import (
    ConfigurationError,
    ProtocolOrderError,
    SessionStateError,
    ValidationError,
)
from .perception import EmotionFrame, Transcriber
from .protocol import AnswerMessage, QuestionMessage
from .usermodel import DEFAULT_SCHEMA, AttributeSchema, UserRecord, upsert_attribute
from .vocab import QUESTION_KINDS

GENERIC_WELCOME = "Hello! Welcome, I don't think we have met before."
NEGATIVE_MOODS = frozenset({"sadness", "anger", "fear", "disgust", "contempt"})
MOOD_FOLLOW_UP = "Do you feel better today?"

PHASES = ("greeting", "questioning", "done")


@dataclass(frozen=True)
class QuestionEntry:
    question_id: str
    attribute_key: str
    prompt_text: str
    kind: str = "free_text"

    def message(self) -> QuestionMessage:
        return QuestionMessage(self.question_id, self.prompt_text, self.attribute_key, self.kind)


class QuestionScript:
    """Ordered questionnaire; each entry fills one user-model attribute."""

    def __init__(self, entries: Sequence[QuestionEntry],
                 schema: AttributeSchema = DEFAULT_SCHEMA):
        self.entries: Tuple[QuestionEntry, ...] = tuple(entries)
        seen = set()
        for e in self.entries:
            if e.question_id in seen:
                raise ConfigurationError(f"duplicate question_id {e.question_id!r}")
            seen.add(e.question_id)
            if e.attribute_key not in schema:
                raise ConfigurationError(
                    f"question {e.question_id!r} targets unknown attribute {e.attribute_key!r}")
            if e.kind not in QUESTION_KINDS:
                raise ConfigurationError(f"question {e.question_id!r}: bad kind {e.kind!r}")
        consent = [e for e in self.entries if e.kind == "consent"]
        if len(consent) != 1:
            raise ConfigurationError(f"script needs exactly one consent question, has {len(consent)}")
        self._by_id = {e.question_id: e for e in self.entries}

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, question_id: str) -> QuestionEntry:
        return self._by_id[question_id]

    @property
    def attribute_keys(self) -> Tuple[str, ...]:
        return tuple(e.attribute_key for e in self.entries)

    @classmethod
    def from_list(cls, items, schema: AttributeSchema = DEFAULT_SCHEMA) -> "QuestionScript":
        entries = []
        try:
            for i, item in enumerate(wire.as_list(items, "script")):
                path = f"script[{i}]"
                obj = wire.expect_object(
                    item, path, ("question_id", "attribute_key", "prompt_text", "kind"))
                entries.append(QuestionEntry(**{
                    name: wire.as_str(wire.field(obj, name, path), f"{path}.{name}", non_empty=True)
                    for name in ("question_id", "attribute_key", "prompt_text", "kind")}))
        except ValidationError as exc:
            raise ConfigurationError(str(exc), field=exc.field) from exc
        return cls(entries, schema)

    def to_list(self) -> list:
        return [dataclasses.asdict(e) for e in self.entries]


def load_script(path: os.PathLike | str,
                schema: AttributeSchema = DEFAULT_SCHEMA) -> QuestionScript:
    try:
        items = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read script {path}: {exc}") from exc
    return QuestionScript.from_list(items, schema)


def default_script() -> QuestionScript:
    text = resources.files("robot_brain").joinpath("data/default_script.json").read_text("utf-8")
    return QuestionScript.from_list(json.loads(text))


@dataclass(frozen=True)
class ConsentVocabulary:
    yes: FrozenSet[str] = frozenset({"yes", "y", "yeah", "yep", "sure", "ok", "okay",
                                     "of course", "certainly"})
    no: FrozenSet[str] = frozenset({"no", "n", "nope", "no thanks", "never"})

    def parse(self, reply: str) -> Optional[bool]:
        word = re.sub(r"[\s.!,]+$", "", reply.strip().casefold())
        if word in self.yes:
            return True
        if word in self.no:
            return False
        return None


DEFAULT_CONSENT = ConsentVocabulary()


@dataclass(frozen=True)
class SessionState:
    session_id: str
    user_id: str
    phase: str = "greeting"
    pending_question: Optional[str] = None
    frames: Tuple[EmotionFrame, ...] = ()
    transcript: Tuple[Tuple[str, str], ...] = field(default=())

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")
        # A pending question only exists while questioning; between an answer
        # and the next request the state is questioning with nothing pending.
        if self.pending_question is not None and self.phase != "questioning":
            raise ValueError("pending question outside the questioning phase")

    def say(self, speaker: str, text: str) -> "SessionState":
        return dataclasses.replace(self, transcript=self.transcript + ((speaker, text),))


class AnswerOutcome(NamedTuple):
    state: SessionState
    record: UserRecord
    reprompt: bool = False


def greeting_for(record: UserRecord, recognized: bool) -> str:
    if not recognized:
        return GENERIC_WELCOME
    name = record.value("name")
    if not name:
        return "Hello again!"
    if record.last_emotion in NEGATIVE_MOODS:
        return f"Hello {name}! {MOOD_FOLLOW_UP}"
    return f"Hello {name}!"


def open_session(session_id: str, record: UserRecord, recognized: bool) -> SessionState:
    state = SessionState(session_id=session_id, user_id=record.user_id)
    return state.say("robot", greeting_for(record, recognized))


def next_question(state: SessionState, record: UserRecord,
                  script: QuestionScript) -> Tuple[SessionState, QuestionMessage]:
    """Return the first script question whose attribute is still unanswered.

    Asking again before answering returns the same pending question. When
    nothing is left the session moves to ``done``.
    """
    if state.phase == "done":
        raise SessionStateError("conversation is already over")
    if state.pending_question is not None:
        return state, script[state.pending_question].message()
    for entry in script:
        if entry.attribute_key not in record.attributes:
            state = dataclasses.replace(state, phase="questioning",
                                        pending_question=entry.question_id)
            return state, entry.message()
    return dataclasses.replace(state, phase="done", pending_question=None), QuestionMessage.finished()


def apply_answer(
    state: SessionState,
    record: UserRecord,
    answer: AnswerMessage,
    transcriber: Transcriber,
    script: QuestionScript,
    *,
    schema: AttributeSchema = DEFAULT_SCHEMA,
    consent_words: ConsentVocabulary = DEFAULT_CONSENT,
    now: Optional[int] = None,
) -> AnswerOutcome:
    if state.pending_question is None:
        raise ProtocolOrderError("no question is pending", field="question_id")
    if answer.question_id != state.pending_question:
        raise ProtocolOrderError(
            f"answer to {answer.question_id!r} but {state.pending_question!r} is pending",
            field="question_id")
    entry = script[state.pending_question]

    if answer.modality == "audio":
        reply = transcriber.transcribe(answer.payload)
    else:
        try:
            reply = answer.payload.decode("utf-8")
        except UnicodeDecodeError:
            raise ValidationError("payload", "text answers must be UTF-8") from None
    reply = reply.strip()
    state = state.say("robot", entry.prompt_text).say("user", reply)

    if entry.kind == "consent":
        consent = consent_words.parse(reply)
        if consent is None:
            return AnswerOutcome(state, record, reprompt=True)
        record = dataclasses.replace(
            record, consent=consent,
            face_template=record.face_template if consent else None)
        value = "yes" if consent else "no"
    elif not reply:
        return AnswerOutcome(state, record, reprompt=True)
    else:
        value = reply

    record = upsert_attribute(record, entry.attribute_key, value, 1.0, "explicit",
                              schema=schema, now=now)
    return AnswerOutcome(dataclasses.replace(state, pending_question=None), record)
