"""The brain itself: sessions wired to perception, dialogue, store and rules.

:class:`Brain` is transport-agnostic; :mod:`robot_brain.server` only maps
HTTP requests onto its methods.
"""

from __future__ import annotations

import dataclasses
import logging
import os
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Mapping, Optional

from . import dialogue
from .adaptation import default_rules, evaluate, load_rules
from .errors import (
    ConfigurationError,
    NotFoundError,
    SessionStateError,
    StorageError,
    ValidationError,
)
from .perception import (
    DEFAULT_FACE_THRESHOLD,
    DEFAULT_TEMPLATE_DIM,
    EchoTranscriber,
    FaceRecognizer,
    NearestNeighborRecognizer,
    Transcriber,
    enroll,
    summarize_estimates,
)
from .protocol import (
    AnswerAck,
    AnswerMessage,
    Directive,
    FrameBatch,
    GreetingResponse,
    QuestionMessage,
    SessionHello,
    SessionSummary,
)
from .usermodel import (
    DEFAULT_SCHEMA,
    UserRecord,
    UserStore,
    load_schema,
    load_store,
    predominant_emotion,
    record_interaction,
    save_store,
    upsert_attribute,
)
from .vocab import AGE_RANGES, GENDERS

log = logging.getLogger(__name__)

ENV_PREFIX = "ROBOT_BRAIN_"


@dataclass(frozen=True)
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8765
    store_path: str = "users.jsonl"
    script_path: Optional[str] = None
    rules_path: Optional[str] = None
    schema_path: Optional[str] = None
    face_threshold: float = DEFAULT_FACE_THRESHOLD
    template_dim: int = DEFAULT_TEMPLATE_DIM
    idle_timeout: float = 300.0

    def __post_init__(self):
        if not self.face_threshold >= 0:
            raise ConfigurationError("face_threshold must be >= 0", field="face_threshold")
        if not self.idle_timeout > 0:
            raise ConfigurationError("idle_timeout must be > 0", field="idle_timeout")
        if self.template_dim < 1:
            raise ConfigurationError("template_dim must be >= 1", field="template_dim")
        if not 0 <= self.port < 65536:
            raise ConfigurationError(f"bad port {self.port}", field="port")
        for name in ("script_path", "rules_path", "schema_path"):
            path = getattr(self, name)
            if path is not None and not os.access(path, os.R_OK):
                raise ConfigurationError(f"{name} {path!r} is not readable", field=name)


_ENV_FIELDS = {
    "HOST": ("host", str),
    "PORT": ("port", int),
    "STORE": ("store_path", str),
    "SCRIPT": ("script_path", str),
    "RULES": ("rules_path", str),
    "SCHEMA": ("schema_path", str),
    "FACE_THRESHOLD": ("face_threshold", float),
    "TEMPLATE_DIM": ("template_dim", int),
    "IDLE_TIMEOUT": ("idle_timeout", float),
}


def load_config(path: Optional[os.PathLike | str] = None,
                env: Optional[Mapping[str, str]] = None, **overrides) -> ServerConfig:
    """Build a config from a JSON file, then ``ROBOT_BRAIN_*`` env vars, then kwargs.

    Relative paths inside the config file are resolved against its directory.
    """
    import json

    values: Dict[str, object] = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        known = {f.name for f in dataclasses.fields(ServerConfig)}
        if not isinstance(raw, dict) or set(raw) - known:
            raise ConfigurationError(f"config {path}: unknown keys {sorted(set(raw) - known)}")
        base = Path(path).parent
        for key, value in raw.items():
            if key.endswith("_path") and value is not None and not os.path.isabs(value):
                value = str(base / value)
            values[key] = value
    env = os.environ if env is None else env
    for suffix, (name, cast) in _ENV_FIELDS.items():
        if ENV_PREFIX + suffix in env:
            try:
                values[name] = cast(env[ENV_PREFIX + suffix])
            except ValueError as exc:
                raise ConfigurationError(f"{ENV_PREFIX}{suffix}: {exc}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ServerConfig(**values)


class _Session:
    def __init__(self, state: dialogue.SessionState, probe, prior_emotion: Optional[str],
                 now: float):
        self.lock = threading.Lock()
        self.state = state
        self.probe = probe
        self.prior_emotion = prior_emotion
        self.last_seen = now
        self.summary: Optional[SessionSummary] = None

    def dominant(self) -> Optional[str]:
        if self.state.frames:
            return predominant_emotion([f.scores for f in self.state.frames])[0]
        return self.prior_emotion


class Brain:
    def __init__(self, config: ServerConfig = ServerConfig(), *,
                 transcriber: Optional[Transcriber] = None,
                 recognizer: Optional[FaceRecognizer] = None,
                 clock: Callable[[], float] = time.monotonic):
        self.config = config
        self.schema = load_schema(config.schema_path) if config.schema_path else DEFAULT_SCHEMA
        self.script = (dialogue.load_script(config.script_path, self.schema)
                       if config.script_path else dialogue.default_script())
        self.rules = (load_rules(config.rules_path, self.schema)
                      if config.rules_path else default_rules())
        self.transcriber = transcriber or EchoTranscriber()
        self.recognizer = recognizer or NearestNeighborRecognizer()
        self.clock = clock
        self.store_path = Path(config.store_path)
        if self.store_path.exists():
            self.store = load_store(self.store_path, self.schema)
        else:
            self.store = UserStore(schema=self.schema)
        self._sessions: Dict[str, _Session] = {}
        self._sessions_lock = threading.Lock()
        self._save_lock = threading.Lock()

    # --- helpers ---

    def persist(self) -> None:
        with self._save_lock:
            save_store(self.store, self.store_path)

    def _session(self, session_id: str) -> _Session:
        with self._sessions_lock:
            session = self._sessions.get(session_id)
            if session is not None and self.clock() - session.last_seen > self.config.idle_timeout:
                del self._sessions[session_id]
                session = None
        if session is None:
            raise NotFoundError(f"unknown session {session_id!r}")
        return session

    def _touch(self, session: _Session) -> None:
        session.last_seen = self.clock()

    def reap_idle(self) -> int:
        """Drop sessions idle past the timeout; returns how many were dropped."""
        now = self.clock()
        with self._sessions_lock:
            stale = [sid for sid, s in self._sessions.items()
                     if now - s.last_seen > self.config.idle_timeout]
            for sid in stale:
                del self._sessions[sid]
        if stale:
            log.info("reaped %d idle session(s)", len(stale))
        return len(stale)

    def session_count(self) -> int:
        return len(self._sessions)

    def _directive(self, session: _Session) -> Directive:
        return evaluate(self.store.get(session.state.user_id), session.dominant(), self.rules)

    # --- operations ---

    def start_session(self, hello: SessionHello) -> GreetingResponse:
        probe = tuple(hello.face_probe)
        if len(probe) != self.config.template_dim:
            raise ValidationError("face_probe", f"dimension {len(probe)}, server expects "
                                                f"{self.config.template_dim}")
        user_id = self.recognizer.identify(self.store.gallery(), probe, self.config.face_threshold)
        recognized = user_id is not None
        if recognized:
            record = self.store.get(user_id)
        else:
            record = self.store.insert(UserRecord(user_id=f"user-{uuid.uuid4().hex[:12]}"))
            self.persist()
        session_id = uuid.uuid4().hex
        state = dialogue.open_session(session_id, record, recognized)
        prior = record.last_emotion if recognized else None
        session = _Session(state, probe, prior, self.clock())
        with self._sessions_lock:
            self._sessions[session_id] = session
        log.info("session %s started for %s (recognized=%s)", session_id, record.user_id, recognized)
        return GreetingResponse(session_id, recognized, record.user_id, state.transcript[0][1],
                                evaluate(record, prior, self.rules))

    def next_question(self, session_id: str) -> QuestionMessage:
        session = self._session(session_id)
        with session.lock:
            self._touch(session)
            if session.summary is not None:
                raise SessionStateError("session has ended")
            record = self.store.get(session.state.user_id)
            session.state, message = dialogue.next_question(session.state, record, self.script)
            return message

    def post_answer(self, session_id: str, answer: AnswerMessage) -> AnswerAck:
        session = self._session(session_id)
        with session.lock:
            self._touch(session)
            if session.summary is not None:
                raise SessionStateError("session has ended")
            outcome = None

            def apply(record: UserRecord) -> UserRecord:
                nonlocal outcome
                outcome = dialogue.apply_answer(session.state, record, answer, self.transcriber,
                                                self.script, schema=self.schema)
                return outcome.record

            self.store.update(session.state.user_id, apply)
            session.state = outcome.state
            return AnswerAck(accepted=not outcome.reprompt, directive=self._directive(session))

    def post_frames(self, session_id: str, batch: FrameBatch) -> Directive:
        session = self._session(session_id)
        if not batch.frames:
            raise ValidationError("frames", "batch is empty")
        with session.lock:
            self._touch(session)
            if session.summary is not None:
                raise SessionStateError("session has ended")
            session.state = dataclasses.replace(
                session.state, frames=session.state.frames + tuple(batch.frames))
            gender = summarize_estimates([f.gender for f in batch.frames], GENDERS)
            age = summarize_estimates([f.age_range for f in batch.frames], AGE_RANGES)

            def fold(record: UserRecord) -> UserRecord:
                record = upsert_attribute(record, "gender", gender[0], gender[1], "implicit",
                                          schema=self.schema)
                return upsert_attribute(record, "age_range", age[0], age[1], "implicit",
                                        schema=self.schema)

            self.store.update(session.state.user_id, fold)
            return self._directive(session)

    def end_session(self, session_id: str) -> SessionSummary:
        session = self._session(session_id)
        with session.lock:
            self._touch(session)
            if session.summary is not None:
                return session.summary
            state = session.state
            predominant = None
            if state.frames:
                predominant = predominant_emotion([f.scores for f in state.frames])

            def finish(record: UserRecord) -> UserRecord:
                record = record_interaction(record, predominant)
                if record.consent and record.face_template is None:
                    gallery = enroll(self.store.gallery(), record.user_id, session.probe)
                    record = dataclasses.replace(record, face_template=gallery[record.user_id])
                return record

            record = self.store.update(state.user_id, finish)
            self.persist()
            session.state = dataclasses.replace(state, phase="done", pending_question=None)
            session.summary = SessionSummary(record.user_id, predominant,
                                             record.interaction_count, state.transcript)
            log.info("session %s ended: %s interactions, predominant=%s",
                     session_id, record.interaction_count, predominant)
            return session.summary

    def get_user(self, user_id: str) -> UserRecord:
        return self.store.get(user_id)

    def close(self) -> None:
        try:
            self.persist()
        except StorageError:
            log.exception("could not persist store on shutdown")
