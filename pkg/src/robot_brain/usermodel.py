"""Persisted user model: feature/value attributes with certainty factors.

Records are immutable values. Every operation returns an updated copy, and
:class:`UserStore` is the only mutable holder; it serializes mutations per
user so that sessions for different users never wait on each other.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple

from . import wire
from .errors import (
    ConfigurationError,
    DomainError,
    NoDataError,
    NotFoundError,
    SchemaError,
    StorageError,
    StoreLoadError,
    ValidationError,
)
from .vocab import EMOTIONS, SOURCES

FaceTemplate = Tuple[float, ...]
HistoryEntry = Tuple[int, str, float]


def now_ms() -> int:
    return int(time.time() * 1000)


@dataclass(frozen=True)
class EmotionScores:
    """One score in [0, 1] for each of the seven emotions."""

    sadness: float = 0.0
    anger: float = 0.0
    disgust: float = 0.0
    joy: float = 0.0
    fear: float = 0.0
    surprise: float = 0.0
    contempt: float = 0.0

    def __post_init__(self):
        for name in EMOTIONS:
            wire.as_unit(getattr(self, name), name)

    def __getitem__(self, emotion: str) -> float:
        if emotion not in EMOTIONS:
            raise KeyError(emotion)
        return getattr(self, emotion)

    def items(self) -> Iterator[Tuple[str, float]]:
        return ((name, getattr(self, name)) for name in EMOTIONS)

    def to_wire(self) -> dict:
        return dict(self.items())

    @classmethod
    def from_wire(cls, obj, path: str = "scores") -> "EmotionScores":
        obj = wire.expect_object(obj, path, EMOTIONS)
        return cls(**{name: wire.as_unit(wire.field(obj, name, path), wire.join(path, name))
                      for name in EMOTIONS})


# --- attribute schema -------------------------------------------------------


@dataclass(frozen=True)
class SchemaEntry:
    key: str
    source: str
    prompt: Optional[str] = None


class AttributeSchema:
    """Ordered set of attribute keys the user model accepts."""

    def __init__(self, entries: Iterable[SchemaEntry]):
        self._entries: Dict[str, SchemaEntry] = {}
        for entry in entries:
            if entry.source not in SOURCES:
                raise ConfigurationError(f"schema key {entry.key!r}: bad source {entry.source!r}")
            if entry.key in self._entries:
                raise ConfigurationError(f"schema key {entry.key!r} declared twice")
            self._entries[entry.key] = entry

    def __contains__(self, key: object) -> bool:
        return key in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, key: str) -> SchemaEntry:
        return self._entries[key]

    def require(self, key: str) -> SchemaEntry:
        try:
            return self._entries[key]
        except KeyError:
            raise SchemaError(f"unknown attribute key {key!r}", field=key) from None

    @classmethod
    def from_list(cls, items: Sequence[Mapping]) -> "AttributeSchema":
        entries = []
        try:
            for i, item in enumerate(wire.as_list(items, "schema")):
                path = f"schema[{i}]"
                obj = wire.expect_object(item, path, ("key", "source", "prompt"))
                prompt = obj.get("prompt")
                entries.append(SchemaEntry(
                    key=wire.as_str(wire.field(obj, "key", path), f"{path}.key", non_empty=True),
                    source=wire.as_enum(wire.field(obj, "source", path), f"{path}.source", SOURCES),
                    prompt=None if prompt is None else wire.as_str(prompt, f"{path}.prompt"),
                ))
        except ValidationError as exc:
            raise ConfigurationError(str(exc), field=exc.field) from exc
        return cls(entries)

    def to_list(self) -> list:
        out = []
        for e in self._entries.values():
            item = {"key": e.key, "source": e.source}
            if e.prompt is not None:
                item["prompt"] = e.prompt
            out.append(item)
        return out


def load_schema(path: os.PathLike | str) -> AttributeSchema:
    try:
        items = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read schema {path}: {exc}") from exc
    return AttributeSchema.from_list(items)


def _default_schema() -> AttributeSchema:
    text = resources.files("robot_brain").joinpath("data/default_schema.json").read_text("utf-8")
    return AttributeSchema.from_list(json.loads(text))


DEFAULT_SCHEMA = _default_schema()


# --- records ----------------------------------------------------------------


@dataclass(frozen=True)
class AttributeValue:
    key: str
    value: str
    source: str
    certainty: float
    updated_at: int

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValidationError("source", f"{self.source!r} not one of {', '.join(SOURCES)}")
        if not 0.0 <= self.certainty <= 1.0:
            raise DomainError(f"certainty {self.certainty!r} outside [0, 1]", field="certainty")
        if self.source == "explicit" and self.certainty != 1.0:
            raise ValidationError("certainty", "explicit attributes have certainty 1.0")

    def to_wire(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_wire(cls, obj, path: str) -> "AttributeValue":
        obj = wire.expect_object(obj, path, ("key", "value", "source", "certainty", "updated_at"))
        return cls(
            key=wire.as_str(wire.field(obj, "key", path), wire.join(path, "key"), non_empty=True),
            value=wire.as_str(wire.field(obj, "value", path), wire.join(path, "value")),
            source=wire.as_enum(wire.field(obj, "source", path), wire.join(path, "source"), SOURCES),
            certainty=wire.as_unit(wire.field(obj, "certainty", path), wire.join(path, "certainty")),
            updated_at=wire.as_int(wire.field(obj, "updated_at", path), wire.join(path, "updated_at")),
        )


@dataclass(frozen=True)
class UserRecord:
    user_id: str
    consent: bool = False
    face_template: Optional[FaceTemplate] = None
    attributes: Mapping[str, AttributeValue] = field(default_factory=dict)
    interaction_count: int = 0
    emotion_history: Tuple[HistoryEntry, ...] = ()

    def __post_init__(self):
        if not self.consent and self.face_template is not None:
            raise ValidationError("face_template", "present without consent")
        if self.interaction_count < len(self.emotion_history):
            raise ValidationError("interaction_count", "smaller than emotion history")

    def value(self, key: str) -> Optional[str]:
        attr = self.attributes.get(key)
        return None if attr is None else attr.value

    @property
    def last_emotion(self) -> Optional[str]:
        return self.emotion_history[-1][1] if self.emotion_history else None

    def to_wire(self) -> dict:
        return {
            "user_id": self.user_id,
            "consent": self.consent,
            "face_template": None if self.face_template is None else list(self.face_template),
            "attributes": {k: v.to_wire() for k, v in self.attributes.items()},
            "interaction_count": self.interaction_count,
            "emotion_history": [list(h) for h in self.emotion_history],
        }

    @classmethod
    def from_wire(cls, obj, path: str = "") -> "UserRecord":
        names = ("user_id", "consent", "face_template", "attributes",
                 "interaction_count", "emotion_history")
        obj = wire.expect_object(obj, path, names)
        p = lambda n: wire.join(path, n)  # noqa: E731
        template = wire.field(obj, "face_template", path)
        if template is not None:
            template = tuple(wire.as_float(x, f"{p('face_template')}[{i}]", -1.0, 1.0)
                             for i, x in enumerate(wire.as_list(template, p("face_template"))))
        attrs_obj = wire.expect_object(wire.field(obj, "attributes", path), p("attributes"))
        attributes = {}
        for key, raw in attrs_obj.items():
            attr = AttributeValue.from_wire(raw, f"{p('attributes')}.{key}")
            if attr.key != key:
                raise ValidationError(f"{p('attributes')}.{key}.key", "does not match its map key")
            attributes[key] = attr
        history = []
        for i, entry in enumerate(wire.as_list(wire.field(obj, "emotion_history", path),
                                               p("emotion_history"))):
            ep = f"{p('emotion_history')}[{i}]"
            entry = wire.as_list(entry, ep)
            if len(entry) != 3:
                raise ValidationError(ep, "expected [index, emotion, score]")
            history.append((wire.as_int(entry[0], f"{ep}[0]", minimum=1),
                            wire.as_enum(entry[1], f"{ep}[1]", EMOTIONS),
                            wire.as_unit(entry[2], f"{ep}[2]")))
        return cls(
            user_id=wire.as_str(wire.field(obj, "user_id", path), p("user_id"), non_empty=True),
            consent=wire.as_bool(wire.field(obj, "consent", path), p("consent")),
            face_template=template,
            attributes=attributes,
            interaction_count=wire.as_int(wire.field(obj, "interaction_count", path),
                                          p("interaction_count"), minimum=0),
            emotion_history=tuple(history),
        )


# --- operations -------------------------------------------------------------


def combine_certainty(a: float, b: float) -> float:
    """Combine two independent positive certainty factors: ``a + b - a*b``."""
    for name, x in (("a", a), ("b", b)):
        if not 0.0 <= x <= 1.0:  # also rejects NaN
            raise DomainError(f"certainty {x!r} outside [0, 1]", field=name)
    # hi + lo*(1-hi) equals a+b-ab; ordering the operands makes the float
    # result exactly commutative, with 0 an exact identity and 1 an exact absorber
    lo, hi = (a, b) if a <= b else (b, a)
    return min(1.0, hi + lo * (1.0 - hi))


def _same_value(a: str, b: str) -> bool:
    return a.strip().casefold() == b.strip().casefold()


def upsert_attribute(
    record: UserRecord,
    key: str,
    value: str,
    certainty: float,
    source: str,
    *,
    schema: AttributeSchema = DEFAULT_SCHEMA,
    now: Optional[int] = None,
) -> UserRecord:
    """Fold one observation of ``key`` into the record.

    A repeated value (case-insensitive) has its certainty reinforced with
    :func:`combine_certainty`; a conflicting value replaces the stored one only
    if its certainty is at least as high (the newer observation wins ties).
    Explicit answers are always stored with certainty 1.0.
    """
    schema.require(key)
    if source not in SOURCES:
        raise ValidationError("source", f"{source!r} not one of {', '.join(SOURCES)}")
    if not 0.0 <= certainty <= 1.0:
        raise DomainError(f"certainty {certainty!r} outside [0, 1]", field="certainty")
    if source == "explicit":
        certainty = 1.0
    stamp = now_ms() if now is None else now

    old = record.attributes.get(key)
    if old is None:
        new = AttributeValue(key, value, source, certainty, stamp)
    elif _same_value(old.value, value):
        merged_source = "explicit" if "explicit" in (old.source, source) else "implicit"
        combined = combine_certainty(old.certainty, certainty)
        new = AttributeValue(key, old.value, merged_source,
                             1.0 if merged_source == "explicit" else combined, stamp)
    elif certainty >= old.certainty:
        new = AttributeValue(key, value, source, certainty, stamp)
    else:
        return record

    return dataclasses.replace(record, attributes={**record.attributes, key: new})


def predominant_emotion(frames: Sequence[EmotionScores]) -> Tuple[str, float]:
    """Return the emotion with the highest mean score and that mean.

    Ties go to the earliest emotion in the fixed order (sadness first).
    """
    if not frames:
        raise NoDataError("no frames to aggregate")
    totals = {name: sum(f[name] for f in frames) for name in EMOTIONS}
    # max() keeps the first maximal element, which is the fixed-order tie-break
    best = max(EMOTIONS, key=totals.__getitem__)
    return best, min(1.0, totals[best] / len(frames))


def record_interaction(record: UserRecord,
                       predominant: Optional[Tuple[str, float]]) -> UserRecord:
    count = record.interaction_count + 1
    history = record.emotion_history
    if predominant is not None:
        emotion, score = predominant
        wire.as_enum(emotion, "emotion", EMOTIONS)
        history = history + ((count, emotion, float(score)),)
    return dataclasses.replace(record, interaction_count=count, emotion_history=history)


# --- store ------------------------------------------------------------------


class UserStore:
    """In-memory user database with per-user mutation locks."""

    def __init__(self, records: Iterable[UserRecord] = (),
                 schema: AttributeSchema = DEFAULT_SCHEMA):
        self.schema = schema
        self._records: Dict[str, UserRecord] = {}
        self._locks: Dict[str, threading.Lock] = {}
        self._registry = threading.Lock()
        for record in records:
            self.insert(record)

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, user_id: object) -> bool:
        return user_id in self._records

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UserStore):
            return NotImplemented
        return self.records() == other.records()

    def records(self) -> Dict[str, UserRecord]:
        with self._registry:
            return dict(self._records)

    def get(self, user_id: str) -> UserRecord:
        try:
            return self._records[user_id]
        except KeyError:
            raise NotFoundError(f"unknown user {user_id!r}") from None

    def insert(self, record: UserRecord) -> UserRecord:
        with self._registry:
            if record.user_id in self._records:
                raise StorageError(f"user {record.user_id!r} already exists")
            self._records[record.user_id] = record
            self._locks[record.user_id] = threading.Lock()
        return record

    def update(self, user_id: str, fn: Callable[[UserRecord], UserRecord]) -> UserRecord:
        """Apply ``fn`` to the current record while holding that user's lock."""
        lock = self._locks.get(user_id)
        if lock is None:
            raise NotFoundError(f"unknown user {user_id!r}")
        with lock:
            current = self._records[user_id]
            updated = fn(current)
            if updated.user_id != current.user_id:
                raise StorageError("user_id is immutable")
            self._records[user_id] = updated
            return updated

    def gallery(self) -> Dict[str, FaceTemplate]:
        return {uid: r.face_template for uid, r in self.records().items()
                if r.face_template is not None}


def save_store(store: UserStore, path: os.PathLike | str) -> None:
    """Write the store as newline-delimited JSON, one user per line.

    The file is replaced atomically so a crash never leaves a torn store.
    """
    path = Path(path)
    lines = [wire.canonical_json(r.to_wire()).decode("utf-8") + "\n"
             for _, r in sorted(store.records().items())]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.writelines(lines)
        os.replace(tmp, path)
    except OSError as exc:
        raise StorageError(f"cannot write store {path}: {exc}") from exc


def load_store(path: os.PathLike | str, schema: AttributeSchema = DEFAULT_SCHEMA) -> UserStore:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise StoreLoadError(text_line_of(Path(path), exc.start), "invalid UTF-8") from exc
    except OSError as exc:
        raise StorageError(f"cannot read store {path}: {exc}") from exc
    store = UserStore(schema=schema)
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            record = UserRecord.from_wire(json.loads(line))
        except ValueError as exc:  # JSONDecodeError and ValidationError alike
            raise StoreLoadError(lineno, str(exc)) from exc
        unknown = [k for k in record.attributes if k not in schema]
        if unknown:
            raise StoreLoadError(lineno, f"unknown attribute key {unknown[0]!r}")
        if record.user_id in store:
            raise StoreLoadError(lineno, f"duplicate user {record.user_id!r}")
        store.insert(record)
    return store


def text_line_of(path: Path, offset: int) -> int:
    return path.read_bytes()[:offset].count(b"\n") + 1
