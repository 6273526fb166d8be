"""Perception services behind swappable adapter interfaces.

Real deployments would plug a face library, an affect SDK and a cloud
speech-to-text service in here. The mocks in this module are deterministic
and are what the test-suite and the robot simulator use.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import wire
from .errors import (
    ConflictError,
    NoInputError,
    NotFoundError,
    ShapeError,
    TranscriptionError,
    ValidationError,
)
from .usermodel import EmotionScores, FaceTemplate
from .vocab import AGE_RANGES, GENDERS

DEFAULT_TEMPLATE_DIM = 8
DEFAULT_FACE_THRESHOLD = 0.6


def make_template(values: Iterable[float], dim: Optional[int] = None,
                  path: str = "face_template") -> FaceTemplate:
    """Validate and freeze a face template: finite components in [-1, 1]."""
    if isinstance(values, (str, bytes)) or not isinstance(values, Iterable):
        raise ValidationError(path, "expected a list of numbers")
    template = tuple(wire.as_float(v, f"{path}[{i}]", -1.0, 1.0) for i, v in enumerate(values))
    if not template:
        raise ShapeError("face template is empty", field=path)
    if dim is not None and len(template) != dim:
        raise ShapeError(f"face template has dimension {len(template)}, expected {dim}", field=path)
    return template


@dataclass(frozen=True)
class EmotionFrame:
    timestamp: int
    scores: EmotionScores
    gender: Tuple[str, float]
    age_range: Tuple[str, float]

    def to_wire(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "scores": self.scores.to_wire(),
            "gender": list(self.gender),
            "age_range": list(self.age_range),
        }

    @classmethod
    def from_wire(cls, obj, path: str = "frame") -> "EmotionFrame":
        obj = wire.expect_object(obj, path, ("timestamp", "scores", "gender", "age_range"))
        return cls(
            timestamp=wire.as_int(wire.field(obj, "timestamp", path), wire.join(path, "timestamp"),
                                  minimum=0),
            scores=EmotionScores.from_wire(wire.field(obj, "scores", path), wire.join(path, "scores")),
            gender=_estimate(wire.field(obj, "gender", path), wire.join(path, "gender"), GENDERS),
            age_range=_estimate(wire.field(obj, "age_range", path), wire.join(path, "age_range"),
                                AGE_RANGES),
        )


def _estimate(raw, path: str, vocabulary: Sequence[str]) -> Tuple[str, float]:
    raw = wire.as_list(raw, path)
    if len(raw) != 2:
        raise ValidationError(path, "expected [value, confidence]")
    return wire.as_enum(raw[0], f"{path}[0]", vocabulary), wire.as_unit(raw[1], f"{path}[1]")


# --- face identification ----------------------------------------------------


def identify(gallery: Mapping[str, FaceTemplate], probe: FaceTemplate,
             threshold: float = DEFAULT_FACE_THRESHOLD) -> Optional[str]:
    """Nearest enrolled face within ``threshold`` (Euclidean), or None.

    Equal distances resolve to the lexicographically smallest user id.
    """
    if threshold < 0 or math.isnan(threshold):
        raise ValueError(f"threshold must be >= 0, got {threshold!r}")
    if not gallery:
        return None
    ids = sorted(gallery)
    dim = len(probe)
    for uid in ids:
        if len(gallery[uid]) != dim:
            raise ShapeError(f"template of {uid!r} has dimension {len(gallery[uid])}, "
                             f"probe has {dim}")
    matrix = np.asarray([gallery[uid] for uid in ids], dtype=float)
    dists = np.sqrt(((matrix - np.asarray(probe, dtype=float)) ** 2).sum(axis=1))
    best = int(np.argmin(dists))  # first minimum, ids are sorted
    return ids[best] if dists[best] <= threshold else None


def enroll(gallery: Mapping[str, FaceTemplate], user_id: str,
           template: FaceTemplate) -> Dict[str, FaceTemplate]:
    if user_id in gallery:
        raise ConflictError(f"user {user_id!r} is already enrolled")
    for uid, existing in gallery.items():
        if len(existing) != len(template):
            raise ShapeError(f"template dimension {len(template)} does not match "
                             f"{uid!r} ({len(existing)})")
        break
    return {**gallery, user_id: tuple(template)}


# --- adapter interfaces -----------------------------------------------------


class FaceRecognizer(ABC):
    @abstractmethod
    def identify(self, gallery: Mapping[str, FaceTemplate], probe: FaceTemplate,
                 threshold: float) -> Optional[str]:
        ...


class Transcriber(ABC):
    @abstractmethod
    def transcribe(self, audio: bytes) -> str:
        """Return the UTF-8 text spoken in ``audio``."""


class EmotionDetector(ABC):
    @abstractmethod
    def detect_emotions(self, media_ref: str) -> List[EmotionFrame]:
        """Return timestamp-ordered frames for the referenced media."""


class NearestNeighborRecognizer(FaceRecognizer):
    def identify(self, gallery, probe, threshold=DEFAULT_FACE_THRESHOLD):
        return identify(gallery, probe, threshold)


class EchoTranscriber(Transcriber):
    """Treats the audio payload as the UTF-8 text it "contains"."""

    def transcribe(self, audio: bytes) -> str:
        if not audio:
            raise NoInputError("empty audio payload")
        try:
            return bytes(audio).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TranscriptionError(f"could not transcribe audio: {exc}") from exc


def parse_frames(items, path: str = "frames") -> List[EmotionFrame]:
    return [EmotionFrame.from_wire(item, f"{path}[{i}]")
            for i, item in enumerate(wire.as_list(items, path))]


class FixtureEmotionDetector(EmotionDetector):
    """Loads frames verbatim from JSON fixture files.

    ``media_ref`` is a path, resolved against ``base_dir`` when relative.
    Frames are returned sorted by timestamp (stable for equal stamps).
    """

    def __init__(self, base_dir: Optional[Path | str] = None):
        self.base_dir = Path(base_dir) if base_dir is not None else None

    def detect_emotions(self, media_ref: str) -> List[EmotionFrame]:
        path = Path(media_ref)
        if self.base_dir is not None and not path.is_absolute():
            path = self.base_dir / path
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise NotFoundError(f"emotion fixture {str(path)!r} not found") from None
        except ValueError as exc:
            raise ValidationError(str(path), f"malformed fixture: {exc}") from exc
        frames = parse_frames(raw)
        return sorted(frames, key=lambda f: f.timestamp)


def summarize_estimates(estimates: Sequence[Tuple[str, float]],
                        vocabulary: Sequence[str]) -> Tuple[str, float]:
    """Collapse per-frame (value, confidence) estimates into one observation.

    The value with the largest summed confidence wins (vocabulary order breaks
    ties); its certainty is the mean confidence of the frames that reported it.
    """
    if not estimates:
        raise ValueError("no estimates to summarize")
    totals: Dict[str, float] = {}
    counts: Dict[str, int] = {}
    for value, confidence in estimates:
        totals[value] = totals.get(value, 0.0) + confidence
        counts[value] = counts.get(value, 0) + 1
    best = max((v for v in vocabulary if v in totals), key=totals.__getitem__)
    return best, min(1.0, totals[best] / counts[best])
