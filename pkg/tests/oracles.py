"""Brute-force reference implementations used to cross-check the package.

These deliberately avoid the code paths they check: plain loops, math.dist,
no numpy, no max(key=...).
"""

import math

from robot_brain.adaptation import Ref
from robot_brain.vocab import EMOTIONS


def certainty_union(a, b):
    return 1.0 - (1.0 - a) * (1.0 - b)


def brute_identify(gallery, probe, threshold):
    best_id, best_dist = None, math.inf
    for uid in sorted(gallery):
        d = math.dist(gallery[uid], probe)
        if d < best_dist:
            best_id, best_dist = uid, d
    if best_id is None or best_dist > threshold:
        return None
    return best_id


def brute_predominant(frames):
    best, best_total = None, -1.0
    for emotion in EMOTIONS:
        total = 0.0
        for frame in frames:
            total += getattr(frame, emotion)
        if total > best_total:
            best, best_total = emotion, total
    return best, best_total / len(frames)


def _fact(record, dominant, key):
    if key == "dominant_emotion":
        return dominant
    if key == "interaction_count":
        return record.interaction_count
    attr = record.attributes.get(key)
    return None if attr is None else attr.value


def _clause_holds(record, dominant, clause):
    actual = _fact(record, dominant, clause.key)
    if actual is None:
        return False
    if clause.op == "equals":
        return actual == clause.value
    if clause.op == "in":
        return any(actual == v for v in clause.value)
    return actual >= clause.value


VOCAB = {
    "register": ("formal", "informal"),
    "tone": ("playful", "serious"),
    "expression": EMOTIONS + ("neutral",),
}
DEFAULTS = {"register": "formal", "tone": "serious", "expression": "neutral"}


def brute_evaluate(record, dominant, rules):
    """Scan the whole rule list once per directive field."""
    out = {}
    for field_name in ("register", "tone", "expression"):
        out[field_name] = DEFAULTS[field_name]
        for rule in rules:
            if field_name not in rule.overrides:
                continue
            if not all(_clause_holds(record, dominant, c) for c in rule.condition):
                continue
            value = rule.overrides[field_name]
            if isinstance(value, Ref):
                value = _fact(record, dominant, value.fact)
                if value not in VOCAB[field_name]:
                    continue
            out[field_name] = value
            break
    return out
