"""Rule engine turning the user model and live mood into a Directive.

Rules live in a JSON file::

    [{"rule_id": "...",
      "condition": [{"key": "age_range", "op": "in", "value": ["18-24"]}],
      "overrides": {"register": "informal", "expression": {"ref": "dominant_emotion"}}}]

A condition is a conjunction of clauses (an empty one always matches).
Rule order matters: for each Directive field the first matching rule that
overrides it wins, and untouched fields keep their defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import ConfigurationError
from .protocol import Directive
from .usermodel import DEFAULT_SCHEMA, AttributeSchema, UserRecord
from .vocab import EXPRESSIONS, REGISTERS, TONES

DERIVED_FACTS = ("dominant_emotion", "interaction_count")
OPERATORS = ("equals", "in", "count_at_least")
DIRECTIVE_FIELDS = {"register": REGISTERS, "tone": TONES, "expression": EXPRESSIONS}
DEFAULT_DIRECTIVE = Directive()


@dataclass(frozen=True)
class Ref:
    """Override value copied from a fact at evaluation time."""

    fact: str


@dataclass(frozen=True)
class Clause:
    key: str
    op: str
    value: Any

    def holds(self, facts: Mapping[str, Any]) -> bool:
        actual = facts.get(self.key)
        if actual is None:
            return False
        if self.op == "equals":
            return actual == self.value
        if self.op == "in":
            return actual in self.value
        return actual >= self.value  # count_at_least


@dataclass(frozen=True)
class Rule:
    rule_id: str
    condition: Tuple[Clause, ...]
    overrides: Mapping[str, Union[str, Ref]]

    def matches(self, facts: Mapping[str, Any]) -> bool:
        return all(clause.holds(facts) for clause in self.condition)


def facts_for(record: UserRecord, dominant: Optional[str]) -> Dict[str, Any]:
    facts: Dict[str, Any] = {key: attr.value for key, attr in record.attributes.items()}
    facts["dominant_emotion"] = dominant
    facts["interaction_count"] = record.interaction_count
    return facts


def evaluate(record: UserRecord, dominant: Optional[str], rules: Sequence[Rule]) -> Directive:
    facts = facts_for(record, dominant)
    chosen: Dict[str, str] = {}
    for rule in rules:
        if len(chosen) == len(DIRECTIVE_FIELDS):
            break
        if not rule.matches(facts):
            continue
        for name, value in rule.overrides.items():
            if name in chosen:
                continue
            if isinstance(value, Ref):
                value = facts.get(value.fact)
                # a reference that resolves outside the field vocabulary is inert
                if value not in DIRECTIVE_FIELDS[name]:
                    continue
            chosen[name] = value
    return Directive(**{**DEFAULT_DIRECTIVE.to_wire(), **chosen})


# --- loading ----------------------------------------------------------------


def _parse_rule(item: Any, index: int, schema: AttributeSchema) -> Rule:
    if not isinstance(item, dict):
        raise ConfigurationError(f"rule #{index} is not an object")
    rule_id = item.get("rule_id")
    if not isinstance(rule_id, str) or not rule_id:
        raise ConfigurationError(f"rule #{index} has no rule_id")

    def bad(msg: str) -> ConfigurationError:
        return ConfigurationError(f"rule {rule_id!r}: {msg}", field=rule_id)

    unknown = set(item) - {"rule_id", "condition", "overrides"}
    if unknown:
        raise bad(f"unknown field {sorted(unknown)[0]!r}")
    known_facts = set(schema) | set(DERIVED_FACTS)

    raw_condition = item.get("condition", [])
    if not isinstance(raw_condition, list):
        raise bad("condition must be a list of clauses")
    clauses = []
    for raw in raw_condition:
        if not isinstance(raw, dict) or set(raw) != {"key", "op", "value"}:
            raise bad("each clause needs exactly key, op and value")
        key, op, value = raw["key"], raw["op"], raw["value"]
        if key not in known_facts:
            raise bad(f"unknown attribute key {key!r}")
        if op not in OPERATORS:
            raise bad(f"unknown operator {op!r}")
        if op == "in":
            if not isinstance(value, list):
                raise bad("'in' needs a list value")
            value = tuple(value)
        elif op == "count_at_least":
            if key != "interaction_count" or isinstance(value, bool) or not isinstance(value, int):
                raise bad("'count_at_least' applies to interaction_count with an integer")
        clauses.append(Clause(key, op, value))

    raw_overrides = item.get("overrides")
    if not isinstance(raw_overrides, dict) or not raw_overrides:
        raise bad("overrides must be a non-empty object")
    overrides: Dict[str, Union[str, Ref]] = {}
    for name, value in raw_overrides.items():
        if name not in DIRECTIVE_FIELDS:
            raise bad(f"unknown directive field {name!r}")
        if isinstance(value, dict):
            if set(value) != {"ref"} or value["ref"] not in known_facts:
                raise bad(f"override {name!r} has a bad reference {value!r}")
            overrides[name] = Ref(value["ref"])
        elif value in DIRECTIVE_FIELDS[name]:
            overrides[name] = value
        else:
            raise bad(f"override {name}={value!r} outside {', '.join(DIRECTIVE_FIELDS[name])}")
    return Rule(rule_id, tuple(clauses), overrides)


def rules_from_list(items: Any, schema: AttributeSchema = DEFAULT_SCHEMA) -> List[Rule]:
    if not isinstance(items, list):
        raise ConfigurationError("rules file must hold a JSON list")
    rules = [_parse_rule(item, i, schema) for i, item in enumerate(items)]
    ids = [r.rule_id for r in rules]
    for rid in ids:
        if ids.count(rid) > 1:
            raise ConfigurationError(f"rule {rid!r} declared twice", field=rid)
    return rules


def rules_to_list(rules: Sequence[Rule]) -> list:
    out = []
    for rule in rules:
        out.append({
            "rule_id": rule.rule_id,
            "condition": [{"key": c.key, "op": c.op,
                           "value": list(c.value) if c.op == "in" else c.value}
                          for c in rule.condition],
            "overrides": {k: {"ref": v.fact} if isinstance(v, Ref) else v
                          for k, v in rule.overrides.items()},
        })
    return out


def load_rules(path: os.PathLike | str, schema: AttributeSchema = DEFAULT_SCHEMA) -> List[Rule]:
    try:
        items = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read rules {path}: {exc}") from exc
    return rules_from_list(items, schema)


def dump_rules(rules: Sequence[Rule], path: os.PathLike | str) -> None:
    Path(path).write_text(json.dumps(rules_to_list(rules), indent=2) + "\n", encoding="utf-8")


def default_rules() -> List[Rule]:
    text = resources.files("robot_brain").joinpath("data/default_rules.json").read_text("utf-8")
    return rules_from_list(json.loads(text))
