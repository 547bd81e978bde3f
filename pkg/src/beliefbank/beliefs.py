"""Sentence keys, templates, beliefs and the BeliefBank store."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

_SLOT = re.compile(r"\bX\b")


class FormatError(ValueError):
    """A data file could not be parsed."""

    def __init__(self, path, lineno: int, message: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class Provenance(str, Enum):
    MODEL_RAW = "model_raw"
    SOLVER_FLIPPED = "solver_flipped"
    HUMAN = "human"


@dataclass(frozen=True, order=True)
class SentenceKey:
    entity: str
    template_id: str

    def __post_init__(self):
        if not self.entity:
            raise ValueError("entity must be non-empty")
        if not self.template_id:
            raise ValueError("template_id must be non-empty")

    def __str__(self):
        return f"{self.entity} {self.template_id}"


def label_str(label: bool) -> str:
    return "T" if label else "F"


def parse_label(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().upper()
    if t in ("T", "TRUE", "YES"):
        return True
    if t in ("F", "FALSE", "NO"):
        return False
    raise ValueError(f"bad label {text!r}")


def with_article(entity: str) -> str:
    return ("an " if entity[:1].lower() in "aeiou" else "a ") + entity


@dataclass(frozen=True)
class SentenceTemplate:
    template_id: str
    positive_surface: str
    negative_surface: str

    def __post_init__(self):
        for surface in (self.positive_surface, self.negative_surface):
            if len(_SLOT.findall(surface)) != 1:
                raise ValueError(
                    f"template {self.template_id!r}: surface {surface!r} needs exactly one X slot"
                )

    def render(self, entity: str, label: bool = True) -> str:
        surface = self.positive_surface if label else self.negative_surface
        return _SLOT.sub(with_article(entity), surface)


def default_template(template_id: str) -> SentenceTemplate:
    """Build surfaces for the ``isa.<concept>`` / ``has.<property>`` id conventions."""
    relation, _, obj = template_id.partition(".")
    obj = obj.replace("_", " ")
    if relation == "isa":
        return SentenceTemplate(template_id, f"X is {with_article(obj)}", f"X is not {with_article(obj)}")
    if relation == "has":
        return SentenceTemplate(template_id, f"X has {obj}", f"X does not have {obj}")
    if relation == "can":
        return SentenceTemplate(template_id, f"X can {obj}", f"X cannot {obj}")
    if relation == "madeof":
        return SentenceTemplate(template_id, f"X is made of {obj}", f"X is not made of {obj}")
    return SentenceTemplate(template_id, f"X {relation} {obj}", f"X not {relation} {obj}")


class TemplateRegistry:
    """Maps template ids to their positive and negative surfaces."""

    def __init__(self, templates: Iterable[SentenceTemplate] = ()):
        self._templates: dict[str, SentenceTemplate] = {}
        for t in templates:
            self.add(t)

    def add(self, template: SentenceTemplate) -> None:
        if template.template_id in self._templates:
            raise ValueError(f"duplicate template {template.template_id!r}")
        self._templates[template.template_id] = template

    @classmethod
    def from_ids(cls, template_ids: Iterable[str]) -> "TemplateRegistry":
        return cls(default_template(t) for t in sorted(set(template_ids)))

    def __contains__(self, template_id) -> bool:
        return template_id in self._templates

    def __getitem__(self, template_id: str) -> SentenceTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise KeyError(f"unknown template_id {template_id!r}") from None

    def __iter__(self) -> Iterator[SentenceTemplate]:
        return iter(sorted(self._templates.values(), key=lambda t: t.template_id))

    def __len__(self) -> int:
        return len(self._templates)

    def render(self, key: SentenceKey, label: bool = True) -> str:
        return self[key.template_id].render(key.entity, label)

    def question(self, key: SentenceKey) -> str:
        return self.render(key, True) + "?"

    def sentence_index(self, entities: Iterable[str]) -> dict[str, tuple[SentenceKey, bool]]:
        """Rendered sentence -> (key, label) for every template and entity."""
        index = {}
        for entity in entities:
            for t in self:
                key = SentenceKey(entity, t.template_id)
                for label in (True, False):
                    index[t.render(entity, label)] = (key, label)
        return index

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for t in self:
                f.write(json.dumps({"template_id": t.template_id,
                                    "positive": t.positive_surface,
                                    "negative": t.negative_surface}) + "\n")

    @classmethod
    def load(cls, path) -> "TemplateRegistry":
        reg = cls()
        for lineno, rec in read_jsonl(path):
            try:
                reg.add(SentenceTemplate(rec["template_id"], rec["positive"], rec["negative"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(path, lineno, str(exc)) from None
        return reg


@dataclass(frozen=True)
class Belief:
    key: SentenceKey
    label: bool
    weight: float
    provenance: Provenance = Provenance.MODEL_RAW
    batch_index: int = 0

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"belief weight {self.weight} outside [0, 1]")
        if self.batch_index < 0:
            raise ValueError("batch_index must be non-negative")
        if self.provenance is Provenance.HUMAN and self.weight != 1.0:
            raise ValueError("human beliefs must have weight 1.0")

    def to_record(self) -> dict:
        return {"entity": self.key.entity, "template_id": self.key.template_id,
                "label": label_str(self.label), "weight": self.weight,
                "provenance": self.provenance.value, "batch_index": self.batch_index}

    @classmethod
    def from_record(cls, rec: dict) -> "Belief":
        return cls(SentenceKey(rec["entity"], rec["template_id"]), parse_label(rec["label"]),
                   float(rec["weight"]), Provenance(rec["provenance"]), int(rec["batch_index"]))


@dataclass(frozen=True)
class Revision:
    """One upsert. ``old_label`` is None for a fresh insert."""

    belief: Belief
    old_label: bool | None
    cause: str

    @property
    def is_flip(self) -> bool:
        return self.old_label is not None and self.old_label != self.belief.label


@dataclass
class BeliefBank:
    registry: TemplateRegistry | None = None
    beliefs: dict[SentenceKey, Belief] = field(default_factory=dict)
    log: list[Revision] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.beliefs)

    def __contains__(self, key) -> bool:
        return key in self.beliefs

    def __iter__(self) -> Iterator[Belief]:
        return iter(self.beliefs[k] for k in sorted(self.beliefs))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BeliefBank):
            return NotImplemented
        return self.beliefs == other.beliefs and self.log == other.log

    def get(self, key: SentenceKey) -> Belief | None:
        return self.beliefs.get(key)

    def label_of(self, key: SentenceKey) -> bool | None:
        b = self.beliefs.get(key)
        return None if b is None else b.label

    def upsert(self, belief: Belief, cause: str = "answer") -> "BeliefBank":
        if not 0.0 <= belief.weight <= 1.0:
            raise ValueError(f"belief weight {belief.weight} outside [0, 1]")
        if self.registry is not None and belief.key.template_id not in self.registry:
            raise KeyError(f"unknown template_id {belief.key.template_id!r}")
        old = self.beliefs.get(belief.key)
        self.beliefs[belief.key] = belief
        self.log.append(Revision(belief, None if old is None else old.label, cause))
        return self

    def flips(self) -> list[Revision]:
        return [r for r in self.log if r.is_flip]

    def beliefs_about(self, entity: str) -> list[Belief]:
        return sorted((b for b in self.beliefs.values() if b.key.entity == entity),
                      key=lambda b: b.key.template_id)

    def entities(self) -> list[str]:
        return sorted({k.entity for k in self.beliefs})

    def snapshot(self) -> "BeliefBank":
        """Independent copy; beliefs are immutable so a shallow copy suffices."""
        return BeliefBank(self.registry, dict(self.beliefs), list(self.log))

    @classmethod
    def replay(cls, log: Iterable[Revision], registry: TemplateRegistry | None = None) -> "BeliefBank":
        bank = cls(registry)
        for rev in log:
            bank.upsert(rev.belief, rev.cause)
        return bank

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps({"format": "beliefbank", "version": 1,
                                "beliefs": len(self.beliefs), "revisions": len(self.log)}) + "\n")
            for b in self:
                f.write(json.dumps({"kind": "belief", **b.to_record()}) + "\n")
            for rev in self.log:
                f.write(json.dumps({"kind": "revision", **rev.belief.to_record(),
                                    "old_label": None if rev.old_label is None else label_str(rev.old_label),
                                    "cause": rev.cause}) + "\n")

    @classmethod
    def load(cls, path, registry: TemplateRegistry | None = None) -> "BeliefBank":
        bank = cls(registry)
        header = None
        lineno = 0
        for lineno, rec in read_jsonl(path):
            try:
                if header is None:
                    if rec.get("format") != "beliefbank":
                        raise ValueError("missing beliefbank header")
                    header = rec
                    continue
                kind = rec.get("kind")
                belief = Belief.from_record(rec)
                if registry is not None and belief.key.template_id not in registry:
                    raise ValueError(f"unknown template_id {belief.key.template_id!r}")
                if kind == "belief":
                    if belief.key in bank.beliefs:
                        raise ValueError(f"duplicate belief for {belief.key}")
                    bank.beliefs[belief.key] = belief
                elif kind == "revision":
                    old = rec.get("old_label")
                    bank.log.append(Revision(belief, None if old is None else parse_label(old),
                                             str(rec["cause"])))
                else:
                    raise ValueError(f"unknown record kind {kind!r}")
            except (KeyError, TypeError, ValueError) as exc:
                raise FormatError(path, lineno, str(exc).strip("'\"")) from None
        if header is None:
            raise FormatError(path, lineno, "empty file")
        if len(bank.beliefs) != header["beliefs"] or len(bank.log) != header["revisions"]:
            raise FormatError(path, lineno, "truncated file: record counts do not match header")
        return bank


def read_jsonl(path) -> Iterator[tuple[int, dict]]:
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(path, lineno, f"malformed record: {exc.msg}") from None
        if not isinstance(rec, dict):
            raise FormatError(path, lineno, "record must be an object")
        yield lineno, rec
