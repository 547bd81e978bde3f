"""Constraint templates, per-entity grounding and the consistency metric."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .beliefs import (BeliefBank, FormatError, SentenceKey, TemplateRegistry, label_str,
                      parse_label, read_jsonl)


class ConstraintKind(str, Enum):
    FORWARD = "forward_implication"
    MUTEX = "mutex_half"
    BACKWARD = "backward_disjunction"


Literal = tuple[str, bool]


@dataclass(frozen=True)
class ConstraintTemplate:
    """``premise -> OR(conclusion)`` over templates sharing the entity slot X."""

    premise: Literal
    conclusion: tuple[Literal, ...]
    weight: float
    kind: ConstraintKind

    def __post_init__(self):
        object.__setattr__(self, "conclusion", tuple(tuple(c) for c in self.conclusion))
        object.__setattr__(self, "premise", tuple(self.premise))
        object.__setattr__(self, "kind", ConstraintKind(self.kind))
        if not self.weight > 0:
            raise ValueError(f"constraint weight must be positive, got {self.weight}")
        if not self.conclusion:
            raise ValueError("constraint needs at least one conclusion disjunct")
        if self.kind is not ConstraintKind.BACKWARD and len(self.conclusion) != 1:
            raise ValueError(f"{self.kind.value} takes exactly one conclusion")

    def template_ids(self) -> list[str]:
        return [self.premise[0]] + [c[0] for c in self.conclusion]

    def with_weight(self, weight: float) -> "ConstraintTemplate":
        return ConstraintTemplate(self.premise, self.conclusion, weight, self.kind)

    def to_record(self) -> dict:
        return {"premise_template": self.premise[0], "premise_label": label_str(self.premise[1]),
                "conclusion": [[t, label_str(l)] for t, l in self.conclusion],
                "weight": self.weight, "kind": self.kind.value}

    @classmethod
    def from_record(cls, rec: dict) -> "ConstraintTemplate":
        return cls((rec["premise_template"], parse_label(rec["premise_label"])),
                   tuple((t, parse_label(l)) for t, l in rec["conclusion"]),
                   float(rec["weight"]), ConstraintKind(rec["kind"]))


def implication(premise: str, conclusion: str, weight: float, conclusion_label: bool = True,
                premise_label: bool = True) -> ConstraintTemplate:
    return ConstraintTemplate((premise, premise_label), ((conclusion, conclusion_label),),
                              weight, ConstraintKind.FORWARD)


def mutex(a: str, b: str, weight: float) -> list[ConstraintTemplate]:
    """Mutual exclusivity as two rules, one per direction."""
    return [ConstraintTemplate((a, True), ((b, False),), weight, ConstraintKind.MUTEX),
            ConstraintTemplate((b, True), ((a, False),), weight, ConstraintKind.MUTEX)]


def backward(premise: str, disjuncts: Sequence[str], weight: float) -> ConstraintTemplate:
    return ConstraintTemplate((premise, True), tuple((d, True) for d in disjuncts),
                              weight, ConstraintKind.BACKWARD)


@dataclass(frozen=True)
class GroundConstraint:
    premise: tuple[SentenceKey, bool]
    conclusion: tuple[tuple[SentenceKey, bool], ...]
    weight: float
    kind: ConstraintKind

    @property
    def entity(self) -> str:
        return self.premise[0].entity

    def keys(self) -> list[SentenceKey]:
        return [self.premise[0]] + [k for k, _ in self.conclusion]

    def holds_under(self, labels: Mapping[SentenceKey, bool]) -> bool | None:
        """True/False when every sentence has a label and the premise holds; None if not applicable."""
        pkey, plabel = self.premise
        if labels.get(pkey) != plabel:
            return None
        held = [labels.get(k) for k, _ in self.conclusion]
        if any(h is None for h in held):
            return None
        return any(h == want for h, (_, want) in zip(held, self.conclusion))


def ground(templates: Iterable[ConstraintTemplate], entity: str,
           registry: TemplateRegistry | None = None) -> list[GroundConstraint]:
    out = []
    for t in templates:
        if registry is not None:
            for tid in t.template_ids():
                if tid not in registry:
                    raise KeyError(f"unknown template_id {tid!r}")
        out.append(GroundConstraint((SentenceKey(entity, t.premise[0]), t.premise[1]),
                                    tuple((SentenceKey(entity, c), l) for c, l in t.conclusion),
                                    t.weight, t.kind))
    return out


def ground_all(templates: Sequence[ConstraintTemplate], entities: Iterable[str],
               registry: TemplateRegistry | None = None) -> list[GroundConstraint]:
    return [g for e in sorted(set(entities)) for g in ground(templates, e, registry)]


def index_by_sentence(grounds: Iterable[GroundConstraint]) -> dict[SentenceKey, list[GroundConstraint]]:
    index: dict[SentenceKey, list[GroundConstraint]] = defaultdict(list)
    for g in grounds:
        for k in dict.fromkeys(g.keys()):
            index[k].append(g)
    return dict(index)


@dataclass(frozen=True)
class ConsistencyReport:
    applicable: int
    violated: int

    @property
    def tau_exact(self) -> Fraction:
        return Fraction(self.violated, self.applicable) if self.applicable else Fraction(0)

    @property
    def tau(self) -> float:
        return float(self.tau_exact)

    @property
    def consistency(self) -> float:
        return 1.0 - self.tau


FORWARD_AND_MUTEX = frozenset({ConstraintKind.FORWARD, ConstraintKind.MUTEX})


def consistency(bank: BeliefBank | Mapping[SentenceKey, bool], grounds: Iterable[GroundConstraint],
                kinds: Iterable[ConstraintKind] | None = None) -> ConsistencyReport:
    """Count applicable and violated constraints.

    A constraint is applicable when its premise is believed with the required label and
    every conclusion sentence is believed (either way). It is violated when applicable and
    no conclusion disjunct holds. Weights play no part.
    """
    labels = _labels(bank)
    kinds = None if kinds is None else frozenset(ConstraintKind(k) for k in kinds)
    applicable = violated = 0
    for g in grounds:
        if kinds is not None and g.kind not in kinds:
            continue
        holds = g.holds_under(labels)
        if holds is None:
            continue
        applicable += 1
        violated += not holds
    return ConsistencyReport(applicable, violated)


def violated_constraints(bank, grounds: Iterable[GroundConstraint]) -> list[GroundConstraint]:
    labels = _labels(bank)
    return [g for g in grounds if g.holds_under(labels) is False]


def _labels(bank) -> Mapping[SentenceKey, bool]:
    if isinstance(bank, BeliefBank):
        return {k: b.label for k, b in bank.beliefs.items()}
    return bank


def save_constraints(templates: Iterable[ConstraintTemplate], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for t in templates:
            f.write(json.dumps(t.to_record()) + "\n")


def load_constraints(path, registry: TemplateRegistry | None = None) -> list[ConstraintTemplate]:
    out = []
    for lineno, rec in read_jsonl(path):
        try:
            t = ConstraintTemplate.from_record(rec)
            if registry is not None:
                missing = [tid for tid in t.template_ids() if tid not in registry]
                if missing:
                    raise ValueError(f"unregistered template {missing[0]!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(path, lineno, str(exc).strip("'\"")) from None
        out.append(t)
    return out
