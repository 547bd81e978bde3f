"""Choosing earlier beliefs to feed back as query context."""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .beliefs import Belief, BeliefBank, SentenceKey, TemplateRegistry
from .constraints import GroundConstraint, index_by_sentence

DEFAULT_K = 3


class Policy(str, Enum):
    ON_TOPIC = "on_topic"
    RELEVANT = "relevant"
    OFF_TOPIC = "off_topic"
    NONE = "none"


@dataclass(frozen=True)
class ClashScore:
    belief: Belief
    hypothetical_answer: bool
    weight: float


@dataclass(frozen=True)
class FeedbackSelection:
    policy: Policy
    chosen: tuple[Belief, ...]
    k: int = DEFAULT_K
    n_relevant: int = 0  # chosen[:n_relevant] clash with the query; the rest is padding

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if len(self.chosen) > self.k:
            raise ValueError("selection larger than k")

    @property
    def padding(self) -> tuple[Belief, ...]:
        return self.chosen[self.n_relevant:]


def _rng(seed, query: SentenceKey | None, tag: str) -> random.Random:
    q = "" if query is None else f"{query.entity}|{query.template_id}"
    return random.Random(f"{seed}|{tag}|{q}")


def _sample(pool: Sequence[Belief], k: int, rng: random.Random) -> list[Belief]:
    if len(pool) <= k:
        return list(pool)
    return rng.sample(list(pool), k)


def select_on_topic(bank: BeliefBank, entity: str, k: int = DEFAULT_K, seed=0,
                    query: SentenceKey | None = None,
                    exclude: Iterable[SentenceKey] = ()) -> FeedbackSelection:
    """Uniform sample of the entity's beliefs, never including the query itself."""
    skip = set(exclude)
    if query is not None:
        skip.add(query)
    pool = [b for b in bank.beliefs_about(entity) if b.key not in skip]
    return FeedbackSelection(Policy.ON_TOPIC, tuple(_sample(pool, k, _rng(seed, query, "on_topic"))), k)


def select_off_topic(bank: BeliefBank, entity: str, k: int = DEFAULT_K, seed=0,
                     query: SentenceKey | None = None) -> FeedbackSelection:
    """Uniform sample of beliefs about other entities."""
    pool = [b for b in bank if b.key.entity != entity]
    return FeedbackSelection(Policy.OFF_TOPIC, tuple(_sample(pool, k, _rng(seed, query, "off_topic"))), k)


def clashes(bank: BeliefBank, query: SentenceKey,
            grounds: Iterable[GroundConstraint] | Mapping[SentenceKey, list[GroundConstraint]]
            ) -> list[ClashScore]:
    """Held beliefs that some constraint would put in conflict with either answer to ``query``.

    One hop only: a constraint clashes when, with the query answered hypothetically, it is
    applicable and violated.
    """
    index = grounds if isinstance(grounds, Mapping) else index_by_sentence(grounds)
    labels = {k: b.label for k, b in bank.beliefs.items()}
    out = []
    for answer in (True, False):
        labels[query] = answer
        for g in index.get(query, ()):
            if g.holds_under(labels) is False:
                for key in dict.fromkeys(g.keys()):
                    if key != query:
                        out.append(ClashScore(bank.beliefs[key], answer, g.weight))
    return out


def select_relevant(bank: BeliefBank, grounds, query: SentenceKey, k: int = DEFAULT_K,
                    seed=0) -> FeedbackSelection:
    """The k beliefs clashing most strongly with a yes or a no, padded with on-topic picks."""
    best: dict[SentenceKey, ClashScore] = {}
    for c in clashes(bank, query, grounds):
        have = best.get(c.belief.key)
        if have is None or c.weight > have.weight:
            best[c.belief.key] = c
    ranked = sorted(best.values(),
                    key=lambda c: (-c.weight, -c.belief.weight, c.belief.key.template_id))
    chosen = [c.belief for c in ranked[:k]]
    n_relevant = len(chosen)
    if n_relevant < k:
        pad = select_on_topic(bank, query.entity, k - n_relevant, seed, query,
                              exclude=[b.key for b in chosen])
        chosen.extend(pad.chosen)
    return FeedbackSelection(Policy.RELEVANT, tuple(chosen), k, n_relevant)


def select(policy: Policy | str, bank: BeliefBank, grounds, query: SentenceKey,
           k: int = DEFAULT_K, seed=0) -> FeedbackSelection:
    policy = Policy(policy)
    if policy is Policy.ON_TOPIC:
        return select_on_topic(bank, query.entity, k, seed, query)
    if policy is Policy.RELEVANT:
        return select_relevant(bank, grounds, query, k, seed)
    if policy is Policy.OFF_TOPIC:
        return select_off_topic(bank, query.entity, k, seed, query)
    return FeedbackSelection(Policy.NONE, (), k)


def context_text(sel: FeedbackSelection, registry: TemplateRegistry) -> str:
    return " ".join(registry.render(b.key, b.label) + "." for b in sel.chosen)


def render_context(sel: FeedbackSelection, query: SentenceKey, registry: TemplateRegistry) -> str:
    """``CONTEXT s1. s2. QUERY q?``, or just ``QUERY q?`` when nothing was selected."""
    question = f"QUERY {registry.question(query)}"
    if not sel.chosen:
        return question
    return f"CONTEXT {context_text(sel, registry)} {question}"
