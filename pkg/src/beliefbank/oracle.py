"""The fixed question-answering model behind one interface.

``SyntheticOracle`` is a noisy, context-sensitive stand-in for a pretrained QA model, and
``RemoteOracle`` talks to a real service over HTTP.
"""

from __future__ import annotations

import hashlib
import logging
import random
import time
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, Sequence

import requests

from .beliefs import SentenceKey, TemplateRegistry
from .constraints import ConstraintKind, GroundConstraint, index_by_sentence

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OracleAnswer:
    label: bool
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


class Oracle(Protocol):
    def query(self, q: SentenceKey, context: str = "") -> OracleAnswer: ...


class OracleUnavailable(RuntimeError):
    """The remote oracle kept failing after all retries."""


def split_context(text: str) -> list[str]:
    """Context sentences from either bare context text or a full CONTEXT/QUERY prompt."""
    text = text.strip()
    if " QUERY " in f" {text} ":
        text = f" {text}".split(" QUERY ", 1)[0]
    text = text.strip()
    if text.startswith("CONTEXT"):
        text = text[len("CONTEXT"):]
    return [s.strip() for s in text.split(".") if s.strip()]


def parse_context(text: str, sentence_index: Mapping[str, tuple[SentenceKey, bool]]
                  ) -> list[tuple[SentenceKey, bool]]:
    """Map context sentences back to (key, label); unrecognised sentences are dropped."""
    return [sentence_index[s] for s in split_context(text) if s in sentence_index]


def context_vote(q: SentenceKey, context_beliefs: Iterable[tuple[SentenceKey, bool]],
                 grounds: Iterable[GroundConstraint] | Mapping[SentenceKey, list[GroundConstraint]]
                 ) -> bool | None:
    """Weight-majority label that the context pushes onto ``q`` through single constraints.

    Votes come from modus ponens (premise held, ``q`` is the conclusion), modus tollens
    (conclusion denied, ``q`` is the premise), and, for forward implications only, the
    associative reading that a denied premise argues against its conclusion. Multi-way
    disjunctions cast no vote. Ties and the absence of votes give None.
    """
    index = grounds if isinstance(grounds, Mapping) else index_by_sentence(grounds)
    tally = {True: 0.0, False: 0.0}
    for key, label in context_beliefs:
        if key == q:
            continue
        for g in index.get(key, ()):
            if len(g.conclusion) != 1:
                continue
            (pkey, plabel), (ckey, clabel) = g.premise, g.conclusion[0]
            if pkey == key and ckey == q:
                if label == plabel:
                    tally[clabel] += g.weight
                elif g.kind is ConstraintKind.FORWARD:
                    tally[not clabel] += g.weight
            elif ckey == key and pkey == q and label != clabel:
                tally[not plabel] += g.weight
    if tally[True] == tally[False]:
        return None
    return tally[True] > tally[False]


def solve_tnr(tpr: float, precision: float, positive_rate: float) -> float:
    """True-negative rate giving the target precision at this positive rate."""
    if not 0 < positive_rate < 1:
        return 1.0
    false_pos = positive_rate * tpr * (1.0 / precision - 1.0) / (1.0 - positive_rate)
    return min(1.0, max(0.0, 1.0 - false_pos))


def _unit(*parts) -> float:
    digest = hashlib.blake2b("|".join(map(str, parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2.0 ** 64


def _rng(*parts) -> random.Random:
    digest = hashlib.blake2b("|".join(map(str, parts)).encode(), digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "big"))


@dataclass(frozen=True)
class SyntheticOracleConfig:
    tpr: float = 0.98
    tnr: float | None = None  # None: solved from target_precision and the data's positive rate
    target_precision: float = 0.54
    p_follow: float = 0.8
    correct_confidence: tuple[float, float] = (5.0, 2.0)  # Beta shape on [0.5, 1]
    wrong_confidence: tuple[float, float] = (2.0, 3.0)
    seed: int = 0

    def __post_init__(self):
        for name in ("tpr", "target_precision", "p_follow"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.tnr is not None and not 0.0 <= self.tnr <= 1.0:
            raise ValueError("tnr must be in [0, 1]")
        if min(self.correct_confidence + self.wrong_confidence) <= 0:
            raise ValueError("Beta shape parameters must be positive")


class SyntheticOracle:
    """Answers from gold labels through a fixed noise channel, swayed by context.

    Without context the answer to ``q`` depends only on (seed, q). With context, a
    constraint-derived vote replaces the base answer with probability ``p_follow``,
    whether the vote is right or wrong.
    """

    def __init__(self, gold: Mapping[SentenceKey, bool], registry: TemplateRegistry,
                 grounds: Iterable[GroundConstraint], config: SyntheticOracleConfig = SyntheticOracleConfig()):
        self.gold = dict(gold)
        self.registry = registry
        self.grounds_by_key = index_by_sentence(grounds)
        if config.tnr is None:
            pos = sum(self.gold.values()) / len(self.gold) if self.gold else 0.5
            config = SyntheticOracleConfig(config.tpr, solve_tnr(config.tpr, config.target_precision, pos),
                                           config.target_precision, config.p_follow,
                                           config.correct_confidence, config.wrong_confidence, config.seed)
        self.config = config
        self._sentences: dict[str, dict[str, tuple[SentenceKey, bool]]] = {}

    def _confidence(self, q: SentenceKey, label: bool, tag: str) -> float:
        a, b = self.config.correct_confidence if label == self.gold[q] else self.config.wrong_confidence
        return 0.5 + 0.5 * _rng(self.config.seed, tag, q.entity, q.template_id).betavariate(a, b)

    def base_answer(self, q: SentenceKey) -> OracleAnswer:
        if q not in self.gold:
            raise KeyError(f"no gold label for {q}")
        cfg = self.config
        u = _unit(cfg.seed, "base", q.entity, q.template_id)
        label = (u < cfg.tpr) if self.gold[q] else not (u < cfg.tnr)
        return OracleAnswer(label, self._confidence(q, label, "conf"))

    def sentence_index(self, entity: str) -> dict[str, tuple[SentenceKey, bool]]:
        if entity not in self._sentences:
            self._sentences[entity] = self.registry.sentence_index([entity])
        return self._sentences[entity]

    def query(self, q: SentenceKey, context: str = "") -> OracleAnswer:
        base = self.base_answer(q)
        if not context.strip() or self.config.p_follow == 0.0:
            return base
        beliefs = parse_context(context, self.sentence_index(q.entity))
        vote = context_vote(q, beliefs, self.grounds_by_key)
        if vote is None or vote == base.label:
            return base
        if _unit(self.config.seed, "follow", q.entity, q.template_id) >= self.config.p_follow:
            return base
        return OracleAnswer(vote, self._confidence(q, vote, "context-conf"))


class RemoteOracle:
    """HTTP client for a yes/no QA service.

    POSTs ``{"question_text", "context_text"}`` and expects ``{"answer": "yes"|"no",
    "confidence": float}`` with a 2xx status. Failures are retried with exponential
    backoff; after ``max_retries`` retries :class:`OracleUnavailable` is raised.
    """

    def __init__(self, url: str, registry: TemplateRegistry, timeout: float = 10.0,
                 max_retries: int = 3, backoff: float = 0.5, session: requests.Session | None = None,
                 sleep=time.sleep):
        self.url = url
        self.registry = registry
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff
        self.session = session or requests.Session()
        self.sleep = sleep
        self.attempts = 0

    def query(self, q: SentenceKey, context: str = "") -> OracleAnswer:
        sentences = split_context(context)
        payload = {"question_text": self.registry.question(q),
                   "context_text": " ".join(s + "." for s in sentences)}
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            self.attempts += 1
            try:
                resp = self.session.post(self.url, json=payload, timeout=self.timeout)
                if not 200 <= resp.status_code < 300:
                    raise OracleUnavailable(f"HTTP {resp.status_code}")
                return _parse_answer(resp.json())
            except (requests.RequestException, ValueError, OracleUnavailable) as exc:
                last_error = exc
                log.warning("oracle attempt %d for %s failed: %s", attempt + 1, q, exc)
        raise OracleUnavailable(f"{self.url}: gave up after {self.max_retries} retries: {last_error}")


def _parse_answer(body) -> OracleAnswer:
    if not isinstance(body, dict):
        raise ValueError("response body must be a JSON object")
    answer = str(body.get("answer", "")).strip().lower()
    if answer not in ("yes", "no"):
        raise ValueError(f"bad answer {body.get('answer')!r}")
    return OracleAnswer(answer == "yes", float(body["confidence"]))


def answer_stats(oracle: SyntheticOracle, keys: Sequence[SentenceKey]) -> dict[str, float]:
    """Recall and precision of the context-free answers against gold."""
    tp = fp = fn = 0
    for k in keys:
        a = oracle.base_answer(k).label
        g = oracle.gold[k]
        tp += a and g
        fp += a and not g
        fn += g and not a
    return {"recall": tp / (tp + fn) if tp + fn else 1.0,
            "precision": tp / (tp + fp) if tp + fp else 1.0}
