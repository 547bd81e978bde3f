"""Fact/constraint files and synthetic taxonomy datasets with silver-label propagation."""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

from .beliefs import (FormatError, SentenceKey, TemplateRegistry, label_str, parse_label,
                      read_jsonl)
from .constraints import (ConstraintKind, ConstraintTemplate, GroundConstraint, backward,
                          consistency, ground_all, implication, load_constraints, mutex,
                          save_constraints)

TEMPLATES_FILE = "templates.jsonl"
CONSTRAINTS_FILE = "constraints.jsonl"
FACTS_FILE = "facts.jsonl"
DEV_FACTS_FILE = "dev_facts.jsonl"


class ContradictionError(ValueError):
    def __init__(self, key: SentenceKey, chain_true: list[str], chain_false: list[str]):
        self.key = key
        self.chain_true = chain_true
        self.chain_false = chain_false
        super().__init__(f"{key} derived both T ({' <- '.join(chain_true)}) "
                         f"and F ({' <- '.join(chain_false)})")


@dataclass
class Dataset:
    templates: TemplateRegistry
    constraints: list[ConstraintTemplate]
    facts: dict[SentenceKey, bool]
    dev_facts: dict[SentenceKey, bool] = field(default_factory=dict)

    def __post_init__(self):
        for key in list(self.facts) + list(self.dev_facts):
            if key.template_id not in self.templates:
                raise KeyError(f"fact uses unregistered template {key.template_id!r}")
        for c in self.constraints:
            for tid in c.template_ids():
                if tid not in self.templates:
                    raise KeyError(f"constraint uses unregistered template {tid!r}")

    @property
    def entities(self) -> list[str]:
        return sorted({k.entity for k in self.facts})

    @property
    def dev_entities(self) -> list[str]:
        return sorted({k.entity for k in self.dev_facts})

    @property
    def gold(self) -> dict[SentenceKey, bool]:
        return {**self.dev_facts, **self.facts}

    def grounds(self, entities: Iterable[str] | None = None) -> list[GroundConstraint]:
        return ground_all(self.constraints, self.entities if entities is None else entities,
                          self.templates)

    def positive_rate(self) -> float:
        return sum(self.facts.values()) / len(self.facts) if self.facts else 0.0

    def save(self, directory) -> dict[str, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {"templates": directory / TEMPLATES_FILE, "constraints": directory / CONSTRAINTS_FILE,
                 "facts": directory / FACTS_FILE, "dev_facts": directory / DEV_FACTS_FILE}
        self.templates.save(paths["templates"])
        save_constraints(self.constraints, paths["constraints"])
        save_facts(self.facts, paths["facts"])
        save_facts(self.dev_facts, paths["dev_facts"])
        return paths


def save_facts(facts: dict[SentenceKey, bool], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for key in sorted(facts):
            f.write(json.dumps({"entity": key.entity, "template_id": key.template_id,
                                "label": label_str(facts[key])}) + "\n")


def load_facts(path, registry: TemplateRegistry | None = None) -> dict[SentenceKey, bool]:
    facts: dict[SentenceKey, bool] = {}
    for lineno, rec in read_jsonl(path):
        try:
            key = SentenceKey(rec["entity"], rec["template_id"])
            label = parse_label(rec["label"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(path, lineno, f"malformed fact: {exc}") from None
        if registry is not None and key.template_id not in registry:
            raise FormatError(path, lineno, f"unregistered template {key.template_id!r}")
        if key in facts:
            raise FormatError(path, lineno, f"duplicate fact for {key}")
        facts[key] = label
    return facts


def load(constraints_path, facts_path, templates_path=None, dev_facts_path=None) -> Dataset:
    """Read a dataset. Without a template file, surfaces come from the id conventions."""
    if templates_path is None and Path(constraints_path).with_name(TEMPLATES_FILE).exists():
        templates_path = Path(constraints_path).with_name(TEMPLATES_FILE)
    if templates_path is not None:
        registry = TemplateRegistry.load(templates_path)
        constraints = load_constraints(constraints_path, registry)
        facts = load_facts(facts_path, registry)
        dev = load_facts(dev_facts_path, registry) if dev_facts_path else {}
    else:
        constraints = load_constraints(constraints_path)
        facts = load_facts(facts_path)
        dev = load_facts(dev_facts_path) if dev_facts_path else {}
        ids = {k.template_id for k in list(facts) + list(dev)}
        for c in constraints:
            ids.update(c.template_ids())
        registry = TemplateRegistry.from_ids(ids)
    overlap = set(facts) & set(dev)
    if overlap:
        raise ValueError(f"dev and test facts overlap, e.g. {min(overlap)}")
    return Dataset(registry, constraints, facts, dev)


def load_dir(directory) -> Dataset:
    d = Path(directory)
    dev = d / DEV_FACTS_FILE
    return load(d / CONSTRAINTS_FILE, d / FACTS_FILE, d / TEMPLATES_FILE,
                dev if dev.exists() else None)


def propagate_silver(leaf_labels: Iterable[tuple[SentenceKey, bool]],
                     grounds: Iterable[GroundConstraint]) -> list[tuple[SentenceKey, bool]]:
    """Close leaf labels under forward implications and mutex halves.

    Backward disjunctions are not used: they never force a single conclusion.
    """
    rules: dict[tuple[SentenceKey, bool], list[tuple[SentenceKey, bool]]] = {}
    for g in grounds:
        if g.kind is ConstraintKind.BACKWARD or len(g.conclusion) != 1:
            continue
        rules.setdefault(g.premise, []).append(g.conclusion[0])
    labels: dict[SentenceKey, bool] = {}
    parent: dict[SentenceKey, SentenceKey | None] = {}

    def chain(key):
        out = []
        while key is not None:
            out.append(f"{key}.{label_str(labels[key])}")
            key = parent[key]
        return out

    frontier = []
    for key, label in leaf_labels:
        if key in labels and labels[key] != label:
            raise ContradictionError(key, [f"{key}.T (leaf)"], [f"{key}.F (leaf)"])
        labels[key] = label
        parent[key] = None
        frontier.append(key)
    while frontier:
        key = frontier.pop()
        for concl, want in rules.get((key, labels[key]), ()):
            have = labels.get(concl)
            if have is None:
                labels[concl] = want
                parent[concl] = key
                frontier.append(concl)
            elif have != want:
                mine = [f"{concl}.{label_str(want)}"] + chain(key)
                theirs = chain(concl)
                t, f = (mine, theirs) if want else (theirs, mine)
                raise ContradictionError(concl, t, f)
    return sorted(labels.items())


@dataclass(frozen=True)
class GeneratorConfig:
    n_concepts: int = 12
    n_entities: int = 20
    n_dev_entities: int = 7
    properties_per_concept: int = 6
    shared_property_rate: float = 0.2  # shared properties give multi-way backward rules
    n_roots: int = 2
    max_children: int = 3
    mutex_siblings: bool = True
    forward_weight: tuple[float, float] = (0.5, 1.0)
    backward_weight: tuple[float, float] = (0.01, 0.2)
    seed: int = 0

    def __post_init__(self):
        for name in ("n_concepts", "n_entities", "properties_per_concept", "n_roots", "max_children"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_dev_entities < 0:
            raise ValueError("n_dev_entities must be >= 0")
        if not 0.0 <= self.shared_property_rate <= 1.0:
            raise ValueError("shared_property_rate must be in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def _concept(i: int) -> str:
    return f"isa.concept{i:02d}"


def _feature(i: int) -> str:
    return f"has.feature{i:02d}"


def generate(cfg: GeneratorConfig = GeneratorConfig()) -> Dataset:
    rng = random.Random(cfg.seed)
    n_roots = min(cfg.n_roots, cfg.n_concepts)
    parent: dict[int, int | None] = {i: None for i in range(n_roots)}
    depth = {i: 0 for i in range(n_roots)}
    capacity = {i: rng.randint(min(2, cfg.max_children), cfg.max_children) for i in range(n_roots)}
    children: dict[int, list[int]] = {i: [] for i in range(cfg.n_concepts)}
    for c in range(n_roots, cfg.n_concepts):
        # breadth-first fill keeps the taxonomy shallow and sibling groups large
        open_nodes = [p for p in parent if len(children[p]) < capacity[p]]
        shallowest = min(depth[p] for p in open_nodes)
        p = rng.choice([q for q in open_nodes if depth[q] == shallowest])
        parent[c] = p
        depth[c] = depth[p] + 1
        capacity[c] = rng.randint(min(2, cfg.max_children), cfg.max_children)
        children[p].append(c)

    def ancestors(c):
        out = []
        while parent[c] is not None:
            c = parent[c]
            out.append(c)
        return out

    props: dict[int, list[int]] = {}
    n_used = 0
    for c in range(cfg.n_concepts):  # parents precede children
        inherited = {p for a in ancestors(c) for p in props[a]}
        mine: list[int] = []
        for _ in range(cfg.properties_per_concept):
            shareable = [p for p in range(n_used) if p not in inherited and p not in mine]
            if shareable and rng.random() < cfg.shared_property_rate:
                mine.append(rng.choice(shareable))
            else:
                mine.append(n_used)
                n_used += 1
        props[c] = sorted(mine)

    def fwd_w():
        return round(rng.uniform(*cfg.forward_weight), 4)

    constraints: list[ConstraintTemplate] = []
    for c in range(cfg.n_concepts):
        if parent[c] is not None:
            constraints.append(implication(_concept(c), _concept(parent[c]), fwd_w()))
        for p in props[c]:
            constraints.append(implication(_concept(c), _feature(p), fwd_w()))
    if cfg.mutex_siblings:
        groups = [[c for c in parent if parent[c] is None]] + [children[c] for c in range(cfg.n_concepts)]
        for group in groups:
            for i, a in enumerate(group):
                for b in group[i + 1:]:
                    constraints.extend(mutex(_concept(a), _concept(b), fwd_w()))
    used = sorted({p for ps in props.values() for p in ps})
    for p in used:
        carriers = [_concept(c) for c in range(cfg.n_concepts) if p in props[c]]
        constraints.append(backward(_feature(p), carriers,
                                    round(rng.uniform(*cfg.backward_weight), 4)))

    template_ids = [_concept(c) for c in range(cfg.n_concepts)] + [_feature(p) for p in used]
    registry = TemplateRegistry.from_ids(template_ids)
    leaves = [c for c in range(cfg.n_concepts) if not children[c]]

    def label_entities(names):
        facts = {}
        for name in names:
            leaf = rng.choice(leaves)
            grounds = ground_all(constraints, [name], registry)
            silver = dict(propagate_silver([(SentenceKey(name, _concept(leaf)), True)], grounds))
            for tid in template_ids:
                key = SentenceKey(name, tid)
                facts[key] = silver.get(key, False)
        return facts

    facts = label_entities([f"ent{i:02d}" for i in range(1, cfg.n_entities + 1)])
    dev = label_entities([f"dev{i:02d}" for i in range(1, cfg.n_dev_entities + 1)])
    data = Dataset(registry, constraints, facts, dev)
    report = consistency(data.gold, data.grounds(data.entities + data.dev_entities))
    if report.violated:
        raise ValueError("generated gold labels violate their own constraints")
    return data
