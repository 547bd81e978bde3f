"""Batched experiments, weight calibration, human correction and reports."""

from __future__ import annotations

import csv
import io
import itertools
import logging
import random
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence, TextIO

from .beliefs import Belief, BeliefBank, Provenance, SentenceKey, label_str, parse_label
from .constraints import (FORWARD_AND_MUTEX, ConstraintKind, ConstraintTemplate, GroundConstraint,
                          consistency, ground_all, index_by_sentence, violated_constraints)
from .datagen import Dataset
from .feedback import DEFAULT_K, Policy, render_context, select, select_relevant
from .maxsat import Assignment, SolverConfig, UnsatisfiableHardClauses, apply, encode, solve, solve_local
from .oracle import Oracle, OracleUnavailable

log = logging.getLogger(__name__)


class Configuration(str, Enum):
    RAW = "raw"
    CONSTRAINTS = "constraints"
    FEEDBACK_ON_TOPIC = "feedback_on_topic"
    FEEDBACK_RELEVANT = "feedback_relevant"
    FEEDBACK_OFF_TOPIC = "feedback_off_topic"
    FEEDBACK_RELEVANT_PLUS_CONSTRAINTS = "feedback_relevant_plus_constraints"
    OMNISCIENT = "omniscient"

    @property
    def policy(self) -> Policy:
        return {
            Configuration.FEEDBACK_ON_TOPIC: Policy.ON_TOPIC,
            Configuration.FEEDBACK_RELEVANT: Policy.RELEVANT,
            Configuration.FEEDBACK_OFF_TOPIC: Policy.OFF_TOPIC,
            Configuration.FEEDBACK_RELEVANT_PLUS_CONSTRAINTS: Policy.RELEVANT,
            Configuration.OMNISCIENT: Policy.RELEVANT,
        }.get(self, Policy.NONE)

    @property
    def uses_solver(self) -> bool:
        return self in (Configuration.CONSTRAINTS, Configuration.FEEDBACK_RELEVANT_PLUS_CONSTRAINTS)


@dataclass(frozen=True)
class ExperimentConfig:
    configuration: Configuration = Configuration.RAW
    n_batches: int = 10
    shuffle_seed: int = 0
    feedback_seed: int = 0
    k: int = DEFAULT_K
    solver: SolverConfig = SolverConfig()
    w_forward: float | None = None  # overrides forward and mutex weights when set
    w_backward: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "configuration", Configuration(self.configuration))
        if self.n_batches < 1:
            raise ValueError("n_batches must be >= 1")


@dataclass(frozen=True)
class BatchReport:
    config: str
    batch_index: int
    f1_true: float
    consistency: float
    consistency_fwd_mutex: float
    n_flips: int
    n_beliefs: int


class ExperimentAborted(RuntimeError):
    def __init__(self, message: str, reports: list[BatchReport]):
        self.reports = reports
        super().__init__(message)


def reweight(constraints: Iterable[ConstraintTemplate], w_forward: float | None,
             w_backward: float | None) -> list[ConstraintTemplate]:
    out = []
    for c in constraints:
        if c.kind is ConstraintKind.BACKWARD:
            out.append(c if w_backward is None else c.with_weight(w_backward))
        else:
            out.append(c if w_forward is None else c.with_weight(w_forward))
    return out


def f1_true(labels: Mapping[SentenceKey, bool], gold: Mapping[SentenceKey, bool]) -> float:
    """F1 on the True class over the keys present in ``labels``."""
    tp = fp = fn = 0
    for key, label in labels.items():
        g = gold[key]
        tp += label and g
        fp += label and not g
        fn += g and not label
    if tp + fp + fn == 0:
        return 1.0
    return 2 * tp / (2 * tp + fp + fn)


def evaluate(name: str, batch_index: int, bank: BeliefBank, gold: Mapping[SentenceKey, bool],
             grounds: Sequence[GroundConstraint]) -> BatchReport:
    labels = {k: b.label for k, b in bank.beliefs.items()}
    flips = sum(b.provenance is Provenance.SOLVER_FLIPPED for b in bank.beliefs.values())
    return BatchReport(name, batch_index, f1_true(labels, gold),
                       consistency(labels, grounds).consistency,
                       consistency(labels, grounds, FORWARD_AND_MUTEX).consistency,
                       flips, len(bank))


def split_batches(items: Sequence, n: int) -> list[list]:
    """``n`` contiguous parts whose sizes differ by at most one."""
    size, extra = divmod(len(items), n)
    out, start = [], 0
    for i in range(n):
        end = start + size + (i < extra)
        out.append(list(items[start:end]))
        start = end
    return out


class BankSolver:
    """Per-entity re-solving from raw answers, with a cache of solved instances."""

    def __init__(self, grounds: Sequence[GroundConstraint], cfg: SolverConfig):
        self.cfg = cfg
        self.by_entity: dict[str, list[GroundConstraint]] = {}
        for g in grounds:
            self.by_entity.setdefault(g.entity, []).append(g)
        self.cache: dict = {}

    def assignment(self, beliefs: Iterable[Belief]) -> Assignment:
        per_entity: dict[str, list[Belief]] = {}
        for b in beliefs:
            per_entity.setdefault(b.key.entity, []).append(b)
        values: dict[SentenceKey, bool] = {}
        cost = 0.0
        for entity in sorted(per_entity):
            held = {b.key for b in per_entity[entity]}
            # only constraints over answered sentences; free variables would let one
            # stray answer drag unanswered sentences (and their consequences) along
            grounds = [g for g in self.by_entity.get(entity, ()) if held.issuperset(g.keys())]
            inst = encode(per_entity[entity], grounds, self.cfg)
            a = self.cache.get(inst)
            if a is None:
                a = self.cache[inst] = solve(inst, self.cfg)
            values.update(a.values)
            cost += a.cost
        return Assignment(values, cost)


def revise(bank: BeliefBank, raw: Mapping[SentenceKey, Belief], solver: BankSolver,
           human: Mapping[SentenceKey, Belief] = {}) -> int:
    """Re-derive solver labels from raw answers (plus hard human beliefs) and update the bank.

    Beliefs whose solved label matches the raw answer are restored to it; the rest are flipped.
    Returns the number of labels changed.
    """
    evidence = [human.get(k, b) for k, b in raw.items()]
    evidence += [b for k, b in human.items() if k not in raw]
    a = solver.assignment(evidence)
    changed = 0
    for key, b in list(bank.beliefs.items()):
        target = a[key]
        if target == b.label:
            continue
        changed += 1
        if key in raw and key not in human and raw[key].label == target:
            bank.upsert(raw[key], "solver-restore")
    apply(bank, a)
    return changed


CorrectionHook = Callable[[int, BeliefBank], Iterable[tuple[SentenceKey, bool]]]


def run(cfg: ExperimentConfig, dataset: Dataset, oracle: Oracle,
        corrections: CorrectionHook | None = None,
        final_bank: Callable[[BeliefBank], None] | None = None) -> list[BatchReport]:
    """Stream the test questions in batches and report after each one.

    ``corrections(batch, bank)`` may return (key, label) pairs that become hard human
    beliefs before the next batch; ``final_bank`` receives the bank when the run ends.
    """
    if cfg.configuration is Configuration.OMNISCIENT:
        return [run_omniscient(cfg, dataset, oracle, final_bank)]
    name = cfg.configuration.value
    constraints = reweight(dataset.constraints, cfg.w_forward, cfg.w_backward)
    grounds = ground_all(constraints, dataset.entities, dataset.templates)
    index = index_by_sentence(grounds)
    gold = dataset.facts
    questions = sorted(gold)
    random.Random(cfg.shuffle_seed).shuffle(questions)
    solver = BankSolver(grounds, cfg.solver) if cfg.configuration.uses_solver else None
    policy = cfg.configuration.policy

    bank = BeliefBank(dataset.templates)
    raw: dict[SentenceKey, Belief] = {}
    human: dict[SentenceKey, Belief] = {}
    reports: list[BatchReport] = []
    for n, batch in enumerate(split_batches(questions, cfg.n_batches), 1):
        before = bank.snapshot() if policy is not Policy.NONE else bank
        try:
            for q in batch:
                prompt = ""
                if policy is not Policy.NONE:
                    sel = select(policy, before, index, q, cfg.k, cfg.feedback_seed)
                    prompt = render_context(sel, q, dataset.templates)
                ans = oracle.query(q, prompt)
                raw[q] = Belief(q, ans.label, ans.confidence, Provenance.MODEL_RAW, n)
                bank.upsert(raw[q])
        except OracleUnavailable as exc:
            raise ExperimentAborted(f"batch {n} aborted: {exc}", reports) from exc
        if solver is not None:
            revise(bank, raw, solver, human)
        reports.append(evaluate(name, n, bank, gold, grounds))
        log.info("%s batch %d: f1=%.4f consistency=%.4f", name, n,
                 reports[-1].f1_true, reports[-1].consistency)
        if corrections is not None:
            for key, label in corrections(n, bank.snapshot()):
                if key not in bank:
                    log.warning("correction for unknown belief %s ignored", key)
                    continue
                human[key] = Belief(key, label, 1.0, Provenance.HUMAN, n)
                bank.upsert(human[key], "human")
    if final_bank is not None:
        final_bank(bank)
    return reports


def run_omniscient(cfg: ExperimentConfig, dataset: Dataset, oracle: Oracle,
                   final_bank: Callable[[BeliefBank], None] | None = None) -> BatchReport:
    """Answer everything raw, then re-ask every question with relevant feedback from those answers."""
    constraints = reweight(dataset.constraints, cfg.w_forward, cfg.w_backward)
    grounds = ground_all(constraints, dataset.entities, dataset.templates)
    index = index_by_sentence(grounds)
    questions = sorted(dataset.facts)
    phase1 = BeliefBank(dataset.templates)
    try:
        for q in questions:
            ans = oracle.query(q)
            phase1.upsert(Belief(q, ans.label, ans.confidence, Provenance.MODEL_RAW, 1))
        phase2 = BeliefBank(dataset.templates)
        for q in questions:
            sel = select_relevant(phase1, index, q, cfg.k, cfg.feedback_seed)
            ans = oracle.query(q, render_context(sel, q, dataset.templates))
            phase2.upsert(Belief(q, ans.label, ans.confidence, Provenance.MODEL_RAW, 2))
    except OracleUnavailable as exc:
        raise ExperimentAborted(f"omniscient run aborted: {exc}", []) from exc
    if final_bank is not None:
        final_bank(phase2)
    return evaluate(Configuration.OMNISCIENT.value, cfg.n_batches, phase2, dataset.facts, grounds)


# ---------------------------------------------------------------- calibration

DEFAULT_GRID = {
    "w_forward": (0.5, 1.0, 2.0, 4.0),
    "w_backward": (0.01, 0.05, 0.1, 0.5),
    "lam": (0.25, 0.5, 1.0, 2.0, 4.0),
}


@dataclass(frozen=True)
class CalibrationResult:
    w_forward: float
    w_backward: float
    lam: float
    dev_f1: float
    grid: tuple[tuple[float, float, float, float], ...]  # (w_forward, w_backward, lam, f1)

    @property
    def best(self) -> tuple[float, float, float]:
        return (self.w_forward, self.w_backward, self.lam)

    def apply_to(self, cfg: ExperimentConfig) -> ExperimentConfig:
        return replace(cfg, w_forward=self.w_forward, w_backward=self.w_backward,
                       solver=replace(cfg.solver, lam=self.lam))


def calibrate(dataset: Dataset, oracle: Oracle, grid: Mapping[str, Sequence[float]] = DEFAULT_GRID,
              solver: SolverConfig = SolverConfig(), dev_entities: Sequence[str] | None = None
              ) -> CalibrationResult:
    """Grid search over (w_forward, w_backward, lam) maximising F1 after solving raw dev answers.

    Ties go to the smaller lam, then the smaller w_backward, then the smaller w_forward.
    """
    points = list(itertools.product(grid["w_forward"], grid["w_backward"], grid["lam"]))
    if not points:
        raise ValueError("calibration grid is empty")
    dev_entities = list(dataset.dev_entities if dev_entities is None else dev_entities)
    if not dev_entities:
        raise ValueError("no development entities to calibrate on")
    if set(dev_entities) & set(dataset.entities):
        raise ValueError("development entities overlap the test entities")
    gold = dataset.gold
    keys = sorted(k for k in gold if k.entity in set(dev_entities))
    raw = {}
    for k in keys:
        ans = oracle.query(k)
        raw[k] = Belief(k, ans.label, ans.confidence)
    results = []
    for wf, wb, lam in points:
        grounds = ground_all(reweight(dataset.constraints, wf, wb), dev_entities, dataset.templates)
        a = BankSolver(grounds, replace(solver, lam=lam)).assignment(raw.values())
        results.append((wf, wb, lam, f1_true({k: a[k] for k in keys}, gold)))
    best = min(results, key=lambda r: (-round(r[3], 12), r[2], r[1], r[0]))
    return CalibrationResult(best[0], best[1], best[2], best[3], tuple(results))


# ---------------------------------------------------------------- human in the loop

def clash_ranking(bank: BeliefBank, grounds: Iterable[GroundConstraint]) -> list[tuple[Belief, float]]:
    """Beliefs ranked by the total weight of violated constraints they take part in."""
    score: dict[SentenceKey, float] = {}
    for g in violated_constraints(bank, grounds):
        for k in set(g.keys()):
            score[k] = score.get(k, 0.0) + g.weight
    ranked = sorted(bank, key=lambda b: (-score.get(b.key, 0.0), b.key))
    return [(b, score.get(b.key, 0.0)) for b in ranked]


SESSION_HELP = """commands:
  show [entity]                  beliefs ranked by clash involvement
  set <entity> <template> <T|F>  correct a belief (stored as a hard human belief)
  toggle <entity> <template>     flip a belief's label as a human correction
  done                           end the session"""


def correct(bank: BeliefBank, session_input: Iterable[str], grounds: Sequence[GroundConstraint],
            out: TextIO | None = None, batch_index: int = 0) -> BeliefBank:
    """Turn-based correction session; every command and reply goes to ``out``."""
    out = out or io.StringIO()
    registry = bank.registry
    session: dict[SentenceKey, bool] = {}

    def say(text):
        out.write(text + "\n")

    for line in session_input:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        say(f"> {line}")
        cmd, *args = line.split()
        if cmd in ("done", "quit", "exit"):
            break
        if cmd == "help":
            say(SESSION_HELP)
        elif cmd == "show":
            ranked = clash_ranking(bank, grounds)
            for b, s in ranked:
                if args and b.key.entity != args[0]:
                    continue
                text = registry.render(b.key, b.label) if registry else str(b.key)
                say(f"  {s:7.3f}  {b.key.entity} {b.key.template_id} {label_str(b.label)} "
                    f"w={b.weight:.3f} {b.provenance.value}  ({text})")
        elif cmd in ("set", "toggle") and len(args) == (3 if cmd == "set" else 2):
            key = SentenceKey(args[0], args[1])
            held = bank.get(key)
            if held is None:
                say(f"no belief for {key}; nothing changed")
                continue
            try:
                label = parse_label(args[2]) if cmd == "set" else not held.label
            except ValueError as exc:
                say(str(exc))
                continue
            if session.get(key, label) != label:
                hard = [Belief(key, session[key], 1.0, Provenance.HUMAN),
                        Belief(key, label, 1.0, Provenance.HUMAN)]
                try:
                    solve_local(encode(hard, ()))
                except UnsatisfiableHardClauses as exc:
                    say(f"rejected: {exc}")
                    continue
            session[key] = label
            bank.upsert(Belief(key, label, 1.0, Provenance.HUMAN, batch_index or held.batch_index), "human")
            say(f"{key} := {label_str(label)} (human)")
        else:
            say(f"unknown command {line!r}; try 'help'")
    return bank


# ---------------------------------------------------------------- reports

CSV_COLUMNS = ("config", "batch", "f1", "consistency", "consistency_fwd_mutex", "flips", "beliefs")


def write_csv(reports: Iterable[BatchReport], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in reports:
            w.writerow([r.config, r.batch_index, f"{r.f1_true:.6f}", f"{r.consistency:.6f}",
                        f"{r.consistency_fwd_mutex:.6f}", r.n_flips, r.n_beliefs])


def read_csv(path) -> list[BatchReport]:
    with open(path, encoding="utf-8", newline="") as f:
        return [BatchReport(row["config"], int(row["batch"]), float(row["f1"]),
                            float(row["consistency"]), float(row["consistency_fwd_mutex"]),
                            int(row["flips"]), int(row["beliefs"]))
                for row in csv.DictReader(f)]


def text_table(reports: Sequence[BatchReport], metric: str = "f1_true") -> str:
    """One row per configuration, one column per batch, values in percent."""
    titles = {"f1_true": "Accuracy (F1)", "consistency": "Consistency (1-tau)",
              "consistency_fwd_mutex": "Consistency (1-tau), forward+mutex only"}
    rows: dict[str, dict[int, float]] = {}
    for r in reports:
        rows.setdefault(r.config, {})[r.batch_index] = getattr(r, metric)
    batches = sorted({b for row in rows.values() for b in row})
    head = "after batch ->"
    width = max([len(head)] + [len(c) for c in rows])
    lines = [titles[metric], head.ljust(width) + "".join(f"{b:>7d}" for b in batches)]
    lines.append("-" * len(lines[1]))
    for config, row in rows.items():
        cells = "".join(f"{100 * row[b]:7.1f}" if b in row else " " * 7 for b in batches)
        lines.append(config.ljust(width) + cells)
    return "\n".join(lines) + "\n"


def report(reports: Sequence[BatchReport], path) -> dict[str, Path]:
    """Write ``<path>.csv`` and an aligned ``<path>.txt`` with F1 and consistency tables."""
    base = Path(path)
    if base.suffix in (".csv", ".txt"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path, txt_path = base.with_suffix(".csv"), base.with_suffix(".txt")
    write_csv(reports, csv_path)
    txt_path.write_text("\n".join(text_table(reports, m) for m in
                                  ("f1_true", "consistency", "consistency_fwd_mutex")),
                        encoding="utf-8")
    return {"csv": csv_path, "txt": txt_path}
