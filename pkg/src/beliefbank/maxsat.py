"""Weighted MaxSAT encoding of a BeliefBank, exact and local solvers, and belief flipping.

Literals are signed 1-based variable indices, as in DIMACS: ``+i`` asserts variable ``i``
true and ``-i`` asserts it false.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .beliefs import Belief, BeliefBank, FormatError, Provenance, SentenceKey
from .constraints import GroundConstraint

Clause = tuple[int, ...]


class TooManyVariables(ValueError):
    pass


class UnsatisfiableHardClauses(ValueError):
    """The hard clauses (human corrections) contradict each other."""

    def __init__(self, conflict: Sequence[Clause], keys: Sequence[SentenceKey]):
        self.conflict = list(conflict)
        self.keys = list(keys)
        names = ", ".join(str(k) for k in self.keys) or "(none)"
        super().__init__(f"hard clauses are unsatisfiable; conflicting sentences: {names}")


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 1.0  # scales model confidences against constraint weights
    exact_threshold: int = 20
    max_flips: int = 3000
    restarts: int = 3
    noise: float = 0.2
    stall: int = 400
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if self.exact_threshold < 1:
            raise ValueError("exact_threshold must be >= 1")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must be in [0, 1]")
        if self.max_flips < 0 or self.restarts < 1:
            raise ValueError("max_flips must be >= 0 and restarts >= 1")


@dataclass(frozen=True)
class MaxSatInstance:
    variables: tuple[SentenceKey, ...]
    soft: tuple[tuple[Clause, float], ...] = ()
    hard: tuple[Clause, ...] = ()

    def __post_init__(self):
        n = len(self.variables)
        if len(set(self.variables)) != n:
            raise ValueError("duplicate variables")
        for lits, w in self.soft:
            if not w > 0:
                raise ValueError(f"soft clause weight must be positive, got {w}")
            _check_lits(lits, n)
        for lits in self.hard:
            _check_lits(lits, n)

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def cost(self, values: Sequence[bool]) -> float:
        """Weight of soft clauses with no satisfied literal; inf if a hard clause fails."""
        for lits in self.hard:
            if not _satisfied(lits, values):
                return math.inf
        return math.fsum(w for lits, w in self.soft if not _satisfied(lits, values))

    def unit_agreement(self, values: Sequence[bool]) -> int:
        return sum(1 for lits, _ in self.soft if len(lits) == 1 and _satisfied(lits, values))

    def preferred_values(self) -> list[bool]:
        """Assignment suggested by the unit clauses; unconstrained variables default to False."""
        score = [0.0] * self.n_vars
        for lits, w in self.soft:
            if len(lits) == 1:
                score[abs(lits[0]) - 1] += w if lits[0] > 0 else -w
        values = [s > 0 for s in score]
        for lits in self.hard:
            if len(lits) == 1:
                values[abs(lits[0]) - 1] = lits[0] > 0
        return values


@dataclass(frozen=True)
class Assignment:
    values: Mapping[SentenceKey, bool]
    cost: float

    def __getitem__(self, key: SentenceKey) -> bool:
        return self.values[key]


def _check_lits(lits: Clause, n: int) -> None:
    if not lits:
        raise ValueError("empty clause")
    for lit in lits:
        if lit == 0 or abs(lit) > n:
            raise ValueError(f"literal {lit} references an undeclared variable")


def _satisfied(lits: Clause, values: Sequence[bool]) -> bool:
    return any(values[abs(l) - 1] == (l > 0) for l in lits)


def _lit(index: dict[SentenceKey, int], key: SentenceKey, label: bool) -> int:
    return index[key] if label else -index[key]


def _normalize(lits: Iterable[int]) -> Clause | None:
    """Deduplicate literals; None for a tautology."""
    seen = dict.fromkeys(lits)
    if any(-l in seen for l in seen):
        return None
    return tuple(seen)


def encode(beliefs: BeliefBank | Iterable[Belief], grounds: Iterable[GroundConstraint],
           cfg: SolverConfig = SolverConfig()) -> MaxSatInstance:
    """Model answers become weighted unit clauses, constraints become weighted implications.

    Human beliefs become hard unit clauses. Sentences mentioned only by constraints get a
    variable with no unit clause, so the solver may set them freely.
    """
    beliefs = list(beliefs)
    grounds = list(grounds)
    keys = {b.key for b in beliefs}
    for g in grounds:
        keys.update(g.keys())
    variables = tuple(sorted(keys))
    index = {k: i + 1 for i, k in enumerate(variables)}
    soft: list[tuple[Clause, float]] = []
    hard: list[Clause] = []
    for b in sorted(beliefs, key=lambda b: b.key):
        lit = _lit(index, b.key, b.label)
        if b.provenance is Provenance.HUMAN:
            hard.append((lit,))
        elif b.weight > 0:
            soft.append(((lit,), cfg.lam * b.weight))
    for g in grounds:
        pkey, plabel = g.premise
        clause = _normalize([-_lit(index, pkey, plabel)] +
                            [_lit(index, k, l) for k, l in g.conclusion])
        if clause is not None:
            soft.append((clause, g.weight))
    return MaxSatInstance(variables, tuple(soft), tuple(hard))


# ---------------------------------------------------------------- exact solver

def solve_exact(inst: MaxSatInstance, max_vars: int = SolverConfig.exact_threshold) -> Assignment:
    """Depth-first branch and bound returning a provably minimal-cost assignment.

    Among equal-cost optima the one satisfying the most unit clauses wins, then the
    lexicographically smallest value vector (False < True) in variable order.
    """
    n = inst.n_vars
    if n > max_vars:
        raise TooManyVariables(f"{n} variables exceed the exact threshold {max_vars}; use solve_local")
    weights = [w for _, w in inst.soft] + [math.inf] * len(inst.hard)
    clauses = [lits for lits, _ in inst.soft] + list(inst.hard)
    is_unit = [len(lits) == 1 and i < len(inst.soft) for i, lits in enumerate(clauses)]
    occ: list[list[tuple[int, bool]]] = [[] for _ in range(n)]
    for ci, lits in enumerate(clauses):
        for lit in lits:
            occ[abs(lit) - 1].append((ci, lit > 0))
    n_true = [0] * len(clauses)
    n_open = [len(lits) for lits in clauses]
    eps = 1e-9 * max(1.0, math.fsum(w for _, w in inst.soft))
    prefer = inst.preferred_values()
    values: list[bool] = [False] * n

    n_units = sum(is_unit)
    start = tuple(prefer)
    best = [inst.cost(start), n_units - inst.unit_agreement(start), start]
    if best[0] == math.inf:
        best = [math.inf, 0, None]

    def better(cost, dis, bits) -> bool:
        bc, bd, bb = best
        if bb is None or cost < bc - eps:
            return True
        if cost > bc + eps:
            return False
        return (dis, bits) < (bd, bb)

    def assign(v: int, val: bool) -> tuple[float, int]:
        added, dis = 0.0, 0
        for ci, positive in occ[v]:
            n_open[ci] -= 1
            if positive == val:
                n_true[ci] += 1
            elif n_open[ci] == 0 and n_true[ci] == 0:
                added += weights[ci]
                dis += is_unit[ci]
        return added, dis

    def unassign(v: int, val: bool) -> None:
        for ci, positive in occ[v]:
            n_open[ci] += 1
            if positive == val:
                n_true[ci] -= 1

    def search(v: int, cost: float, dis: int) -> None:
        bc, bd, bb = best
        if bb is not None and cost >= bc - eps:
            if cost > bc + eps or dis > bd:
                return
            if dis == bd and tuple(values[:v]) > bb[:v]:
                return
        if v == n:
            bits = tuple(values)
            if better(cost, dis, bits):
                best[:] = [cost, dis, bits]
            return
        first = prefer[v]
        for val in (first, not first):
            values[v] = val
            added, d = assign(v, val)
            if added != math.inf:
                search(v + 1, cost + added, dis + d)
            unassign(v, val)

    search(0, 0.0, 0)
    if best[2] is None:
        conflict = minimal_unsat_core(inst.hard, n)
        raise UnsatisfiableHardClauses(conflict, _conflict_keys(inst, conflict))
    bits = best[2]
    return Assignment(dict(zip(inst.variables, bits)), inst.cost(bits))


# ---------------------------------------------------------------- hard clauses

def _dpll(clauses: list[Clause], n: int) -> list[bool] | None:
    """Plain DPLL with unit propagation; only used on the (small) hard clause set."""

    def simplify(cs, lit):
        out = []
        for c in cs:
            if lit in c:
                continue
            if -lit in c:
                c = tuple(l for l in c if l != -lit)
                if not c:
                    return None
            out.append(c)
        return out

    def rec(cs, assigned):
        while True:
            units = [c[0] for c in cs if len(c) == 1]
            if not units:
                break
            lit = units[0]
            assigned = {**assigned, abs(lit): lit > 0}
            cs = simplify(cs, lit)
            if cs is None:
                return None
        if not cs:
            return assigned
        lit = cs[0][0]
        for choice in (lit, -lit):
            nxt = simplify(cs, choice)
            if nxt is not None:
                found = rec(nxt, {**assigned, abs(choice): choice > 0})
                if found is not None:
                    return found
        return None

    found = rec(list(clauses), {})
    if found is None:
        return None
    return [found.get(i + 1, False) for i in range(n)]


def minimal_unsat_core(hard: Sequence[Clause], n: int) -> list[Clause]:
    """Deletion-based minimal unsatisfiable subset of the hard clauses."""
    core = list(hard)
    i = 0
    while i < len(core):
        trial = core[:i] + core[i + 1:]
        if _dpll(trial, n) is None:
            core = trial
        else:
            i += 1
    return core


def _conflict_keys(inst: MaxSatInstance, conflict: Sequence[Clause]) -> list[SentenceKey]:
    return sorted({inst.variables[abs(l) - 1] for c in conflict for l in c})


def _check_hard(inst: MaxSatInstance) -> list[bool] | None:
    if not inst.hard:
        return None
    model = _dpll(list(inst.hard), inst.n_vars)
    if model is None:
        conflict = minimal_unsat_core(inst.hard, inst.n_vars)
        raise UnsatisfiableHardClauses(conflict, _conflict_keys(inst, conflict))
    return model


# ---------------------------------------------------------------- local search

def solve_local(inst: MaxSatInstance, cfg: SolverConfig = SolverConfig()) -> Assignment:
    """Weighted WalkSAT started from the model's raw answers, finished by greedy descent.

    Hard clauses carry a weight above the total soft weight, so any assignment meeting
    them beats every assignment that does not.
    """
    n = inst.n_vars
    hard_model = _check_hard(inst)
    init = inst.preferred_values()
    if not inst.soft and not inst.hard:
        return Assignment(dict(zip(inst.variables, init)), 0.0)
    soft_total = math.fsum(w for _, w in inst.soft)
    big = soft_total + 1.0
    clauses = [lits for lits, _ in inst.soft] + list(inst.hard)
    weights = [w for _, w in inst.soft] + [big] * len(inst.hard)
    occ: list[list[tuple[int, bool]]] = [[] for _ in range(n)]
    for ci, lits in enumerate(clauses):
        for lit in lits:
            occ[abs(lit) - 1].append((ci, lit > 0))
    eps = 1e-9 * max(1.0, soft_total)
    rng = random.Random(cfg.seed)

    starts = [init]
    if hard_model is not None and math.isinf(inst.cost(init)):
        starts.append(hard_model)

    best_bits: list[bool] | None = None
    best_cost = math.inf
    for r in range(cfg.restarts):
        values = list(starts[r % len(starts)])
        search = _WalkState(clauses, weights, occ, values)
        cur_best = search.cost
        if cur_best < best_cost - eps and not search.hard_broken(len(inst.soft)):
            best_cost, best_bits = cur_best, list(values)
        since = 0
        for _ in range(cfg.max_flips):
            if not search.falsified or since >= cfg.stall:
                break
            ci = search.pick_clause(rng, len(inst.soft))
            lits = clauses[ci]
            if rng.random() < cfg.noise:
                v = abs(rng.choice(lits)) - 1
            else:
                v = min((abs(l) - 1 for l in lits), key=lambda u: (search.delta(u), rng.random()))
            search.flip(v)
            since += 1
            if search.cost < best_cost - eps and not search.hard_broken(len(inst.soft)):
                best_cost, best_bits = search.cost, list(search.values)
                since = 0
    if best_bits is None:
        best_bits = list(hard_model if hard_model is not None else init)
    best_bits = _descend(clauses, weights, occ, best_bits, eps)
    return Assignment(dict(zip(inst.variables, best_bits)), inst.cost(best_bits))


class _WalkState:
    def __init__(self, clauses, weights, occ, values):
        self.clauses, self.weights, self.occ, self.values = clauses, weights, occ, values
        self.n_true = [sum(values[abs(l) - 1] == (l > 0) for l in c) for c in clauses]
        self.falsified: list[int] = []
        self.pos: dict[int, int] = {}
        self.cost = 0.0
        for ci, t in enumerate(self.n_true):
            if t == 0:
                self._add(ci)

    def _add(self, ci):
        self.pos[ci] = len(self.falsified)
        self.falsified.append(ci)
        self.cost += self.weights[ci]

    def _remove(self, ci):
        i = self.pos.pop(ci)
        last = self.falsified.pop()
        if last != ci:
            self.falsified[i] = last
            self.pos[last] = i
        self.cost -= self.weights[ci]

    def hard_broken(self, n_soft: int) -> bool:
        return any(ci >= n_soft for ci in self.falsified)

    def pick_clause(self, rng, n_soft: int) -> int:
        hard = [ci for ci in self.falsified if ci >= n_soft]
        return rng.choice(hard) if hard else rng.choice(self.falsified)

    def delta(self, v: int) -> float:
        val = self.values[v]
        d = 0.0
        for ci, positive in self.occ[v]:
            if positive == val:
                if self.n_true[ci] == 1:
                    d += self.weights[ci]
            elif self.n_true[ci] == 0:
                d -= self.weights[ci]
        return d

    def flip(self, v: int) -> None:
        val = self.values[v]
        self.values[v] = not val
        for ci, positive in self.occ[v]:
            if positive == val:
                self.n_true[ci] -= 1
                if self.n_true[ci] == 0:
                    self._add(ci)
            else:
                self.n_true[ci] += 1
                if self.n_true[ci] == 1:
                    self._remove(ci)


def _descend(clauses, weights, occ, values, eps) -> list[bool]:
    state = _WalkState(clauses, weights, occ, list(values))
    improved = True
    while improved:
        improved = False
        for v in range(len(values)):
            if state.delta(v) < -eps:
                state.flip(v)
                improved = True
    return state.values


# ---------------------------------------------------------------- decomposition

def components(inst: MaxSatInstance) -> list[list[int]]:
    """Connected components of the variable interaction graph (0-based indices)."""
    parent = list(range(inst.n_vars))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for lits in [c for c, _ in inst.soft] + list(inst.hard):
        root = find(abs(lits[0]) - 1)
        for l in lits[1:]:
            other = find(abs(l) - 1)
            if other != root:
                parent[other] = root
    groups: dict[int, list[int]] = {}
    for v in range(inst.n_vars):
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


def restrict(inst: MaxSatInstance, members: Sequence[int]) -> MaxSatInstance:
    remap = {v + 1: i + 1 for i, v in enumerate(members)}

    def tr(lits):
        return tuple(remap[l] if l > 0 else -remap[-l] for l in lits)

    keep = set(remap)
    return MaxSatInstance(tuple(inst.variables[v] for v in members),
                          tuple((tr(c), w) for c, w in inst.soft if abs(c[0]) in keep),
                          tuple(tr(c) for c in inst.hard if abs(c[0]) in keep))


def solve(inst: MaxSatInstance, cfg: SolverConfig = SolverConfig()) -> Assignment:
    """Solve each independent component exactly when small enough, locally otherwise."""
    values: dict[SentenceKey, bool] = {}
    for members in components(inst):
        sub = restrict(inst, members)
        if sub.n_vars <= cfg.exact_threshold:
            part = solve_exact(sub, cfg.exact_threshold)
        else:
            part = solve_local(sub, cfg)
        values.update(part.values)
    bits = [values[k] for k in inst.variables]
    return Assignment({k: values[k] for k in inst.variables}, inst.cost(bits))


# ---------------------------------------------------------------- bank update

def diff(bank: BeliefBank, assignment: Assignment) -> list[SentenceKey]:
    return [b.key for b in bank if b.key in assignment.values and assignment[b.key] != b.label]


def apply(bank: BeliefBank, assignment: Assignment, cause: str = "solver") -> BeliefBank:
    """Flip every belief the assignment disagrees with; weights are kept as they were."""
    missing = [k for k in bank.beliefs if k not in assignment.values]
    if missing:
        raise KeyError(f"assignment does not cover {missing[0]}")
    for key in diff(bank, assignment):
        old = bank.beliefs[key]
        bank.upsert(Belief(key, assignment[key], old.weight, Provenance.SOLVER_FLIPPED,
                           old.batch_index), cause)
    return bank


# ---------------------------------------------------------------- WCNF interop

WCNF_SCALE = 10_000


def wcnf_weight(w: float) -> int:
    return max(1, int(round(w * WCNF_SCALE)))


def export_wcnf(inst: MaxSatInstance, path) -> None:
    """Write classic ``p wcnf`` format; soft weights are scaled to integers."""
    soft = [(wcnf_weight(w), lits) for lits, w in inst.soft]
    top = sum(w for w, _ in soft) + 1
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"c beliefbank weighted MaxSAT export, weights scaled by {WCNF_SCALE}\n")
        for i, key in enumerate(inst.variables, 1):
            f.write(f"c var {i} {key.entity}\t{key.template_id}\n")
        f.write(f"p wcnf {inst.n_vars} {len(soft) + len(inst.hard)} {top}\n")
        for lits in inst.hard:
            f.write(f"{top} {' '.join(map(str, lits))} 0\n")
        for w, lits in soft:
            f.write(f"{w} {' '.join(map(str, lits))} 0\n")


@dataclass
class WcnfFile:
    variables: list[SentenceKey]
    top: int
    soft: list[tuple[Clause, int]] = field(default_factory=list)
    hard: list[Clause] = field(default_factory=list)

    def to_instance(self) -> MaxSatInstance:
        return MaxSatInstance(tuple(self.variables),
                              tuple((c, w / WCNF_SCALE) for c, w in self.soft), tuple(self.hard))


def read_wcnf(path) -> WcnfFile:
    names: dict[int, SentenceKey] = {}
    header = None
    soft, hard = [], []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            fields = line.split()
            if not fields:
                continue
            if fields[0] == "c":
                if len(fields) >= 3 and fields[1] == "var":
                    entity, _, template_id = line.split(None, 3)[3].rstrip("\n").partition("\t")
                    names[int(fields[2])] = SentenceKey(entity, template_id)
                continue
            if fields[0] == "p":
                if len(fields) != 5 or fields[1] != "wcnf":
                    raise FormatError(path, lineno, "expected 'p wcnf <vars> <clauses> <top>'")
                header = (int(fields[2]), int(fields[3]), int(fields[4]))
                continue
            if header is None:
                raise FormatError(path, lineno, "clause before header")
            if fields[-1] != "0":
                raise FormatError(path, lineno, "clause must end with 0")
            w = int(fields[0])
            lits = tuple(int(x) for x in fields[1:-1])
            if w >= header[2]:
                hard.append(lits)
            else:
                soft.append((lits, w))
    if header is None:
        raise FormatError(path, 0, "missing header")
    n, _, top = header
    variables = [names.get(i, SentenceKey("_", f"v{i}")) for i in range(1, n + 1)]
    return WcnfFile(variables, top, soft, hard)
