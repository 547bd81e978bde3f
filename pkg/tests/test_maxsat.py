import itertools
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beliefbank.beliefs import BeliefBank, Provenance
from beliefbank.constraints import ground, implication, mutex
from beliefbank.maxsat import (MaxSatInstance, SolverConfig, TooManyVariables,
                               UnsatisfiableHardClauses, apply, components, diff, encode,
                               export_wcnf, read_wcnf, solve, solve_exact, solve_local)

from conftest import belief, key
from reference import brute_force_min, random_instance, score_wcnf

LAM1 = SolverConfig(lam=1.0)


def test_poodle_encoding():
    inst = encode([belief("poodle", "isa.dog", True, 0.9)],
                  ground([implication("isa.dog", "has.tail", 0.8)], "poodle"), LAM1)
    dog = inst.variables.index(key("poodle", "isa.dog")) + 1
    tail = inst.variables.index(key("poodle", "has.tail")) + 1
    assert sorted(inst.soft) == sorted([((dog,), 0.9), ((-dog, tail), 0.8)])
    assert inst.hard == ()


def test_lambda_scales_units_only():
    inst = encode([belief("poodle", "isa.dog", False, 0.5)],
                  ground([implication("isa.dog", "has.tail", 0.8)], "poodle"), SolverConfig(lam=2.0))
    assert sorted(w for _, w in inst.soft) == [0.8, 1.0]
    assert ((-inst.variables.index(key("poodle", "isa.dog")) - 1,), 1.0) in inst.soft


def test_human_belief_is_hard():
    inst = encode([belief("poodle", "isa.dog", True, 1.0, provenance=Provenance.HUMAN)], [], LAM1)
    assert inst.soft == () and inst.hard == ((1,),)


def test_empty_instance():
    inst = encode([], [], LAM1)
    assert inst.n_vars == 0
    assert solve_exact(inst).cost == 0


def test_single_belief():
    a = solve_exact(encode([belief("p", "isa.dog", False, 0.7)], [], LAM1))
    assert a[key("p", "isa.dog")] is False and a.cost == 0


def test_dog_tail_flip():
    beliefs = [belief("p", "isa.dog", True, 0.9), belief("p", "has.tail", False, 0.2)]
    inst = encode(beliefs, ground([implication("isa.dog", "has.tail", 0.8)], "p"), LAM1)
    a = solve_exact(inst)
    assert a[key("p", "has.tail")] is True and a[key("p", "isa.dog")] is True
    assert a.cost == pytest.approx(0.2)
    costs = sorted(inst.cost(bits) for bits in itertools.product((False, True), repeat=2))
    assert costs == pytest.approx([0.2, 0.8, 0.9, 1.1])


def test_bird_fish_mutex():
    beliefs = [belief("s", "isa.bird", True, 0.6), belief("s", "isa.fish", True, 0.5)]
    a = solve_exact(encode(beliefs, ground(mutex("isa.bird", "isa.fish", 1.0), "s"), LAM1))
    assert a[key("s", "isa.fish")] is False and a[key("s", "isa.bird")] is True
    assert a.cost == pytest.approx(0.5)


def test_pine_flips_vertebrate_not_plant():
    bank = BeliefBank()
    for t in ("isa.plant", "isa.tree", "isa.vertebrate"):
        bank.upsert(belief("pine", t, True, 0.9))
    cs = [*mutex("isa.plant", "isa.vertebrate", 1.0), implication("isa.tree", "isa.plant", 1.0)]
    inst = encode(bank, ground(cs, "pine"), LAM1)
    a = solve_exact(inst)
    assert diff(bank, a) == [key("pine", "isa.vertebrate")]
    assert a.cost == pytest.approx(brute_force_min(inst))
    apply(bank, a)
    assert bank.get(key("pine", "isa.vertebrate")).provenance is Provenance.SOLVER_FLIPPED
    assert bank.get(key("pine", "isa.vertebrate")).weight == 0.9
    assert len(bank.flips()) == 1


def test_tie_prefers_raw_agreement():
    # flipping either belief costs the same; the constraint could also just be violated at
    # equal cost, which keeps every unit clause satisfied
    beliefs = [belief("x", "isa.a", True, 0.5), belief("x", "isa.b", False, 0.5)]
    a = solve_exact(encode(beliefs, ground([implication("isa.a", "isa.b", 0.5)], "x"), LAM1))
    assert a[key("x", "isa.a")] is True and a[key("x", "isa.b")] is False


def test_tie_then_lexicographic():
    inst = MaxSatInstance((key("x", "isa.a"), key("x", "isa.b")), (((1, 2), 1.0),))
    a = solve_exact(inst)
    assert (a[key("x", "isa.a")], a[key("x", "isa.b")]) == (False, True)


def test_exact_refuses_large_instances():
    inst = MaxSatInstance(tuple(key("x", f"v{i}") for i in range(5)))
    with pytest.raises(TooManyVariables, match="solve_local"):
        solve_exact(inst, max_vars=4)


def test_contradictory_hard_beliefs():
    hard = [belief("x", "isa.a", True, 1.0, provenance=Provenance.HUMAN),
            belief("y", "isa.a", True, 1.0, provenance=Provenance.HUMAN)]
    inst = encode(hard, [], LAM1)
    inst = MaxSatInstance(inst.variables, inst.soft, inst.hard + ((-1,),))
    with pytest.raises(UnsatisfiableHardClauses) as err:
        solve_local(inst)
    assert err.value.keys == [key("x", "isa.a")]
    with pytest.raises(UnsatisfiableHardClauses):
        solve_exact(inst)


def test_local_without_constraints_returns_raw():
    beliefs = [belief("x", f"isa.c{i}", i % 2 == 0, 0.6) for i in range(30)]
    a = solve_local(encode(beliefs, [], LAM1))
    assert a.cost == 0
    assert all(a[b.key] == b.label for b in beliefs)


def test_local_is_deterministic():
    inst = random_instance(random.Random(7), 40, 120)
    cfg = SolverConfig(seed=3)
    assert solve_local(inst, cfg) == solve_local(inst, cfg)


def test_unanswered_sentences_are_free_variables():
    inst = encode([belief("p", "isa.dog", True, 0.9)],
                  ground([implication("isa.dog", "has.tail", 0.8)], "p"), LAM1)
    assert inst.n_vars == 2
    assert solve_exact(inst)[key("p", "has.tail")] is True


def test_apply_identity_and_missing_keys():
    bank = BeliefBank().upsert(belief("p", "isa.dog", True))
    a = solve_exact(encode(bank, [], LAM1))
    apply(bank, a)
    assert diff(bank, a) == [] and bank.flips() == []
    bank.upsert(belief("q", "isa.dog", True))
    with pytest.raises(KeyError):
        apply(bank, a)


def test_decomposition_matches_union():
    beliefs = [belief(e, t, (i + j) % 3 == 0, 0.3 + 0.1 * j)
               for i, e in enumerate(["a", "b", "c"]) for j, t in enumerate(["isa.x", "isa.y", "isa.z"])]
    cs = [implication("isa.x", "isa.y", 0.7), *mutex("isa.y", "isa.z", 0.9)]
    grounds = [g for e in "abc" for g in ground(cs, e)]
    inst = encode(beliefs, grounds, LAM1)
    assert len(components(inst)) == 3
    total = sum(solve_exact(encode([b for b in beliefs if b.key.entity == e],
                                   ground(cs, e), LAM1)).cost for e in "abc")
    assert solve(inst).cost == pytest.approx(total)
    assert solve(inst).cost == pytest.approx(solve_exact(inst).cost)


def test_solve_falls_back_to_local():
    inst = random_instance(random.Random(11), 15, 40)
    cfg = SolverConfig(exact_threshold=3)
    a = solve(inst, cfg)
    assert a.cost >= brute_force_min(inst) - 1e-9


def test_wcnf_poodle(tmp_path):
    inst = encode([belief("poodle", "isa.dog", True, 0.9)],
                  ground([implication("isa.dog", "has.tail", 0.8)], "poodle"), LAM1)
    export_wcnf(inst, tmp_path / "p.wcnf")
    lines = (tmp_path / "p.wcnf").read_text().splitlines()
    clauses = [l for l in lines if not l.startswith(("c", "p"))]
    # variables are sorted by key, so has.tail is 1 and isa.dog is 2
    assert sorted(clauses) == sorted(["9000 2 0", "8000 -2 1 0"])
    assert "c var 2 poodle\tisa.dog" in lines
    back = read_wcnf(tmp_path / "p.wcnf")
    assert back.variables == list(inst.variables)
    assert back.to_instance().soft == inst.soft


def test_wcnf_hard_clause_uses_top(tmp_path):
    inst = encode([belief("p", "isa.dog", True, 1.0, provenance=Provenance.HUMAN),
                   belief("p", "has.tail", False, 0.5)], [], LAM1)
    export_wcnf(inst, tmp_path / "h.wcnf")
    w = read_wcnf(tmp_path / "h.wcnf")
    assert w.top == 5001 and len(w.hard) == 1
    assert f"{w.top} {w.hard[0][0]} 0" in (tmp_path / "h.wcnf").read_text()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_exact_matches_enumeration(seed):
    inst = random_instance(random.Random(seed), 10, 25, hard_rate=0.1)
    best = brute_force_min(inst)
    if math.isinf(best):
        with pytest.raises(UnsatisfiableHardClauses):
            solve_exact(inst)
        return
    a = solve_exact(inst)
    assert a.cost == pytest.approx(best)
    assert inst.cost([a[k] for k in inst.variables]) == pytest.approx(a.cost)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 10))
def test_argmin_invariant_under_scaling(seed, factor):
    inst = random_instance(random.Random(seed), 8, 20)
    scaled = MaxSatInstance(inst.variables, tuple((c, w * factor) for c, w in inst.soft))
    a, b = solve_exact(inst), solve_exact(scaled)
    # same optimum set: each solver's answer is optimal for the other instance too
    bits_a = [a[k] for k in inst.variables]
    bits_b = [b[k] for k in inst.variables]
    assert scaled.cost(bits_a) == pytest.approx(b.cost)
    assert inst.cost(bits_b) == pytest.approx(a.cost)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_local_never_beats_exact(seed):
    inst = random_instance(random.Random(seed), 12, 30)
    assert solve_local(inst).cost >= solve_exact(inst).cost - 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_wcnf_cost_matches_internal(tmp_path_factory, seed):
    inst = random_instance(random.Random(seed), 12, 30, hard_rate=0.05)
    try:
        a = solve(inst)
    except UnsatisfiableHardClauses:
        return
    path = tmp_path_factory.mktemp("w") / "i.wcnf"
    export_wcnf(inst, path)
    expected = sum(max(1, round(w * 10_000)) for c, w in inst.soft
                   if not any(a[inst.variables[abs(l) - 1]] == (l > 0) for l in c))
    assert score_wcnf(path, a.values) == expected
