import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beliefbank.beliefs import (Belief, BeliefBank, FormatError, Provenance, SentenceKey,
                                SentenceTemplate, TemplateRegistry, default_template, parse_label)

from conftest import belief, key


def test_insert_into_empty_bank():
    bank = BeliefBank().upsert(belief("poodle", "isa.dog", True, 0.9))
    assert len(bank) == 1


def test_overwrite_logs_a_flip():
    bank = BeliefBank().upsert(belief("poodle", "isa.dog", True))
    bank.upsert(belief("poodle", "isa.dog", False))
    assert len(bank) == 1
    assert len(bank.flips()) == 1
    assert bank.flips()[0].old_label is True


def test_same_label_overwrite_is_not_a_flip():
    bank = BeliefBank().upsert(belief("poodle", "isa.dog", True, 0.5))
    bank.upsert(belief("poodle", "isa.dog", True, 0.7))
    assert bank.flips() == []
    assert bank.get(key("poodle", "isa.dog")).weight == 0.7


def test_weight_out_of_range_rejected():
    with pytest.raises(ValueError):
        belief("poodle", "isa.dog", True, 1.3)


def test_human_belief_must_have_weight_one():
    with pytest.raises(ValueError):
        belief("poodle", "isa.dog", True, 0.9, provenance=Provenance.HUMAN)


def test_unknown_template_rejected():
    bank = BeliefBank(TemplateRegistry.from_ids(["isa.dog"]))
    with pytest.raises(KeyError):
        bank.upsert(belief("poodle", "isa.cat", True))


def test_empty_key_parts_rejected():
    with pytest.raises(ValueError):
        SentenceKey("", "isa.dog")
    with pytest.raises(ValueError):
        SentenceKey("poodle", "")


def test_beliefs_about():
    bank = BeliefBank()
    bank.upsert(belief("poodle", "isa.mammal", True))
    bank.upsert(belief("poodle", "isa.dog", True))
    bank.upsert(belief("swallow", "isa.bird", True))
    assert bank.beliefs_about("cat") == []
    got = bank.beliefs_about("poodle")
    assert [b.key.template_id for b in got] == ["isa.dog", "isa.mammal"]
    assert bank.beliefs_about("poodle") == got


def test_template_needs_one_slot():
    with pytest.raises(ValueError):
        SentenceTemplate("isa.dog", "a dog", "X is not a dog")
    with pytest.raises(ValueError):
        SentenceTemplate("isa.dog", "X is X", "X is not a dog")


def test_default_surfaces():
    reg = TemplateRegistry.from_ids(["isa.fish", "has.gills", "isa.animal"])
    assert reg.render(key("swallow", "isa.fish"), False) == "a swallow is not a fish"
    assert reg.render(key("swallow", "has.gills"), True) == "a swallow has gills"
    assert reg.render(key("owl", "isa.animal"), True) == "an owl is an animal"
    assert reg.question(key("swallow", "has.gills")) == "a swallow has gills?"
    assert default_template("can.fly").negative_surface == "X cannot fly"


def test_sentence_index_inverts_render():
    reg = TemplateRegistry.from_ids(["isa.fish", "has.gills"])
    index = reg.sentence_index(["swallow"])
    assert index["a swallow is not a fish"] == (key("swallow", "isa.fish"), False)
    assert len(index) == 4


@pytest.mark.parametrize("text,label", [("T", True), ("f", False), ("yes", True), (False, False)])
def test_parse_label(text, label):
    assert parse_label(text) is label


def test_parse_label_rejects_junk():
    with pytest.raises(ValueError):
        parse_label("maybe")


def test_registry_round_trip(tmp_path):
    reg = TemplateRegistry([SentenceTemplate("isa.dog", "X is a dog", "X is not a dog"),
                            SentenceTemplate("has.tail", "X has a tail", "X lacks a tail")])
    reg.save(tmp_path / "t.jsonl")
    back = TemplateRegistry.load(tmp_path / "t.jsonl")
    assert [t for t in back] == [t for t in reg]


def test_empty_bank_round_trip(tmp_path):
    BeliefBank().save(tmp_path / "b.jsonl")
    assert BeliefBank.load(tmp_path / "b.jsonl") == BeliefBank()


def test_hundred_belief_round_trip(tmp_path):
    bank = BeliefBank()
    for i in range(100):
        bank.upsert(belief(f"e{i % 7}", f"isa.c{i}", i % 3 == 0, (i % 10) / 10, batch_index=i % 4))
    bank.upsert(belief("e0", "isa.c0", False, 0.2), "solver")
    bank.save(tmp_path / "b.jsonl")
    assert BeliefBank.load(tmp_path / "b.jsonl") == bank


def test_truncated_file_rejected(tmp_path):
    bank = BeliefBank()
    for i in range(5):
        bank.upsert(belief("e", f"isa.c{i}", True))
    path = tmp_path / "b.jsonl"
    bank.save(path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-2]) + "\n")
    with pytest.raises(FormatError, match="truncated"):
        BeliefBank.load(path)


def test_malformed_line_names_line_number(tmp_path):
    path = tmp_path / "b.jsonl"
    path.write_text(json.dumps({"format": "beliefbank", "version": 1, "beliefs": 1, "revisions": 0})
                    + "\n{not json\n")
    with pytest.raises(FormatError) as err:
        BeliefBank.load(path)
    assert err.value.lineno == 2
    assert ":2:" in str(err.value)


def test_bad_record_field_rejected(tmp_path):
    path = tmp_path / "b.jsonl"
    rec = {"kind": "belief", "entity": "e", "template_id": "isa.x", "label": "T",
           "weight": 2.0, "provenance": "model_raw", "batch_index": 0}
    path.write_text(json.dumps({"format": "beliefbank", "version": 1, "beliefs": 1, "revisions": 0})
                    + "\n" + json.dumps(rec) + "\n")
    with pytest.raises(FormatError):
        BeliefBank.load(path)


upserts = st.lists(st.tuples(st.sampled_from(["a", "b", "c"]),
                             st.sampled_from(["isa.x", "isa.y", "has.z"]),
                             st.booleans(),
                             st.floats(0, 1),
                             st.sampled_from(list(Provenance))), max_size=40)


def _apply(ops):
    bank = BeliefBank()
    for e, t, label, w, prov in ops:
        bank.upsert(Belief(SentenceKey(e, t), label, 1.0 if prov is Provenance.HUMAN else w, prov))
    return bank


@given(upserts)
def test_size_bounded_by_distinct_keys(ops):
    bank = _apply(ops)
    assert len(bank) <= len({(e, t) for e, t, *_ in ops})


@given(upserts)
def test_log_replays_to_current_state(ops):
    bank = _apply(ops)
    assert BeliefBank.replay(bank.log).beliefs == bank.beliefs


@settings(max_examples=30)
@given(upserts)
def test_save_load_round_trip(tmp_path_factory, ops):
    bank = _apply(ops)
    path = tmp_path_factory.mktemp("bank") / "b.jsonl"
    bank.save(path)
    assert BeliefBank.load(path) == bank
