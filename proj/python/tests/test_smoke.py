import math

import pytest

import causerl


def tiny_config():
    return {
        "folds": 2,
        "dev_topics": 1,
        "seeds": [1],
        "synth_vocab_size": 60,
        "synth_n_patterns": 8,
        "synth_n_external": 20,
        "synth_n_eci": 40,
        "synth_examples_per_doc": 5,
        "synth_docs_per_topic": 2,
        "embedding_dim": 6,
        "hidden": 3,
        "selfrl_head_hidden": 4,
        "selfrl_head_dim": 3,
        "selfrl_batch_size": 8,
        "selfrl_max_steps": 3,
        "eci_classifier_hidden": 4,
        "eci_space_hidden": 4,
        "eci_space_dim": 3,
        "eci_external_batch_size": 8,
        "eci_max_epochs": 2,
        "eci_lr": 0.01,
    }


def test_conversion_matches_reference_row():
    original = "Someone_A finds Something_A >Cause/Enable> Someone_A gives Something_A to Someone_B"
    expected = "Someone_A finds Something_A, Someone_A gives Something_A to Someone_B."
    assert causerl.convert_statement(original, "GLU-GEN") == expected
    assert causerl.convert_statement(expected, "GLU-GEN") == expected


def test_errors_carry_their_kind():
    with pytest.raises(causerl.CauserlError) as info:
        causerl.convert_statement("no marker here", "ATOMIC")
    assert info.value.kind == "MarkerNotFound"
    with pytest.raises(causerl.CauserlError) as info:
        causerl.evaluate({"no_such_key": 1})
    assert info.value.kind == "InvalidConfig"


def test_numeric_identities():
    assert causerl.normalized_mse([1.0, 0.0], [0.0, 2.0]) == pytest.approx(2.0)
    value = causerl.contrastive_loss([[0.0, 0.0]], [[0.0, 0.0], [0.1, 0.0]], [0.0, 0.0], 0.1)
    assert value == pytest.approx(math.log(1.0 / (1.0 + math.e)), abs=1e-12)
    bounded = causerl.contrastive_loss(
        [[0.0, 0.0]], [[0.0, 0.0], [0.1, 0.0]], [0.0, 0.0], 0.1, form="infonce"
    )
    assert bounded == pytest.approx(math.log(1.0 + math.exp(-1.0)), abs=1e-12)
    assert causerl.prf1(3, 1, 2) == pytest.approx((0.75, 0.6, 2 * 0.75 * 0.6 / 1.35))


def test_configs_round_trip_keys():
    desk = causerl.desk_config()
    assert set(desk) == set(causerl.default_config())
    assert desk["selfrl_max_steps"] == 300


def test_synthetic_corpus_is_deterministic():
    a = causerl.synthetic_corpus(tiny_config())
    b = causerl.synthetic_corpus(tiny_config())
    assert a == b
    assert len(a["examples"]) == 40
    assert sum(ex["label"] for ex in a["examples"]) == round(40 / 3)
    assert a["folds"]["k"] == 2


def test_gradcheck_passes_and_catches_a_fault():
    ok = causerl.gradcheck(seeds=2)
    assert ok["passed"]
    assert len(ok["surfaces"]) == 4
    assert not causerl.gradcheck(seeds=2, mutation=True)["passed"]


def test_selfrl_stats():
    steps = causerl.train_selfrl(tiny_config())
    assert [s["step"] for s in steps] == [1, 2, 3]
    assert all(s["proj_std"] > 0 for s in steps)


def test_evaluate_is_reproducible():
    first = causerl.evaluate(tiny_config(), "full")
    second = causerl.evaluate(tiny_config(), "full")
    assert first == second
    assert len(first["rows"]) == 2
    assert first["manifest"]["config"]["variant"] == "full"
