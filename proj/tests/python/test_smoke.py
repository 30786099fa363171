import math

import pytest

import fairexp


def test_ndcg_hand_value():
    assert fairexp.ndcg_at_k([0, 4], 2) == pytest.approx(1 / math.log2(3), abs=1e-12)


def test_cumulative_ndcg_limit():
    assert fairexp.cumulative_ndcg([1.0] * 200000, 0.9995) == pytest.approx(2000.0, abs=1e-6)


def test_template_exposure():
    a, b = fairexp.template_exposure("AABAB")
    assert a == pytest.approx(1 + 1 / math.log2(3) + 1 / math.log2(5), abs=1e-12)
    assert b == pytest.approx(1 / math.log2(4) + 1 / math.log2(6), abs=1e-12)


def test_fair_swap_worked_example():
    order, regret = fairexp.fair_swap([[0, 1], [2, 3, 4]], "ABAAB", "AABAB", seed=3)
    assert regret == 1
    assert "".join("ABAAB"[d] for d in order) == "AABAB"


def test_clicks_are_seeded():
    assert fairexp.simulate_clicks([4, 0, 3], "inf", 9) == fairexp.simulate_clicks([4, 0, 3], "inf", 9)


def test_run_small_experiment():
    out = fairexp.run_experiment(rounds=30, k=5, syn_queries=20, syn_test_queries=5, epsilon=0.2, seed=1)
    assert len(out["trace"]["online_ndcg"]) == 30
    assert 0.0 <= out["summary"]["final_offline_ndcg"] <= 1.0
    assert out["summary"]["final_unfairness"] == abs(out["trace"]["cumulative_unfairness"][-1])


def test_bad_setting_raises():
    with pytest.raises(ValueError):
        fairexp.run_experiment(no_such_key=1)
