import pytest

from medpower import power
from medpower.bootstrap import bootstrap_distribution, intervals
from medpower.core import PATHS, DegenerateData, Method, PathEstimates, PathWeights, Scenario, ScenarioFailed
from medpower.power import RepeatOutcome, run_repeat, run_scenario
from medpower.regress import estimate_paths
from medpower.simulate import SeedRecipe, derive_seed, generate_dataset, make_rng


def scenario(**kw):
    base = dict(id=7, weights=PathWeights(0.3, 0.3, 0.0), n=30, resamples=200, repeats=10, master_seed=11)
    base.update(kw)
    return Scenario(**base)


def test_repeat_is_deterministic_with_fifteen_flags():
    s = scenario()
    r1, r2 = run_repeat(s, 3), run_repeat(s, 3)
    assert r1 == r2
    assert len(r1.significant) == 15
    assert set(r1.significant) == {(m, p) for m in Method for p in PATHS}


def test_repeat_depends_on_index_and_scenario():
    s = scenario()
    assert run_repeat(s, 0).point != run_repeat(s, 1).point
    assert run_repeat(s, 0).point != run_repeat(scenario(id=8), 0).point


def test_large_effect_mostly_significant():
    s = scenario(weights=PathWeights(0.5, 0.5, 0.0), n=200, resamples=500, repeats=20)
    hits = sum(run_repeat(s, r).significant[(Method.BC, "ab")] for r in range(20))
    assert hits >= 18


def test_power_values_on_tenths_grid():
    res = run_scenario(scenario())
    assert res.repeats_completed == 10
    for key in res.significant_count:
        p = res.power(*key)
        assert 0 <= p <= 1
        assert round(p * 10) == pytest.approx(p * 10, abs=1e-12)


def test_subset_of_methods():
    res = run_scenario(scenario(methods=(Method.BC,)))
    assert set(res.significant_count) == {(Method.BC, p) for p in PATHS}


@pytest.mark.parametrize("workers", [4, 16])
def test_same_result_for_any_worker_count(workers):
    s = scenario(repeats=16, resamples=100, n=20)
    assert run_scenario(s, workers=workers) == run_scenario(s, workers=1)


def test_bc_equal_to_percentile_gives_equal_flags():
    s = scenario(repeats=5)
    for r in range(5):
        out = run_repeat(s, r)
        rng = make_rng(derive_seed(SeedRecipe(s.master_seed, s.id, r)))
        d = generate_dataset(s.weights, s.n, rng)
        dist = bootstrap_distribution(d, s.resamples, rng)
        est = estimate_paths(d).as_dict()
        for p in PATHS:
            cis = intervals(dist[p], est[p], s.alpha, (Method.PER, Method.BC))
            if (cis[Method.PER].lower, cis[Method.PER].upper) == (cis[Method.BC].lower, cis[Method.BC].upper):
                assert out.significant[(Method.PER, p)] == out.significant[(Method.BC, p)]


def _fake_repeat(flips=(), failing=()):
    point = PathEstimates(0, 0, 0, 0, 0)

    def fake(s, r):
        if r in failing:
            raise DegenerateData("forced")
        flags = {(m, p): (r % 2 == 0) for m in s.methods for p in PATHS}
        if r in flips:
            flags[(Method.BC, "ab")] = not flags[(Method.BC, "ab")]
        return RepeatOutcome(r, point, flags, degenerate_redraws=1)

    return fake


def test_one_flipped_flag_moves_power_by_one_over_r(monkeypatch):
    s = scenario(repeats=40)
    monkeypatch.setattr(power, "run_repeat", _fake_repeat())
    base = run_scenario(s)
    monkeypatch.setattr(power, "run_repeat", _fake_repeat(flips={3}))
    flipped = run_scenario(s)
    for key in base.significant_count:
        delta = abs(flipped.power(*key) - base.power(*key))
        assert delta == (pytest.approx(1 / 40) if key == (Method.BC, "ab") else 0)
    assert base.degenerate_resample_count == 40


def test_failed_repeats_excluded_and_threshold(monkeypatch):
    monkeypatch.setattr(power, "run_repeat", _fake_repeat(failing={5}))
    res = run_scenario(scenario(repeats=200))
    assert res.repeats_completed == 199 and res.failed_repeats == 1
    assert res.power("PER", "a") == 100 / 199
    monkeypatch.setattr(power, "run_repeat", _fake_repeat(failing={1, 2, 3}))
    with pytest.raises(ScenarioFailed):
        run_scenario(scenario(repeats=200))
