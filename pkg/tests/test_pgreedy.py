import itertools
import math

import numpy as np
import pytest

from subgrad import autodiff as ad
from subgrad import oracle, pgreedy
from subgrad.pgreedy import SetLikelihoodMode
from subgrad.setfn import FacilityLocationFn, FlidFn, ModularFn

from conftest import central_diff, rel_err, tape_grad

# e^2 / (e + e^2) = sigmoid(1)
PICK_SECOND = 0.7310585786300049


def random_flid(n, seed, D=3):
    rng = np.random.default_rng(seed)
    return FlidFn(rng.normal(size=n), rng.random((n, D)))


def test_mode_validation():
    with pytest.raises(ad.ConfigError):
        SetLikelihoodMode("bogus")
    with pytest.raises(ad.ConfigError):
        SetLikelihoodMode("random", space="linear")
    m = SetLikelihoodMode("random", 10, "prob")
    assert SetLikelihoodMode.from_dict(m.to_dict()) == m


def test_sample_full_permutation():
    seq = pgreedy.sample(random_flid(5, 0), 5, 1.0, rng=3)
    assert sorted(seq) == list(range(5))
    with pytest.raises(ValueError):
        pgreedy.sample(random_flid(5, 0), 6, 1.0)
    with pytest.raises(ad.ConfigError):
        pgreedy.sample(random_flid(5, 0), 2, 0.0)


def test_modular_single_pick_probability():
    f = ModularFn([1.0, 2.0])
    assert math.exp(pgreedy.log_prob_sequence(f, (1,), 1.0)) == pytest.approx(PICK_SECOND, abs=1e-15)


def test_equal_weights_uniform_sequences():
    f = ModularFn(np.ones(4))
    for seq in itertools.permutations(range(4), 2):
        assert math.exp(pgreedy.log_prob_sequence(f, seq, 0.7)) == pytest.approx(1 / 12, abs=1e-15)
    for S in itertools.combinations(range(4), 2):
        for mode in (SetLikelihoodMode("exact"), SetLikelihoodMode("random", 5)):
            assert math.exp(pgreedy.log_prob_set(f, S, 0.7, mode, rng=0)) == pytest.approx(1 / 6, abs=1e-12)
        # a single ordering carries 1/k! of the mass
        g = pgreedy.log_prob_set(f, S, 0.7, SetLikelihoodMode("greedy"))
        assert math.exp(g) == pytest.approx(1 / 12, abs=1e-15)


def test_high_temperature_limit():
    f = ModularFn([3.0, -1.0, 0.5, 2.0, 1.0])
    lp = pgreedy.log_prob_sequence(f, (2, 0, 4), 1e9)
    assert lp == pytest.approx(-(math.log(5) + math.log(4) + math.log(3)), abs=1e-6)


def test_facility_two_items_hand_enumeration():
    f = FacilityLocationFn([3.0, 1.0])
    t = 0.5
    p0 = math.exp(3 / t) / (math.exp(3 / t) + math.exp(1 / t))
    # after picking 0 the only candidate is 1, after picking 1 the only one is 0
    assert math.exp(pgreedy.log_prob_sequence(f, (0, 1), t)) == pytest.approx(p0, abs=1e-15)
    assert math.exp(pgreedy.log_prob_sequence(f, (1, 0), t)) == pytest.approx(1 - p0, abs=1e-15)
    assert pgreedy.greedy_map(f, 1) == {0}


@pytest.mark.parametrize("k", [1, 2, 3])
def test_sequence_distribution_normalizes(k):
    f = random_flid(6, k)
    total = sum(math.exp(pgreedy.log_prob_sequence(f, s, 0.6)) for s in itertools.permutations(range(6), k))
    assert total == pytest.approx(1.0, abs=1e-9)


def test_exact_set_distribution_normalizes_and_dominates_greedy():
    f = random_flid(6, 5)
    total = 0.0
    for S in itertools.combinations(range(6), 3):
        ex = pgreedy.log_prob_set(f, S, 0.8)
        gr = pgreedy.log_prob_set(f, S, 0.8, SetLikelihoodMode("greedy"))
        assert gr < ex
        total += math.exp(ex)
    assert total == pytest.approx(1.0, abs=1e-9)
    S = (4,)
    assert pgreedy.log_prob_set(f, S, 0.8, SetLikelihoodMode("greedy")) == pytest.approx(
        pgreedy.log_prob_set(f, S, 0.8), abs=1e-14)


def test_exact_threshold():
    f = random_flid(9, 0)
    with pytest.raises(ValueError, match="greedy"):
        pgreedy.log_prob_set(f, range(8), 1.0)


def test_random_mode_estimators():
    f = random_flid(6, 2)
    S = (0, 3, 5)
    exact = pgreedy.log_prob_set(f, S, 0.9)
    rng = np.random.default_rng(0)
    est_prob = pgreedy.log_prob_set(f, S, 0.9, SetLikelihoodMode("random", 4000, "prob"), rng)
    est_log = pgreedy.log_prob_set(f, S, 0.9, SetLikelihoodMode("random", 4000, "log"), rng)
    assert est_prob == pytest.approx(exact, abs=0.02)
    # Jensen: averaging logs underestimates the log of the average
    assert est_log < est_prob


def test_greedy_map_examples():
    assert pgreedy.greedy_map(ModularFn([5.0, 1.0, 3.0]), 2) == {0, 2}
    assert pgreedy.greedy_map(ModularFn([2.0, 2.0, 1.0]), 1) == {0}
    assert pgreedy.greedy_map(ModularFn([5.0, 1.0, 3.0]) , 2) == pgreedy.greedy_map(ModularFn([50.0, 10.0, 30.0]), 2)


def test_greedy_map_approximation_on_monotone_flid():
    # u >= max_d w keeps every gain non-negative, so FLID is monotone here
    for seed in range(8):
        rng = np.random.default_rng(seed)
        n = 10
        W = rng.random((n, 3))
        f = FlidFn(W.sum(axis=1) + rng.random(n), W)
        for k in (2, 4):
            _, opt = oracle.brute_force_max(f, k)
            assert f.evaluate(pgreedy.greedy_map(f, k)) >= (1 - 1 / math.e) * opt - 1e-12


def test_sampler_frequencies_match_exact():
    f = random_flid(6, 9)
    t, k, N = 0.7, 2, 100_000
    rng = np.random.default_rng(3)
    counts = {}
    for _ in range(N):
        S = frozenset(pgreedy.sample(f, k, t, rng))
        counts[S] = counts.get(S, 0) + 1
    for S in itertools.combinations(range(6), k):
        p = math.exp(pgreedy.log_prob_set(f, S, t))
        se = math.sqrt(p * (1 - p) / N)
        assert abs(counts.get(frozenset(S), 0) / N - p) <= 4 * se


@pytest.mark.parametrize("mode", [SetLikelihoodMode("exact"), SetLikelihoodMode("greedy"),
                                  SetLikelihoodMode("random", 6), SetLikelihoodMode("random", 6, "prob")])
def test_set_likelihood_gradients(mode):
    rng = np.random.default_rng(4)
    params = ad.ParamStore({"u": rng.normal(size=5), "W": rng.random((5, 2)) + 0.05})
    S = (1, 2, 4)

    def fn(v):
        return pgreedy.log_prob_set(FlidFn(v["u"], v["W"]), S, 0.6, mode, np.random.default_rng(0))

    _, g = tape_grad(fn, params)
    fd = central_diff(lambda p: fn(p), params)
    assert rel_err(g, fd) < 1e-5
