import math

import numpy as np
import pytest

from subgrad import autodiff as ad
from subgrad import data, dgreedy, models, train
from subgrad.algorithms import DGreedyAlgo, PGreedyAlgo, algo_from_dict
from subgrad.dgreedy import ItemOrder, LinkFunction
from subgrad.models import FlidModel, ModularModel, ProjectionCutModel, TrainingExample
from subgrad.pgreedy import SetLikelihoodMode
from subgrad.setfn import ModularFn
from subgrad.train import TrainConfig

from conftest import central_diff, rel_err

G3 = DGreedyAlgo(LinkFunction("g3", 1.0))


def _regs(n, m, seed, link=LinkFunction("g3", 1.0)):
    rng = np.random.default_rng(seed)
    f = data.planted_flid(n, 3, seed)
    X = dgreedy.sample_many(f, link, None, m, rng)
    return [TrainingExample(i, frozenset(np.flatnonzero(r))) for i, r in enumerate(X)]


def _flid(n=6, D=3, seed=0):
    return FlidModel(n, D).init_params(np.random.default_rng(seed), u=np.random.default_rng(seed).normal(size=n))


def test_config_validation():
    with pytest.raises(ad.ConfigError):
        TrainConfig(G3, lr=-1.0)
    with pytest.raises(ad.ConfigError):
        TrainConfig(G3, beta1=1.0)
    with pytest.raises(ad.ConfigError):
        TrainConfig(G3, batch_size=0)
    assert TrainConfig(G3).to_dict()["beta2"] == 0.999


def test_nll_is_batch_mean():
    model = _flid()
    exs = _regs(6, 5, 1)
    batch = train.nll(exs, model, G3).value
    singles = [train.nll([e], model, G3).value for e in exs]
    assert batch == pytest.approx(np.mean(singles), abs=1e-12)
    lp = dgreedy.log_likelihood(model.set_function(dict(model.params.items())), G3.link, None, exs[0].target)
    assert singles[0] == pytest.approx(-lp, abs=1e-12)


def test_parameter_without_influence_has_zero_gradient():
    model = ModularModel(4)
    model.params["s"] = np.array([0.3, -0.2, 0.1, 0.0])
    model.params["unused"] = np.ones(2)
    loss = train.nll([TrainingExample(0, frozenset({1}))], model, G3)
    g = loss.tape.backward(loss)
    assert np.all(g["unused"] == 0.0)
    assert np.any(g["s"] != 0.0)


def test_hard_link_impossible_target_raises():
    model = ModularModel(2)
    model.params["s"] = np.array([1.0, 1.0])
    algo = DGreedyAlgo(LinkFunction("g1"))
    with pytest.raises(train.NonFiniteLikelihood, match="example 7"):
        train.nll([TrainingExample(7, frozenset())], model, algo)


def test_adam_zero_gradient_and_first_step():
    params = ad.ParamStore({"x": np.array([1.0, -2.0, 0.5])})
    cfg = TrainConfig(G3, lr=0.01)
    state = train.TrainState.zeros(params)
    train.adam_step(params, {"x": np.zeros(3)}, state, cfg)
    assert np.array_equal(params["x"], [1.0, -2.0, 0.5])
    params = ad.ParamStore({"x": np.array([1.0, -2.0, 0.5])})
    state = train.TrainState.zeros(params)
    g = np.array([3.0, -0.001, 20.0])
    train.adam_step(params, {"x": g}, state, cfg)
    assert params["x"] - np.array([1.0, -2.0, 0.5]) == pytest.approx(-0.01 * np.sign(g), abs=1e-7)
    with pytest.raises(ValueError):
        train.adam_step(params, {"x": np.zeros(2)}, state, cfg)


def test_training_is_deterministic_and_lr_zero_is_flat():
    exs = _regs(6, 30, 2)
    runs = []
    for _ in range(2):
        model = _flid(seed=3)
        ckpt, hist = train.train(exs, model, TrainConfig(G3, lr=0.05, batch_size=4, epochs=2, seed=5))
        runs.append((ckpt.params["u"].copy(), ckpt.params["w_raw"].copy(), hist))
    assert np.array_equal(runs[0][0], runs[1][0]) and np.array_equal(runs[0][1], runs[1][1])
    assert runs[0][2] == runs[1][2]
    model = _flid(seed=3)
    before = model.params.copy()
    _, hist = train.train(exs, model, TrainConfig(G3, lr=0.0, epochs=3))
    assert len({ll for _, ll in hist}) == 1 and [e for e, _ in hist] == [0, 1, 2, 3]
    assert np.array_equal(model.params["u"], before["u"])


def test_modular_self_consistency():
    n = 6
    rng = np.random.default_rng(0)
    truth = rng.normal(size=n)
    X = dgreedy.sample_many(ModularFn(truth), G3.link, None, 300, rng)
    exs = [TrainingExample(i, frozenset(np.flatnonzero(r))) for i, r in enumerate(X)]
    model = ModularModel(n)
    _, hist = train.train(exs, model, TrainConfig(G3, lr=0.05, batch_size=10, epochs=5))
    lls = [ll for _, ll in hist]
    assert all(b >= a for a, b in zip(lls, lls[1:]))


def test_modular_fit_frequencies_is_mle():
    regs = [frozenset({0}), frozenset({0, 1}), frozenset(), frozenset({0, 2})]
    for link in (LinkFunction("g3", 0.5), LinkFunction("g4", 0.5)):
        m = ModularModel(3).fit_frequencies(regs, link, smoothing=1e-9)
        f = m.set_function(dict(m.params.items()))
        # inclusion probability of item 1 equals its frequency
        p1 = dgreedy.link_eval(link, f.s[1], -f.s[1])
        assert p1 == pytest.approx(0.25, abs=1e-9)


def _fd_check(model, algo, exs):
    loss = train.nll(exs, model, algo)
    g = loss.tape.backward(loss)
    fd = central_diff(lambda p: train.nll(exs, model, algo, p).value, model.params)
    return rel_err(g, fd)


def test_end_to_end_gradient_dgreedy_cut():
    ds = data.gen_maxcut_dataset(2, 6, seed=0)
    model = ProjectionCutModel().init_params(1)
    exs = [TrainingExample(i, ex.opt, ex.X) for i, ex in enumerate(ds.examples)]
    assert _fd_check(model, DGreedyAlgo(LinkFunction("g4", 0.25)), exs) < 1e-5


@pytest.mark.parametrize("algo", [
    DGreedyAlgo(LinkFunction("g3", 0.5), ItemOrder.explicit([5, 0, 4, 1, 3, 2])),
    PGreedyAlgo(0.7, SetLikelihoodMode("exact")),
    PGreedyAlgo(0.7, SetLikelihoodMode("greedy")),
    PGreedyAlgo(0.7, SetLikelihoodMode("random", 4)),
])
def test_end_to_end_gradient_flid(algo):
    model = _flid(seed=4)
    exs = [e for e in _regs(6, 12, 3) if e.target][:3]
    assert _fd_check(model, algo, exs) < 1e-5


def test_model_from_config_round_trip():
    model = _flid(5, 2)
    back = models.model_from_config(model.config(), model.params)
    assert back.expected_shapes() == {"u": (5,), "w_raw": (5, 2)}
    with pytest.raises(ValueError):
        models.model_from_config({"kind": "flid", "n": 6, "D": 2}, model.params)
    with pytest.raises(ValueError):
        models.model_from_config({"kind": "nope"})
    assert models.default_latent_dim(40) == 10 and models.default_latent_dim(41) == 20
    algo = PGreedyAlgo(0.5, SetLikelihoodMode("random", 7, "prob"))
    assert algo_from_dict(algo.to_dict()) == algo


def test_checkpoint_reproduces_likelihood(tmp_path):
    exs = _regs(6, 20, 6)
    model = _flid(seed=1)
    ckpt, _ = train.train(exs, model, TrainConfig(G3, lr=0.05, epochs=1))
    data.save_checkpoint(ckpt, tmp_path / "c.json")
    back = data.load_checkpoint(tmp_path / "c.json")
    m2 = models.model_from_config(back.model, back.params)
    a2 = algo_from_dict(back.algorithm)
    assert train.mean_log_likelihood(exs, m2, a2) == train.mean_log_likelihood(exs, model, G3)
    assert math.isfinite(train.mean_log_likelihood(exs, m2, a2))
