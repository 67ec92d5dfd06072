"""Maximum-likelihood training of set-function parameters with Adam.

The objective is the mean negative log-likelihood of the observed sets under
a randomized maximizer (double greedy or soft greedy) run on the model's set
function. Batches are drawn by a seeded shuffle each epoch, so a run is a
pure function of (config, dataset, initial parameters).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .algorithms import DGreedyAlgo, PGreedyAlgo
from .data import ModelCheckpoint


class NonFiniteLikelihood(ArithmeticError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    algo: DGreedyAlgo | PGreedyAlgo
    lr: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 16
    epochs: int = 10
    lr_decay: float = 1.0
    weight_decay: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0 or not self.lr_decay > 0 or not self.eps > 0:
            raise ad.ConfigError("learning rate, decay and eps must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ad.ConfigError("Adam betas must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ad.ConfigError("batch size must be positive and epochs non-negative")
        if self.weight_decay < 0:
            raise ad.ConfigError("weight decay must be non-negative")

    def to_dict(self):
        return {"algo": self.algo.to_dict(), "lr": self.lr, "beta1": self.beta1,
                "beta2": self.beta2, "eps": self.eps, "batch_size": self.batch_size,
                "epochs": self.epochs, "lr_decay": self.lr_decay,
                "weight_decay": self.weight_decay, "seed": self.seed}


@dataclass
class TrainState:
    m: dict
    v: dict
    step: int = 0
    epoch: int = 0
    history: list = field(default_factory=list)

    @classmethod
    def zeros(cls, params):
        return cls({k: np.zeros_like(a) for k, a in params.items()},
                   {k: np.zeros_like(a) for k, a in params.items()})


_EVAL_STREAM = 2**32 - 1


def _example_rng(algo, seed, epoch, index):
    # only the sampled permutation estimator consumes randomness
    if isinstance(algo, PGreedyAlgo) and algo.mode.kind == "random":
        return np.random.default_rng([seed, epoch, index])
    return None


def example_log_likelihood(model, algo, values, ex, rng=None):
    f = model.set_function(values, ex)
    return algo.log_likelihood(f, ex.target, rng)


def nll(batch, model, algo, params=None, seed=0, epoch=0):
    """Mean negative log-likelihood of ``batch`` as one node on a fresh tape."""
    if not batch:
        raise ValueError("empty batch")
    params = model.params if params is None else params
    tape = ad.Tape()
    values = params.bind(tape)
    lls = []
    for ex in batch:
        ll = example_log_likelihood(model, algo, values, ex, _example_rng(algo, seed, epoch, ex.index))
        if not math.isfinite(ad.value_of(ll)):
            raise NonFiniteLikelihood(
                f"example {ex.index}: log-likelihood is {ad.value_of(ll)} (target impossible under the link)")
        lls.append(ll if ad.is_node(ll) else tape.const(ll))
    return ad.lincomb(lls, [-1.0 / len(lls)] * len(lls))


def adam_step(params, grads, state, config):
    """In-place bias-corrected Adam update with decoupled weight decay."""
    lr = config.lr * config.lr_decay ** state.epoch
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape or state.m[name].shape != p.shape:
            raise ValueError(f"gradient for {name!r} has shape {g.shape}, parameter {p.shape}")
        m = state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        v = state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        if config.weight_decay:
            p *= 1.0 - lr * config.weight_decay
        p -= lr * (m / c1) / (np.sqrt(v / c2) + config.eps)
    return params


def mean_log_likelihood(examples, model, algo, params=None, seed=0):
    """Numeric mean log-likelihood (no tape)."""
    params = model.params if params is None else params
    values = dict(params.items())
    total = 0.0
    for ex in examples:
        total += ad.value_of(example_log_likelihood(model, algo, values, ex,
                                                    _example_rng(algo, seed, _EVAL_STREAM, ex.index)))
    return total / len(examples)


def train(examples, model, config, log=None):
    """Train ``model.params`` in place; returns ``(ModelCheckpoint, history)``.

    ``history`` holds ``(epoch, mean train log-likelihood)`` for the initial
    parameters (epoch 0) and after every epoch.
    """
    if not examples:
        raise ValueError("training set is empty")
    params = model.params
    state = TrainState.zeros(params)
    ll = mean_log_likelihood(examples, model, config.algo, params, config.seed)
    state.history.append((0, ll))
    if log:
        log(0, ll)
    for epoch in range(config.epochs):
        state.epoch = epoch
        perm = np.random.default_rng([config.seed, epoch]).permutation(len(examples))
        for lo in range(0, len(perm), config.batch_size):
            batch = [examples[int(i)] for i in perm[lo:lo + config.batch_size]]
            loss = nll(batch, model, config.algo, params, config.seed, epoch)
            grads = loss.tape.backward(loss)
            adam_step(params, grads, state, config)
        ll = mean_log_likelihood(examples, model, config.algo, params, config.seed)
        state.history.append((epoch + 1, ll))
        if log:
            log(epoch + 1, ll)
    ckpt = ModelCheckpoint(model.config(), config.algo.to_dict(), params.copy(), config.seed,
                           {"train": config.to_dict()})
    return ckpt, state.history
