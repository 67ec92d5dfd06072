"""Experiment drivers shared by the command line and the acceptance suite."""

from dataclasses import dataclass

import numpy as np

from . import dgreedy, metrics, models, train
from .algorithms import DGreedyAlgo, PGreedyAlgo
from .dgreedy import LinkFunction
from .models import TrainingExample
from .setfn import CutFn


def maxcut_examples(ds):
    return [TrainingExample(i, ex.opt, ex.X) for i, ex in enumerate(ds.examples)]


def random_projection(k, d, seed):
    """Baseline projection with standard normal entries, one per experiment seed."""
    return np.random.default_rng([seed, 7]).standard_normal((k, d))


def train_maxcut(ds, link, lr=0.02, batch_size=16, epochs=10, seed=0, log=None):
    model = models.ProjectionCutModel(ds.k, ds.d, ds.gamma).init_params(np.random.default_rng([seed, 3]))
    cfg = train.TrainConfig(DGreedyAlgo(link), lr=lr, batch_size=batch_size, epochs=epochs, seed=seed)
    return train.train(maxcut_examples(ds), model, cfg, log)


@dataclass
class CutEval:
    projection: str
    mean_ratio: float
    stderr: float
    num_graphs: int


def eval_maxcut(ds, projections, link, mode="sample", samples=100, seed=0):
    """Mean cut ratio per projection.

    The algorithm runs on the graph induced by each projection; the returned
    set is scored on the true graph and divided by the optimum. ``sample``
    averages ``samples`` draws per graph, ``map`` uses the deterministic run.
    """
    out = []
    for name, P in projections.items():
        ratios = []
        for i, ex in enumerate(ds.examples):
            true_f = ds.graph(i)
            f = CutFn(models.projected_rbf_graph(ex.X, P, ds.gamma), validate=False)
            if mode == "map":
                vals = [true_f.evaluate(dgreedy.map_execute(f, link))]
            else:
                rng = np.random.default_rng([seed, i])
                X = dgreedy.sample_many(f, link, None, samples, rng)
                vals = [true_f.evaluate(np.flatnonzero(row)) for row in X]
            ratios.append(float(np.mean(vals)) / ex.opt_value)
        r = np.asarray(ratios)
        se = float(r.std(ddof=1) / np.sqrt(len(r))) if len(r) > 1 else 0.0
        out.append(CutEval(name, float(r.mean()), se, len(r)))
    return out


def sweep_temperature(ds, temps, lr=0.02, batch_size=16, epochs=10, seed=0):
    """``{t: history}`` for the softplus-ratio link at each temperature."""
    return {t: train_maxcut(ds, LinkFunction("g4", t), lr, batch_size, epochs, seed)[1] for t in temps}


def parse_t_list(text):
    """``2^-5..2^3`` (powers of two, inclusive) or a comma list such as ``0.125,2^-2``."""
    text = text.strip()
    if ".." in text:
        lo, hi = (s.strip() for s in text.split("..", 1))
        if not (lo.startswith("2^") and hi.startswith("2^")):
            raise ValueError(f"range form needs powers of two: {text!r}")
        a, b = int(lo[2:]), int(hi[2:])
        if a > b:
            raise ValueError(f"empty temperature range {text!r}")
        return [2.0 ** e for e in range(a, b + 1)]
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        out.append(2.0 ** int(tok[2:]) if tok.startswith("2^") else float(tok))
    if any(not t > 0 for t in out):
        raise ValueError("temperatures must be positive")
    return out


# ---------------------------------------------------------------------------
# registries

def registry_examples(regs):
    return [TrainingExample(i, frozenset(R)) for i, R in enumerate(regs)]


def make_algo(name, link=None, order=None, t=1.0, mode=None):
    if name == "dgreedy":
        return DGreedyAlgo(link or LinkFunction("g3", t), order)
    if name == "pgreedy":
        return PGreedyAlgo(t, mode) if mode else PGreedyAlgo(t)
    raise ValueError(f"unknown algorithm {name!r}")


def modular_baseline(n, train_regs, link, order=None):
    model = models.ModularModel(n).fit_frequencies(train_regs, link)
    return model, DGreedyAlgo(link, order)


def train_flid(n, D, train_regs, algo, lr=0.01, lr_decay=0.9, batch_size=1, epochs=20, seed=0,
               log=None):
    model = models.FlidModel(n, D).init_params(np.random.default_rng([seed, 5]))
    cfg = train.TrainConfig(algo, lr=lr, lr_decay=lr_decay, batch_size=batch_size, epochs=epochs,
                            seed=seed)
    return train.train(registry_examples(train_regs), model, cfg, log)


def heldout_log_likelihood(model, algo, regs, seed=0):
    """Summed log-likelihood of held-out registries."""
    return train.mean_log_likelihood(registry_examples(regs), model, algo, seed=seed) * len(regs)
