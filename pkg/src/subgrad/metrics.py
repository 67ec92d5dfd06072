"""Evaluation metrics: cut ratio, relative likelihood, fill-in accuracy, MRR."""

import csv
import io

import numpy as np

from . import autodiff as ad


def cut_ratio(f_eval, S, opt_value):
    if not opt_value > 0:
        raise ValueError("optimal value must be positive")
    return float(ad.value_of(f_eval.evaluate(S))) / opt_value


def rll(model_ll, modular_ll):
    """Relative likelihood improvement over the modular baseline.

    Returns ``(|model - mod| / |mod|, sign)`` where ``sign`` is +1 when the
    model is more likely than the baseline, -1 when less, 0 when equal.
    """
    if not modular_ll < 0:
        raise ValueError("baseline log-likelihood must be negative")
    diff = model_ll - modular_ll
    sign = (diff > 0) - (diff < 0)
    return abs(diff) / abs(modular_ll), sign


class SetScorer:
    """``log P(S)`` of a trained model under its algorithm."""

    def __init__(self, model, algo, params=None, seed=0):
        self.model = model
        self.seed = seed
        self.algo = algo
        self.values = dict((model.params if params is None else params).items())
        self.f = model.set_function(self.values, None)
        self.n = self.f.n

    def log_prob(self, S):
        rng = np.random.default_rng(self.seed)
        return float(ad.value_of(self.algo.log_likelihood(self.f, S, rng)))


def _candidates(scorer, S):
    S = frozenset(S)
    if len(S) >= scorer.n:
        raise ValueError("no item left to add")
    return [(scorer.log_prob(S | {e}), e) for e in range(scorer.n) if e not in S]


def ranking(scorer, S):
    """Items outside ``S`` by decreasing ``P(S + e)``, ties to the lowest id."""
    return [e for _, e in sorted(_candidates(scorer, S), key=lambda c: (-c[0], c[1]))]


def next_item(scorer, S):
    best, best_e = None, None
    for lp, e in _candidates(scorer, S):
        if best is None or lp > best:
            best, best_e = lp, e
    return best_e


def _held_out(registries):
    return [tuple(sorted(R)) for R in registries if len(R) > 1]


def fill_in_scores(registries, scorer, normalized=False):
    """``(Acc, MRR)`` over registries with more than one item.

    Each item of a registry is held out in turn and ranked given the rest.
    The per-registry sums are averaged over registries; with ``normalized``
    each sum is first divided by the registry size.
    """
    regs = _held_out(registries)
    if not regs:
        raise ValueError("need at least one registry with two or more items")
    acc = mrr = 0.0
    for R in regs:
        hits = rr = 0.0
        for e in R:
            order = ranking(scorer, set(R) - {e})
            rank = order.index(e) + 1
            hits += rank == 1
            rr += 1.0 / rank
        if normalized:
            hits /= len(R)
            rr /= len(R)
        acc += hits
        mrr += rr
    return acc / len(regs), mrr / len(regs)


def fill_in_accuracy(registries, scorer, normalized=False):
    return fill_in_scores(registries, scorer, normalized)[0]


def mrr(registries, scorer, normalized=False):
    return fill_in_scores(registries, scorer, normalized)[1]


def csv_text(rows, columns, header_comment=None):
    """Rows (dicts) as CSV text with fixed column order and 17-digit floats."""
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in (r[c] for c in columns)])
    return buf.getvalue()
