"""Probabilistic differentiable greedy for cardinality-constrained maximization.

Each step draws the next item from a softmax over add gains at temperature
``t``, giving a distribution over sequences; a set's probability is the sum
over its orderings.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .setfn import as_subset

EXACT_THRESHOLD = 7


@dataclass(frozen=True)
class SetLikelihoodMode:
    """How ``log P(S)`` is computed.

    ``exact`` sums over all ``k!`` orderings; ``greedy`` uses the single
    greedy ordering of ``S``; ``random`` averages ``num_samples`` random
    orderings scaled by ``k!``, either in log space (default) or probability space.
    """

    kind: str = "exact"
    num_samples: int = 120
    space: str = "log"
    threshold: int = EXACT_THRESHOLD

    def __post_init__(self):
        if self.kind not in ("exact", "greedy", "random"):
            raise ad.ConfigError(f"unknown set likelihood mode {self.kind!r}")
        if self.space not in ("log", "prob"):
            raise ad.ConfigError(f"unknown estimator space {self.space!r}")
        if self.num_samples < 1:
            raise ad.ConfigError("num_samples must be positive")

    def to_dict(self):
        return {"kind": self.kind, "num_samples": self.num_samples,
                "space": self.space, "threshold": self.threshold}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _check_k(k, n):
    if not 1 <= k <= n:
        raise ValueError(f"cardinality {k} out of range 1..{n}")


def _softmax(vals):
    v = np.asarray(vals, dtype=float)
    v = np.exp(v - v.max())
    return v / v.sum()


def _scaled_gains(f, X, t):
    gains = f.gains_add_all(X)
    items = sorted(gains)
    return items, [ad.lincomb([gains[e]], [1.0 / t]) if ad.is_node(gains[e])
                   else ad.value_of(gains[e]) / t for e in items]


def sample(f, k, t, rng=None):
    """Draw a sequence of ``k`` distinct items."""
    t = ad._check_t(t)
    _check_k(k, f.n)
    rng = np.random.default_rng(rng)
    f = f.numeric()
    X = []
    for _ in range(k):
        items, z = _scaled_gains(f, X, t)
        p = _softmax(z)
        j = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
        X.append(items[min(j, len(items) - 1)])
    return tuple(X)


def _check_sequence(seq, n):
    seq = tuple(int(e) for e in seq)
    if len(set(seq)) != len(seq):
        raise ValueError("sequence contains repeated items")
    as_subset(seq, n)
    return seq


def log_prob_sequence(f, seq, t):
    """``log P(sequence)``: sum of per-step log-softmax terms."""
    t = ad._check_t(t)
    seq = _check_sequence(seq, f.n)
    terms = []
    X = []
    for e in seq:
        items, z = _scaled_gains(f, X, t)
        terms.append(z[items.index(e)] - ad.logsumexp(z))
        X.append(e)
    return ad.sum_(terms)


def _exact_log_prob(f, S, t):
    leaves = []

    def rec(X, remaining, acc):
        if not remaining:
            leaves.append(acc)
            return
        items, z = _scaled_gains(f, X, t)
        lse = ad.logsumexp(z)
        for e in sorted(remaining):
            term = z[items.index(e)] - lse
            rec(X + [e], remaining - {e}, term if acc is None else acc + term)

    rec([], set(S), None)
    return ad.logsumexp(leaves)


def greedy_permutation(f, S):
    """Order ``S`` by running greedy restricted to ``S`` (ties to the lowest index)."""
    f = f.numeric()
    S = as_subset(S, f.n)
    X = []
    rest = set(S)
    while rest:
        gains = f.gains_add_all(X)
        best = max(sorted(rest), key=lambda e: (ad.value_of(gains[e]), -e))
        X.append(best)
        rest.discard(best)
    return tuple(X)


def log_prob_set(f, S, t, mode=None, rng=None):
    """``log P(S)`` under the set distribution, computed according to ``mode``."""
    mode = mode or SetLikelihoodMode()
    t = ad._check_t(t)
    S = as_subset(S, f.n)
    k = len(S)
    _check_k(k, f.n)
    if mode.kind == "exact":
        if k > mode.threshold:
            raise ValueError(
                f"exact set likelihood needs {k}! orderings (threshold {mode.threshold}); "
                "use the 'greedy' or 'random' approximation")
        return _exact_log_prob(f, S, t)
    if mode.kind == "greedy":
        return log_prob_sequence(f, greedy_permutation(f, S), t)
    rng = np.random.default_rng(rng)
    items = np.array(sorted(S))
    logs = [log_prob_sequence(f, rng.permutation(items), t) for _ in range(mode.num_samples)]
    log_kfact = math.lgamma(k + 1)
    m = mode.num_samples
    if mode.space == "log":
        return ad.lincomb(logs, [1.0 / m] * m, log_kfact)
    return ad.logsumexp(logs) + (log_kfact - math.log(m))


def greedy_map(f, k):
    """Standard greedy: ``k`` argmax-gain picks, ties to the lowest index."""
    _check_k(k, f.n)
    f = f.numeric()
    X = []
    for _ in range(k):
        gains = f.gains_add_all(X)
        X.append(max(sorted(gains), key=lambda e: (ad.value_of(gains[e]), -e)))
    return frozenset(X)
