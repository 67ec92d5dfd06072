"""Probabilistic differentiable double greedy for unconstrained maximization.

Items are visited in a fixed order. For item ``e_i`` the add gain
``a_i = f(X + e_i) - f(X)`` and remove gain ``b_i = f(Y - e_i) - f(Y)`` are
compared by a link function ``g(a, b)`` giving the probability of keeping the
item. The procedure therefore defines a distribution over subsets whose log
likelihood is differentiable for the smooth links.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import kernels
from .setfn import CutFn, ShiftedFn, as_subset

_KINDS = {
    "hard": "hard", "g1": "hard",
    "ratio": "ratio", "g2": "ratio",
    "sigmoid": "sigmoid", "g3": "sigmoid",
    "softplus_ratio": "softplus_ratio", "g4": "softplus_ratio",
}
_CODES = {"hard": kernels.HARD, "ratio": kernels.RATIO,
          "sigmoid": kernels.SIGMOID, "softplus_ratio": kernels.SOFTPLUS_RATIO}
_SHORT = {"hard": "g1", "ratio": "g2", "sigmoid": "g3", "softplus_ratio": "g4"}


@dataclass(frozen=True)
class LinkFunction:
    """Decision rule ``g(a, b)``.

    hard (g1): ``1[a >= b]``; ratio (g2): ``[a]+ / ([a]+ + [b]+)``;
    sigmoid (g3): ``sigmoid((a - b) / t)``; softplus_ratio (g4): ratio of softplus_t.
    """

    kind: str
    t: float | None = None

    def __post_init__(self):
        kind = _KINDS.get(self.kind)
        if kind is None:
            raise ad.ConfigError(f"unknown link function {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind in ("sigmoid", "softplus_ratio"):
            if self.t is None:
                raise ad.ConfigError(f"link {kind} needs a temperature")
            object.__setattr__(self, "t", ad._check_t(self.t))
        else:
            object.__setattr__(self, "t", None)

    @property
    def name(self):
        return _SHORT[self.kind]

    @property
    def code(self):
        return _CODES[self.kind]

    @property
    def smooth(self):
        return self.kind in ("sigmoid", "softplus_ratio")

    def to_dict(self):
        return {"kind": self.name, "t": self.t}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d.get("t"))


def link_eval(g, a, b):
    """Inclusion probability ``g(a, b)``; a node for the smooth links when gains are nodes."""
    if g.kind == "hard":
        return 1.0 if ad.value_of(a) >= ad.value_of(b) else 0.0
    if g.kind == "ratio":
        ap = max(ad.value_of(a), 0.0)
        bp = max(ad.value_of(b), 0.0)
        return 0.5 if ap + bp == 0.0 else ap / (ap + bp)
    if g.kind == "sigmoid":
        return ad.sigmoid_t(a, b, g.t)
    # a'/(a'+b') as a sigmoid of log-softplus terms, finite when both underflow
    return ad.sigmoid_t(ad.log_softplus_t(a, g.t), ad.log_softplus_t(b, g.t), 1.0)


def log_link(g, a, b, include):
    """``log g(a, b)`` if ``include`` else ``log(1 - g(a, b))``, computed stably."""
    if g.kind == "sigmoid":
        return ad.log_sigmoid_t(a, b, g.t) if include else ad.log_sigmoid_t(b, a, g.t)
    if g.kind == "softplus_ratio":
        la = ad.log_softplus_t(a, g.t)
        lb = ad.log_softplus_t(b, g.t)
        den = ad.logsumexp([la, lb])
        return (la - den) if include else (lb - den)
    p = link_eval(g, a, b)
    q = p if include else 1.0 - p
    return math.log(q) if q > 0 else -math.inf


@dataclass(frozen=True)
class ItemOrder:
    perm: tuple
    provenance: str = "explicit"

    def __post_init__(self):
        perm = tuple(int(e) for e in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError("item order must be a permutation of 0..n-1")
        object.__setattr__(self, "perm", perm)

    def __len__(self):
        return len(self.perm)

    def __iter__(self):
        return iter(self.perm)

    @classmethod
    def identity(cls, n):
        return cls(tuple(range(n)), "identity")

    @classmethod
    def explicit(cls, perm):
        return cls(tuple(perm), "explicit")

    @classmethod
    def by_frequency(cls, counts):
        """Descending empirical frequency, ties broken by ascending item id."""
        counts = list(counts)
        perm = sorted(range(len(counts)), key=lambda e: (-counts[e], e))
        return cls(tuple(perm), "by-empirical-frequency")


def _as_order(order, n):
    if order is None:
        return ItemOrder.identity(n)
    if not isinstance(order, ItemOrder):
        order = ItemOrder.explicit(order)
    if len(order) != n:
        raise ValueError("item order length does not match ground set size")
    return order


@dataclass
class StepTrace:
    items: list = field(default_factory=list)
    a: list = field(default_factory=list)
    b: list = field(default_factory=list)
    p: list = field(default_factory=list)
    x: list = field(default_factory=list)
    X: list = field(default_factory=list)
    Y: list = field(default_factory=list)


def _run(f, g, order, uniforms, trace=None):
    state = f.incremental(order.perm)
    for i in range(f.n):
        a, b = state.gains()
        a, b = ad.value_of(a), ad.value_of(b)
        p = ad.value_of(link_eval(g, a, b))
        include = uniforms[i] < p
        if trace is not None:
            trace.items.append(state.item)
            trace.a.append(a)
            trace.b.append(b)
            trace.p.append(p)
            trace.x.append(int(include))
        state.decide(include)
        if trace is not None:
            trace.X.append(frozenset(state.X))
            trace.Y.append(frozenset(state.Y))
    return frozenset(state.X)


def sample(f, g, order=None, rng=None):
    """Draw one set; returns ``(X, StepTrace)``.

    Consumes exactly ``n`` uniforms from ``rng`` (one per item, in visiting order).
    """
    rng = np.random.default_rng(rng)
    f = f.numeric()
    order = _as_order(order, f.n)
    trace = StepTrace()
    X = _run(f, g, order, rng.random(f.n), trace)
    return X, trace


def _cut_matrix(f):
    if isinstance(f, ShiftedFn):
        return _cut_matrix(f.inner)
    if isinstance(f, CutFn):
        return f.W
    return None


def sample_many(f, g, order, num, rng=None):
    """``num`` independent draws as a ``(num, n)`` uint8 inclusion matrix.

    Cut functions run on the compiled kernel; both paths consume the same
    uniforms, so results agree with repeated :func:`sample` calls.
    """
    rng = np.random.default_rng(rng)
    f = f.numeric()
    order = _as_order(order, f.n)
    U = rng.random((num, f.n))
    W = _cut_matrix(f)
    if W is not None:
        return kernels.dgreedy_sample_cut(W, np.asarray(order.perm), g.code, g.t or 1.0, U)
    out = np.zeros((num, f.n), dtype=np.uint8)
    for r in range(num):
        X = _run(f, g, order, U[r])
        out[r, list(X)] = 1
    return out


def log_likelihood(f, g, order, X):
    """Log probability that double greedy with link ``g`` returns ``X``.

    Returns a node when ``f`` has node parameters and ``g`` is smooth, a float
    otherwise. For the hard links an impossible set gives ``-inf``.
    """
    X = as_subset(X, f.n)
    order = _as_order(order, f.n)
    state = f.incremental(order.perm)
    terms = []
    for e in order.perm:
        a, b = state.gains()
        include = e in X
        term = log_link(g, a, b, include)
        if not ad.is_node(term) and term == -math.inf:
            return -math.inf
        terms.append(term)
        state.decide(include)
    return ad.sum_(terms)


def map_execute(f, g, order=None):
    """Deterministic run: keep an item iff ``g(a, b) >= 1/2``."""
    f = f.numeric()
    order = _as_order(order, f.n)
    state = f.incremental(order.perm)
    for _ in range(f.n):
        a, b = state.gains()
        state.decide(ad.value_of(link_eval(g, a, b)) >= 0.5)
    return frozenset(state.X)
