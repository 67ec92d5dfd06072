"""Exhaustive ground truth: exact maximizers, exact distributions, submodularity
checks, the Lambert-W constant, and Monte-Carlo checks of the approximation
guarantees of smoothed double greedy."""

import functools
import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from . import dgreedy, kernels
from .dgreedy import LinkFunction
from .setfn import CutFn, ShiftedFn

MAX_UNCONSTRAINED_N = 22
MAX_CONSTRAINED_SETS = 10**6
MAX_ENUMERATE_N = 12
MAX_SEQUENCES = 10**6
TIE_RTOL = 1e-10


class InstanceTooLarge(ValueError):
    pass


class PreconditionError(ValueError):
    """The function does not satisfy a guarantee's hypotheses (distinct from a failed check)."""


def _mask_to_set(mask, n):
    return frozenset(i for i in range(n) if (mask >> i) & 1)


def _set_to_mask(S):
    m = 0
    for i in S:
        m |= 1 << i
    return m


def _cut_weights(f):
    if isinstance(f, CutFn) and not f.is_differentiable:
        return f.W, 0.0
    if isinstance(f, ShiftedFn):
        W, s = _cut_weights(f.inner)
        if W is not None:
            return W, s + float(f.shift)
    return None, 0.0


def values_table(f, nbits=None):
    """``f`` on every subset (or every subset of the first ``nbits`` items), by bitmask."""
    f = f.numeric()
    n = f.n
    W, shift = _cut_weights(f)
    if W is not None:
        return kernels.cut_values_all(W, nbits) - shift
    bits = n if nbits is None else nbits
    return np.array([float(f.evaluate(_mask_to_set(m, n))) for m in range(1 << bits)])


def _lex_key(S):
    return tuple(sorted(S))


def brute_force_max(f, k=None):
    """Exact maximizer ``(OPT, value)``; ties go to the lexicographically smallest sorted set."""
    f = f.numeric()
    n = f.n
    if k is None:
        if n > MAX_UNCONSTRAINED_N:
            raise InstanceTooLarge(f"2^{n} subsets exceeds the enumeration limit")
        W, _ = _cut_weights(f)
        if W is not None and n > 1:
            # f(S) = f(V - S) for cuts: enumerate subsets without the last item
            vals = values_table(f, n - 1)
            full = (1 << n) - 1
            best = vals.max()
            tol = TIE_RTOL * max(1.0, abs(best))
            cands = []
            for m in np.flatnonzero(vals >= best - tol):
                cands.append(_mask_to_set(int(m), n))
                cands.append(_mask_to_set(full ^ int(m), n))
        else:
            vals = values_table(f)
            best = vals.max()
            tol = TIE_RTOL * max(1.0, abs(best))
            cands = [_mask_to_set(int(m), n) for m in np.flatnonzero(vals >= best - tol)]
        opt = min(cands, key=_lex_key)
        return opt, float(f.evaluate(opt))
    if not 0 <= k <= n:
        raise ValueError(f"cardinality {k} out of range")
    if math.comb(n, k) > MAX_CONSTRAINED_SETS:
        raise InstanceTooLarge(f"C({n},{k}) subsets exceeds the enumeration limit")
    best_set, best = None, -math.inf
    for c in itertools.combinations(range(n), k):
        v = float(f.evaluate(c))
        if best_set is None or v > best + TIE_RTOL * max(1.0, abs(best)):
            best_set, best = frozenset(c), v
    return best_set, best


def enumerate_dgreedy(f, g, order=None):
    """Exact ``{set: probability}`` of double greedy (zero-probability sets omitted)."""
    f = f.numeric()
    if f.n > MAX_ENUMERATE_N:
        raise InstanceTooLarge(f"n={f.n} exceeds the enumeration limit {MAX_ENUMERATE_N}")
    order = dgreedy._as_order(order, f.n)
    table = {}

    def rec(state, prob):
        if state.done:
            table[frozenset(state.X)] = table.get(frozenset(state.X), 0.0) + prob
            return
        a, b = state.gains()
        p = ad.value_of(dgreedy.link_eval(g, a, b))
        if p > 0:
            s = state.copy()
            s.decide(True)
            rec(s, prob * p)
        if p < 1:
            state.decide(False)
            rec(state, prob * (1.0 - p))

    rec(f.incremental(order.perm), 1.0)
    return table


def enumerate_pgreedy(f, k, t):
    """Exact ``{set: probability}`` of soft greedy with cardinality ``k``."""
    f = f.numeric()
    n = f.n
    if math.perm(n, k) > MAX_SEQUENCES:
        raise InstanceTooLarge(f"{math.perm(n, k)} sequences exceeds the enumeration limit")
    from .pgreedy import _scaled_gains, _softmax

    table = {}

    def rec(X, prob):
        if len(X) == k:
            S = frozenset(X)
            table[S] = table.get(S, 0.0) + prob
            return
        items, z = _scaled_gains(f, X, t)
        for e, p in zip(items, _softmax(z)):
            rec(X + [e], prob * float(p))

    rec([], 1.0)
    return table


def enumerate_distribution(f, algo):
    """Dispatch on an algorithm config (``DGreedyAlgo`` or ``PGreedyAlgo`` with ``k``)."""
    if algo.name == "dgreedy":
        return enumerate_dgreedy(f, algo.link, algo.order_for(f.n))
    raise ValueError("use enumerate_pgreedy(f, k, t) for cardinality-constrained greedy")


def check_submodular(f, exhaustive_limit=8, rtol=1e-12):
    """Return ``(True, None)`` or ``(False, witness)``.

    Up to ``exhaustive_limit`` items every ``A <= B <= V - e`` is checked;
    above it the equivalent pairwise condition
    ``f(S+i) + f(S+j) >= f(S+i+j) + f(S)`` is checked on the value table.
    """
    vals = values_table(f)
    n = f.n
    tol = rtol * max(1.0, float(np.abs(vals).max()))
    if n <= exhaustive_limit:
        for e in range(n):
            be = 1 << e
            rest = [i for i in range(n) if i != e]
            for bmask_bits in range(1 << len(rest)):
                B = 0
                for j, i in enumerate(rest):
                    if (bmask_bits >> j) & 1:
                        B |= 1 << i
                gB = vals[B | be] - vals[B]
                A = B
                while True:
                    gA = vals[A | be] - vals[A]
                    if gA < gB - tol:
                        return False, {"e": e, "A": _mask_to_set(A, n), "B": _mask_to_set(B, n),
                                       "gain_A": float(gA), "gain_B": float(gB)}
                    if A == 0:
                        break
                    A = (A - 1) & B
        return True, None
    masks = np.arange(1 << n)
    for i in range(n):
        for j in range(i + 1, n):
            bi, bj = 1 << i, 1 << j
            S = masks[(masks & (bi | bj)) == 0]
            lhs = vals[S | bi] + vals[S | bj]
            rhs = vals[S | bi | bj] + vals[S]
            bad = np.flatnonzero(lhs < rhs - tol)
            if bad.size:
                s = int(S[bad[0]])
                return False, {"e": j, "A": _mask_to_set(s, n), "B": _mask_to_set(s | bi, n),
                               "gain_A": float(vals[s | bj] - vals[s]),
                               "gain_B": float(vals[s | bi | bj] - vals[s | bi])}
    return True, None


def lambert_w(x, tol=1e-15, max_iter=100):
    """Principal branch of the Lambert-W function for ``x >= 0`` by Newton's method."""
    if x < 0:
        raise ValueError("lambert_w implemented for x >= 0 only")
    if x == 0:
        return 0.0
    w = math.log1p(x)
    for _ in range(max_iter):
        ew = math.exp(w)
        step = (w * ew - x) / (ew * (w + 1.0))
        w -= step
        if abs(step) <= tol * max(1.0, abs(w)):
            break
    return w


@functools.cache
def lambert_w_inv_e():
    return lambert_w(math.exp(-1.0))


THEOREMS = {
    1: ("g4", 0.5),
    2: ("g3", 1.0 / 3.0),
}


def temperature_bound(theorem, epsilon, n):
    """Largest admissible temperature (exclusive) for the given guarantee."""
    if theorem == 1:
        return 2.0 * epsilon / (n * math.log(2.0))
    if theorem == 2:
        return 3.0 * epsilon / (n * lambert_w_inv_e())
    raise ValueError(f"unknown theorem {theorem!r}")


@dataclass(frozen=True)
class GuaranteeConfig:
    """``theorem`` 1 uses the softplus-ratio link (bound OPT/2 - eps), 2 the sigmoid link (OPT/3 - eps).

    With ``relative=True`` the epsilon is a fraction of the optimum.
    """

    epsilon: float
    theorem: int = 1
    num_runs: int = 20000
    seed: int = 0
    relative: bool = False
    t_fraction: float = 0.9

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ad.ConfigError("epsilon must be positive")
        if self.theorem not in THEOREMS:
            raise ad.ConfigError("theorem must be 1 or 2")
        if self.num_runs < 10**4:
            raise ad.ConfigError("num_runs must be at least 10^4")
        if not 0 < self.t_fraction < 1:
            raise ad.ConfigError("t_fraction must lie in (0, 1)")


@dataclass
class GuaranteeReport:
    theorem: int
    n: int
    opt: float
    epsilon: float
    t: float
    t_bound: float
    num_runs: int
    mean: float
    stderr: float
    bound: float
    passed: bool

    def to_dict(self):
        return asdict(self)


def check_preconditions(f, rtol=1e-12):
    vals = values_table(f)
    tol = rtol * max(1.0, float(np.abs(vals).max()))
    if vals.min() < -tol:
        raise PreconditionError(f"function is negative somewhere (min {vals.min():.6g}); shift it first")
    ok, witness = check_submodular(f)
    if not ok:
        raise PreconditionError(f"function is not submodular: {witness}")
    return vals


def verify_guarantee(f, cfg):
    """Monte-Carlo check that ``E f(X) >= ratio * OPT - eps`` at 90% of the temperature bound."""
    vals = check_preconditions(f)
    n = f.n
    opt = float(vals.max())
    eps = cfg.epsilon * opt if cfg.relative else cfg.epsilon
    if not eps > 0:
        raise PreconditionError("epsilon resolves to zero (is OPT zero?)")
    link_name, ratio = THEOREMS[cfg.theorem]
    t_bound = temperature_bound(cfg.theorem, eps, n)
    t = cfg.t_fraction * t_bound
    g = LinkFunction(link_name, t)
    X = dgreedy.sample_many(f, g, None, cfg.num_runs, np.random.default_rng(cfg.seed))
    masks = X.astype(np.int64) @ (np.int64(1) << np.arange(n, dtype=np.int64))
    samples = vals[masks]
    mean = float(samples.mean())
    stderr = float(samples.std(ddof=1) / math.sqrt(len(samples)))
    bound = ratio * opt - eps
    return GuaranteeReport(cfg.theorem, n, opt, eps, t, t_bound, cfg.num_runs,
                           mean, stderr, bound, mean + 3.0 * stderr >= bound)
