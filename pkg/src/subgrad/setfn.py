"""Submodular set functions with naive and incremental gain oracles.

Parameters may be float arrays (plain numeric evaluation) or object arrays of
:class:`~subgrad.autodiff.Node` (differentiable evaluation on a tape).
Subsets are handled as frozensets of item indices ``0..n-1``.
"""

import itertools

import numpy as np

from . import autodiff as ad


def as_subset(S, n):
    S = frozenset(int(e) for e in S)
    for e in S:
        if not 0 <= e < n:
            raise IndexError(f"item {e} out of range for ground set of size {n}")
    return S


def _is_object(arr):
    return isinstance(arr, np.ndarray) and arr.dtype == object


def _values(arr):
    if _is_object(arr):
        return np.vectorize(ad.value_of, otypes=[float])(arr) if arr.size else arr.astype(float)
    return np.asarray(arr, dtype=float)


class GroundSet:
    """``n`` items under a fixed enumeration, with an optional ``n x d`` feature matrix."""

    def __init__(self, n, features=None):
        if n < 1:
            raise ValueError("ground set must contain at least one item")
        self.n = int(n)
        if features is not None:
            features = np.asarray(features, dtype=float)
            if features.ndim != 2 or features.shape[0] != n:
                raise ValueError("feature matrix must have one row per item")
        self.features = features

    @property
    def items(self):
        return range(self.n)


class SetFunction:
    n = 0

    def evaluate(self, S):
        raise NotImplementedError

    def __call__(self, S):
        return self.evaluate(S)

    def gain_add(self, e, S):
        """Gain of adding ``e`` to ``S``."""
        S = as_subset(S, self.n)
        if e in S:
            raise ValueError(f"item {e} already in set")
        return self.evaluate(S | {e}) - self.evaluate(S)

    def gain_remove(self, e, S):
        """Gain of removing ``e`` from ``S``."""
        S = as_subset(S, self.n)
        if e not in S:
            raise ValueError(f"item {e} not in set")
        return self.evaluate(S - {e}) - self.evaluate(S)

    def gains_add_all(self, X):
        """``{e: gain_add(e, X)}`` for every ``e`` outside ``X``."""
        X = as_subset(X, self.n)
        fx = self.evaluate(X)
        return {e: self.evaluate(X | {e}) - fx for e in range(self.n) if e not in X}

    def incremental(self, order):
        return NaiveState(self, order)

    def numeric(self):
        """The same function with parameter nodes replaced by their values."""
        return self

    @property
    def is_differentiable(self):
        return False


class IncrementalState:
    """Walks the items of ``order`` producing double-greedy gains ``(a_i, b_i)``.

    ``X`` starts empty and ``Y`` starts as the ground set; every item is either
    added to ``X`` or removed from ``Y`` via :meth:`decide`.
    """

    def __init__(self, f, order):
        order = tuple(int(e) for e in order)
        if sorted(order) != list(range(f.n)):
            raise ValueError("order must be a permutation of the ground set")
        self.f = f
        self.order = order
        self.pos = 0
        self.X = set()
        self.Y = set(order)

    @property
    def done(self):
        return self.pos >= len(self.order)

    @property
    def item(self):
        if self.done:
            raise ValueError("all items have been decided")
        return self.order[self.pos]

    def gains(self):
        raise NotImplementedError

    def decide(self, include):
        e = self.item
        if include:
            self.X.add(e)
        else:
            self.Y.discard(e)
        self.pos += 1


class NaiveState(IncrementalState):
    """Fallback: two evaluations per step using cached ``f(X)`` and ``f(Y)``."""

    def __init__(self, f, order):
        super().__init__(f, order)
        self.fX = f.evaluate(frozenset())
        self.fY = f.evaluate(frozenset(self.Y))
        self._cache = None

    def gains(self):
        e = self.item
        fXe = self.f.evaluate(frozenset(self.X | {e}))
        fYe = self.f.evaluate(frozenset(self.Y - {e}))
        self._cache = (self.pos, fXe, fYe)
        return fXe - self.fX, fYe - self.fY

    def decide(self, include):
        e = self.item
        if self._cache is not None and self._cache[0] == self.pos:
            _, fXe, fYe = self._cache
        else:
            fXe = self.f.evaluate(frozenset(self.X | {e}))
            fYe = self.f.evaluate(frozenset(self.Y - {e}))
        if include:
            self.fX = fXe
        else:
            self.fY = fYe
        super().decide(include)

    def copy(self):
        new = NaiveState.__new__(NaiveState)
        new.__dict__.update(self.__dict__)
        new.X = set(self.X)
        new.Y = set(self.Y)
        return new


def incremental_gains(f, order, decisions):
    """Yield ``(a_i, b_i)`` for each step of a double-greedy decision prefix."""
    decisions = list(decisions)
    if len(decisions) > f.n:
        raise ValueError("more decisions than items")
    state = f.incremental(order)
    for x in decisions:
        if x not in (0, 1, True, False):
            raise ValueError(f"decision must be 0 or 1, got {x!r}")
        yield state.gains()
        state.decide(bool(x))


# ---------------------------------------------------------------------------

class ModularFn(SetFunction):
    """``f(S) = sum of s_e over S``."""

    def __init__(self, s):
        self.s = s if _is_object(s) else np.asarray(s, dtype=float)
        if self.s.ndim != 1:
            raise ValueError("modular weights must be a vector")
        self.n = len(self.s)

    def evaluate(self, S):
        S = as_subset(S, self.n)
        return ad.sum_(self.s[e] for e in sorted(S))

    def gains_add_all(self, X):
        X = as_subset(X, self.n)
        return {e: self.s[e] if _is_object(self.s) else float(self.s[e])
                for e in range(self.n) if e not in X}

    def incremental(self, order):
        return ModularState(self, order)

    def numeric(self):
        return ModularFn(_values(self.s))

    @property
    def is_differentiable(self):
        return _is_object(self.s)


class ModularState(IncrementalState):
    def gains(self):
        s = self.f.s[self.item]
        if isinstance(s, ad.Node):
            return s, -s
        return float(s), -float(s)

    def copy(self):
        new = ModularState.__new__(ModularState)
        new.__dict__.update(self.__dict__)
        new.X, new.Y = set(self.X), set(self.Y)
        return new


class CutFn(SetFunction):
    """Weighted cut ``f(S) = sum_{i in S, j not in S} w_ij`` of an undirected graph."""

    def __init__(self, W, validate=True):
        self.W = W if _is_object(W) else np.asarray(W, dtype=float)
        if self.W.ndim != 2 or self.W.shape[0] != self.W.shape[1]:
            raise ValueError("weight matrix must be square")
        self.n = self.W.shape[0]
        if validate:
            Wv = _values(self.W)
            if not np.array_equal(Wv, Wv.T):
                raise ValueError("weight matrix must be symmetric")
            if np.any(np.diag(Wv) != 0):
                raise ValueError("weight matrix must have a zero diagonal")
            if np.any(Wv < 0):
                raise ValueError("weights must be non-negative")

    def evaluate(self, S):
        S = as_subset(S, self.n)
        if not _is_object(self.W):
            x = np.zeros(self.n, dtype=bool)
            x[list(S)] = True
            return float(self.W[np.ix_(x, ~x)].sum())
        outside = [j for j in range(self.n) if j not in S]
        return ad.sum_(self.W[i, j] for i in sorted(S) for j in outside)

    def _row_terms(self, e, coeff):
        xs, cs = [], []
        for j in range(self.n):
            if j != e:
                xs.append(self.W[e, j])
                cs.append(coeff(j))
        return ad.lincomb(xs, cs)

    def gains_add_all(self, X):
        X = as_subset(X, self.n)
        if not _is_object(self.W):
            x = np.zeros(self.n, dtype=bool)
            x[list(X)] = True
            g = self.W.sum(axis=1) - 2.0 * self.W[:, x].sum(axis=1)
            return {e: float(g[e]) for e in range(self.n) if e not in X}
        return {e: self._row_terms(e, lambda j: -1.0 if j in X else 1.0)
                for e in range(self.n) if e not in X}

    def incremental(self, order):
        if _is_object(self.W):
            return CutNodeState(self, order)
        return CutState(self, order)

    def numeric(self):
        return CutFn(_values(self.W), validate=False)

    @property
    def is_differentiable(self):
        return _is_object(self.W)


class CutState(IncrementalState):
    """Keeps each item's weighted degree into ``X`` and into ``Y``."""

    def __init__(self, f, order):
        super().__init__(f, order)
        self.deg = f.W.sum(axis=1)
        self.dX = np.zeros(f.n)
        self.dY = self.deg.copy()

    def gains(self):
        e = self.item
        return float(self.deg[e] - 2.0 * self.dX[e]), float(2.0 * self.dY[e] - self.deg[e])

    def decide(self, include):
        e = self.item
        if include:
            self.dX += self.f.W[e]
        else:
            self.dY -= self.f.W[e]
        super().decide(include)

    def copy(self):
        new = CutState.__new__(CutState)
        new.__dict__.update(self.__dict__)
        new.X, new.Y = set(self.X), set(self.Y)
        new.dX, new.dY = self.dX.copy(), self.dY.copy()
        return new


class CutNodeState(IncrementalState):
    """Node-valued cut gains: one linear-combination node per gain."""

    def gains(self):
        e = self.item
        f, X, Y = self.f, self.X, self.Y
        a = f._row_terms(e, lambda j: -1.0 if j in X else 1.0)
        b = f._row_terms(e, lambda j: 1.0 if j in Y else -1.0)
        return a, b

    def copy(self):
        new = CutNodeState.__new__(CutNodeState)
        new.__dict__.update(self.__dict__)
        new.X, new.Y = set(self.X), set(self.Y)
        return new


class FacilityLocationFn(SetFunction):
    """``f(S) = max of w_e over S``, with ``f(empty) = 0``."""

    def __init__(self, w):
        self.w = w if _is_object(w) else np.asarray(w, dtype=float)
        self.n = len(self.w)
        if np.any(_values(self.w) < 0):
            raise ValueError("facility location weights must be non-negative")

    def evaluate(self, S):
        S = as_subset(S, self.n)
        if not S:
            return 0.0
        return ad.max_(self.w[e] for e in sorted(S))

    def gains_add_all(self, X):
        X = as_subset(X, self.n)
        c = self.evaluate(X)
        return {e: ad.max_([c, self.w[e]]) - c for e in range(self.n) if e not in X}

    def incremental(self, order):
        return FacilityState(self, order)

    def numeric(self):
        return FacilityLocationFn(_values(self.w))

    @property
    def is_differentiable(self):
        return _is_object(self.w)


def _suffix_max(column, order):
    """``out[i] = max over order[i:]`` (0 for the empty suffix)."""
    out = [0.0] * (len(order) + 1)
    for i in range(len(order) - 1, -1, -1):
        out[i] = ad.max_([column[order[i]], out[i + 1]])
    return out


class FacilityState(IncrementalState):
    """Running max ``c`` of ``X`` plus suffix maxima over the remaining order."""

    def __init__(self, f, order):
        super().__init__(f, order)
        self.c = 0.0
        self.suf = _suffix_max(f.w, self.order)
        self._cx = None

    def gains(self):
        e, i, c = self.item, self.pos, self.c
        cx = ad.max_([c, self.f.w[e]])
        self._cx = (i, cx)
        a = cx - c
        b = ad.max_([c, self.suf[i + 1]]) - ad.max_([c, self.suf[i]])
        return a, b

    def decide(self, include):
        if include:
            if self._cx is not None and self._cx[0] == self.pos:
                self.c = self._cx[1]
            else:
                self.c = ad.max_([self.c, self.f.w[self.item]])
        super().decide(include)

    def copy(self):
        new = FacilityState.__new__(FacilityState)
        new.__dict__.update(self.__dict__)
        new.X, new.Y = set(self.X), set(self.Y)
        return new


class FlidFn(SetFunction):
    """Facility-location diversity model.

    ``f(S) = sum_{i in S} u_i + sum_d (max_{i in S} w_id - sum_{i in S} w_id)``
    with ``w >= 0``; the second term is the (non-positive) diversity penalty.
    """

    def __init__(self, u, W):
        self.u = u if _is_object(u) else np.asarray(u, dtype=float)
        self.W = W if _is_object(W) else np.asarray(W, dtype=float)
        if self.W.ndim != 2 or self.W.shape[0] != len(self.u):
            raise ValueError("latent matrix must have one row per item")
        self.n, self.D = self.W.shape
        if np.any(_values(self.W) < 0):
            raise ValueError("latent weights must be non-negative")

    def div(self, S):
        S = sorted(as_subset(S, self.n))
        if not S:
            return 0.0
        xs, cs = self._div_terms(S)
        return ad.lincomb(xs, cs)

    def _div_terms(self, S):
        # per dimension: max first, then the members, so singletons cancel exactly
        xs, cs = [], []
        for d in range(self.D):
            xs.append(ad.max_(self.W[i, d] for i in S))
            cs.append(1.0)
            xs.extend(self.W[i, d] for i in S)
            cs.extend([-1.0] * len(S))
        return xs, cs

    def evaluate(self, S):
        S = sorted(as_subset(S, self.n))
        if not S:
            return 0.0
        xs, cs = self._div_terms(S)
        return ad.lincomb([self.u[i] for i in S] + xs, [1.0] * len(S) + cs)

    def _gain(self, e, c):
        mx = [ad.max_([c[d], self.W[e, d]]) for d in range(self.D)]
        xs = [self.u[e]] + mx + list(c) + [self.W[e, d] for d in range(self.D)]
        cs = [1.0] + [1.0] * self.D + [-1.0] * self.D + [-1.0] * self.D
        return ad.lincomb(xs, cs), mx

    def gains_add_all(self, X):
        X = sorted(as_subset(X, self.n))
        if not self.is_differentiable:
            c = self.W[X].max(axis=0) if X else np.zeros(self.D)
            g = self.u + (np.maximum(c, self.W) - c - self.W).sum(axis=1)
            return {e: float(g[e]) for e in range(self.n) if e not in X}
        c = [ad.max_(self.W[i, d] for i in X) if X else 0.0 for d in range(self.D)]
        return {e: self._gain(e, c)[0] for e in range(self.n) if e not in X}

    def incremental(self, order):
        if self.is_differentiable:
            return FlidState(self, order)
        return FlidArrayState(self, order)

    def numeric(self):
        return FlidFn(_values(self.u), _values(self.W))

    @property
    def is_differentiable(self):
        return _is_object(self.u) or _is_object(self.W)


class FlidState(IncrementalState):
    """Per-dimension running maxima of ``X`` and suffix maxima of the remaining order."""

    def __init__(self, f, order):
        super().__init__(f, order)
        self.c = [0.0] * f.D
        self.suf = [_suffix_max(f.W[:, d], self.order) for d in range(f.D)]
        self._mx = None

    def gains(self):
        f, e, i, c = self.f, self.item, self.pos, self.c
        a, mx = f._gain(e, c)
        self._mx = (i, mx)
        lo = [ad.max_([c[d], self.suf[d][i + 1]]) for d in range(f.D)]
        hi = [ad.max_([c[d], self.suf[d][i]]) for d in range(f.D)]
        xs = [f.u[e]] + lo + hi + [f.W[e, d] for d in range(f.D)]
        cs = [-1.0] + [1.0] * f.D + [-1.0] * f.D + [1.0] * f.D
        return a, ad.lincomb(xs, cs)

    def decide(self, include):
        if include:
            if self._mx is not None and self._mx[0] == self.pos:
                self.c = self._mx[1]
            else:
                e = self.item
                self.c = [ad.max_([self.c[d], self.f.W[e, d]]) for d in range(self.f.D)]
        super().decide(include)

    def copy(self):
        new = FlidState.__new__(FlidState)
        new.__dict__.update(self.__dict__)
        new.X, new.Y = set(self.X), set(self.Y)
        new.c = list(self.c)
        return new


class FlidArrayState(IncrementalState):
    """Numeric FLID gains with vectorized per-dimension maxima."""

    def __init__(self, f, order):
        super().__init__(f, order)
        self.c = np.zeros(f.D)
        W = f.W[list(self.order)]
        suf = np.zeros((f.n + 1, f.D))
        suf[:-1] = np.maximum.accumulate(W[::-1], axis=0)[::-1]
        self.suf = np.maximum(suf, 0.0)

    def gains(self):
        f, e, i, c = self.f, self.item, self.pos, self.c
        w = f.W[e]
        a = f.u[e] + float((np.maximum(c, w) - c - w).sum())
        b = -f.u[e] + float((np.maximum(c, self.suf[i + 1]) - np.maximum(c, self.suf[i]) + w).sum())
        return float(a), float(b)

    def decide(self, include):
        if include:
            self.c = np.maximum(self.c, self.f.W[self.item])
        super().decide(include)

    def copy(self):
        new = FlidArrayState.__new__(FlidArrayState)
        new.__dict__.update(self.__dict__)
        new.X, new.Y = set(self.X), set(self.Y)
        return new


class CallableFn(SetFunction):
    """Wrap an arbitrary ``frozenset -> value`` callable."""

    def __init__(self, n, fn):
        self.n = int(n)
        self.fn = fn

    def evaluate(self, S):
        return self.fn(as_subset(S, self.n))


class ShiftedFn(SetFunction):
    """``inner(S) - shift``; gains are those of ``inner``."""

    def __init__(self, inner, shift):
        self.inner = inner
        self.shift = shift
        self.n = inner.n

    def evaluate(self, S):
        return self.inner.evaluate(S) - self.shift

    def gains_add_all(self, X):
        return self.inner.gains_add_all(X)

    def incremental(self, order):
        return self.inner.incremental(order)

    def numeric(self):
        return ShiftedFn(self.inner.numeric(), ad.value_of(self.shift))

    @property
    def is_differentiable(self):
        return self.inner.is_differentiable


def toy_ordering_fn():
    """Two-item fixture ``f(S) = 2 + max_{i in S} w_i - |S|^2`` with ``w = (2, 1)``.

    f(empty)=2, f({0})=3, f({1})=2, f({0,1})=0. Double greedy with the hard
    link returns {1} under order (0, 1) and {0} under order (1, 0).
    """
    w = (2.0, 1.0)

    def f(S):
        return 2.0 + (max(w[i] for i in S) if S else 0.0) - len(S) ** 2

    return CallableFn(2, f)


SHIFT_ENUMERATION_LIMIT = 20


def all_subsets(n):
    for r in range(n + 1):
        for c in itertools.combinations(range(n), r):
            yield frozenset(c)


def shift_to_nonnegative(f, shift=None):
    """Shift ``f`` by its minimum over all subsets so that it becomes non-negative."""
    if shift is None:
        if f.n > SHIFT_ENUMERATION_LIMIT:
            raise ValueError(
                f"cannot enumerate 2^{f.n} subsets to find the minimum; supply shift explicitly")
        g = f.numeric()
        shift = min(float(g.evaluate(S)) for S in all_subsets(f.n))
    return ShiftedFn(f, shift)
