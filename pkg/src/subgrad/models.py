"""Parametric set-function families trained by maximum likelihood.

A model owns a :class:`ParamStore` and maps parameter values (floats, or
nodes on a tape) plus one example to a set function.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import dgreedy
from .setfn import CutFn, FlidFn, ModularFn


@dataclass(frozen=True)
class TrainingExample:
    """``target`` is the observed set; ``features`` is per-example input (``None`` for registries)."""

    index: int
    target: frozenset
    features: np.ndarray | None = None


def projected_rbf_graph(X, P, gamma):
    """RBF graph of the rows of ``X`` projected by ``P`` (``k x d``).

    Pairwise differences are formed in input space first, so a node-valued
    ``P`` costs ``k`` linear combinations per edge.
    """
    if not gamma > 0:
        raise ad.ConfigError("RBF bandwidth must be positive")
    X = np.asarray(X, dtype=float)
    P = np.asarray(P)
    scale = -1.0 / (2.0 * gamma * gamma)
    n = X.shape[0]
    if P.dtype != object:
        Z = X @ P.astype(float).T
        diff = Z[:, None, :] - Z[None, :, :]
        W = np.exp((diff * diff).sum(axis=-1) * scale)
        np.fill_diagonal(W, 0.0)
        return W
    W = np.zeros((n, n), dtype=object)
    for i in range(n):
        W[i, i] = 0.0
        for j in range(i + 1, n):
            z = ad.matvec(P, X[i] - X[j])
            W[i, j] = W[j, i] = ad.exp(ad.lincomb([ad.dot(z, z)], [scale]))
    return W


class ProjectionCutModel:
    """Cut function on the RBF graph of ``P x_i``; ``P`` is ``k x d``."""

    kind = "projection_cut"

    def __init__(self, k=5, d=10, gamma=0.3, params=None):
        if k > d:
            raise ValueError("projection dimension k must not exceed d")
        self.k, self.d, self.gamma = k, d, gamma
        self.params = params or ad.ParamStore({"P": np.zeros((k, d))})

    def init_params(self, rng):
        self.params["P"] = np.random.default_rng(rng).uniform(-0.1, 0.1, size=(self.k, self.d))
        return self

    def set_function(self, values, example):
        W = projected_rbf_graph(example.features, values["P"], self.gamma)
        return CutFn(W, validate=False)

    def config(self):
        return {"kind": self.kind, "k": self.k, "d": self.d, "gamma": self.gamma}

    def expected_shapes(self):
        return {"P": (self.k, self.d)}


class FlidModel:
    """FLID with utilities ``u`` and latent weights ``W = softplus(w_raw)`` (so ``W >= 0``)."""

    kind = "flid"

    def __init__(self, n, D=10, params=None):
        self.n, self.D = n, D
        self.params = params or ad.ParamStore({"u": np.zeros(n), "w_raw": np.zeros((n, D))})

    def init_params(self, rng, u=None):
        rng = np.random.default_rng(rng)
        self.params["u"] = np.zeros(self.n) if u is None else u
        self.params["w_raw"] = -2.0 + 0.5 * rng.standard_normal((self.n, self.D))
        return self

    @staticmethod
    def latent(w_raw):
        w_raw = np.asarray(w_raw)
        if w_raw.dtype != object:
            return np.logaddexp(0.0, w_raw)
        out = np.empty(w_raw.shape, dtype=object)
        for idx, v in np.ndenumerate(w_raw):
            out[idx] = ad.softplus_t(v, 1.0)
        return out

    def set_function(self, values, example=None):
        return FlidFn(values["u"], self.latent(values["w_raw"]))

    def config(self):
        return {"kind": self.kind, "n": self.n, "D": self.D}

    def expected_shapes(self):
        return {"u": (self.n,), "w_raw": (self.n, self.D)}


class ModularModel:
    """``f(S) = sum_{i in S} s_i``."""

    kind = "modular"

    def __init__(self, n, params=None):
        self.n = n
        self.params = params or ad.ParamStore({"s": np.zeros(n)})

    def init_params(self, rng=None):
        self.params["s"] = np.zeros(self.n)
        return self

    def set_function(self, values, example=None):
        return ModularFn(values["s"])

    def config(self):
        return {"kind": self.kind, "n": self.n}

    def expected_shapes(self):
        return {"s": (self.n,)}

    def fit_frequencies(self, targets, link, smoothing=0.5):
        """Maximum-likelihood weights under double greedy with ``link``.

        Items are independent for a modular function, with inclusion
        probability ``g(s, -s)``; each ``s_i`` solves ``g(s_i, -s_i) = freq_i``.
        ``smoothing`` pseudo-counts keep the frequencies away from 0 and 1.
        """
        if not link.smooth:
            raise ValueError("closed-form fit needs a smooth link")
        counts = np.zeros(self.n)
        for S in targets:
            counts[list(S)] += 1
        m = len(targets)
        freq = (counts + smoothing) / (m + 2.0 * smoothing)
        if link.kind == "sigmoid":
            s = 0.5 * link.t * np.log(freq / (1.0 - freq))
        else:
            s = np.array([_invert_link(link, q) for q in freq])
        self.params["s"] = s
        return self


def _invert_link(link, q, tol=1e-13):
    def p(s):
        return dgreedy.link_eval(link, s, -s)

    lo, hi = -1.0, 1.0
    while p(lo) > q:
        lo *= 2.0
    while p(hi) < q:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if p(mid) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


MODEL_KINDS = {
    ProjectionCutModel.kind: lambda c, p: ProjectionCutModel(c["k"], c["d"], c["gamma"], p),
    FlidModel.kind: lambda c, p: FlidModel(c["n"], c["D"], p),
    ModularModel.kind: lambda c, p: ModularModel(c["n"], p),
}


def model_from_config(config, params=None):
    try:
        make = MODEL_KINDS[config["kind"]]
    except KeyError:
        raise ValueError(f"unknown model kind {config.get('kind')!r}") from None
    model = make(config, params)
    if params is not None:
        for name, shape in model.expected_shapes().items():
            if name not in params or tuple(params[name].shape) != tuple(shape):
                raise ValueError(f"parameter {name!r} does not have shape {shape}")
    return model


def default_latent_dim(n):
    """10 latent dimensions for ground sets of at most 40 items, 20 above."""
    return 10 if n <= 40 else 20

