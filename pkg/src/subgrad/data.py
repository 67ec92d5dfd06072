"""Datasets and persistence.

* synthetic max-cut corpus: uniform points, a projection, an RBF-kernel graph
  and the exact maximum cut of that graph;
* registry files (one set of item ids per line) and frequency ordering;
* planted FLID registries sampled through double greedy;
* JSON checkpoints.

All generators are pure functions of their arguments and seed.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import dgreedy, oracle
from .dgreedy import ItemOrder, LinkFunction
from .setfn import CutFn, FlidFn

FORMAT_VERSION = 1
RBF_CONVENTION = "exp(-||x_i - x_j||^2 / (2 gamma^2))"


class DataError(ValueError):
    pass


class RegistryFormatError(DataError):
    pass


class CheckpointParseError(DataError):
    pass


class CheckpointVersionError(DataError):
    pass


class CheckpointShapeError(DataError):
    pass


# ---------------------------------------------------------------------------
# JSON with fixed float formatting

def _fmt_float(x):
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    s = format(x, ".17g")
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def _scalar(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return _fmt_float(float(x))
    if isinstance(x, str):
        return json.dumps(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _dump(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_dump(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_scalar(v) for v in obj) + "]"
        items = [pad + _dump(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    return _scalar(obj)


def dumps(obj, indent=1):
    """JSON text with every float written to 17 significant digits."""
    return _dump(obj, indent, 0) + "\n"


def write_json(obj, path):
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointParseError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# max-cut corpus

def rbf_graph(points, gamma):
    """Kernel weights ``w_ij = exp(-||p_i - p_j||^2 / (2 gamma^2))`` with a zero diagonal.

    ``points`` is an ``n x k`` float array, or a sequence of node vectors for a
    differentiable graph (returns an object array sharing one node per edge).
    """
    if not gamma > 0:
        raise ad.ConfigError("RBF bandwidth must be positive")
    scale = -1.0 / (2.0 * gamma * gamma)
    numeric = not any(ad.is_node(v) for p in points for v in np.ravel(p))
    if numeric:
        P = np.asarray(points, dtype=float)
        diff = P[:, None, :] - P[None, :, :]
        W = np.exp((diff * diff).sum(axis=-1) * scale)
        np.fill_diagonal(W, 0.0)
        return W
    n = len(points)
    W = np.zeros((n, n), dtype=object)
    for i in range(n):
        W[i, i] = 0.0
        for j in range(i + 1, n):
            diff = [a - b for a, b in zip(points[i], points[j])]
            w = ad.exp(ad.lincomb([ad.dot(diff, diff)], [scale]))
            W[i, j] = W[j, i] = w
    return W


def coordinate_projection(k, d):
    """``[I_k | 0]``: keep the first ``k`` coordinates."""
    P = np.zeros((k, d))
    P[:, :k] = np.eye(k)
    return P


@dataclass
class MaxCutExample:
    X: np.ndarray
    opt: frozenset
    opt_value: float

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def target(self):
        return self.opt


@dataclass
class MaxCutDataset:
    n: int
    d: int
    k: int
    gamma: float
    seed: int
    examples: list
    P: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.examples)

    def graph(self, i, P=None):
        P = self.P if P is None else P
        return CutFn(rbf_graph(self.examples[i].X @ np.asarray(P).T, self.gamma))

    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "n": self.n, "d": self.d, "k": self.k, "gamma": self.gamma, "seed": self.seed,
            "kernel": RBF_CONVENTION,
            "projection": self.P,
            "meta": self.meta,
            "examples": [{"X": ex.X, "opt": sorted(ex.opt), "opt_value": ex.opt_value}
                         for ex in self.examples],
        }


def gen_maxcut_dataset(m, n, d=10, k=5, gamma=0.3, seed=0, meta=None):
    """``m`` graphs on ``n`` uniform points in ``[0,1]^d`` projected by ``[I_k | 0]``."""
    if n > oracle.MAX_UNCONSTRAINED_N:
        raise oracle.InstanceTooLarge(f"n={n} is too large for exact maximum cut")
    if k > d:
        raise ValueError("projection dimension k must not exceed d")
    P = coordinate_projection(k, d)
    examples = []
    for child in np.random.SeedSequence(seed).spawn(m):
        X = np.random.default_rng(child).random((n, d))
        opt, val = oracle.brute_force_max(CutFn(rbf_graph(X @ P.T, gamma)))
        examples.append(MaxCutExample(X, opt, val))
    return MaxCutDataset(n, d, k, gamma, seed, examples, P, dict(meta or {}))


def save_maxcut_dataset(ds, path):
    write_json(ds.to_dict(), path)


def load_maxcut_dataset(path):
    try:
        raw = read_json(path)
    except OSError as exc:
        raise DataError(str(exc)) from None
    if raw.get("format_version") != FORMAT_VERSION:
        raise CheckpointVersionError(f"{path}: unsupported format_version {raw.get('format_version')!r}")
    try:
        n, d = int(raw["n"]), int(raw["d"])
        examples = []
        for ex in raw["examples"]:
            X = np.asarray(ex["X"], dtype=float)
            if X.shape != (n, d):
                raise CheckpointShapeError(f"{path}: example feature matrix has shape {X.shape}")
            examples.append(MaxCutExample(X, frozenset(ex["opt"]), float(ex["opt_value"])))
        P = np.asarray(raw["projection"], dtype=float)
        return MaxCutDataset(n, d, int(raw["k"]), float(raw["gamma"]), raw["seed"], examples, P,
                             raw.get("meta", {}))
    except (KeyError, TypeError) as exc:
        raise CheckpointParseError(f"{path}: missing or malformed field {exc}") from None


def random_cut_weights(n, rng, density=1.0):
    """Symmetric non-negative weights, uniform on [0, 1) with edge probability ``density``."""
    rng = np.random.default_rng(rng)
    W = rng.random((n, n)) * (rng.random((n, n)) < density)
    W = np.triu(W, 1)
    return W + W.T


# ---------------------------------------------------------------------------
# registries

@dataclass
class RegistryDataset:
    n: int
    registries: list
    folds: list | None = None

    def __post_init__(self):
        self.registries = [tuple(sorted(set(int(e) for e in r))) for r in self.registries]
        for r in self.registries:
            for e in r:
                if not 0 <= e < self.n:
                    raise DataError(f"item id {e} out of range for n={self.n}")

    def __len__(self):
        return len(self.registries)

    @property
    def frequencies(self):
        counts = np.zeros(self.n, dtype=np.int64)
        for r in self.registries:
            counts[list(r)] += 1
        return counts

    def assign_folds(self, num_folds, seed=0):
        perm = np.random.default_rng(seed).permutation(len(self.registries))
        folds = [0] * len(self.registries)
        for pos, i in enumerate(perm):
            folds[int(i)] = pos % num_folds
        return RegistryDataset(self.n, list(self.registries), folds)

    def split(self, fold):
        if self.folds is None:
            raise DataError("dataset has no fold assignment")
        train = [r for r, f in zip(self.registries, self.folds) if f != fold]
        test = [r for r, f in zip(self.registries, self.folds) if f == fold]
        return train, test


def order_by_frequency(ds):
    return ItemOrder.by_frequency(ds.frequencies)


def load_registries(path):
    """Parse a registry file: optional ``n=<int>`` header, then space-separated item ids per line.

    Blank lines are skipped. Without a header ``n`` is one more than the largest id.
    """
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(str(exc)) from None
    n = None
    regs = []
    for lineno, line in enumerate(lines, 1):
        s = line.strip()
        if not s:
            continue
        if s.startswith("n="):
            if n is not None or regs:
                raise RegistryFormatError(f"{path}:{lineno}: header must be the first line")
            try:
                n = int(s[2:])
            except ValueError:
                raise RegistryFormatError(f"{path}:{lineno}: malformed header {s!r}") from None
            continue
        try:
            ids = [int(tok) for tok in s.split()]
        except ValueError:
            raise RegistryFormatError(f"{path}:{lineno}: malformed line {s!r}") from None
        if any(e < 0 for e in ids):
            raise RegistryFormatError(f"{path}:{lineno}: negative item id")
        if n is not None and any(e >= n for e in ids):
            raise RegistryFormatError(f"{path}:{lineno}: item id out of range for n={n}")
        regs.append(ids)
    if not regs:
        raise DataError(f"{path}: no registries found")
    if n is None:
        n = max(max(r) for r in regs) + 1
    return RegistryDataset(n, regs)


def save_registries(ds, path):
    with open(path, "w") as fh:
        fh.write(f"n={ds.n}\n")
        for r in ds.registries:
            fh.write(" ".join(str(e) for e in r) + "\n")


def planted_flid(n=20, D=10, seed=0):
    """A ground-truth FLID: each item loads mainly on one latent dimension, so
    items sharing a dimension repel each other."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(-0.5, 1.5, size=n)
    W = rng.uniform(0.0, 0.2, size=(n, D))
    W[np.arange(n), rng.permutation(np.arange(n) % D)] += rng.uniform(2.0, 4.0, size=n)
    return FlidFn(u, W)


def gen_planted_registries(m=2000, n=20, D=10, seed=0, link=None):
    """Sample ``m`` registries from a planted FLID through double greedy (identity order)."""
    link = link or LinkFunction("g3", 1.0)
    truth = planted_flid(n, D, seed)
    X = dgreedy.sample_many(truth, link, ItemOrder.identity(n), m, np.random.default_rng([seed, 1]))
    regs = [tuple(np.flatnonzero(row)) for row in X]
    return RegistryDataset(n, regs), truth


# ---------------------------------------------------------------------------
# checkpoints

RNG_ALGORITHM = "PCG64"


@dataclass
class ModelCheckpoint:
    """Everything needed to rebuild a trained model and its likelihood."""

    model: dict
    algorithm: dict
    params: ad.ParamStore
    seed: int
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "format_version": FORMAT_VERSION,
            "model": self.model,
            "algorithm": self.algorithm,
            "rng": {"algorithm": RNG_ALGORITHM, "seed": self.seed},
            "params": {name: {"shape": list(arr.shape), "data": arr.ravel()}
                       for name, arr in self.params.items()},
            "meta": self.meta,
        }


def save_checkpoint(ckpt, path):
    write_json(ckpt.to_dict(), path)


def load_checkpoint(path, expected_shapes=None):
    """Read a checkpoint; ``expected_shapes`` (name -> shape) is checked when given."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(str(exc)) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointParseError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise CheckpointParseError(f"{path}: top level is not an object")
    if raw.get("format_version") != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format_version {raw.get('format_version')!r}, expected {FORMAT_VERSION}")
    try:
        params = ad.ParamStore()
        for name, entry in raw["params"].items():
            shape = tuple(int(s) for s in entry["shape"])
            data = np.asarray(entry["data"], dtype=np.float64)
            if data.size != math.prod(shape):
                raise CheckpointShapeError(
                    f"{path}: parameter {name!r} has {data.size} values for shape {shape}")
            params[name] = data.reshape(shape)
        if raw["rng"]["algorithm"] != RNG_ALGORITHM:
            raise CheckpointParseError(f"{path}: unsupported RNG {raw['rng']['algorithm']!r}")
        ckpt = ModelCheckpoint(raw["model"], raw["algorithm"], params, raw["rng"]["seed"],
                               raw.get("meta", {}))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise CheckpointParseError(f"{path}: missing or malformed field {exc}") from None
    for name, shape in (expected_shapes or {}).items():
        if name not in params or params[name].shape != tuple(shape):
            got = params[name].shape if name in params else None
            raise CheckpointShapeError(f"{path}: parameter {name!r} has shape {got}, expected {tuple(shape)}")
    return ckpt
