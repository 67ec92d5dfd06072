"""Reverse-mode scalar autodiff on an append-only tape.

Every public operation accepts either plain floats or :class:`Node` objects.
With floats only, the operation evaluates numerically and returns a float, so
set functions and likelihoods can be written once and run both on a tape
(for gradients) and without one (for fast sampling and evaluation).

Example::

    tape = Tape()
    x = tape.variable("x", 3.0)
    y = x * x
    grads = tape.backward(y)      # {"x": array(6.)}
"""

import math

import numpy as np


class DomainError(ArithmeticError):
    """Arithmetic domain violation (log of a non-positive number, division by zero)."""


class ConfigError(ValueError):
    """Invalid configuration such as a non-positive temperature."""


def _check_t(t):
    if not t > 0:
        raise ConfigError(f"temperature must be positive, got {t!r}")
    return float(t)


# ---------------------------------------------------------------------------
# scalar kernels shared by node creation and tape replay

def _sigmoid(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


def _softplus(a, t):
    z = a / t
    if z > 0:
        return a + t * math.log1p(math.exp(-z))
    return t * math.log1p(math.exp(z))


def _log_sigmoid(z):
    if z >= 0:
        return -math.log1p(math.exp(-z))
    return z - math.log1p(math.exp(z))


_LOG_SOFTPLUS_CUTOFF = -30.0


def _log_softplus(a, t):
    z = a / t
    if z < _LOG_SOFTPLUS_CUTOFF:
        # log(t*log1p(e^z)) = log t + z - e^z/2 + O(e^2z)
        return math.log(t) + z - 0.5 * math.exp(z)
    return math.log(_softplus(a, t))


def _logsumexp(vals):
    m = max(vals)
    return m + math.log(sum(math.exp(v - m) for v in vals))


def _f_add(v, x):
    return v[0] + v[1]


def _f_sub(v, x):
    return v[0] - v[1]


def _f_mul(v, x):
    return v[0] * v[1]


def _f_div(v, x):
    if v[1] == 0.0:
        raise DomainError("division by zero")
    return v[0] / v[1]


def _f_neg(v, x):
    return -v[0]


def _f_exp(v, x):
    try:
        return math.exp(v[0])
    except OverflowError:
        raise DomainError(f"exp overflow at {v[0]!r}") from None


def _f_log(v, x):
    if not v[0] > 0:
        raise DomainError(f"log of non-positive value {v[0]!r}")
    return math.log(v[0])


def _f_sum(v, x):
    s = x
    for a in v:
        s += a
    return s


def _f_dot(v, x):
    h = len(v) // 2
    s = 0.0
    for i in range(h):
        s += v[i] * v[h + i]
    return s


def _f_lincomb(v, x):
    coeffs, offset = x
    s = offset
    for c, a in zip(coeffs, v):
        s += c * a
    return s


def _f_max(v, x):
    return max(v)


def _f_sigmoid_t(v, x):
    return _sigmoid((v[0] - v[1]) / x)


def _f_softplus_t(v, x):
    return _softplus(v[0], x)


def _f_log_sigmoid_t(v, x):
    return _log_sigmoid((v[0] - v[1]) / x)


def _f_log_softplus_t(v, x):
    return _log_softplus(v[0], x)


def _f_logsumexp(v, x):
    return _logsumexp(v)


_FORWARD = {
    "add": _f_add,
    "sub": _f_sub,
    "mul": _f_mul,
    "div": _f_div,
    "neg": _f_neg,
    "exp": _f_exp,
    "log": _f_log,
    "sum": _f_sum,
    "dot": _f_dot,
    "lincomb": _f_lincomb,
    "max": _f_max,
    "sigmoid_t": _f_sigmoid_t,
    "softplus_t": _f_softplus_t,
    "log_sigmoid_t": _f_log_sigmoid_t,
    "log_softplus_t": _f_log_softplus_t,
    "logsumexp": _f_logsumexp,
}


# local partial derivatives: (input values, extra, output value) -> list of d out / d input

def _d_exp(v, x, out):
    return (out,)


def _d_log(v, x, out):
    return (1.0 / v[0],)


def _d_div(v, x, out):
    return (1.0 / v[1], -v[0] / (v[1] * v[1]))


def _d_dot(v, x, out):
    h = len(v) // 2
    return v[h:] + v[:h]


def _d_max(v, x, out):
    d = [0.0] * len(v)
    d[v.index(out)] = 1.0
    return d


def _d_sigmoid_t(v, x, out):
    s = out * (1.0 - out) / x
    return (s, -s)


def _d_softplus_t(v, x, out):
    return (_sigmoid(v[0] / x),)


def _d_log_sigmoid_t(v, x, out):
    s = _sigmoid(-(v[0] - v[1]) / x) / x
    return (s, -s)


def _d_log_softplus_t(v, x, out):
    z = v[0] / x
    if z < _LOG_SOFTPLUS_CUTOFF:
        return ((1.0 - 0.5 * math.exp(z)) / x,)
    return (_sigmoid(z) / _softplus(v[0], x),)


def _d_logsumexp(v, x, out):
    return [math.exp(a - out) for a in v]


_PARTIALS = {
    "div": _d_div,
    "exp": _d_exp,
    "log": _d_log,
    "dot": _d_dot,
    "max": _d_max,
    "sigmoid_t": _d_sigmoid_t,
    "softplus_t": _d_softplus_t,
    "log_sigmoid_t": _d_log_sigmoid_t,
    "log_softplus_t": _d_log_softplus_t,
    "logsumexp": _d_logsumexp,
}


class Node:
    """A scalar on a tape. Arithmetic with floats or other nodes records new nodes."""

    __slots__ = ("tape", "id")

    def __init__(self, tape, id):
        self.tape = tape
        self.id = id

    @property
    def value(self):
        return self.tape.values[self.id]

    @property
    def adjoint(self):
        adj = self.tape.adjoints
        return 0.0 if adj is None else adj[self.id]

    def __float__(self):
        return self.value

    def __repr__(self):
        return f"Node(id={self.id}, value={self.value!r})"

    def _lift(self, other):
        if isinstance(other, Node):
            if other.tape is not self.tape:
                raise ValueError("operands live on different tapes")
            return other
        return self.tape.const(other)

    def __add__(self, other):
        return self.tape.record("add", (self, self._lift(other)))

    def __radd__(self, other):
        return self.tape.record("add", (self._lift(other), self))

    def __sub__(self, other):
        return self.tape.record("sub", (self, self._lift(other)))

    def __rsub__(self, other):
        return self.tape.record("sub", (self._lift(other), self))

    def __mul__(self, other):
        return self.tape.record("mul", (self, self._lift(other)))

    def __rmul__(self, other):
        return self.tape.record("mul", (self._lift(other), self))

    def __truediv__(self, other):
        return self.tape.record("div", (self, self._lift(other)))

    def __rtruediv__(self, other):
        return self.tape.record("div", (self._lift(other), self))

    def __neg__(self):
        return self.tape.record("neg", (self,))


class Tape:
    """Append-only record of scalar operations.

    ``ops[i]``, ``inputs[i]``, ``extra[i]`` and ``values[i]`` describe node ``i``.
    Inputs always point at earlier nodes, so the tape order is a topological order.
    """

    def __init__(self):
        self.ops = []
        self.inputs = []
        self.extra = []
        self.values = []
        self.adjoints = None
        self._params = {}

    def __len__(self):
        return len(self.values)

    def _push(self, op, ids, extra, value):
        i = len(self.values)
        self.ops.append(op)
        self.inputs.append(ids)
        self.extra.append(extra)
        self.values.append(value)
        return Node(self, i)

    def const(self, value):
        return self._push("const", (), None, float(value))

    def record(self, op, nodes, extra=None):
        ids = []
        for nd in nodes:
            if nd.tape is not self:
                raise ValueError("operands live on different tapes")
            ids.append(nd.id)
        ids = tuple(ids)
        vals = self.values
        value = _FORWARD[op]([vals[i] for i in ids], extra)
        return self._push(op, ids, extra, value)

    def param(self, name, array):
        """Register ``array`` as trainable; returns an object array of nodes with the same shape."""
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        arr = np.asarray(array, dtype=np.float64)
        start = len(self.values)
        flat = [self._push("param", (), None, float(v)) for v in arr.ravel()]
        self._params[name] = (arr.shape, start, arr.size)
        out = np.empty(arr.size, dtype=object)
        out[:] = flat
        return out.reshape(arr.shape)

    def variable(self, name, value):
        """Scalar convenience wrapper around :meth:`param`."""
        return self.param(name, np.array(value, dtype=np.float64)).item()

    @property
    def param_names(self):
        return list(self._params)

    def backward(self, root):
        """Reverse sweep from ``root``; returns ``{param name: gradient array}``."""
        if not isinstance(root, Node) or root.tape is not self:
            raise ValueError("root must be a node on this tape")
        n = root.id + 1
        adj = [0.0] * len(self.values)
        adj[root.id] = 1.0
        ops, inputs, extra, values = self.ops, self.inputs, self.extra, self.values
        for i in range(n - 1, -1, -1):
            g = adj[i]
            if g == 0.0:
                continue
            op = ops[i]
            ins = inputs[i]
            if op == "add":
                adj[ins[0]] += g
                adj[ins[1]] += g
            elif op == "sub":
                adj[ins[0]] += g
                adj[ins[1]] -= g
            elif op == "mul":
                a, b = ins
                adj[a] += g * values[b]
                adj[b] += g * values[a]
            elif op == "sum":
                for j in ins:
                    adj[j] += g
            elif op == "lincomb":
                for c, j in zip(extra[i][0], ins):
                    adj[j] += g * c
            elif op == "neg":
                adj[ins[0]] -= g
            elif op == "const" or op == "param":
                pass
            else:
                partials = _PARTIALS[op]([values[j] for j in ins], extra[i], values[i])
                for j, d in zip(ins, partials):
                    adj[j] += g * d
        self.adjoints = adj
        return self.gradients()

    def gradients(self):
        adj = self.adjoints
        out = {}
        for name, (shape, start, size) in self._params.items():
            g = np.zeros(size) if adj is None else np.array(adj[start:start + size], dtype=np.float64)
            out[name] = g.reshape(shape)
        return out

    def replay(self):
        """Recompute every node from its inputs; returns the list of recomputed values."""
        vals = []
        for op, ins, x, v in zip(self.ops, self.inputs, self.extra, self.values):
            if op == "const" or op == "param":
                vals.append(v)
            else:
                vals.append(_FORWARD[op]([vals[i] for i in ins], x))
        return vals


class ParamStore:
    """Named float64 arrays holding the trainable parameters of a model."""

    def __init__(self, arrays=None):
        self.arrays = {}
        for name, arr in (arrays or {}).items():
            self[name] = arr

    def __setitem__(self, name, arr):
        self.arrays[name] = np.array(arr, dtype=np.float64)

    def __getitem__(self, name):
        return self.arrays[name]

    def __contains__(self, name):
        return name in self.arrays

    def __iter__(self):
        return iter(self.arrays)

    def items(self):
        return self.arrays.items()

    @property
    def size(self):
        return sum(a.size for a in self.arrays.values())

    @property
    def shapes(self):
        return {k: a.shape for k, a in self.arrays.items()}

    def bind(self, tape):
        return {name: tape.param(name, arr) for name, arr in self.arrays.items()}

    def copy(self):
        return ParamStore({k: a.copy() for k, a in self.arrays.items()})


# ---------------------------------------------------------------------------
# public operations (float or node)

def _tape_of(*xs):
    for x in xs:
        if isinstance(x, Node):
            return x.tape
    return None


def _lift_all(tape, xs):
    return [x if isinstance(x, Node) else tape.const(x) for x in xs]


def value_of(x):
    return x.value if isinstance(x, Node) else float(x)


def is_node(x):
    return isinstance(x, Node)


def exp(a):
    if isinstance(a, Node):
        return a.tape.record("exp", (a,))
    return _f_exp((float(a),), None)


def log(a):
    if isinstance(a, Node):
        return a.tape.record("log", (a,))
    return _f_log((float(a),), None)


def add(a, b):
    return a + b


def sub(a, b):
    return a - b


def mul(a, b):
    return a * b


def div(a, b):
    if not isinstance(a, Node) and not isinstance(b, Node):
        return _f_div((float(a), float(b)), None)
    return a / b


def neg(a):
    return -a


def sum_(xs):
    """Sum of a sequence; float entries are folded into a constant offset."""
    xs = list(xs)
    tape = _tape_of(*xs)
    if tape is None:
        return float(sum(xs)) if xs else 0.0
    nodes = []
    offset = 0.0
    for x in xs:
        if isinstance(x, Node):
            nodes.append(x)
        else:
            offset += float(x)
    return tape.record("sum", nodes, offset)


def lincomb(xs, coeffs, offset=0.0):
    """``offset + sum(c * x)`` with constant coefficients; one node on a tape."""
    xs = list(xs)
    tape = _tape_of(*xs)
    if tape is None:
        s = float(offset)
        for c, x in zip(coeffs, xs):
            s += float(c) * float(x)
        return s
    nodes = []
    cs = []
    off = float(offset)
    for c, x in zip(coeffs, xs):
        if isinstance(x, Node):
            nodes.append(x)
            cs.append(float(c))
        else:
            off += float(c) * float(x)
    return tape.record("lincomb", nodes, (tuple(cs), off))


def dot(xs, ys):
    xs = list(xs)
    ys = list(ys)
    if len(xs) != len(ys):
        raise ValueError("dot of sequences with different lengths")
    tx = _tape_of(*xs)
    ty = _tape_of(*ys)
    if tx is None and ty is None:
        return float(np.dot(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)))
    if ty is None:
        return lincomb(xs, ys)
    if tx is None:
        return lincomb(ys, xs)
    if tx is not ty:
        raise ValueError("operands live on different tapes")
    return tx.record("dot", _lift_all(tx, xs) + _lift_all(tx, ys))


def matvec(m, x):
    """Rows of ``m`` dotted with ``x``; a node matrix times a constant vector gives one node per row."""
    m = np.asarray(m)
    if m.dtype != object and not any(isinstance(v, Node) for v in np.ravel(x)):
        return m.astype(float) @ np.asarray(x, dtype=float)
    out = np.empty(m.shape[0], dtype=object)
    for r in range(m.shape[0]):
        out[r] = dot(m[r], x)
    return out


def max_(xs):
    """Maximum; the gradient flows to the first maximal entry."""
    xs = list(xs)
    if not xs:
        raise ValueError("max of an empty sequence")
    tape = _tape_of(*xs)
    if tape is None:
        return float(max(float(x) for x in xs))
    return tape.record("max", _lift_all(tape, xs))


def sigmoid_t(a, b, t):
    """``1 / (1 + exp(-(a - b) / t))``, overflow-safe."""
    t = _check_t(t)
    tape = _tape_of(a, b)
    if tape is None:
        return _sigmoid((float(a) - float(b)) / t)
    return tape.record("sigmoid_t", _lift_all(tape, (a, b)), t)


def softplus_t(a, t):
    """``t * log(1 + exp(a / t))``, overflow-safe."""
    t = _check_t(t)
    if isinstance(a, Node):
        return a.tape.record("softplus_t", (a,), t)
    return _softplus(float(a), t)


def log_sigmoid_t(a, b, t):
    """``log(sigmoid_t(a, b, t))`` without forming the sigmoid."""
    t = _check_t(t)
    tape = _tape_of(a, b)
    if tape is None:
        return _log_sigmoid((float(a) - float(b)) / t)
    return tape.record("log_sigmoid_t", _lift_all(tape, (a, b)), t)


def log_softplus_t(a, t):
    """``log(softplus_t(a, t))``, finite even when the softplus underflows."""
    t = _check_t(t)
    if isinstance(a, Node):
        return a.tape.record("log_softplus_t", (a,), t)
    return _log_softplus(float(a), t)


def logsumexp(xs):
    xs = list(xs)
    if not xs:
        raise ValueError("logsumexp of an empty sequence")
    tape = _tape_of(*xs)
    if tape is None:
        return _logsumexp([float(x) for x in xs])
    return tape.record("logsumexp", _lift_all(tape, xs))
