import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from subgrad import autodiff as ad

settings.register_profile(
    "repo", deadline=None, max_examples=60, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


def central_diff(fn, params, h=1e-5):
    """Central finite differences of ``fn(ParamStore) -> float`` for every parameter entry."""
    out = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = fn(params)
            arr[idx] = old - h
            down = fn(params)
            arr[idx] = old
            g[idx] = (up - down) / (2.0 * h)
        out[name] = g
    return out


def rel_err(g, fd):
    """Norm-wise relative error over all parameter arrays."""
    a = np.concatenate([np.ravel(g[k]) for k in sorted(g)])
    b = np.concatenate([np.ravel(fd[k]) for k in sorted(fd)])
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300))


def tape_grad(fn, params):
    """Value and gradients of ``fn(values dict) -> node`` on a fresh tape."""
    tape = ad.Tape()
    values = params.bind(tape)
    root = fn(values)
    return root.value, tape.backward(root)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def report(criterion, passed, detail):
    """Record one acceptance line; printed again in the terminal summary."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
