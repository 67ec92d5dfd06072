"""Hot-loop kernels: compiled Cython core when built, numpy fallback otherwise.

Set ``SUBGRAD_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels as python_impl
from ._pykernels import HARD, RATIO, SIGMOID, SOFTPLUS_RATIO  # noqa: F401

try:
    from . import _ckernels as compiled_impl
except ImportError:
    compiled_impl = None

if compiled_impl is not None and not os.environ.get("SUBGRAD_PURE_PYTHON"):
    _impl = compiled_impl
    BACKEND = "cython"
else:
    _impl = python_impl
    BACKEND = "python"

cut_values_all = _impl.cut_values_all
dgreedy_sample_cut = _impl.dgreedy_sample_cut
