"""Special functions (lgamma, digamma, trigamma) with backend dispatch.

Two interchangeable kernel backends exist: a compiled Cython extension
(``_special_cy``, built at install time) and a vectorized numpy
fallback (``_special_py``). The compiled one is preferred when
importable; set ``AUXUE_SPECIAL_BACKEND=python`` or ``=cython`` to
force a choice. ``benchmarks/bench_special.py`` compares the two.

Domain: strictly positive arguments. Negative-axis reflection is not
supported; x <= 0 raises :class:`DomainError`.
"""

import os

import numpy as np

from ..errors import DomainError
from . import _special_py

_FORCED = os.environ.get("AUXUE_SPECIAL_BACKEND", "").strip().lower()

_cy = None
if _FORCED != "python":
    try:
        from . import _special_cy as _cy
    except ImportError:
        _cy = None
if _FORCED == "cython" and _cy is None:
    raise ImportError(
        "AUXUE_SPECIAL_BACKEND=cython but the compiled extension is not available"
    )

_BACKEND = "cython" if _cy is not None else "python"


def backend_name():
    """Name of the active kernel backend: 'cython' or 'python'."""
    return _BACKEND


def _dispatch(name, x):
    arr = np.asarray(x, dtype=np.float64)
    bad = ~(arr > 0.0)  # catches non-positive and NaN alike
    if bad.any():
        raise DomainError(name, f"requires x > 0, got {float(arr[bad].flat[0])!r}")
    flat = np.ascontiguousarray(arr.ravel())
    impl = _cy if _cy is not None else _special_py
    out = getattr(impl, name)(flat).reshape(arr.shape)
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def lgamma(x):
    """log Gamma(x) for x > 0."""
    return _dispatch("lgamma", x)


def digamma(x):
    """psi(x) = d/dx log Gamma(x) for x > 0."""
    return _dispatch("digamma", x)


def trigamma(x):
    """psi'(x), the derivative of digamma, for x > 0."""
    return _dispatch("trigamma", x)
