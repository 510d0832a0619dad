"""Hot numeric kernels with an optional numba backend.

Every kernel exists twice: a pure-numpy version and a loop version compiled
with ``numba.njit``.  The module-level names (``missing_run``,
``haversine_nmi``, ``adam_update``, ``softmax_xent``) are bound to the numba
build when numba is importable, unless ``AIS_SENTINEL_NO_NUMBA`` is set to a
truthy value, in which case the numpy path is used and numba is never
imported.

Both backends are reachable explicitly through :func:`load_backend`, which
is what the benchmark and the equivalence tests use.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

EARTH_RADIUS_KM = 6371.0088
METERS_PER_NMI = 1852.0
EARTH_RADIUS_NMI = EARTH_RADIUS_KM * 1000.0 / METERS_PER_NMI

_TRUTHY = {"1", "true", "yes", "on"}


def numba_disabled() -> bool:
    return os.environ.get("AIS_SENTINEL_NO_NUMBA", "").strip().lower() in _TRUTHY


def thread_cap() -> int:
    """Parallelism cap from ``AIS_SENTINEL_THREADS`` (default 1)."""
    raw = os.environ.get("AIS_SENTINEL_THREADS", "").strip()
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        return 1


# --------------------------------------------------------------------------
# numpy implementations


def _missing_run_np(present):
    tail = present[:, 1:]
    first = np.argmax(tail, axis=1)
    has = tail.any(axis=1)
    return np.where(has, first, tail.shape[1]).astype(np.int64)


def _haversine_np(lat1, lon1, lat2, lon2):
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    half_dlat = np.abs(p2 - p1) * 0.5
    half_dlon = np.abs(np.radians(lon2) - np.radians(lon1)) * 0.5
    a = np.sin(half_dlat) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(half_dlon) ** 2
    a = np.clip(a, 0.0, 1.0)
    return 2.0 * EARTH_RADIUS_NMI * np.arctan2(np.sqrt(a), np.sqrt(1.0 - a))


def _adam_update_np(param, grad, m, v, lr, beta1, beta2, eps, t):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


def _softmax_xent_np(logits, onehot, log_eps):
    """Turn ``logits`` into probabilities in place; return summed cross-entropy."""
    logits -= logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=1, keepdims=True)
    return float(-(onehot * np.log(logits + log_eps)).sum())


_NUMPY = SimpleNamespace(
    name="numpy",
    missing_run=_missing_run_np,
    haversine_nmi=_haversine_np,
    adam_update=_adam_update_np,
    softmax_xent=_softmax_xent_np,
)


# --------------------------------------------------------------------------
# loop implementations, compiled by numba on first use


def _missing_run_loop(present):
    n, width = present.shape
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        run = 0
        for j in range(1, width):
            if present[i, j]:
                break
            run += 1
        out[i] = run
    return out


def _haversine_loop(lat1, lon1, lat2, lon2):
    n = lat1.shape[0]
    out = np.empty(n, dtype=np.float64)
    deg = math.pi / 180.0
    for i in range(n):
        p1 = lat1[i] * deg
        p2 = lat2[i] * deg
        half_dlat = abs(p2 - p1) * 0.5
        half_dlon = abs(lon2[i] * deg - lon1[i] * deg) * 0.5
        s1 = math.sin(half_dlat)
        s2 = math.sin(half_dlon)
        a = s1 * s1 + math.cos(p1) * math.cos(p2) * s2 * s2
        if a < 0.0:
            a = 0.0
        elif a > 1.0:
            a = 1.0
        out[i] = 2.0 * EARTH_RADIUS_NMI * math.atan2(math.sqrt(a), math.sqrt(1.0 - a))
    return out


def _adam_update_loop(param, grad, m, v, lr, beta1, beta2, eps, t):
    p = param.reshape(-1)
    g = grad.reshape(-1)
    mm = m.reshape(-1)
    vv = v.reshape(-1)
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for i in range(p.shape[0]):
        gi = g[i]
        mm[i] = beta1 * mm[i] + (1.0 - beta1) * gi
        vv[i] = beta2 * vv[i] + (1.0 - beta2) * gi * gi
        p[i] -= lr * (mm[i] / c1) / (math.sqrt(vv[i] / c2) + eps)


def _softmax_xent_loop(logits, onehot, log_eps):
    n, k = logits.shape
    total = 0.0
    for i in range(n):
        top = logits[i, 0]
        for j in range(1, k):
            if logits[i, j] > top:
                top = logits[i, j]
        s = 0.0
        for j in range(k):
            e = math.exp(logits[i, j] - top)
            logits[i, j] = e
            s += e
        for j in range(k):
            logits[i, j] /= s
            if onehot[i, j] != 0.0:
                total -= onehot[i, j] * math.log(logits[i, j] + log_eps)
    return total


_NUMBA = None


def _build_numba():
    global _NUMBA
    if _NUMBA is None:
        import numba

        jit = numba.njit(cache=True, nogil=True)
        _NUMBA = SimpleNamespace(
            name="numba",
            missing_run=jit(_missing_run_loop),
            haversine_nmi=jit(_haversine_loop),
            adam_update=jit(_adam_update_loop),
            softmax_xent=jit(_softmax_xent_loop),
        )
    return _NUMBA


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def load_backend(name: str | None = None) -> SimpleNamespace:
    """Return the kernel namespace for ``"numpy"`` or ``"numba"``.

    ``None`` picks the default: numba when available and not disabled.
    """
    if name is None:
        name = "numpy" if numba_disabled() or not numba_available() else "numba"
    if name == "numpy":
        return _NUMPY
    if name == "numba":
        return _build_numba()
    raise ValueError(f"unknown kernel backend {name!r}")


_active = load_backend()
BACKEND = _active.name


def missing_run(present: np.ndarray) -> np.ndarray:
    """Length of the run of missing slots starting at slot 1, per row."""
    present = np.ascontiguousarray(present, dtype=np.bool_)
    if present.ndim != 2:
        raise ValueError("presence mask must be 2-D (samples x slots)")
    return _active.missing_run(present)


def haversine_nmi(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Great-circle distance in nautical miles with numpy broadcasting."""
    arrays = np.broadcast_arrays(
        *(np.asarray(a, dtype=np.float64) for a in (lat1, lon1, lat2, lon2))
    )
    shape = arrays[0].shape
    flat = [np.ascontiguousarray(a).reshape(-1) for a in arrays]
    return _active.haversine_nmi(*flat).reshape(shape)


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, t) -> None:
    """In-place bias-corrected Adam step on contiguous float64 arrays."""
    _active.adam_update(param, grad, m, v, float(lr), float(beta1), float(beta2), float(eps), int(t))


def softmax_xent(logits: np.ndarray, onehot: np.ndarray, log_eps: float = 1e-12) -> float:
    """Softmax ``logits`` in place and return the summed cross-entropy against ``onehot``."""
    return _active.softmax_xent(logits, onehot, float(log_eps))
