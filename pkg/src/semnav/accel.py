"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is picked once at import time from the ``SEMNAV_BACKEND``
environment variable: ``numba`` (require the JIT), ``numpy`` (force the
fallback), or ``auto``/unset (numba when importable).  ``get_backend``
returns either implementation set explicitly, which is what the test
suite and the benchmark use to compare them.

Both backends compute bit-identical results.  Transcendentals are
evaluated through libm in both paths (CPython's ``math`` module and
numba's lowering of ``math.*`` hit the same library), vectorized steps
use only IEEE-exact operations (+, -, *, /, sqrt, floor, min), and the
one order-sensitive reduction (the decayed cost sum) accumulates in
sample order in both paths.
"""

from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

from .errors import ConfigError


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = math.fmod(a + math.pi, 2.0 * math.pi)
    if r <= 0.0:
        r += 2.0 * math.pi
    return r - math.pi


# ---------------------------------------------------------------------------
# Loop kernels.  Written once in njit-compatible form; the numba backend
# compiles them, the numpy backend reuses or replaces them (below).
# ---------------------------------------------------------------------------


def _rollout_path_loops(x0, y0, th0, v, om, dt, n):
    """Integrate a constant-twist unicycle for n steps of dt.

    Per-step exact-arc update; headings are rewrapped to (-pi, pi] after
    every step.  Sample k (0-based) is the post-step pose at time
    (k + 1) * dt.
    """
    ts = np.empty(n)
    xs = np.empty(n)
    ys = np.empty(n)
    ths = np.empty(n)
    x = x0
    y = y0
    th = th0
    for k in range(n):
        th_next = th + om * dt
        if abs(om) < 1e-9:
            x = x + v * dt * math.cos(th)
            y = y + v * dt * math.sin(th)
        else:
            r = v / om
            x = x + r * (math.sin(th_next) - math.sin(th))
            y = y + r * (math.cos(th) - math.cos(th_next))
        a = np.fmod(th_next + math.pi, 2.0 * math.pi)
        if a <= 0.0:
            a += 2.0 * math.pi
        th = a - math.pi
        ts[k] = (k + 1) * dt
        xs[k] = x
        ys[k] = y
        ths[k] = th
    return ts, xs, ys, ths


def _min_dist_sq_loops(xs, ys, px, py):
    """Minimum squared distance from any sample to any point; inf if empty."""
    best = np.inf
    for i in range(xs.shape[0]):
        for j in range(px.shape[0]):
            dx = xs[i] - px[j]
            dy = ys[i] - py[j]
            d2 = dx * dx + dy * dy
            if d2 < best:
                best = d2
    return best


def _hits_occupied_loops(xs, ys, mask, ox, oy, res):
    """True when any sample falls inside a masked grid cell."""
    h, w = mask.shape
    for i in range(xs.shape[0]):
        cx = int(math.floor((xs[i] - ox) / res))
        cy = int(math.floor((ys[i] - oy) / res))
        if cx >= 0 and cx < w and cy >= 0 and cy < h and mask[cy, cx]:
            return True
    return False


def _decayed_cost_sum_loops(xs, ys, factors, costs, ox, oy, res):
    """Sum of factors[k] * cost-at-sample-k, out-of-grid samples cost 1.0.

    Accumulates in sample order; the numpy backend preserves that order.
    """
    h, w = costs.shape
    total = 0.0
    for i in range(xs.shape[0]):
        cx = int(math.floor((xs[i] - ox) / res))
        cy = int(math.floor((ys[i] - oy) / res))
        if cx >= 0 and cx < w and cy >= 0 and cy < h:
            value = costs[cy, cx]
        else:
            value = 1.0
        total += factors[i] * value
    return total


def _conv2d_1x1_loops(fmap, weight, bias):
    """Pointwise convolution: out[i, j] = weight @ fmap[i, j] + bias."""
    h, w, cin = fmap.shape
    cout = weight.shape[0]
    out = np.empty((h, w, cout))
    for i in range(h):
        for j in range(w):
            for co in range(cout):
                acc = bias[co]
                for ci in range(cin):
                    acc += weight[co, ci] * fmap[i, j, ci]
                out[i, j, co] = acc
    return out


def _conv2d_3x3_loops(fmap, weight, bias):
    """3x3 cross-correlation with zero padding, stride 1, same shape."""
    h, w, cin = fmap.shape
    cout = weight.shape[0]
    out = np.empty((h, w, cout))
    for i in range(h):
        for j in range(w):
            for co in range(cout):
                acc = bias[co]
                for di in range(-1, 2):
                    ii = i + di
                    if ii < 0 or ii >= h:
                        continue
                    for dj in range(-1, 2):
                        jj = j + dj
                        if jj < 0 or jj >= w:
                            continue
                        for ci in range(cin):
                            acc += weight[co, ci, di + 1, dj + 1] * fmap[ii, jj, ci]
                out[i, j, co] = acc
    return out


# ---------------------------------------------------------------------------
# Vectorized numpy replacements for the kernels whose plain loops would be
# slow without the JIT.  The rollout keeps its loop form: its trig must go
# through libm scalars and its step counts are small.
# ---------------------------------------------------------------------------


def _min_dist_sq_numpy(xs, ys, px, py):
    if px.shape[0] == 0 or xs.shape[0] == 0:
        return np.inf
    dx = xs[:, None] - px[None, :]
    dy = ys[:, None] - py[None, :]
    return float(np.min(dx * dx + dy * dy))


def _hits_occupied_numpy(xs, ys, mask, ox, oy, res):
    h, w = mask.shape
    cx = np.floor((xs - ox) / res).astype(np.int64)
    cy = np.floor((ys - oy) / res).astype(np.int64)
    inb = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
    if not inb.any():
        return False
    return bool(mask[cy[inb], cx[inb]].any())


def _decayed_cost_sum_numpy(xs, ys, factors, costs, ox, oy, res):
    h, w = costs.shape
    cx = np.floor((xs - ox) / res).astype(np.int64)
    cy = np.floor((ys - oy) / res).astype(np.int64)
    inb = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
    values = np.ones(xs.shape[0])
    values[inb] = costs[cy[inb], cx[inb]]
    products = factors * values
    total = 0.0
    for p in products:  # ordered accumulation, same as the jit loop
        total += p
    return float(total)


def _conv2d_1x1_numpy(fmap, weight, bias):
    return fmap @ weight.T + bias


def _conv2d_3x3_numpy(fmap, weight, bias):
    h, w, cin = fmap.shape
    cout = weight.shape[0]
    padded = np.zeros((h + 2, w + 2, cin))
    padded[1:-1, 1:-1, :] = fmap
    out = np.broadcast_to(bias, (h, w, cout)).copy()
    for di in range(3):
        for dj in range(3):
            out += padded[di:di + h, dj:dj + w, :] @ weight[:, :, di, dj].T
    return out


_KERNEL_NAMES = (
    "rollout_path",
    "min_dist_sq",
    "hits_occupied",
    "decayed_cost_sum",
    "conv2d_1x1",
    "conv2d_3x3",
)

_backends: dict[str, SimpleNamespace] = {}


def _build_numpy_backend() -> SimpleNamespace:
    return SimpleNamespace(
        name="numpy",
        rollout_path=_rollout_path_loops,
        min_dist_sq=_min_dist_sq_numpy,
        hits_occupied=_hits_occupied_numpy,
        decayed_cost_sum=_decayed_cost_sum_numpy,
        conv2d_1x1=_conv2d_1x1_numpy,
        conv2d_3x3=_conv2d_3x3_numpy,
    )


def _build_numba_backend() -> SimpleNamespace:
    from numba import njit

    jit = njit(cache=True)
    return SimpleNamespace(
        name="numba",
        rollout_path=jit(_rollout_path_loops),
        min_dist_sq=jit(_min_dist_sq_loops),
        hits_occupied=jit(_hits_occupied_loops),
        decayed_cost_sum=jit(_decayed_cost_sum_loops),
        conv2d_1x1=jit(_conv2d_1x1_loops),
        conv2d_3x3=jit(_conv2d_3x3_loops),
    )


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def available_backends() -> list[str]:
    names = ["numpy"]
    if numba_available():
        names.append("numba")
    return names


def get_backend(name: str = "auto") -> SimpleNamespace:
    """Return the named kernel set ("numba", "numpy", or "auto")."""
    name = name.strip().lower()
    if name == "auto":
        name = "numba" if numba_available() else "numpy"
    if name not in ("numba", "numpy"):
        raise ConfigError(f"unknown backend {name!r}; expected numba, numpy or auto")
    if name == "numba" and not numba_available():
        raise ConfigError("SEMNAV_BACKEND=numba but numba is not importable")
    if name not in _backends:
        _backends[name] = (
            _build_numba_backend() if name == "numba" else _build_numpy_backend()
        )
    return _backends[name]


_active = get_backend(os.environ.get("SEMNAV_BACKEND", "auto"))

BACKEND = _active.name
rollout_path = _active.rollout_path
min_dist_sq = _active.min_dist_sq
hits_occupied = _active.hits_occupied
decayed_cost_sum = _active.decayed_cost_sum
conv2d_1x1 = _active.conv2d_1x1
conv2d_3x3 = _active.conv2d_3x3
