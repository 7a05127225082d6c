"""Hot pointwise kernels: numba fast path with a pure-numpy fallback.

The heavy lifting in this package is FFT work, but a handful of pointwise
sweeps sit on the stepping/diagnostic hot path at 96^3 .. 128^3 points: the
piecewise cutoff evaluation (spectral symbols, weights, regions), trilinear
product accumulation for commuted nonlinearity sources, cone-shell binned
sups, and weighted norm reductions.  Each kernel has two implementations with
identical semantics; the numba one is selected by default when numba imports.

Set ANISOWAVE_NO_NUMBA=1 to force the numpy path.  ``get_impls(name)``
exposes both backends so the benchmark and parity tests can compare them.
"""

from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly by backend selection
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    njit = None
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("ANISOWAVE_NO_NUMBA", "") != "1"


# ---------------------------------------------------------------------------
# chi: the explicit C^2 cutoff, built from two degree-11 polynomial branches.
# chi(x) = 0            for x <= -3
#        = (x+3)^11 / 4 for x in [-3, -2]
#        = (-19 (x+1)^11 - 22 (x+1)^10 + 4) / 4  for x in [-2, -1]
#        = 1            for x in [-1, 0]
# and chi(x) = chi(-x) for x >= 0.  Derivatives are hand-differentiated per
# branch; the reflection gives chi'(x) = -chi'(-x), chi''(x) = chi''(-x).
# ---------------------------------------------------------------------------


def _chi_neg_np(y):
    """chi on y <= 0, vectorized."""
    u = y + 3.0
    v = y + 1.0
    out = np.zeros_like(y)
    mid = (y > -3.0) & (y < -2.0)
    up = (y >= -2.0) & (y < -1.0)
    out = np.where(mid, 0.25 * u**11, out)
    out = np.where(up, 0.25 * (-19.0 * v**11 - 22.0 * v**10 + 4.0), out)
    out = np.where(y >= -1.0, 1.0, out)
    return out


def _chi_d1_neg_np(y):
    u = y + 3.0
    v = y + 1.0
    out = np.zeros_like(y)
    mid = (y > -3.0) & (y < -2.0)
    up = (y >= -2.0) & (y < -1.0)
    out = np.where(mid, 2.75 * u**10, out)
    out = np.where(up, 0.25 * (-209.0 * v**10 - 220.0 * v**9), out)
    return out


def _chi_d2_neg_np(y):
    u = y + 3.0
    v = y + 1.0
    out = np.zeros_like(y)
    mid = (y > -3.0) & (y < -2.0)
    up = (y >= -2.0) & (y < -1.0)
    out = np.where(mid, 27.5 * u**9, out)
    out = np.where(up, 0.25 * (-2090.0 * v**9 - 1980.0 * v**8), out)
    return out


def chi_eval_np(x):
    x = np.asarray(x, dtype=np.float64)
    return _chi_neg_np(-np.abs(x))


def chi_d1_eval_np(x):
    x = np.asarray(x, dtype=np.float64)
    d = _chi_d1_neg_np(-np.abs(x))
    return np.where(x > 0.0, -d, d)


def chi_d2_eval_np(x):
    x = np.asarray(x, dtype=np.float64)
    return _chi_d2_neg_np(-np.abs(x))


def _chi_scalar_py(x):
    y = -abs(x)
    if y <= -3.0:
        return 0.0
    if y < -2.0:
        u = y + 3.0
        return 0.25 * u**11
    if y < -1.0:
        v = y + 1.0
        return 0.25 * (-19.0 * v**11 - 22.0 * v**10 + 4.0)
    return 1.0


def _chi_d1_scalar_py(x):
    y = -abs(x)
    if y <= -3.0 or y >= -1.0:
        d = 0.0
    elif y < -2.0:
        d = 2.75 * (y + 3.0) ** 10
    else:
        v = y + 1.0
        d = 0.25 * (-209.0 * v**10 - 220.0 * v**9)
    return -d if x > 0.0 else d


def _chi_d2_scalar_py(x):
    y = -abs(x)
    if y <= -3.0 or y >= -1.0:
        return 0.0
    if y < -2.0:
        return 27.5 * (y + 3.0) ** 9
    v = y + 1.0
    return 0.25 * (-2090.0 * v**9 - 1980.0 * v**8)


def binned_abs_max_np(vals, q, edges):
    """Per-bin sup of |vals| over bins edges[j] <= q < edges[j+1]; 0 if empty."""
    vals = np.abs(np.ravel(vals))
    q = np.ravel(q)
    out = np.zeros(len(edges) - 1)
    for j in range(len(edges) - 1):
        m = (q >= edges[j]) & (q < edges[j + 1])
        if m.any():
            out[j] = vals[m].max()
    return out


def weighted_sq_sum_np(vals, weights):
    v = np.ravel(vals)
    w = np.ravel(weights)
    return float(np.sum(w * v * v))


def masked_abs_max_np(vals, mask):
    v = np.ravel(vals)
    m = np.ravel(mask)
    if not m.any():
        return 0.0
    return float(np.max(np.abs(v[m])))


def accumulate_products_np(out, coeffs, idx, stack):
    """out += sum_t coeffs[t] * stack[idx[t,0]] * stack[idx[t,1]] * stack[idx[t,2]]."""
    for t in range(len(coeffs)):
        out += coeffs[t] * stack[idx[t, 0]] * stack[idx[t, 1]] * stack[idx[t, 2]]
    return out


_NP_IMPLS = {
    "chi_eval": chi_eval_np,
    "chi_d1_eval": chi_d1_eval_np,
    "chi_d2_eval": chi_d2_eval_np,
    "binned_abs_max": binned_abs_max_np,
    "weighted_sq_sum": weighted_sq_sum_np,
    "masked_abs_max": masked_abs_max_np,
    "accumulate_products": accumulate_products_np,
}

if _HAVE_NUMBA:
    _chi_scalar = njit(cache=True)(_chi_scalar_py)
    _chi_d1_scalar = njit(cache=True)(_chi_d1_scalar_py)
    _chi_d2_scalar = njit(cache=True)(_chi_d2_scalar_py)

    @njit(cache=True)
    def _chi_eval_nb(flat, out, which):
        for i in range(flat.size):
            if which == 0:
                out[i] = _chi_scalar(flat[i])
            elif which == 1:
                out[i] = _chi_d1_scalar(flat[i])
            else:
                out[i] = _chi_d2_scalar(flat[i])
        return out

    def _make_chi(which):
        def f(x):
            # note: ascontiguousarray promotes 0-d to (1,), so shape first
            x = np.asarray(x, dtype=np.float64)
            out = np.empty(x.size)
            _chi_eval_nb(np.ascontiguousarray(x).ravel(), out, which)
            return out.reshape(x.shape) if x.ndim else np.float64(out[0])

        return f

    chi_eval_nb = _make_chi(0)
    chi_d1_eval_nb = _make_chi(1)
    chi_d2_eval_nb = _make_chi(2)

    @njit(cache=True)
    def _binned_abs_max_nb(vals, q, edges, out):
        nb = edges.size - 1
        for i in range(vals.size):
            qi = q[i]
            for j in range(nb):
                if edges[j] <= qi < edges[j + 1]:
                    a = abs(vals[i])
                    if a > out[j]:
                        out[j] = a
                    break
        return out

    def binned_abs_max_nb(vals, q, edges):
        out = np.zeros(len(edges) - 1)
        _binned_abs_max_nb(
            np.ascontiguousarray(vals, dtype=np.float64).ravel(),
            np.ascontiguousarray(q, dtype=np.float64).ravel(),
            np.asarray(edges, dtype=np.float64),
            out,
        )
        return out

    @njit(cache=True)
    def _weighted_sq_sum_nb(v, w):
        acc = 0.0
        for i in range(v.size):
            acc += w[i] * v[i] * v[i]
        return acc

    def weighted_sq_sum_nb(vals, weights):
        return float(
            _weighted_sq_sum_nb(
                np.ascontiguousarray(vals, dtype=np.float64).ravel(),
                np.ascontiguousarray(weights, dtype=np.float64).ravel(),
            )
        )

    @njit(cache=True)
    def _masked_abs_max_nb(v, m):
        best = 0.0
        seen = False
        for i in range(v.size):
            if m[i]:
                seen = True
                a = abs(v[i])
                if a > best:
                    best = a
        if not seen:
            return 0.0
        return best

    def masked_abs_max_nb(vals, mask):
        return float(
            _masked_abs_max_nb(
                np.ascontiguousarray(vals, dtype=np.float64).ravel(),
                np.ascontiguousarray(mask, dtype=np.bool_).ravel(),
            )
        )

    @njit(cache=True)
    def _accumulate_products_nb(out, coeffs, idx, stack):
        npts = out.size
        nterm = coeffs.size
        for p in range(npts):
            acc = 0.0
            for t in range(nterm):
                acc += (
                    coeffs[t]
                    * stack[idx[t, 0], p]
                    * stack[idx[t, 1], p]
                    * stack[idx[t, 2], p]
                )
            out[p] += acc
        return out

    def accumulate_products_nb(out, coeffs, idx, stack):
        shape = out.shape
        flat = out.reshape(-1)
        _accumulate_products_nb(
            flat,
            np.asarray(coeffs, dtype=np.float64),
            np.asarray(idx, dtype=np.int64),
            stack.reshape(stack.shape[0], -1),
        )
        return flat.reshape(shape)

    _NB_IMPLS = {
        "chi_eval": chi_eval_nb,
        "chi_d1_eval": chi_d1_eval_nb,
        "chi_d2_eval": chi_d2_eval_nb,
        "binned_abs_max": binned_abs_max_nb,
        "weighted_sq_sum": weighted_sq_sum_nb,
        "masked_abs_max": masked_abs_max_nb,
        "accumulate_products": accumulate_products_nb,
    }
else:  # pragma: no cover
    _NB_IMPLS = None


def get_impls(name):
    """Return the kernel dict for backend 'numpy' or 'numba' (None if absent)."""
    if name == "numpy":
        return _NP_IMPLS
    if name == "numba":
        return _NB_IMPLS
    raise ValueError(f"unknown backend {name!r}")


BACKEND = "numba" if USE_NUMBA else "numpy"
_ACTIVE = _NB_IMPLS if USE_NUMBA else _NP_IMPLS

chi_eval = _ACTIVE["chi_eval"]
chi_d1_eval = _ACTIVE["chi_d1_eval"]
chi_d2_eval = _ACTIVE["chi_d2_eval"]
binned_abs_max = _ACTIVE["binned_abs_max"]
weighted_sq_sum = _ACTIVE["weighted_sq_sum"]
masked_abs_max = _ACTIVE["masked_abs_max"]
accumulate_products = _ACTIVE["accumulate_products"]
