"""Backend parity and direct oracles for the hot kernels."""

import os
import subprocess
import sys

import numpy as np
import pytest

from anisowave import kernels


def _random_inputs(rng):
    vals = rng.standard_normal(500)
    q = rng.uniform(-1.0, 5.0, size=500)
    edges = np.linspace(0.0, 4.0, 9)
    weights = rng.uniform(0.0, 2.0, size=500)
    mask = rng.random(500) < 0.3
    return vals, q, edges, weights, mask


def test_binned_abs_max_oracle(rng):
    vals, q, edges, _, _ = _random_inputs(rng)
    got = kernels.binned_abs_max_np(vals, q, edges)
    for j in range(len(edges) - 1):
        sel = (edges[j] <= q) & (q < edges[j + 1])
        want = np.max(np.abs(vals[sel])) if sel.any() else 0.0
        assert got[j] == pytest.approx(want, abs=0.0)


def test_weighted_sq_sum_oracle(rng):
    vals, _, _, weights, _ = _random_inputs(rng)
    got = kernels.weighted_sq_sum_np(vals, weights)
    assert got == pytest.approx(float(np.sum(weights * vals**2)), rel=1e-13)


def test_masked_abs_max_empty_mask(rng):
    vals = rng.standard_normal(64)
    assert kernels.masked_abs_max_np(vals, np.zeros(64, dtype=bool)) == 0.0


def test_accumulate_products_oracle(rng):
    stack = rng.standard_normal((4, 3, 3, 3))
    coeffs = rng.standard_normal(5)
    idx = rng.integers(0, 4, size=(5, 3))
    out = np.zeros((3, 3, 3))
    got = kernels.accumulate_products_np(out.copy(), coeffs, idx, stack)
    want = np.zeros((3, 3, 3))
    for t in range(5):
        want += coeffs[t] * stack[idx[t, 0]] * stack[idx[t, 1]] * stack[idx[t, 2]]
    np.testing.assert_allclose(got, want, rtol=1e-13)


@pytest.mark.skipif(kernels.get_impls("numba") is None, reason="numba absent")
def test_backend_parity(rng):
    np_impls = kernels.get_impls("numpy")
    nb_impls = kernels.get_impls("numba")
    vals, q, edges, weights, mask = _random_inputs(rng)
    xs = rng.uniform(-4.0, 1.0, size=300)
    for name in ("chi_eval", "chi_d1_eval", "chi_d2_eval"):
        np.testing.assert_allclose(nb_impls[name](xs), np_impls[name](xs),
                                   rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(nb_impls["binned_abs_max"](vals, q, edges),
                               np_impls["binned_abs_max"](vals, q, edges))
    assert nb_impls["weighted_sq_sum"](vals, weights) == pytest.approx(
        np_impls["weighted_sq_sum"](vals, weights), rel=1e-12)
    assert nb_impls["masked_abs_max"](vals, mask) == pytest.approx(
        np_impls["masked_abs_max"](vals, mask))
    stack = rng.standard_normal((4, 64))
    coeffs = rng.standard_normal(6)
    idx = rng.integers(0, 4, size=(6, 3))
    np.testing.assert_allclose(
        nb_impls["accumulate_products"](np.zeros(64), coeffs, idx, stack),
        np_impls["accumulate_products"](np.zeros(64), coeffs, idx, stack),
        rtol=1e-12)


def test_no_numba_env_flag_selects_numpy():
    env = dict(os.environ, ANISOWAVE_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from anisowave import kernels; print(kernels.BACKEND)"],
        capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "numpy"


def test_chi_eval_scalar_and_array_shapes():
    assert np.ndim(kernels.chi_eval_np(np.float64(-2.0))) == 0
    assert kernels.chi_eval_np(np.array([[-2.0, 0.0]])).shape == (1, 2)
    # both backends preserve scalar-ness (0-d in, 0-d out)
    for name in ("numpy", "numba"):
        impls = kernels.get_impls(name)
        if impls is None:
            continue
        assert np.ndim(impls["chi_eval"](np.asarray(-2.0))) == 0
        assert impls["chi_eval"](np.array([-2.0])).shape == (1,)
