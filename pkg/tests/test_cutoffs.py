"""Cutoff family exactness and stationary-set measure oracles.

The chi branch polynomials are re-derived here independently (exact dyadic
arithmetic) and the library values are checked against them frozen.
"""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anisowave.cutoffs import (
    chi, chi_d1, chi_d2, chi_scaled, chi_scaled_d1, chi_scaled_d2, chi_band,
    chi_range, chi_ge, chi_smoothness_sup, pk_project, pk_symbol,
    angular_cutoff, angular_cutoff_lbar, PhaseSetSpec, skl_measure_quad,
    skl_measure_mc, measure_lemma_sweep,
)
from anisowave.spectral_core import make_grid, fft
from conftest import bump_sum


# independent branch oracle: chi = (x+3)^11/4 on [-3,-2],
# (-19 (x+1)^11 - 22 (x+1)^10 + 4)/4 on [-2,-1], constants outside
def _branch_a(x):
    u = Fraction(x) + 3
    return (u**11 / 4, 11 * u**10 / 4, 110 * u**9 / 4)


def _branch_b(x):
    v = Fraction(x) + 1
    return ((-19 * v**11 - 22 * v**10 + 4) / 4,
            (-209 * v**10 - 220 * v**9) / 4,
            (-2090 * v**9 - 1980 * v**8) / 4)


def test_branch_junctions_exact():
    # the two inner branches and the constant tails meet C^2 at every junction
    assert _branch_a(-3) == (0, 0, 0)
    assert _branch_a(-2) == _branch_b(-2) == (Fraction(1, 4), Fraction(11, 4),
                                              Fraction(55, 2))
    assert _branch_b(-1) == (1, 0, 0)


@pytest.mark.parametrize("x", [-2.5, -2.0, -1.5])
def test_chi_matches_branch_oracle(x):
    val, d1, d2 = (_branch_a if x <= -2.0 else _branch_b)(x)
    if x == -2.0:  # junction: both branches must give the same numbers
        assert _branch_a(x) == _branch_b(x)
    assert float(chi(x)) == pytest.approx(float(val), abs=1e-15)
    assert float(chi_d1(x)) == pytest.approx(float(d1), abs=1e-14)
    assert float(chi_d2(x)) == pytest.approx(float(d2), abs=1e-13)


def test_chi_frozen_values():
    # dyadic rationals from the branch polynomials
    assert float(chi(-2.0)) == 0.25
    assert float(chi_d1(-2.0)) == 2.75
    assert float(chi_d2(-2.0)) == 27.5
    assert float(chi(-2.5)) == pytest.approx(1 / 8192, abs=1e-18)
    assert float(chi(-1.5)) == pytest.approx(8167 / 8192, abs=1e-15)
    assert float(chi_d1(-1.5)) == pytest.approx(231 / 4096, abs=1e-16)
    assert float(chi_d2(-1.5)) == pytest.approx(-935 / 1024, abs=1e-15)


def test_chi_even_symmetry():
    xs = np.linspace(0.0, 3.5, 401)
    np.testing.assert_array_equal(chi(xs), chi(-xs))
    np.testing.assert_array_equal(chi_d1(xs), -chi_d1(-xs))
    np.testing.assert_array_equal(chi_d2(xs), chi_d2(-xs))


def test_chi_support_and_plateau():
    assert np.all(chi(np.linspace(-1.0, 1.0, 101)) == 1.0)
    assert np.all(chi(np.array([-3.0, -4.0, 3.0, 5.0])) == 0.0)
    inside = np.linspace(-2.999, -1.001, 301)
    vals = chi(inside)
    assert np.all((vals > 0.0) & (vals <= 1.0))
    # monotone up to the plateau (the last interior values round to 1.0)
    assert np.all(np.diff(vals) >= 0.0)
    assert vals[0] < 1e-6 and vals[-1] == 1.0


def test_chi_smoothness_sup_stable():
    coarse = chi_smoothness_sup(10_000)
    fine = chi_smoothness_sup(100_000)
    assert math.isfinite(fine) and fine > 0
    assert abs(fine - coarse) / fine < 0.01


def test_scaled_family_and_derivatives():
    xs = np.linspace(-13.0, 13.0, 501)
    np.testing.assert_allclose(chi_scaled(2, xs), chi(xs / 4.0), atol=0)
    np.testing.assert_allclose(chi_scaled_d1(2, xs), chi_d1(xs / 4.0) / 4.0,
                               atol=0)
    np.testing.assert_allclose(chi_scaled_d2(2, xs), chi_d2(xs / 4.0) / 16.0,
                               atol=0)


@settings(max_examples=40, deadline=None)
@given(k1=st.integers(-8, 4), width=st.integers(0, 10))
def test_band_telescoping(k1, width):
    k2 = k1 + width
    xs = np.linspace(-2.0**(k2 + 2), 2.0**(k2 + 2), 257)
    lhs = chi_range(k1, k2, xs)
    rhs = chi_scaled(k2, xs) - chi_scaled(k1 - 1, xs)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_band_nonnegative_and_partition():
    xs = np.linspace(-40.0, 40.0, 1001)
    for k in range(-3, 6):
        assert np.min(chi_band(k, xs)) >= -1e-15
    total = chi_scaled(-3, xs) + chi_range(-2, 5, xs) + chi_ge(6, xs)
    np.testing.assert_allclose(total, 1.0, atol=1e-12)


def test_pk_bands_nearly_orthogonal(rng):
    # P_k P_j = 0 once the dyadic supports separate: |k - j| >= 3
    grid = make_grid(32, 16.0)
    f = bump_sum(grid, rng)
    p0 = pk_project(f, grid, 0)
    again = pk_project(p0, grid, 3)
    assert np.max(np.abs(again)) < 1e-14
    overlap = pk_project(p0, grid, 1)  # adjacent bands do overlap
    assert np.max(np.abs(overlap)) > 1e-8


def test_pk_symbol_partition(grid32):
    sym_sum = sum(pk_symbol(grid32, k) for k in range(-2, 9))
    low = chi_scaled(-3, grid32.k_abs_rfft)
    np.testing.assert_allclose(sym_sum + low, 1.0, atol=1e-12)


def test_angular_cutoff_telescopes(rng):
    xi = rng.standard_normal((50, 3))
    x = np.array([0.2, -0.1, 0.8])
    t = 2.0
    l_bar = -2
    total = sum(angular_cutoff(l, l_bar, xi, x, t)
                for l in range(l_bar, 3))
    np.testing.assert_allclose(total, 1.0, atol=1e-12)


def test_angular_cutoff_validation(rng):
    xi = rng.standard_normal((5, 3))
    with pytest.raises(ValueError):
        angular_cutoff(3, -2, xi, np.zeros(3), 1.0)
    with pytest.raises(ValueError):
        angular_cutoff(0, -2, np.zeros((2, 3)), np.zeros(3), 1.0)


def test_angular_lbar_scale():
    assert angular_cutoff_lbar(4.0, 0) == -2
    assert angular_cutoff_lbar(4.0, 3) == -5
    assert angular_cutoff_lbar(1.0, 0) == 0
    with pytest.raises(ValueError):
        angular_cutoff_lbar(0.0, 0)


# -- stationary-set measures ---------------------------------------------------


def test_measure_closed_form():
    # beta = 1, mu = -1, k = l = 0: u-interval [0,1], measure 2 pi * 7/24
    spec = PhaseSetSpec(k=0, l=0, t=1.0, x=(0.0, 0.0, 1.0), mu=-1)
    assert skl_measure_quad(spec) == pytest.approx(7.0 * math.pi / 12.0,
                                                   abs=1e-12)


def test_measure_empty_cases():
    # beta = 0: |1| <= 2^l fails for every l < 0
    assert skl_measure_quad(PhaseSetSpec(k=0, l=-1, t=1.0,
                                         x=(0.0, 0.0, 0.0))) == 0.0
    # beta = 0, l >= 0: the whole shell
    full = skl_measure_quad(PhaseSetSpec(k=0, l=0, t=1.0, x=(0.0, 0.0, 0.0)))
    shell = 4.0 * math.pi / 3.0 * (1.0 - 0.125)
    assert full == pytest.approx(shell, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(k=st.integers(-5, 5), l=st.integers(-12, 1),
       beta=st.floats(0.1, 4.0, allow_nan=False),
       mu=st.sampled_from([1, -1]))
def test_measure_dyadic_radial_scaling(k, l, beta, mu):
    # the phase condition is radially homogeneous, so |S_{k,l}| = 8^k |S_{0,l}|
    base = skl_measure_quad(PhaseSetSpec(k=0, l=l, t=1.0,
                                         x=(0.0, 0.0, beta), mu=mu))
    scaled = skl_measure_quad(PhaseSetSpec(k=k, l=l, t=1.0,
                                           x=(0.0, 0.0, beta), mu=mu))
    assert scaled == pytest.approx(8.0**k * base, rel=1e-12, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(l=st.integers(-12, 0), beta=st.floats(0.1, 4.0, allow_nan=False),
       mu=st.sampled_from([1, -1]))
def test_measure_monotone_in_l(l, beta, mu):
    small = skl_measure_quad(PhaseSetSpec(k=0, l=l, t=1.0,
                                          x=(0.0, 0.0, beta), mu=mu))
    big = skl_measure_quad(PhaseSetSpec(k=0, l=l + 1, t=1.0,
                                        x=(0.0, 0.0, beta), mu=mu))
    assert small <= big + 1e-14


def test_measure_mc_agrees_with_quad():
    spec = PhaseSetSpec(k=1, l=-2, t=1.0, x=(0.0, 0.0, 0.9), mu=-1)
    quad = skl_measure_quad(spec)
    est, err = skl_measure_mc(spec, n_samples=200_000, seed=11)
    assert err > 0
    assert abs(est - quad) <= 3.0 * err


def test_measure_mc_validation():
    spec = PhaseSetSpec(k=0, l=0, t=1.0, x=(0.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        skl_measure_mc(spec, n_samples=10)


def test_phase_set_spec_validation():
    with pytest.raises(ValueError):
        PhaseSetSpec(k=0, l=0, t=0.0, x=(0.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        PhaseSetSpec(k=0, l=0, t=1.0, x=(0.0, 0.0, 1.0), mu=2)


def test_sweep_rows_and_ratio():
    rows, max_ratio = measure_lemma_sweep(
        k_range=range(-1, 2), l_range=range(-6, 1), betas=(0.5, 1.0),
        mus=(1, -1), mc_samples=5000, seed=4)
    assert len(rows) == 3 * 7 * 2 * 2
    assert math.isfinite(max_ratio) and max_ratio > 0
    for row in rows:
        assert row["ratio"] == pytest.approx(
            row["measure_quad"] / 2.0 ** (3 * row["k"] + row["l"]))
        if row["measure_quad"] > 0:
            assert abs(row["measure_mc"] - row["measure_quad"]) <= max(
                4.0 * row["mc_stderr"], 1e-12)
