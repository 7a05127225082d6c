"""Numerical verification of the degenerate Bochner identities and the
associated weighted inequalities.

Everything here is an integration-by-parts statement on a fixed time slice:
for compactly supported smooth fields the divergence terms integrate to zero
on the torus, so identities must close to spectral accuracy and inequalities
hold with absolute constants.  Constants are handled by calibrate-then-freeze
(measured once on a pinned ensemble, stored, re-runs assert non-regression);
this module only evaluates the two sides, the ensemble lives in the harness.

Angular objects are assembled frame-free: |slashed-grad f|^2 and the sphere
Hessian come from ambient Cartesian derivatives plus the radial projector,
never from a sphere chart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cutoffs import chi_scaled, chi_scaled_d1, chi_scaled_d2
from .spectral_core import (
    Grid,
    angular_gradient_sq,
    gradient,
    hessian_sq,
    integral,
    interpolate,
    l2_norm,
    laplacian,
    radial_derivative,
    slashed_hessian_sq,
    slashed_laplacian,
)
from .vectorfields import CommutedLattice, L_apply, canonical_words


@dataclass
class IdentityReport:
    """Two sides of one check plus the residual convention.

    residual = |lhs - rhs| for identities, max(0, lhs - C * rhs) for
    inequalities with calibrated constant C (stored in `constant`).
    """

    name: str
    lhs: float
    rhs: float
    residual: float
    resolution: int
    tolerance_used: float
    constant: Optional[float] = None

    @property
    def relative(self):
        scale = max(abs(self.lhs), abs(self.rhs), 1e-300)
        return self.residual / scale

    @property
    def ratio(self):
        return self.lhs / self.rhs if self.rhs != 0 else 0.0

    @property
    def passed(self):
        if self.constant is not None:
            return self.residual <= 0.0
        return self.relative <= self.tolerance_used

    def as_dict(self):
        return {
            "check": self.name,
            "resolution": self.resolution,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "constant": self.constant,
            "tolerance": self.tolerance_used,
            "pass": bool(self.passed),
        }


def _require_compact_support(values, grid: Grid, rtol: float = 1e-8):
    """Fields must die before the torus boundary or divergences don't cancel."""
    peak = float(np.max(np.abs(values)))
    if peak == 0.0:
        return
    edge = max(
        float(np.max(np.abs(values[0, :, :]))),
        float(np.max(np.abs(values[-1, :, :]))),
        float(np.max(np.abs(values[:, 0, :]))),
        float(np.max(np.abs(values[:, -1, :]))),
        float(np.max(np.abs(values[:, :, 0]))),
        float(np.max(np.abs(values[:, :, -1]))),
    )
    if edge > rtol * peak:
        raise ValueError(
            f"support touches the window boundary (edge/peak = {edge / peak:.2e}); "
            "divergence terms would not cancel"
        )


def _coef(grid: Grid, t: float):
    """The degeneracy coefficient 1 - r^2/t^2."""
    return 1.0 - (grid.r / t) ** 2


def bochner_integrated(values, grid: Grid, t: float,
                       tolerance: float = 1e-6) -> IdentityReport:
    """Integrated degenerate Bochner identity at time t.

    int |L phi|^2  =  int |slashed-lap phi|^2
                    + 2 int (1 - r^2/t^2) |slashed-grad d_r phi|^2
                    + int ((1 - r^2/t^2) r^{-2} d_r(r^2 d_r phi))^2
                    - 2 int r^{-2} |slashed-grad phi|^2.

    Expanding |L phi|^2 and integrating the cross term by parts in r kills
    every divergence for compactly supported fields; that closure is the
    content being tested.  Via the sphere-Bochner bridge the first block
    equals int |slashed-hess phi|^2 + int r^{-2}|slashed-grad phi|^2, so in
    Hessian form the last coefficient reads -1 rather than the commonly
    quoted -2; only the form above closes to spectral accuracy.
    """
    _require_compact_support(values, grid)
    c = _coef(grid, t)
    lphi = L_apply(values, grid, t)
    lhs = integral(lphi**2, grid)

    dr = radial_derivative(values, grid)
    dr2 = radial_derivative(dr, grid)
    slap = slashed_laplacian(values, grid)
    ang_sq = angular_gradient_sq(values, grid)
    ang_dr_sq = angular_gradient_sq(dr, grid)
    radial_part = c * (dr2 + 2.0 * dr / grid.r)

    rhs = (integral(slap**2, grid)
           + 2.0 * integral(c * ang_dr_sq, grid)
           + integral(radial_part**2, grid)
           - 2.0 * integral(ang_sq / grid.r**2, grid))
    return IdentityReport("bochner_integrated", lhs, rhs, abs(lhs - rhs),
                          grid.n, tolerance)


def sphere_hessian_bridge(values, grid: Grid,
                          tolerance: float = 1e-8) -> IdentityReport:
    """int |slashed-hess phi|^2 = int |slashed-lap phi|^2 - int r^{-2}|slashed-grad phi|^2.

    The sphere Bochner identity (Ricci = r^{-2} metric); both sides here are
    computed by entirely different routes, so this is a real cross-check of
    the projector Hessian.
    """
    _require_compact_support(values, grid)
    lhs = integral(slashed_hessian_sq(values, grid), grid)
    rhs = (integral(slashed_laplacian(values, grid) ** 2, grid)
           - integral(angular_gradient_sq(values, grid) / grid.r**2, grid))
    return IdentityReport("sphere_hessian_bridge", lhs, rhs, abs(lhs - rhs),
                          grid.n, tolerance)


def first_order_integrated(values, grid: Grid, t: float,
                           tolerance: float = 1e-8) -> IdentityReport:
    """int (-L phi) phi = int |slashed-grad phi|^2 + (1 - r^2/t^2)|d_r phi|^2
    + (3/t^2) phi^2 for compactly supported phi."""
    _require_compact_support(values, grid)
    lphi = L_apply(values, grid, t)
    lhs = integral(-lphi * values, grid)
    dr = radial_derivative(values, grid)
    rhs = (integral(angular_gradient_sq(values, grid), grid)
           + integral(_coef(grid, t) * dr**2, grid)
           + 3.0 / t**2 * integral(values**2, grid))
    return IdentityReport("first_order_integrated", lhs, rhs, abs(lhs - rhs),
                          grid.n, tolerance)


# -- weights -------------------------------------------------------------------


@dataclass(eq=False)
class WeightSpec:
    """Radial weight with analytic first and second r-derivatives.

    kinds:
      power_r        r^alpha
      cone_cutoff    chi_{<= k_cut}((r - |x0|) / min{<t - |x0|>, t})
      product        cone_cutoff * r^alpha
      interior       r^alpha * chi_{>= k_in}(r/t)^2   (annular interior weight)
      custom         user-provided (w, w', w'') callables of (r, t)

    Derivatives are exact chain-rule expressions of the piecewise-polynomial
    cutoff, so the variant weight below inherits no differencing error.
    """

    kind: str
    alpha: float = 4.0
    x0: Optional[Sequence] = None
    k_cut: int = -1
    k_in: int = -20
    funcs: Optional[tuple] = None

    def _cone_scale(self, t: float):
        r0 = float(np.linalg.norm(self.x0))
        return r0, min(math.hypot(1.0, t - r0), abs(t))

    def evaluate(self, grid: Grid, t: float):
        """(w, dw/dr, d2w/dr2) as fields on the grid."""
        r = grid.r
        if self.kind == "power_r":
            a = self.alpha
            return r**a, a * r ** (a - 1), a * (a - 1) * r ** (a - 2)
        if self.kind in ("cone_cutoff", "product"):
            if self.x0 is None:
                raise ValueError("cone weights need x0")
            r0, d = self._cone_scale(t)
            z = (r - r0) / d
            c = chi_scaled(self.k_cut, z)
            c1 = chi_scaled_d1(self.k_cut, z) / d
            c2 = chi_scaled_d2(self.k_cut, z) / d**2
            if self.kind == "cone_cutoff":
                return c, c1, c2
            a = self.alpha
            w = c * r**a
            w1 = c1 * r**a + a * c * r ** (a - 1)
            w2 = (c2 * r**a + 2.0 * a * c1 * r ** (a - 1)
                  + a * (a - 1) * c * r ** (a - 2))
            return w, w1, w2
        if self.kind == "interior":
            a = self.alpha
            y = r / t
            g = 1.0 - chi_scaled(self.k_in - 1, y)
            g1 = -chi_scaled_d1(self.k_in - 1, y) / t
            g2 = -chi_scaled_d2(self.k_in - 1, y) / t**2
            w = r**a * g**2
            w1 = a * r ** (a - 1) * g**2 + 2.0 * r**a * g * g1
            w2 = (a * (a - 1) * r ** (a - 2) * g**2
                  + 4.0 * a * r ** (a - 1) * g * g1
                  + 2.0 * r**a * (g1**2 + g * g2))
            return w, w1, w2
        if self.kind == "custom":
            if self.funcs is None:
                raise ValueError("custom weights need (w, w1, w2) callables")
            return tuple(f(r, t) for f in self.funcs)
        raise ValueError(f"unknown weight kind {self.kind!r}")

    def omega_tilde(self, grid: Grid, t: float):
        """The variant weight uniquely determined by the radial derivatives:

        w~ = (2/r) w' - (1/(2 r^2)) d_r(r^2 w' (1 - r^2/t^2))
           = (2/r) w' - (1/r) w' (1 - r^2/t^2) - (1/2) w'' (1 - r^2/t^2) + (r/t^2) w'.
        """
        r = grid.r
        _, w1, w2 = self.evaluate(grid, t)
        c = _coef(grid, t)
        return 2.0 * w1 / r - w1 * c / r - 0.5 * w2 * c + r * w1 / t**2

    def ratio_sup(self, grid: Grid, t: float):
        """sup over {w > 0} of (|w'|^2 + |w''|^2)/w, the smoothness ratio the
        weight family must keep bounded."""
        w, w1, w2 = self.evaluate(grid, t)
        mask = w > 1e-14 * float(np.max(w))
        if not np.any(mask):
            return 0.0
        return float(np.max((w1[mask] ** 2 + w2[mask] ** 2) / w[mask]))


def step_interior_weight(alpha: float = 4.0, k_in: int = -20) -> WeightSpec:
    """The interior second-derivative weight r^alpha chi_{>= k_in}(r/t)^2."""
    return WeightSpec(kind="interior", alpha=alpha, k_in=k_in)


def step_cone_weight(x0, alpha: float = 4.0, k_cut: int = -1) -> WeightSpec:
    """The near-cone weight chi_{<= k_cut}((r - |x0|)/min{<t-|x0|>, t}) r^alpha.

    k_cut = -1 puts the plateau at |r - |x0|| <= d/2 with support 3d/2, a
    genuine neighborhood of the cone through x0 at any usable resolution.
    """
    return WeightSpec(kind="product", alpha=alpha, x0=tuple(x0), k_cut=k_cut)


def weighted_bochner_ratio(lattice: CommutedLattice, f, weight: WeightSpec,
                           delta: float = 0.05,
                           constant: Optional[float] = None) -> IdentityReport:
    """LHS/RHS of the weighted Bochner inequality at the lattice's time.

    LHS = int w (|sl-hess phi|^2 + (1-r^2/t^2)|sl-grad d_r phi|^2
                 + (1-r^2/t^2)^2 |d_r^2 phi|^2)
    RHS = int t^{-4} w |Gamma^{<=2} phi|^2
        + (t^{-2} + r^{-2}) <r/t>^2 w |d_r Gamma^{<=1} phi|^2
        + w f^2 + w~^2 w^{-1} phi^2.

    Needs lattice order >= 2.  Errors where w vanishes but w~ does not (the
    zero-order term would be undefined; the chi-based family avoids this).
    """
    if lattice.order < 2:
        raise ValueError("weighted Bochner needs a lattice of order >= 2")
    grid, t = lattice.grid, lattice.t
    phi = lattice.base
    w, _, _ = weight.evaluate(grid, t)
    if np.any(w < 0):
        raise ValueError("weight must be non-negative")
    wt = weight.omega_tilde(grid, t)
    wmax = float(np.max(w))
    dead = w <= 1e-13 * wmax
    if np.any(dead) and float(np.max(np.abs(wt[dead]))) > 1e-10 * max(
            1.0, float(np.max(np.abs(wt)))):
        raise ValueError("variant weight does not vanish where the weight does")

    c = _coef(grid, t)
    dr = radial_derivative(phi, grid)
    dr2 = radial_derivative(dr, grid)
    lhs = integral(w * (slashed_hessian_sq(phi, grid)
                        + c * angular_gradient_sq(dr, grid)
                        + c**2 * dr2**2), grid)

    gamma2_sq = np.zeros(grid.shape)
    for beta, p in canonical_words(2):
        gamma2_sq += lattice.canonical_entry(beta, p)[0] ** 2
    dr_gamma1_sq = np.zeros(grid.shape)
    for beta, p in canonical_words(1):
        dr_gamma1_sq += radial_derivative(
            lattice.canonical_entry(beta, p)[0], grid) ** 2

    f_sq = np.zeros(grid.shape) if f is None else np.asarray(f) ** 2
    zero_term = np.where(dead, 0.0, wt**2 / np.where(dead, 1.0, w) * phi**2)
    bracket = (1.0 + (grid.r / t) ** 2)
    rhs = integral(w * gamma2_sq, grid) / t**4 \
        + integral((1.0 / t**2 + 1.0 / grid.r**2) * bracket * w * dr_gamma1_sq, grid) \
        + integral(w * f_sq, grid) \
        + integral(zero_term, grid)
    resid = max(0.0, lhs - constant * rhs) if constant is not None else abs(lhs - rhs)
    return IdentityReport("weighted_bochner", lhs, rhs, resid, grid.n,
                          0.0, constant)


def exterior_energy_check(snapshots, grid: Grid, eps=(1.0, 1.0, 1.0),
                          forcing_series=None,
                          constant: Optional[float] = None) -> IdentityReport:
    """The u = t - r weighted exterior energy bound along a run.

    snapshots: [(t, phi, phit, f-or-None), ...], first entry is the data slice.
    Checks for every later slice
        int_{r > t} u^2 |d^2 phi|^2  <=  C (int_{r > t0, slice t0} u^2 |d^2 phi|^2
                                           + (int ||u d f|| ds)^2)
    with d^2 the full spacetime second-derivative envelope and d_t^2 phi
    eliminated through the equation.  forcing_series optionally supplies
    (t, ||u d box phi||_{L2(ext)}) samples for the Duhamel quadrature.
    Reports the worst LHS/RHS ratio; constant (when given) turns the residual
    into the inequality convention max(0, lhs - C rhs).
    """
    if len(snapshots) < 2:
        raise ValueError("need the data slice plus at least one later slice")

    def ext_weighted(t, phi, phit, f):
        u = t - grid.r
        mask = grid.r > t
        lap = laplacian(phi, grid, eps)
        phitt = lap - (0.0 if f is None else f)
        env = phitt**2
        g1, g2, g3 = gradient(phit, grid)
        env = env + 2.0 * (g1**2 + g2**2 + g3**2)
        env = env + hessian_sq(phi, grid)
        return float(np.sum((u**2 * env)[mask])) * grid.cell_volume

    t0, phi0, phit0, f0 = snapshots[0]
    base = ext_weighted(t0, phi0, phit0, f0)
    worst = 0.0
    lhs_at_worst, rhs_at_worst = 0.0, base
    for (t, phi, phit, f) in snapshots[1:]:
        lhs = ext_weighted(t, phi, phit, f)
        duhamel = 0.0
        if forcing_series:
            ts = np.array([s for s, _ in forcing_series if s <= t + 1e-12])
            vs = np.array([v for s, v in forcing_series if s <= t + 1e-12])
            if len(ts) >= 2:
                duhamel = float(np.trapezoid(vs, ts)) ** 2
        rhs = base + duhamel
        ratio = lhs / rhs if rhs > 0 else 0.0
        if ratio > worst:
            worst, lhs_at_worst, rhs_at_worst = ratio, lhs, rhs
    resid = (max(0.0, lhs_at_worst - constant * rhs_at_worst)
             if constant is not None else worst)
    return IdentityReport("exterior_energy", lhs_at_worst, rhs_at_worst,
                          resid, grid.n, 0.0, constant)


def sobolev_embedding_check(lattice: CommutedLattice, x0,
                            delta: float = 0.05,
                            constant: Optional[float] = None) -> IdentityReport:
    """Weighted Sobolev embedding at the off-lattice point x0.

    ratio = |phi(t, x0)| delta |x0| min{t, <t - |x0|>}^{1/2 - 2 delta}
            / ( ||d_r^{<=2} phi||^delta
                * (||phi|| + || w r^2 |sl-hess phi| ||)^{(1+delta)/2}
                * (||phi|| + || w <t - r> d_r phi ||)^{(1-3delta)/2} )

    with w the near-cone cutoff weight centered on |x0|.  Preconditions:
    |x0| >= 2^{-5} t and 0 < delta <= 0.1.
    """
    grid, t = lattice.grid, lattice.t
    x0 = np.asarray(x0, dtype=np.float64)
    r0 = float(np.linalg.norm(x0))
    if r0 < 2.0**-5 * abs(t):
        raise ValueError("need |x0| >= 2^{-5} t for the embedding")
    if not (0.0 < delta <= 0.1):
        raise ValueError("delta must lie in (0, 0.1]")
    phi = lattice.base
    val = abs(float(interpolate(phi, grid, x0.reshape(1, 3))[0]))
    scale = min(abs(t), math.hypot(1.0, t - r0))
    lhs = val * delta * r0 * scale ** (0.5 - 2.0 * delta)

    weight = WeightSpec(kind="cone_cutoff", x0=tuple(x0))
    w, _, _ = weight.evaluate(grid, t)
    dr = radial_derivative(phi, grid)
    dr2 = radial_derivative(dr, grid)
    norm_phi = l2_norm(phi, grid)
    f1 = math.sqrt(norm_phi**2 + l2_norm(dr, grid) ** 2
                   + l2_norm(dr2, grid) ** 2) ** delta
    sl_hess = np.sqrt(slashed_hessian_sq(phi, grid))
    f2 = (norm_phi + l2_norm(w * grid.r**2 * sl_hess, grid)) ** ((1.0 + delta) / 2.0)
    bracket_u = np.sqrt(1.0 + (t - grid.r) ** 2)
    f3 = (norm_phi + l2_norm(w * bracket_u * dr, grid)) ** ((1.0 - 3.0 * delta) / 2.0)
    rhs = f1 * f2 * f3
    resid = max(0.0, lhs - constant * rhs) if constant is not None else (
        lhs / rhs if rhs > 0 else 0.0)
    return IdentityReport("sobolev_embedding", lhs, rhs, resid, grid.n,
                          0.0, constant)


def interior_elliptic_check(lattice: CommutedLattice, box_u=None,
                            constant: Optional[float] = None) -> IdentityReport:
    """Uniform interior ellipticity: deep inside the cone,

    int |hess u|^2 chi_{<= -5}(r/t)  <=  C (t^{-2} int |d Gamma^{<=1} u|^2
                                            + int |box u|^2).

    box_u defaults to zero (free solutions); otherwise pass the exact field.
    Needs lattice order >= 1 for the Gamma^{<=1} block.
    """
    if lattice.order < 1:
        raise ValueError("interior ellipticity needs a lattice of order >= 1")
    grid, t = lattice.grid, lattice.t
    u = lattice.base
    cut = chi_scaled(-5, grid.r / t)
    lhs = integral(hessian_sq(u, grid) * cut, grid)
    dgamma_sq = 0.0
    for beta, p in canonical_words(1):
        val, val_t = lattice.canonical_entry(beta, p)
        dgamma_sq += l2_norm(val_t, grid) ** 2
        g1, g2, g3 = gradient(val, grid)
        dgamma_sq += integral(g1**2 + g2**2 + g3**2, grid)
    box_sq = 0.0 if box_u is None else integral(np.asarray(box_u) ** 2, grid)
    rhs = dgamma_sq / t**2 + box_sq
    resid = max(0.0, lhs - constant * rhs) if constant is not None else (
        lhs / rhs if rhs > 0 else 0.0)
    return IdentityReport("interior_elliptic", lhs, rhs, resid, grid.n,
                          0.0, constant)
