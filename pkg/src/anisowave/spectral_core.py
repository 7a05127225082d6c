"""Periodic pseudospectral core: offset lattice, derivatives, polar operators.

All fields live on a uniform n^3 lattice over a cube of side L centered at the
origin, with every coordinate offset by h/2 so no lattice point sits at the
origin (min |x| = sqrt(3) h / 2).  That keeps the polar-decomposition
operators (radial derivative, slashed Laplacian, angular gradient) finite on
the lattice without special-casing r = 0.

Derivatives are exact on the trigonometric interpolant (diagonal multipliers
i k_j in Fourier space); integrals are the lattice sum times h^3, which is the
trapezoid rule and is spectrally accurate for smooth periodic integrands.

Experiments must keep their data inside the box: for a run to time horizon T
with data radius R and maximal propagation speed c, choose L > 2 (c T + R) so
the periodic images never contaminate the window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels


class Grid:
    """Uniform periodic offset grid on [-L/2, L/2)^3.

    Lattice coordinates along each axis are -L/2 + (i + 1/2) h, i = 0..n-1.
    """

    def __init__(self, n: int, box_length: float):
        if n < 8 or n % 2 != 0:
            raise ValueError(f"grid size n must be even and >= 8, got {n}")
        if not box_length > 0:
            raise ValueError(f"box_length must be positive, got {box_length}")
        self.n = int(n)
        self.box_length = float(box_length)
        self.h = self.box_length / self.n
        self.coords1d = -0.5 * self.box_length + (np.arange(self.n) + 0.5) * self.h
        # angular frequencies 2*pi*m/L in FFT ordering
        self.freqs1d = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        self.rfreqs1d = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.h)
        self._cache: dict = {}

    # -- lazily built coordinate / frequency arrays -------------------------

    def _cached(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    @property
    def x(self):
        """Broadcastable physical coordinates (x1, x2, x3)."""
        return self._cached(
            "x",
            lambda: (
                self.coords1d[:, None, None],
                self.coords1d[None, :, None],
                self.coords1d[None, None, :],
            ),
        )

    @property
    def r(self):
        """|x| on the lattice; strictly positive by the half-cell offset."""

        def build():
            x1, x2, x3 = self.x
            return np.sqrt(x1**2 + x2**2 + x3**2)

        return self._cached("r", build)

    @property
    def k_rfft(self):
        """Broadcastable spectral coordinates for rfftn layout."""
        return self._cached(
            "k_rfft",
            lambda: (
                self.freqs1d[:, None, None],
                self.freqs1d[None, :, None],
                self.rfreqs1d[None, None, :],
            ),
        )

    @property
    def k_full(self):
        return self._cached(
            "k_full",
            lambda: (
                self.freqs1d[:, None, None],
                self.freqs1d[None, :, None],
                self.freqs1d[None, None, :],
            ),
        )

    @property
    def k_abs_rfft(self):
        def build():
            k1, k2, k3 = self.k_rfft
            return np.sqrt(k1**2 + k2**2 + k3**2)

        return self._cached("k_abs_rfft", build)

    @property
    def cell_volume(self):
        return self.h**3

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.n == other.n
            and self.box_length == other.box_length
        )

    def __repr__(self):
        return f"Grid(n={self.n}, box_length={self.box_length})"


def make_grid(n: int, box_length: float) -> Grid:
    return Grid(n, box_length)


def wraparound_budget_ok(grid: Grid, horizon: float, max_speed: float, data_radius: float) -> bool:
    """L > 2 (c T + R): periodic images stay outside the observation window."""
    return grid.box_length > 2.0 * (max_speed * horizon + data_radius)


# -- spectral operations on raw arrays --------------------------------------


def fft(values):
    return np.fft.rfftn(values)


def ifft(spec, grid: Grid):
    return np.fft.irfftn(spec, s=grid.shape, axes=(0, 1, 2))


def derivative(values, grid: Grid, multi_index: Sequence[int]):
    """Apply the spectral derivative prod_j (d/dx_j)^{m_j}."""
    if len(multi_index) != 3 or any(m < 0 for m in multi_index):
        raise ValueError(f"bad multi_index {multi_index!r}")
    if sum(multi_index) == 0:
        return np.array(values, copy=True)
    spec = np.fft.rfftn(values)
    k1, k2, k3 = grid.k_rfft
    for k, m in zip((k1, k2, k3), multi_index):
        if m:
            spec = spec * (1j * k) ** m
    return np.fft.irfftn(spec, s=grid.shape, axes=(0, 1, 2))


def derivative_spec(spec, grid: Grid, multi_index: Sequence[int]):
    """Same as derivative() but in and out of rfftn layout, without transforms."""
    k1, k2, k3 = grid.k_rfft
    out = spec
    for k, m in zip((k1, k2, k3), multi_index):
        if m:
            out = out * (1j * k) ** m
    return out


def gradient(values, grid: Grid):
    spec = np.fft.rfftn(values)
    k1, k2, k3 = grid.k_rfft
    return tuple(np.fft.irfftn(1j * k * spec, s=grid.shape, axes=(0, 1, 2)) for k in (k1, k2, k3))


def laplacian(values, grid: Grid, eps=(1.0, 1.0, 1.0)):
    """sum_j eps_j d^2/dx_j^2, the spatial part of the anisotropic d'Alembertian."""
    spec = np.fft.rfftn(values)
    k1, k2, k3 = grid.k_rfft
    sym = eps[0] * k1**2 + eps[1] * k2**2 + eps[2] * k3**2
    return np.fft.irfftn(-sym * spec, s=grid.shape, axes=(0, 1, 2))


def x_dot_grad(values, grid: Grid):
    """(x . grad) f, the spatial part of the scaling field; smooth at the origin."""
    g1, g2, g3 = gradient(values, grid)
    x1, x2, x3 = grid.x
    return x1 * g1 + x2 * g2 + x3 * g3


def radial_derivative(values, grid: Grid):
    """d_r f = (x . grad f) / r; the offset lattice keeps r > 0."""
    return x_dot_grad(values, grid) / grid.r


def radial_derivative2(values, grid: Grid):
    """d_r^2 f, as two radial-derivative passes."""
    return radial_derivative(radial_derivative(values, grid), grid)


def slashed_laplacian(values, grid: Grid):
    """Angular Laplacian via the polar split: lap f - d_r^2 f - (2/r) d_r f."""
    dr = radial_derivative(values, grid)
    dr2 = radial_derivative(dr, grid)
    return laplacian(values, grid) - dr2 - 2.0 * dr / grid.r


def angular_gradient_sq(values, grid: Grid):
    """|slashed-grad f|^2 = |grad f|^2 - (d_r f)^2 (pointwise, frame free)."""
    g1, g2, g3 = gradient(values, grid)
    x1, x2, x3 = grid.x
    dr = (x1 * g1 + x2 * g2 + x3 * g3) / grid.r
    return g1**2 + g2**2 + g3**2 - dr**2


def hessian_sq(values, grid: Grid):
    """sum_{ij} (d_i d_j f)^2 over ordered index pairs."""
    spec = np.fft.rfftn(values)
    k1, k2, k3 = grid.k_rfft
    ks = (k1, k2, k3)
    out = np.zeros(grid.shape)
    for i in range(3):
        for j in range(3):
            hij = np.fft.irfftn(-ks[i] * ks[j] * spec, s=grid.shape, axes=(0, 1, 2))
            out += hij**2
    return out


def slashed_hessian_sq(values, grid: Grid):
    """|covariant sphere Hessian|^2, assembled in ambient Cartesian components.

    (slashed-hess f)_{ij} = (P H P)_{ij} - (d_r f / r) P_{ij} with P = I - n n^T
    the tangential projector and H the ambient Hessian; the correction is the
    sphere's second fundamental form term, which kills radial functions
    exactly.  No sphere chart is involved.
    """
    spec = np.fft.rfftn(values)
    k1, k2, k3 = grid.k_rfft
    ks = (k1, k2, k3)
    h = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(i, 3):
            h[i][j] = np.fft.irfftn(-ks[i] * ks[j] * spec, s=grid.shape, axes=(0, 1, 2))
            h[j][i] = h[i][j]
    x = grid.x
    n = [xi / grid.r for xi in x]
    hn = [sum(h[i][j] * n[j] for j in range(3)) for i in range(3)]
    nhn = sum(n[i] * hn[i] for i in range(3))
    dr_over_r = sum(n[i] * np.fft.irfftn(1j * ks[i] * spec, s=grid.shape, axes=(0, 1, 2))
                    for i in range(3)) / grid.r
    out = np.zeros(grid.shape)
    for i in range(3):
        for j in range(3):
            delta = 1.0 if i == j else 0.0
            b = (h[i][j] - n[i] * hn[j] - n[j] * hn[i] + n[i] * n[j] * nhn
                 - dr_over_r * (delta - n[i] * n[j]))
            out += b**2
    return out


def integral(values, grid: Grid):
    """Lattice quadrature: h^3 * sum (trapezoid rule on the torus)."""
    return float(np.sum(values)) * grid.cell_volume


def interpolate(values, grid: Grid, points):
    """Evaluate the trigonometric interpolant at off-lattice points (P, 3)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != 3:
        raise ValueError("points must have shape (P, 3)")
    spec = np.fft.fftn(values)
    c0 = grid.coords1d[0]
    phases = [
        np.exp(1j * np.outer(grid.freqs1d, pts[:, a] - c0)) for a in range(3)
    ]
    vals = np.einsum("ijk,ip,jp,kp->p", spec, phases[0], phases[1], phases[2])
    return vals.real / grid.n**3


# -- fields and regions ------------------------------------------------------


@dataclass(frozen=True)
class ScalarField:
    """Immutable real scalar field sampled on a Grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} != grid shape {self.grid.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def d(self, multi_index):
        return ScalarField(self.grid, derivative(self.values, self.grid, multi_index))


@dataclass(frozen=True)
class Region:
    """Membership predicate of (t, x); used to restrict norms.

    kinds: 'all', 'ball' (radius), 'interior_cone' (margin: |x| <= (1-margin) t),
    'exterior_cone' (|x| >= t), 'cone_shell' (eps, exponent, q_min, q_max with
    q = t - r_eps(x), r_eps = sqrt(sum eps_j^exponent x_j^2)).
    """

    kind: str
    radius: float = 0.0
    margin: float = 0.0
    eps: tuple = (1.0, 1.0, 1.0)
    exponent: float = -2.0
    q_min: float = 0.0
    q_max: float = np.inf

    def mask(self, grid: Grid, t: Optional[float] = None):
        if self.kind == "all":
            return np.ones(grid.shape, dtype=bool)
        if self.kind == "ball":
            return grid.r <= self.radius
        if self.kind in ("interior_cone", "exterior_cone", "cone_shell") and (
            t is None or t <= 0
        ):
            raise ValueError(f"region {self.kind!r} needs t > 0")
        if self.kind == "interior_cone":
            return grid.r <= (1.0 - self.margin) * t
        if self.kind == "exterior_cone":
            return grid.r >= t
        if self.kind == "cone_shell":
            x1, x2, x3 = grid.x
            e = self.eps
            p = self.exponent
            r_eps = np.sqrt(e[0] ** p * x1**2 + e[1] ** p * x2**2 + e[2] ** p * x3**2)
            q = t - r_eps
            return (q >= self.q_min) & (q < self.q_max)
        raise ValueError(f"unknown region kind {self.kind!r}")


def norm(
    values,
    grid: Grid,
    weight=None,
    region: Optional[Region] = None,
    t: Optional[float] = None,
    kind: str = "L2",
):
    """Weighted lattice norm over an optional region.

    L2: sqrt(h^3 sum w |f|^2), Linf: max |f| (weight ignored for Linf).
    Raises on an empty region.
    """
    values = np.asarray(values)
    if region is not None:
        m = region.mask(grid, t)
        if not m.any():
            raise ValueError(f"region {region.kind!r} is empty on this grid")
    else:
        m = None
    if kind == "Linf":
        if m is None:
            return float(np.max(np.abs(values)))
        return kernels.masked_abs_max(values, m)
    if kind != "L2":
        raise ValueError(f"unknown norm kind {kind!r}")
    if weight is None and m is None:
        return l2_norm(values, grid)
    w = np.ones(grid.shape) if weight is None else np.asarray(weight, dtype=np.float64)
    if w.shape != grid.shape:
        w = np.broadcast_to(w, grid.shape).copy()
    if m is not None:
        w = np.where(m, w, 0.0)
    return float(np.sqrt(kernels.weighted_sq_sum(values, w) * grid.cell_volume))


def l2_norm(values, grid: Grid):
    """Unweighted L2 norm, the common fast path."""
    v = np.asarray(values)
    return float(np.sqrt(np.vdot(v, v).real * grid.cell_volume))
