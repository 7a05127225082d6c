"""Scaling vector field algebra and the commuted-derivative lattice.

The only non-translation symmetry used anywhere is S = t d_t + r d_r
(= t d_t + x . grad).  Its algebra with the anisotropic d'Alembertian
box = -d_t^2 + sum_j eps_j d_j^2 and with translations:

    box (S phi) = S (box phi) + 2 box phi        (scaling commutation)
    S d_j = d_j (S - 1),   S d_t = d_t (S - 1)

so every word over {d_1, d_2, d_3, S} expands into the canonical basis
d^beta S^s with integer coefficients (normal_order below).  A lattice of
commuted fields therefore only has to carry the S-stack S^s phi (s <= order)
together with its time derivatives; spatial letters are exact Fourier
multipliers applied on demand.

Time derivatives at initialization are produced by recursive substitution:
every d_t^2 that appears is replaced through the field's wave equation, so S
words never touch finite differencing in t.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .spectral_core import (
    Grid,
    derivative,
    l2_norm,
    laplacian,
    radial_derivative,
    slashed_laplacian,
    x_dot_grad,
)

LETTERS = ("1", "2", "3", "S")


def all_words(max_order: int):
    """Every word over {d_1, d_2, d_3, S} of length <= max_order."""
    for n in range(max_order + 1):
        yield from itertools.product(LETTERS, repeat=n)


@lru_cache(maxsize=None)
def normal_order(word: tuple):
    """Expand the operator word into the canonical basis d^beta S^s.

    word = (g_1, ..., g_n) denotes the composition Gamma_{g_1} o ... o
    Gamma_{g_n} (leftmost outermost).  Returns {(beta, s): coeff} using
    S d^beta = d^beta (S - |beta|).
    """
    terms = {((0, 0, 0), 0): 1.0}
    for g in reversed(word):
        new: dict = {}
        for (beta, s), c in terms.items():
            if g == "S":
                nb = sum(beta)
                _add(new, (beta, s + 1), c)
                if nb:
                    _add(new, (beta, s), -c * nb)
            else:
                j = int(g) - 1
                b = list(beta)
                b[j] += 1
                _add(new, (tuple(b), s), c)
        terms = new
    return {k: v for k, v in terms.items() if v != 0.0}


def _add(d, key, val):
    d[key] = d.get(key, 0.0) + val


def canonical_words(max_order: int):
    """All (beta, s) with |beta| + s <= max_order."""
    out = []
    for s in range(max_order + 1):
        for b1 in range(max_order - s + 1):
            for b2 in range(max_order - s - b1 + 1):
                for b3 in range(max_order - s - b1 - b2 + 1):
                    out.append(((b1, b2, b3), s))
    return out


def apply_S(values, values_t, grid: Grid, t: float):
    """S phi = t d_t phi + r d_r phi, with d_t phi supplied (never differenced)."""
    return t * values_t + x_dot_grad(values, grid)


# -- the commuted lattice ----------------------------------------------------


class CommutedLattice:
    """Holds S^s phi and d_t S^s phi for s = 0..order on a grid at time t.

    Entries for arbitrary words are assembled through normal_order; they're
    cached per word.  The stack is what gets *evolved*; recomputing S^2 phi
    from the base solution would need d_t^2 of S phi, which is only stably
    available through the evolution itself.
    """

    def __init__(self, grid: Grid, t: float, eps, psi, psit, order: int):
        if len(psi) != order + 1 or len(psit) != order + 1:
            raise ValueError("stack length must be order + 1")
        self.grid = grid
        self.t = float(t)
        self.eps = tuple(float(e) for e in eps)
        self.order = int(order)
        self.psi = list(psi)
        self.psit = list(psit)
        self._cache: dict = {}

    @property
    def base(self):
        return self.psi[0]

    @property
    def base_t(self):
        return self.psit[0]

    def entry(self, word) -> tuple:
        """(psi_J, d_t psi_J) for the literal word J."""
        word = tuple(word)
        if any(g not in LETTERS for g in word):
            raise ValueError(f"bad word {word!r}")
        if len(word) > self.order:
            raise ValueError(f"word {word!r} exceeds lattice order {self.order}")
        if word not in self._cache:
            val = np.zeros(self.grid.shape)
            val_t = np.zeros(self.grid.shape)
            for (beta, s), c in normal_order(word).items():
                val += c * derivative(self.psi[s], self.grid, beta)
                val_t += c * derivative(self.psit[s], self.grid, beta)
            self._cache[word] = (val, val_t)
        return self._cache[word]

    def canonical_entry(self, beta, s):
        return (
            derivative(self.psi[s], self.grid, beta),
            derivative(self.psit[s], self.grid, beta),
        )


def populate_lattice(
    phi0,
    phi1,
    grid: Grid,
    t0: float,
    order: int,
    eps=(1.0, 1.0, 1.0),
    forcing_tderivs: Optional[Sequence] = None,
) -> CommutedLattice:
    """Initialize the commuted lattice from Cauchy data (phi, d_t phi) at t0.

    Every needed time derivative comes from recursive substitution through
    box phi = f: d_t^{n+2} phi = lap_eps d_t^n phi - d_t^n f.  S-stacks are
    then built by d_t^m (S psi) = t psi^{(m+1)} + m psi^{(m)} + r d_r psi^{(m)}.

    forcing_tderivs supplies (d_t^n f)(t0) for n = 0..order-1; omitted means
    a free evolution.  Raises if too few forcing derivatives are given.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    if t0 <= 0:
        raise ValueError("lattice convention requires t0 > 0")
    depth = order + 1  # time-derivative stack height at s = 0
    n_forcing = max(0, depth - 1)
    if forcing_tderivs is None:
        forcing_tderivs = [np.zeros(grid.shape)] * n_forcing
    if len(forcing_tderivs) < n_forcing:
        raise ValueError(
            f"need {n_forcing} forcing time derivatives for order {order}, "
            f"got {len(forcing_tderivs)}"
        )
    td = [np.asarray(phi0, dtype=np.float64), np.asarray(phi1, dtype=np.float64)]
    for m in range(depth - 1):
        td.append(laplacian(td[m], grid, eps) - forcing_tderivs[m])
    stacks = [td]
    for s in range(1, order + 1):
        prev = stacks[-1]
        cur = []
        for m in range(len(prev) - 1):
            cur.append(t0 * prev[m + 1] + m * prev[m] + x_dot_grad(prev[m], grid))
        stacks.append(cur)
    psi = [st[0] for st in stacks]
    psit = [st[1] for st in stacks]
    return CommutedLattice(grid, t0, eps, psi, psit, order)


# -- operators ---------------------------------------------------------------


def box_apply(values, values_tt, grid: Grid, eps):
    """box phi = -d_t^2 phi + lap_eps phi with d_t^2 phi supplied."""
    return laplacian(values, grid, eps) - values_tt


def L_apply(values, grid: Grid, t: float, method: str = "cartesian"):
    """The degenerate elliptic operator L = slashed-lap + (1 - r^2/t^2) r^{-2} d_r (r^2 d_r .).

    'cartesian' evaluates the algebraically identical smooth form
    L = lap - t^{-2} [ (x.grad)^2 + x.grad ], which never divides by r;
    'polar' evaluates the literal polar decomposition.
    """
    if t == 0:
        raise ValueError("L is defined for t != 0")
    if method == "cartesian":
        xg = x_dot_grad(values, grid)
        return laplacian(values, grid) - (x_dot_grad(xg, grid) + xg) / t**2
    if method == "polar":
        dr = radial_derivative(values, grid)
        dr2 = radial_derivative(dr, grid)
        radial = dr2 + 2.0 * dr / grid.r
        return slashed_laplacian(values, grid) + (1.0 - (grid.r / t) ** 2) * radial
    raise ValueError(f"unknown method {method!r}")


def F_apply(lattice: CommutedLattice, form: str = "both"):
    """F[phi] = t^{-2} (2 t d_t S phi - S^2 phi - S phi)
             = t^{-2} (S^2 phi - 2 r d_r S phi - S phi).

    Needs lattice order >= 2 (S^2 phi and d_t S phi are lattice entries, not
    recomputed).  Returns (F, rel_discrepancy) where the discrepancy compares
    the two displayed forms.
    """
    if lattice.order < 2:
        raise ValueError("F needs a lattice of order >= 2")
    t = lattice.t
    s1, s1_t = lattice.psi[1], lattice.psit[1]
    s2 = lattice.psi[2]
    form_a = (2.0 * t * s1_t - s2 - s1) / t**2
    form_b = (s2 - 2.0 * x_dot_grad(s1, lattice.grid) - s1) / t**2
    scale = max(float(np.max(np.abs(form_a))), 1e-300)
    disc = float(np.max(np.abs(form_a - form_b))) / scale
    if form == "a":
        return form_a, disc
    if form == "b":
        return form_b, disc
    return form_a, disc


def commutator_residual(phi_tderivs: Callable, grid: Grid, eps, t: float):
    """Relative L2 residual of the scaling commutation box(S phi) = (S + 2) box phi.

    phi_tderivs(n) must return the field d_t^n phi(t, .) for n <= 3, built
    from an analytic solution or test function.  The residual
    || box(S phi) - S(box phi) - 2 box phi || / || 2 box phi || vanishes to
    discretization accuracy for any smooth phi.
    """
    p0, p1, p2, p3 = (phi_tderivs(n) for n in range(4))
    s_phi = t * p1 + x_dot_grad(p0, grid)
    s_phi_tt = t * p3 + 2.0 * p2 + x_dot_grad(p2, grid)
    box_s = laplacian(s_phi, grid, eps) - s_phi_tt
    box_phi = laplacian(p0, grid, eps) - p2
    box_phi_t = laplacian(p1, grid, eps) - p3
    s_box = t * box_phi_t + x_dot_grad(box_phi, grid)
    resid = box_s - s_box - 2.0 * box_phi
    denom = l2_norm(2.0 * box_phi, grid)
    if denom == 0.0:
        raise ValueError("box phi vanishes; residual is not normalizable")
    return l2_norm(resid, grid) / denom


def gamma_energy(lattice: CommutedLattice, k: int, word_set: str = "full"):
    """sqrt(sum_{|J| <= k} ||d psi_J||^2) with d = (d_t, grad).

    word_set 'full' iterates every literal word (the reference definition);
    'canonical' sums over the spanning basis d^beta S^s only, which is the
    scalable choice at higher order.
    """
    if k > lattice.order:
        raise ValueError(f"k={k} exceeds lattice order {lattice.order}")
    total = 0.0
    grid = lattice.grid
    if word_set == "full":
        entries = (lattice.entry(w) for w in all_words(k))
    elif word_set == "canonical":
        entries = (
            lattice.canonical_entry(beta, s)
            for beta, s in canonical_words(k)
        )
    else:
        raise ValueError(f"unknown word_set {word_set!r}")
    for val, val_t in entries:
        total += l2_norm(val_t, grid) ** 2
        spec = np.fft.rfftn(val)
        k1, k2, k3 = grid.k_rfft
        for kk in (k1, k2, k3):
            total += l2_norm(np.fft.irfftn(1j * kk * spec, s=grid.shape, axes=(0, 1, 2)), grid) ** 2
    return float(np.sqrt(total))
