"""Dyadic cutoff family, frequency projections, and stationary-phase sets.

The base cutoff chi is an explicit even C^2 function built from two degree-11
polynomial branches: identically 1 on [-1, 1], identically 0 outside (-3, 3),
monotone in |x| in between.  Rescalings chi_{<=k}(x) = chi(2^{-k} x) generate
the dyadic family; differences give the band cutoffs chi_k and the associated
Littlewood-Paley projections P_k (radial Fourier symbol chi_k(|xi|)).

The stationary-phase sets

    S_{k,l}(t, x) = { xi : |1 + mu x.xi / (t |xi|)| <= 2^l, |xi| in [2^{k-1}, 2^k] }

are rotationally symmetric about the x axis, so their volume reduces to a 1-D
angular integral over an interval in cos(theta), evaluated here by quadrature
over the analytically inverted theta-set, with a seeded Monte Carlo
cross-check.  The measure bound |S_{k,l}| <= C 2^{3k+l} is probed by a sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .spectral_core import Grid


# -- the chi family ----------------------------------------------------------


def chi(x):
    """The base C^2 cutoff; accepts scalars or arrays."""
    return kernels.chi_eval(np.asarray(x, dtype=np.float64))


def chi_d1(x):
    return kernels.chi_d1_eval(np.asarray(x, dtype=np.float64))


def chi_d2(x):
    return kernels.chi_d2_eval(np.asarray(x, dtype=np.float64))


def chi_scaled(k: int, x):
    """chi_{<=k}(x) = chi(2^{-k} x)."""
    return chi(np.asarray(x, dtype=np.float64) * 2.0 ** (-k))


def chi_scaled_d1(k: int, x):
    return chi_d1(np.asarray(x, dtype=np.float64) * 2.0 ** (-k)) * 2.0 ** (-k)


def chi_scaled_d2(k: int, x):
    return chi_d2(np.asarray(x, dtype=np.float64) * 2.0 ** (-k)) * 4.0 ** (-k)


def chi_band(k: int, x):
    """chi_k = chi_{<=k} - chi_{<=k-1}; nonnegative by monotonicity in |x|."""
    return chi_scaled(k, x) - chi_scaled(k - 1, x)


def chi_range(k1: int, k2: int, x):
    """chi_{[k1,k2]} = sum_{k=k1}^{k2} chi_k (literal sum)."""
    if k2 < k1:
        raise ValueError("need k1 <= k2")
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for k in range(k1, k2 + 1):
        out = out + chi_band(k, x)
    return out


def chi_ge(k: int, x):
    """chi_{>=k} = 1 - chi_{<=k-1}."""
    return 1.0 - chi_scaled(k - 1, x)


def chi_smoothness_sup(n_samples: int = 100_000):
    """sup over {chi > 0} of |chi'|^2/chi + |chi''|^2/chi, by dense sampling.

    chi is even and vanishes outside (-3, 3), so sampling (-3, 0] suffices.
    Exact branch derivatives keep this free of finite-difference noise.
    """
    xs = np.linspace(-3.0, 0.0, n_samples)
    c = chi(xs)
    pos = c > 0.0
    c = c[pos]
    d1 = chi_d1(xs[pos])
    d2 = chi_d2(xs[pos])
    return float(np.max((d1 * d1 + d2 * d2) / c))


# -- frequency projections ---------------------------------------------------


def pk_project(values, grid: Grid, k: int):
    """Littlewood-Paley piece P_k f: Fourier multiplier chi_k(|xi|)."""
    spec = np.fft.rfftn(values)
    sym = chi_band(k, grid.k_abs_rfft)
    return np.fft.irfftn(sym * spec, s=grid.shape, axes=(0, 1, 2))


def pk_symbol(grid: Grid, k: int):
    return chi_band(k, grid.k_abs_rfft)


# -- angular cutoffs ---------------------------------------------------------


def angular_cutoff(l: int, l_bar: int, xi, x, t: float):
    """phi^l_{l_bar}(xi; x, t), the angular partition member at scale l.

    Argument z = 1 - x.xi / (t |xi|); the family telescopes to 1 over
    l in [l_bar, 2]: chi_{<=l_bar}(z) at the bottom, chi_l(z) strictly
    between, and chi_{>=2}(z) = 1 - chi_{<=1}(z) as the top cap.  The symbol
    is radially homogeneous of degree zero in xi.
    """
    if not (l_bar <= l <= 2):
        raise ValueError(f"need l_bar <= l <= 2, got l={l}, l_bar={l_bar}")
    xi = np.asarray(xi, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    norms = np.sqrt(np.sum(xi**2, axis=-1))
    if np.any(norms == 0.0):
        raise ValueError("angular cutoff undefined at xi = 0")
    z = 1.0 - np.tensordot(xi, x, axes=([-1], [0])) / (t * norms)
    if l == l_bar:
        return chi_scaled(l_bar, z)
    if l == 2:
        return 1.0 - chi_scaled(1, z)
    return chi_band(l, z)


def angular_cutoff_lbar(t: float, k: int):
    """The dyadic-time scale choice l_bar = -m - k for t in [2^{m-1}, 2^m]."""
    if t <= 0:
        raise ValueError("need t > 0")
    m = int(math.ceil(math.log2(t)))
    return -m - k


# -- stationary-phase sets ---------------------------------------------------


@dataclass(frozen=True)
class PhaseSetSpec:
    """S_{k,l}(t, x) with sign mu (+1 or -1)."""

    k: int
    l: int
    t: float
    x: tuple
    mu: int = 1

    def __post_init__(self):
        if self.t == 0:
            raise ValueError("need t != 0")
        if self.mu not in (-1, 1):
            raise ValueError("mu must be +1 or -1")

    @property
    def beta_signed(self):
        """mu |x| / t folded into a single signed slope s: condition |1 + s u| <= 2^l."""
        return self.mu * float(np.linalg.norm(self.x)) / self.t


def _u_interval(spec: PhaseSetSpec):
    """The set {u in [-1,1] : |1 + s u| <= 2^l} as an interval (lo, hi) or None."""
    s = spec.beta_signed
    tau = 2.0**spec.l
    if s == 0.0:
        return (-1.0, 1.0) if 1.0 <= tau else None
    lo = (-tau - 1.0) / s
    hi = (tau - 1.0) / s
    if lo > hi:
        lo, hi = hi, lo
    lo = max(lo, -1.0)
    hi = min(hi, 1.0)
    if lo >= hi:
        return None
    return lo, hi


def skl_measure_quad(spec: PhaseSetSpec, radial_nodes: int = 32, angular_nodes: int = 64):
    """|S_{k,l}| = 2 pi * int rho^2 drho * int_Theta sin(theta) dtheta.

    The theta-set is inverted analytically (an interval in cos theta, by
    monotonicity of the phase argument in cos theta); both 1-D integrals are
    then Gauss-Legendre quadratures.
    """
    iv = _u_interval(spec)
    if iv is None:
        return 0.0
    th_lo, th_hi = math.acos(iv[1]), math.acos(iv[0])
    xs, ws = np.polynomial.legendre.leggauss(angular_nodes)
    th = 0.5 * (th_hi - th_lo) * xs + 0.5 * (th_hi + th_lo)
    ang = 0.5 * (th_hi - th_lo) * np.sum(ws * np.sin(th))
    r_lo, r_hi = 2.0 ** (spec.k - 1), 2.0**spec.k
    xr, wr = np.polynomial.legendre.leggauss(radial_nodes)
    rho = 0.5 * (r_hi - r_lo) * xr + 0.5 * (r_hi + r_lo)
    rad = 0.5 * (r_hi - r_lo) * np.sum(wr * rho**2)
    return float(2.0 * np.pi * rad * ang)


def skl_measure_mc(spec: PhaseSetSpec, n_samples: int = 100_000, seed: int = 0):
    """Monte Carlo estimate of |S_{k,l}| by rejection sampling.

    Uniform draws in the bounding cube [-2^k, 2^k]^3; a draw counts when it
    lands in the dyadic shell and satisfies the phase condition.  Returns
    (estimate, stderr).
    """
    if n_samples < 1000:
        raise ValueError("n_samples too small for a meaningful stderr")
    rng = np.random.default_rng(seed)
    half = 2.0**spec.k
    pts = rng.uniform(-half, half, size=(int(n_samples), 3))
    rho = np.sqrt(np.sum(pts**2, axis=1))
    in_shell = (rho >= 2.0 ** (spec.k - 1)) & (rho <= half)
    x = np.asarray(spec.x, dtype=np.float64)
    xn = np.linalg.norm(x)
    if xn == 0.0:
        inside = in_shell & (1.0 <= 2.0**spec.l)
    else:
        arg = 1.0 + spec.mu * (pts @ x) / (spec.t * np.where(rho > 0, rho, 1.0))
        inside = in_shell & (np.abs(arg) <= 2.0**spec.l) & (rho > 0)
    p = float(np.count_nonzero(inside)) / n_samples
    vol_cube = (2.0 * half) ** 3
    est = p * vol_cube
    stderr = vol_cube * math.sqrt(max(p * (1.0 - p), 0.0) / n_samples)
    return est, stderr


def measure_lemma_sweep(
    k_range=range(-6, 7),
    l_range=range(-40, 3),
    betas=(0.0, 0.3, 0.5, 0.9, 1.0, 1.5, 10.0),
    mus=(1, -1),
    mc_samples: int = 0,
    seed: int = 0,
):
    """Sweep |S_{k,l}| / 2^{3k+l} over the lemma's parameter cells.

    Returns (rows, max_ratio); each row is a dict with the quadrature value,
    an optional Monte Carlo cross-check (mc_samples > 0), and the ratio.
    """
    rows = []
    max_ratio = 0.0
    ss = np.random.SeedSequence(seed)
    for k in k_range:
        for l in l_range:
            for bi, beta in enumerate(betas):
                for mu in mus:
                    spec = PhaseSetSpec(k=k, l=l, t=1.0, x=(0.0, 0.0, float(beta)), mu=mu)
                    quad = skl_measure_quad(spec)
                    ratio = quad / 2.0 ** (3 * k + l)
                    max_ratio = max(max_ratio, ratio)
                    row = {
                        "k": k,
                        "l": l,
                        "beta": beta,
                        "mu": mu,
                        "measure_quad": quad,
                        "measure_mc": "",
                        "mc_stderr": "",
                        "ratio": ratio,
                    }
                    if mc_samples:
                        child = np.random.SeedSequence(
                            entropy=ss.entropy, spawn_key=(k + 64, l + 64, bi, mu + 1)
                        )
                        sub_seed = int(child.generate_state(1)[0])
                        est, err = skl_measure_mc(spec, mc_samples, seed=sub_seed)
                        row["measure_mc"] = est
                        row["mc_stderr"] = err
                    rows.append(row)
    return rows, max_ratio
