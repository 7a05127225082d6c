"""Fused-envelope norms, fits, monitors, and the configured-run pipeline."""

import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anisowave import harness as H
from anisowave.spectral_core import make_grid
from anisowave.solver import SystemSpec, initial_system_state, run_system
from anisowave.vectorfields import gamma_energy


def _free_state(grid, order=2, t0=2.0, w=1.3):
    spec = SystemSpec(speeds=((1.0, 0.9, 0.8),))
    phi0 = np.exp(-(grid.r / w) ** 2)
    phit0 = 0.2 * np.exp(-((grid.r - 0.7) / w) ** 2)
    return initial_system_state(spec, grid, t0, order, [(phi0, phit0)])


def test_fused_envelope_matches_wordwise(grid32):
    state = _free_state(grid32)
    k = 2
    env = H.spectral_derivative_envelope_sq(
        state.psi_hat[0], state.psit_hat[0], grid32, k)
    k1, k2, k3 = grid32.k_rfft
    sq = (k1**2, k2**2, k3**2)
    xi_sq = grid32.k_abs_rfft**2
    direct = np.zeros(env.shape)
    for p in range(k + 1):
        for beta in H._multi_indices_upto(k - p):
            mon = np.ones(env.shape)
            for s, b in zip(sq, beta):
                if b:
                    mon = mon * s**b
            direct += mon * (np.abs(state.psit_hat[0][p]) ** 2
                             + xi_sq * np.abs(state.psi_hat[0][p]) ** 2)
    np.testing.assert_allclose(env, direct, rtol=1e-12)


def test_gamma_deriv_l2_cross_module(grid32):
    # harness fused Parseval norm vs per-word real-space energy
    state = _free_state(grid32)
    for k in (0, 1, 2):
        fused = H.gamma_deriv_l2(state.psi_hat[0], state.psit_hat[0],
                                 grid32, k)
        direct = gamma_energy(state.lattice(0), k, word_set="canonical")
        assert fused == pytest.approx(direct, rel=1e-8)


def test_envelope_stack_guard(grid32):
    state = _free_state(grid32, order=1)
    with pytest.raises(ValueError):
        H.spectral_derivative_envelope_sq(state.psi_hat[0],
                                          state.psit_hat[0], grid32, 2)
    with pytest.raises(ValueError):
        H.derivative_envelope_sq(state, 0, 2)


def test_linf_xi_gaussian_oracle():
    # box-normalized transform of exp(-|x|^2) peaks at pi^{3/2}
    grid = make_grid(64, 32.0)
    spec = SystemSpec(speeds=((1.0, 1.0, 1.0),))
    phi0 = np.exp(-grid.r**2)
    state = initial_system_state(spec, grid, 1.0, 0,
                                 [(phi0, np.zeros(grid.shape))])
    got = H.linf_xi_norm(state, 0, 0, with_derivative=False)
    assert got == pytest.approx(math.pi**1.5, rel=1e-13)


def test_cone_binned_sup_radial_oracle():
    # velocity field v = g(r) with known per-shell sups of the k = 0 envelope
    grid = make_grid(48, 24.0)
    spec = SystemSpec(speeds=((1.0, 1.0, 1.0),))
    t0 = 4.0
    g = np.exp(-((grid.r - 2.0) / 1.5) ** 2)
    state = initial_system_state(spec, grid, t0, 0,
                                 [(np.zeros(grid.shape), g)])
    edges, sups = H.cone_binned_sup(state, 0, 4)
    np.testing.assert_allclose(edges, np.linspace(0.0, t0, 5))
    for b in range(4):
        q = t0 - grid.r
        sel = (edges[b] <= q) & (q < edges[b + 1])
        want = np.max(np.abs(g[sel])) if sel.any() else 0.0
        assert sups[b] == pytest.approx(want, rel=1e-12, abs=1e-15)
    with pytest.raises(ValueError):
        H.cone_binned_sup(state, 0, [1.0, 0.5])


def test_decay_fit_closed_form():
    ts = np.linspace(2.0, 20.0, 12)
    series = [(t, 3.7 * t**-1.25) for t in ts]
    fit = H.decay_fit(series)
    assert fit.exponent == pytest.approx(-1.25, abs=1e-12)
    assert fit.stderr == pytest.approx(0.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert math.exp(fit.intercept) == pytest.approx(3.7, rel=1e-10)
    windowed = H.decay_fit(series, window=(5.0, 20.0))
    assert windowed.n_samples < fit.n_samples
    assert windowed.exponent == pytest.approx(-1.25, abs=1e-12)


def test_decay_fit_guards():
    with pytest.raises(ValueError):
        H.decay_fit([(1.0, 1.0)] * 5)
    with pytest.raises(ValueError):
        H.decay_fit([(t, -1.0) for t in range(1, 8)])
    with pytest.raises(ValueError):
        H.decay_fit([(2.0, 1.0)] * 6)


def test_cone_profile_fit():
    edges = np.linspace(0.0, 8.0, 9)
    centers = 0.5 * (edges[:-1] + edges[1:])
    sups = 2.0 * centers**-0.5
    fit = H.cone_profile_fit(edges, sups)
    assert fit.exponent == pytest.approx(-0.5, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(t0=st.floats(0.5, 4.0), ratio=st.floats(1.5, 20.0),
       count=st.integers(2, 12))
def test_geometric_times_properties(t0, ratio, count):
    t1 = t0 * ratio
    times = H.geometric_times(t0, t1, count)
    assert times[0] == pytest.approx(t0)
    assert times[-1] == pytest.approx(t1)
    assert all(b > a for a, b in zip(times, times[1:]))
    snapped = H.geometric_times(t0, t1, count, dt=0.1)
    assert all(b > a for a, b in zip(snapped, snapped[1:]))
    for t in snapped:
        steps = (t - t0) / 0.1
        assert abs(steps - round(steps)) < 1e-9


def _linear_run(n=32, box=24.0, t_end=6.0, amp=1.0):
    grid = make_grid(n, box)
    spec = SystemSpec(speeds=((1.0, 1.0, 1.0),))
    cfg = H.DiagnosticsConfig(k_max=2, k_mid=1, k_low=1, cone_bins=4)
    phi0 = amp * np.exp(-(grid.r / 1.3) ** 2)
    traj = run_system(spec, grid, [(phi0, np.zeros(grid.shape))],
                      t0=1.0, t_end=t_end, dt=0.1, order=cfg.order,
                      diagnostics_cb=H.make_diagnostics_cb(spec, cfg),
                      diagnostics_times=[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    return traj


def test_bootstrap_monitor_thm4_linear():
    traj = _linear_run(amp=1e-3)
    rep = H.bootstrap_monitor(traj, eps0=1.0, mode="thm4")
    assert rep["pass"]
    assert rep["sup"] > 0
    assert rep["first_violation"] is None
    assert len(rep["series"]) == len(traj.rows)
    # monitored functional scales linearly on a linear run
    traj2 = _linear_run(amp=2e-3)
    rep2 = H.bootstrap_monitor(traj2, eps0=1.0, mode="thm4")
    assert rep2["sup"] == pytest.approx(2.0 * rep["sup"], rel=1e-9)


def test_bootstrap_monitor_flags_violation():
    traj = _linear_run()
    rep = H.bootstrap_monitor(traj, eps0=1e-12, mode="thm4")
    assert not rep["pass"]
    assert rep["first_violation"] == traj.rows[0]["t"]


def test_bootstrap_monitor_guards():
    traj = _linear_run()
    with pytest.raises(ValueError):
        H.bootstrap_monitor(traj, 1e-3, mode="thm5")
    nl = (((1.0, ((0, 0), (1, 1), (1, 2))),), ())
    bad_spec = SystemSpec(speeds=((1.0,) * 3, (0.9,) * 3), nonlinearity=nl)
    traj.spec = bad_spec
    with pytest.raises(ValueError):  # thm3 needs the structural flags
        H.bootstrap_monitor(traj, 1e-3, mode="thm3")


def test_build_data_kinds(grid32, rng):
    bump = H.build_data({"kind": "bump", "width": 1.0,
                         "centers": [[1.0, 0.0, 0.0]]}, grid32, 1)
    x1, x2, x3 = grid32.x
    want = np.exp(-((x1 - 1.0) ** 2 + x2**2 + x3**2))
    np.testing.assert_array_equal(bump[0][0], want)
    assert not bump[0][1].any()
    ann = H.build_data({"kind": "annulus"}, grid32, 1)
    assert np.max(np.abs(ann[0][0])) > 0.1
    rb = H.build_data({"kind": "random_bumps", "count": 3, "radius": 2.0,
                       "width_range": [0.8, 1.2]}, grid32, 2, seed=5)
    assert len(rb) == 2
    rb_same = H.build_data({"kind": "random_bumps", "count": 3, "radius": 2.0,
                            "width_range": [0.8, 1.2]}, grid32, 2, seed=5)
    np.testing.assert_array_equal(rb[0][0], rb_same[0][0])
    with pytest.raises(ValueError):
        H.build_data({"kind": "mystery"}, grid32, 1)


def test_normalize_data_exact(grid32):
    spec = SystemSpec(speeds=((1.0, 1.0, 1.0),))
    cfg = H.DiagnosticsConfig(k_max=2, k_mid=1, k_low=1)
    data = H.build_data({"kind": "bump", "width": 1.2}, grid32, 1)
    scaled, scale = H.normalize_data(data, spec, grid32, 1.0, cfg,
                                     "energy_sum", 0.125)
    st0 = initial_system_state(spec, grid32, 1.0, cfg.order, scaled)
    got = H.gamma_deriv_l2(st0.psi_hat[0], st0.psit_hat[0], grid32, cfg.k_max)
    assert got == pytest.approx(0.125, rel=1e-12)
    with pytest.raises(ValueError):
        H.normalize_data(data, spec, grid32, 1.0, cfg, "nope", 0.1)
    zero = [(np.zeros(grid32.shape), np.zeros(grid32.shape))]
    with pytest.raises(ValueError):
        H.normalize_data(zero, spec, grid32, 1.0, cfg, "energy_sum", 0.1)


def test_config_hash_key_order():
    a = {"x": 1, "y": {"b": 2.0, "a": [1, 2]}}
    b = {"y": {"a": [1, 2], "b": 2.0}, "x": 1}
    assert H.config_hash(a) == H.config_hash(b)
    assert H.config_hash(a) != H.config_hash({"x": 2, "y": a["y"]})


def test_diagnostics_row_roundtrip():
    row = H.DiagnosticsRow.from_dict({
        "t": 2.0, "E": [1.0], "K": [0.5], "W": [0.25],
        "N_high": [0.1], "N_low": [0.2],
        "cone": [[1.0, 2.0]], "cone_edges": [0.0, 1.0, 2.0]})
    vals = row.csv_values(1, 2)
    hdr = H.DiagnosticsRow.csv_header(1, 2)
    assert len(vals) == len(hdr) == 8
    assert hdr[:3] == ["t", "E_1", "K_1"]
    assert vals[0] == 2.0 and vals[-1] == 2.0


_RUN_CONFIG = {
    "seed": 9,
    "grid": {"n": 32, "box_length": 24.0},
    "system": {"m": 1, "eps": [[1.0, 1.0, 1.0]], "epsilon0": 1e-3},
    "data": {"kind": "bump", "width": 1.3, "support_radius": 6.0,
             "normalize": {"mode": "energy_sum"}},
    "run": {"t0": 1.0, "t_end": 4.0, "diagnostics_times": [1.0, 2.0, 4.0]},
    "diagnostics": {"k_max": 2, "k_mid": 1, "k_low": 1, "cone_bins": 4},
}


def test_run_configured_and_report(tmp_path):
    run = H.run_configured(_RUN_CONFIG)
    assert run.config["seed"] == 9
    assert run.data_scale > 0
    paths = H.emit_report(run, str(tmp_path / "out"))
    verdict = json.load(open(paths["verdict"]))
    assert set(verdict) == set(H.ACCEPTANCE_CHECK_IDS)
    assert all(v["pass"] is None for v in verdict.values())
    manifest = json.load(open(paths["manifest"]))
    assert manifest["config_sha256"] == run.hash
    assert manifest["kernel_backend"] in ("numba", "numpy")
    csv_text = open(paths["csv"]).read()
    assert csv_text.splitlines()[0].startswith("t,E_1,K_1,W_1")
    assert len(csv_text.splitlines()) == 4
    assert paths["plots"] and all(p.endswith(".svg") for p in paths["plots"])
    assert all(os.path.exists(p) for p in paths["plots"])


def test_run_configured_deterministic(tmp_path):
    r1 = H.run_configured(_RUN_CONFIG)
    r2 = H.run_configured(_RUN_CONFIG)
    p1 = H.emit_report(r1, str(tmp_path / "a"))
    p2 = H.emit_report(r2, str(tmp_path / "b"))
    assert open(p1["csv"]).read() == open(p2["csv"]).read()
    assert open(p1["manifest"]).read() == open(p2["manifest"]).read()


def test_run_configured_seed_override():
    cfg = dict(_RUN_CONFIG)
    cfg["data"] = {"kind": "random_bumps", "count": 2, "radius": 2.0,
                   "width_range": [1.0, 1.4], "support_radius": 6.0}
    r1 = H.run_configured(cfg)
    r2 = H.run_configured(cfg, seed_override=77)
    assert r2.config["seed"] == 77
    assert r1.trajectory.rows[0]["E"] != r2.trajectory.rows[0]["E"]


def test_run_configured_wraparound_guard():
    cfg = json.loads(json.dumps(_RUN_CONFIG))
    cfg["run"]["t_end"] = 40.0
    with pytest.raises(ValueError):
        H.run_configured(cfg)


def test_assemble_verdict():
    verdict = H.assemble_verdict({"uniform_decay": {"pass": True, "value": -1.0}})
    assert verdict["uniform_decay"]["pass"] is True
    assert verdict["cutoff_exactness"]["pass"] is None
    assert H.verdict_failures(verdict) == []
    verdict["measure_lemma"] = {"pass": False}
    assert H.verdict_failures(verdict) == ["measure_lemma"]


def test_identity_battery_passes():
    reports = H.identity_battery()
    assert len(reports) == 7
    for rep in reports:
        assert rep["pass"], rep
