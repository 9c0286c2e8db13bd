import math

import numpy as np
import pytest

from photonscint import BeamParams, PhasePoint, TurbulenceParams
from photonscint.mc_oracle import (
    FieldSequence,
    GridConfigurationError,
    GridSpec,
    dump_ensemble,
    dump_realization,
    estimate_phi_pair,
    launch_ensemble,
    momentum_spread,
    propagate,
    synthesize_field,
)
from photonscint.scintillation import momentum_diffusion
from photonscint.trajectory_kernel import phi_self_bilinear
from photonscint.turbulence import spectrum_psi

UNIT_Q0 = BeamParams(r0=1.0, q0=1.0)


@pytest.fixture(scope="module")
def grid(strong_turb):
    return GridSpec.for_turbulence(strong_turb, slab_thickness=10.0)


@pytest.fixture(scope="module")
def realizations(strong_turb, grid):
    """200 independent slabs: 100 lanes times slabs 0 and 1, in two batches."""
    out = []
    for lanes in (range(0, 50), range(50, 100)):
        seq = FieldSequence(strong_turb, UNIT_Q0, grid, seed=2024, lanes=lanes)
        out.extend([seq[0], seq[1]])
    return out


# --- grids and synthesis ----------------------------------------------------


def test_grid_for_turbulence(strong_turb):
    g = GridSpec.for_turbulence(strong_turb)
    assert g.n % 2 == 1
    assert g.spacing <= strong_turb.l0 / 4
    assert g.extent >= 50 * strong_turb.l0
    assert g.slab_thickness == pytest.approx(5 * strong_turb.l0)
    g.validate(strong_turb)


def test_grid_too_coarse_or_small(strong_turb):
    with pytest.raises(GridConfigurationError):
        synthesize_field(strong_turb, GridSpec(spacing=strong_turb.l0 / 2, n=201, slab_thickness=1.0), seed=0)
    with pytest.raises(GridConfigurationError):
        synthesize_field(strong_turb, GridSpec(spacing=strong_turb.l0 / 4, n=101, slab_thickness=1.0), seed=0)
    with pytest.raises(GridConfigurationError):
        GridSpec(spacing=1e-3, n=100, slab_thickness=1.0)


def test_zero_turbulence_gives_zero_field(grid):
    calm = TurbulenceParams(cn2=0.0, l0=2 * math.pi * 1e-3)
    real = synthesize_field(calm, grid, seed=5, lanes=(0, 1))
    assert not np.any(real.coefficients)
    pts = np.random.default_rng(0).random((2, 30, 2))
    assert not np.any(real.kick(pts))


def test_seed_determinism_and_lane_independence(strong_turb, grid):
    a = synthesize_field(strong_turb, grid, seed=7, lanes=(3,), slab_index=5)
    b = synthesize_field(strong_turb, grid, seed=7, lanes=(3,), slab_index=5)
    c = synthesize_field(strong_turb, grid, seed=7, lanes=(0, 1, 2, 3), slab_index=5)
    d = synthesize_field(strong_turb, grid, seed=8, lanes=(3,), slab_index=5)
    assert np.array_equal(a.coefficients, b.coefficients)
    assert np.array_equal(a.coefficients[0], c.coefficients[3])
    assert np.array_equal(a.uniform_kick[0], c.uniform_kick[3])
    assert not np.array_equal(a.coefficients, d.coefficients)


def test_field_is_real_hermitian(strong_turb, grid):
    real = synthesize_field(strong_turb, grid, seed=1, lanes=(0,), slab_index=1)
    c = real.coefficients[0]
    assert np.allclose(c, np.conj(c[::-1, ::-1]), rtol=0, atol=1e-15 * np.abs(c).max())


def test_direct_and_spline_kicks_agree(strong_turb, grid):
    real = synthesize_field(strong_turb, grid, seed=3, lanes=(0, 1))
    pts = np.random.default_rng(1).random((2, 40, 2)) * grid.extent
    direct = real.kick(pts, "direct")
    spline = real.kick(pts, "spline")
    scale = np.sqrt(np.mean(direct**2))
    assert np.max(np.abs(direct - spline)) < 2e-3 * scale


def test_upsampled_grid_contains_base_grid(strong_turb, grid):
    real = synthesize_field(strong_turb, grid, seed=4, lanes=(0,))
    base = real.grid_kicks()
    fine = real.grid_kicks(3)
    assert fine.shape[1] == 3 * grid.n
    assert np.allclose(fine[:, ::3, ::3], base, rtol=0, atol=1e-12 * np.abs(base).max())
    with pytest.raises(ValueError):
        real.grid_kicks(2)


def test_grid_kicks_match_direct_sum(strong_turb, grid):
    real = synthesize_field(strong_turb, grid, seed=3, lanes=(0,))
    nodes = np.array([[[0.0, 0.0], [grid.spacing * 7, grid.spacing * 11], [grid.spacing * 150, grid.spacing * 3]]])
    on_grid = real.full_grid_kicks()[0]
    idx = [(0, 0), (7, 11), (150, 3)]
    direct = real.kick(nodes, "direct")[0]
    for k, (i, j) in enumerate(idx):
        assert np.allclose(direct[k], on_grid[i, j], rtol=1e-9, atol=1e-12 * np.abs(on_grid).max())


def test_ensemble_mean_is_zero(realizations):
    probe = np.array([[[0.013, 0.271], [0.5, 0.02]]])
    kicks = np.concatenate([r.kick(np.broadcast_to(probe, (len(r.lanes), 2, 2))) for r in realizations])
    mean = kicks.mean(axis=0)
    se = kicks.std(axis=0, ddof=1) / math.sqrt(kicks.shape[0])
    assert np.all(np.abs(mean) < 3 * se)


def test_radial_spectrum_matches_target(strong_turb, grid, realizations):
    n = grid.n
    freqs = grid.frequencies()
    gx, gy = np.meshgrid(freqs, freqs, indexing="ij")
    g = np.hypot(gx, gy)
    half = (n - 1) // 2
    ii, jj = np.meshgrid(np.arange(-half, half + 1), np.arange(-half, half + 1), indexing="ij")
    radius = np.rint(np.hypot(ii, jj)).astype(int)
    target = np.zeros_like(g)
    nz = g > 0
    # kick spectral density 2 pi dz q0**2 g**2 psi(g) times the cell area
    target[nz] = 2 * math.pi * grid.slab_thickness * g[nz] ** 2 * spectrum_psi(g[nz], strong_turb) * grid.dg**2
    ratios = []
    target[~nz] = np.nan
    for real in realizations:
        K = real.grid_kicks()
        Kh = np.fft.fftshift(np.fft.fft2(K, axes=(1, 2)), axes=(1, 2)) / n**2
        power = np.abs(Kh[..., 0]) ** 2 + np.abs(Kh[..., 1]) ** 2
        ratios.append(power / target[None])
    ratios = np.concatenate(ratios)
    assert ratios.shape[0] >= 200
    for m in (5, 8, 12, 17, 24, 32, 45, 60, 80, 99):
        ring = radius == m
        per_real = ratios[:, ring].mean(axis=1)
        mean = per_real.mean()
        se = per_real.std(ddof=1) / math.sqrt(per_real.size)
        assert abs(mean - 1) < 3 * se, f"ring {m}: {mean:.4f} +- {se:.4f}"


def test_isotropy(realizations):
    shifts = [(5, 0), (0, 5), (3, 4), (4, -3)]
    corr = []
    for real in realizations:
        K = real.full_grid_kicks()
        row = []
        for sx, sy in shifts:
            moved = np.roll(K, (-sx, -sy), axis=(1, 2))
            row.append(np.mean(np.sum(K * moved, axis=-1), axis=(1, 2)))
        corr.append(np.stack(row, axis=1))
    corr = np.concatenate(corr)            # (R, 4)
    for k in range(1, 4):
        d = corr[:, k] - corr[:, 0]
        assert abs(d.mean()) < 3 * d.std(ddof=1) / math.sqrt(d.size), shifts[k]


# --- trajectories -----------------------------------------------------------


def test_free_flight_straight_lines(coherent_beam):
    ens = launch_ensemble(coherent_beam, 2, 5, seed=1)
    ens.q[:] = 0.0
    ens.q[..., 0] = 250.0
    ens.q_start[:] = ens.q
    out = propagate(ens, None, 800.0, beam=coherent_beam)
    assert np.allclose(out.r[..., 0], ens.r_start[..., 0] + 250.0 * 800.0 / 1e7, rtol=0, atol=1e-15)
    assert np.array_equal(out.r[..., 1], ens.r_start[..., 1])
    assert np.array_equal(out.q, ens.q)


def test_zero_field_sequence_straight_lines(coherent_beam, grid):
    calm = TurbulenceParams(cn2=0.0, l0=2 * math.pi * 1e-3)
    fields = FieldSequence(calm, coherent_beam, grid, seed=0, lanes=(0, 1))
    ens = launch_ensemble(coherent_beam, (0, 1), 4, seed=2)
    out = propagate(ens, fields, 100.0, step=2.5)
    assert np.allclose(out.r, ens.r_start + ens.q_start * 100.0 / 1e7, rtol=1e-13, atol=1e-16)


def test_zero_field_reversibility(coherent_beam):
    ens = launch_ensemble(coherent_beam, 3, 6, seed=4)
    fwd = propagate(ens, None, 1234.5, beam=coherent_beam)
    back = launch_ensemble(coherent_beam, 3, 6, seed=4)
    back.r, back.q = fwd.r.copy(), -fwd.q.copy()
    ret = propagate(back, None, 1234.5, beam=coherent_beam)
    assert np.allclose(ret.r, ens.r_start, rtol=0, atol=1e-15)
    assert np.array_equal(-ret.q, ens.q_start)


def test_identical_photons_identical_paths(strong_turb, coherent_beam, grid):
    fields = FieldSequence(strong_turb, coherent_beam, grid, seed=9, lanes=(0,))
    ens = launch_ensemble(coherent_beam, (0,), 2, seed=3)
    ens.r[0, 1] = ens.r[0, 0]
    ens.q[0, 1] = ens.q[0, 0]
    ens.r_start[:] = ens.r
    ens.q_start[:] = ens.q
    out = propagate(ens, fields, 60.0, record=True)
    assert np.array_equal(out.r[0, 0], out.r[0, 1])
    assert np.array_equal(out.q[0, 0], out.q[0, 1])
    assert len(out.history) == 6


def test_step_limit_enforced(strong_turb, coherent_beam, grid):
    fields = FieldSequence(strong_turb, coherent_beam, grid, seed=0, lanes=(0,))
    ens = launch_ensemble(coherent_beam, (0,), 3, seed=0)
    ens.q[:] = 5e3   # displacement per 10 m step = 5 mm > l0/4
    with pytest.raises(GridConfigurationError):
        propagate(ens, fields, 10.0)
    propagate(ens, fields, 10.0, step=2.0)


def test_propagate_argument_errors(coherent_beam):
    ens = launch_ensemble(coherent_beam, 1, 1, seed=0)
    with pytest.raises(ValueError):
        propagate(ens, None, 10.0)
    moved = propagate(ens, None, 10.0, beam=coherent_beam)
    with pytest.raises(ValueError):
        propagate(moved, None, 5.0, beam=coherent_beam)


def _diffusion_run(turb, beam, grid, z, lanes, photons, step=None, seed=11, batch=50):
    per_lane = []
    for start in range(0, lanes, batch):
        ids = range(start, min(lanes, start + batch))
        fields = FieldSequence(turb, beam, grid, seed, ids)
        ens = launch_ensemble(beam, ids, photons, seed, spread=grid.extent)
        out = propagate(ens, fields, z, step=step)
        per_lane.append(np.mean(np.sum(out.dq**2, axis=-1), axis=1))
    v = np.concatenate(per_lane)
    return v.mean(), v.std(ddof=1) / math.sqrt(v.size)


def test_step_halving_changes_little(strong_turb, coherent_beam, grid):
    a, se_a = _diffusion_run(strong_turb, coherent_beam, grid, 50.0, 100, 8)
    b, se_b = _diffusion_run(strong_turb, coherent_beam, grid, 50.0, 100, 8, step=5.0)
    assert abs(a - b) < min(se_a, se_b)


def test_short_range_momentum_diffusion(strong_turb, coherent_beam, grid):
    mean, se = _diffusion_run(strong_turb, coherent_beam, grid, 50.0, 200, 8)
    assert abs(mean - momentum_diffusion(50.0, coherent_beam, strong_turb)) < 3 * se


def test_momentum_spread_helper(coherent_beam):
    ens = launch_ensemble(coherent_beam, 4, 3, seed=0)
    ens.q = ens.q + 1.0
    mean, se = momentum_spread(ens)
    assert mean == pytest.approx(2.0)
    assert se == pytest.approx(0.0, abs=1e-12)


def test_launch_distribution(diffuser_beam):
    ens = launch_ensemble(diffuser_beam, 4, 5000, seed=6)
    assert np.std(ens.q) == pytest.approx(1 / diffuser_beam.r1, rel=0.03)
    assert np.std(ens.r) == pytest.approx(diffuser_beam.r0 / 2, rel=0.03)


# --- pair functional estimator ----------------------------------------------


def test_phi_estimate_zero_turbulence(coherent_beam, grid):
    calm = TurbulenceParams(cn2=0.0, l0=2 * math.pi * 1e-3)
    P = PhasePoint.of(p=(1e-3, 0))
    est = estimate_phi_pair(P, P, 100.0, calm, coherent_beam, grid, lanes=4, seed=0)
    assert est.estimate == 0.0 and est.standard_error == 0.0


def test_phi_estimate_equal_q_matches_bilinear(moderate_turb, coherent_beam, grid):
    P = PhasePoint.of(q=(0, 0), p=(1e-3, 5e-4), k=(0, 3e4))
    Pp = PhasePoint.of(q=(0, 0), p=(-5e-4, 1e-3), k=(1e4, 1e4))
    est = estimate_phi_pair(P, Pp, 100.0, moderate_turb, coherent_beam, grid, lanes=200, seed=5,
                            detectors_per_lane=4)
    ref = phi_self_bilinear(P, Pp, 100.0, moderate_turb, coherent_beam)
    assert abs(est.estimate - ref) < 3 * est.standard_error


def test_dumps(tmp_path, strong_turb, coherent_beam, grid):
    fields = FieldSequence(strong_turb, coherent_beam, grid, seed=0, lanes=(0, 1))
    ens = launch_ensemble(coherent_beam, (0, 1), 3, seed=0)
    out = propagate(ens, fields, 20.0, record=True)
    dump_ensemble(out, tmp_path / "ens.txt")
    rows = np.loadtxt(tmp_path / "ens.txt")
    assert rows.shape == (3 * 6, 7)
    assert np.allclose(rows[-6:, 3:5], out.r.reshape(-1, 2), rtol=1e-15)
    dump_realization(fields[0], tmp_path / "field.txt")
    rows = np.loadtxt(tmp_path / "field.txt")
    assert rows.shape == (2 * grid.n**2, 5)
