import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate

from oracles import gaussian_beam_radius_sq, moment_mp
from photonscint import (
    BeamParams,
    IntegrationConfig,
    ModelOptions,
    PropagationQuery,
    TurbulenceParams,
    applicability_ratio,
    beam_radius_sq,
    intensity_moments,
    mean_intensity,
    momentum_diffusion,
    sigma2,
    sweep,
)
from photonscint.scintillation import IntegrationFailure, second_moment, sigma2_detailed

# J_3 from mpmath quadrature, then the closed forms; frozen
DQ2_STRONG_1KM = 362586.42359925044
R2_STRONG_1KM = 0.0014586214119975014


@pytest.fixture(scope="module")
def calm():
    return TurbulenceParams(cn2=0.0, l0=2 * math.pi * 1e-3)


# --- closed-form diagnostics ------------------------------------------------


def test_momentum_diffusion_examples(strong_turb, coherent_beam):
    assert momentum_diffusion(0.0, coherent_beam, strong_turb) == 0.0
    v = momentum_diffusion(1e3, coherent_beam, strong_turb)
    assert v == pytest.approx(DQ2_STRONG_1KM, rel=1e-10)
    assert v == pytest.approx(3.63e5, rel=2e-3)
    # the printed closed form with Gamma(1/6)
    assert v == pytest.approx(0.066 * math.pi**2 * math.gamma(1 / 6) * 1e14 * 10 * 1e-13 * 1e3, rel=1e-6)
    j3 = moment_mp(3, 1e-13, strong_turb.l0)
    assert v == pytest.approx(4 * math.pi**2 * 1e14 * j3 * 1e3, rel=1e-12)


@given(st.floats(1.0, 1e5), st.floats(1e-16, 1e-12))
def test_momentum_diffusion_linear(z, cn2):
    turb = TurbulenceParams(cn2=cn2, l0=2 * math.pi * 1e-3)
    beam = BeamParams(0.01, 1e7)
    a = momentum_diffusion(z, beam, turb)
    assert momentum_diffusion(2 * z, beam, turb) == pytest.approx(2 * a, rel=1e-14)
    assert momentum_diffusion(z, beam, turb.with_cn2(3 * cn2)) == pytest.approx(3 * a, rel=1e-14)


def test_beam_radius_examples(strong_turb, coherent_beam, calm):
    assert beam_radius_sq(0.0, coherent_beam, strong_turb) == pytest.approx(0.5e-4, rel=1e-15)
    assert beam_radius_sq(1e3, coherent_beam, strong_turb) == pytest.approx(R2_STRONG_1KM, rel=1e-10)
    for z in (10.0, 1e3, 3e4):
        assert beam_radius_sq(z, coherent_beam, calm) == pytest.approx(
            gaussian_beam_radius_sq(z, 0.01, 1e7), rel=1e-14)


def test_beam_radius_increasing(strong_turb, diffuser_beam):
    z = np.linspace(0, 2e4, 200)
    r2 = np.array([beam_radius_sq(x, diffuser_beam, strong_turb) for x in z])
    assert np.all(np.diff(r2) > 0)
    assert np.all(r2 >= 0.5 * diffuser_beam.r0**2)


def test_applicability_examples(strong_turb, coherent_beam, diffuser_beam):
    ratio = applicability_ratio(1e3, coherent_beam, strong_turb)
    assert ratio == pytest.approx(21.0, rel=0.05)
    assert applicability_ratio(100.0, coherent_beam, strong_turb) == pytest.approx(1e-2 * ratio, rel=1e-12)
    # partial coherence never raises the threshold
    for z in (200.0, 1e3, 5e3):
        for form in ("asymptotic", "full"):
            assert applicability_ratio(z, diffuser_beam, strong_turb, form) >= \
                applicability_ratio(z, coherent_beam, strong_turb, form)
    with pytest.raises(ValueError):
        applicability_ratio(0.0, coherent_beam, strong_turb)


# --- mean intensity ---------------------------------------------------------


def test_mean_intensity_calm_is_gaussian_beam(coherent_beam, calm):
    for z in (100.0, 1e3, 1e4):
        R2 = gaussian_beam_radius_sq(z, 0.01, 1e7)
        i0 = mean_intensity(PropagationQuery(z), coherent_beam, calm)
        r = 0.7 * math.sqrt(R2)
        ir = mean_intensity(PropagationQuery(z, (r, 0.0)), coherent_beam, calm)
        assert ir / i0 == pytest.approx(math.exp(-r * r / R2), rel=1e-12)
    i1 = mean_intensity(PropagationQuery(1e3), coherent_beam, calm)
    i2 = mean_intensity(PropagationQuery(1e4), coherent_beam, calm)
    assert i1 / i2 == pytest.approx(gaussian_beam_radius_sq(1e4, 0.01, 1e7) / gaussian_beam_radius_sq(1e3, 0.01, 1e7),
                                    rel=1e-12)


@pytest.mark.parametrize("beam_name", ["coherent_beam", "diffuser_beam"])
def test_photon_number_conserved(request, strong_turb, beam_name):
    beam = request.getfixturevalue(beam_name)
    totals = []
    for z in (50.0, 1e3, 2e4):
        R = math.sqrt(beam_radius_sq(z, beam, strong_turb))
        f = lambda r: 2 * math.pi * r * mean_intensity(PropagationQuery(z, (r, 0.0)), beam, strong_turb)  # noqa: E731
        totals.append(sp_integrate.quad(f, 0, 12 * R, epsabs=0, epsrel=1e-11)[0])
    assert np.allclose(totals, totals[0], rtol=1e-8)


def test_mean_intensity_turbulence_lowers_axis(strong_turb, coherent_beam, calm):
    q = PropagationQuery(1e3)
    assert mean_intensity(q, coherent_beam, strong_turb) < mean_intensity(q, coherent_beam, calm)


@given(st.floats(0, 0.05), st.floats(0, 2 * math.pi))
@settings(max_examples=30)
def test_mean_intensity_rotational_symmetry(r, angle):
    turb = TurbulenceParams(cn2=1e-13, l0=2 * math.pi * 1e-3)
    beam = BeamParams(0.01, 1e7)
    a = mean_intensity(PropagationQuery(2e3, (r, 0.0)), beam, turb)
    b = mean_intensity(PropagationQuery(2e3, (r * math.cos(angle), r * math.sin(angle))), beam, turb)
    assert a == pytest.approx(b, rel=1e-12)


# --- second moment and scintillation index ---------------------------------


@pytest.mark.parametrize("z", [500.0, 2e3, 1e4])
def test_no_pair_correlation_gives_twice_mean_squared(strong_turb, coherent_beam, z):
    cfg = IntegrationConfig(rel_tol=1e-3)
    est = intensity_moments(PropagationQuery(z), coherent_beam, strong_turb, cfg,
                            ModelOptions(drop_pair_correlation=True))
    assert est.converged
    assert est.second_moment == pytest.approx(2 * est.mean_intensity**2, rel=1e-3)


def test_calm_modes_agree_exactly(coherent_beam, calm):
    q = [PropagationQuery(800.0, (0.002, 0.0), m) for m in ("correlated", "multiplicative")]
    a, b = (second_moment(x, coherent_beam, calm) for x in q)
    assert a == b
    assert sigma2(q[0], coherent_beam, calm) == pytest.approx(1.0, abs=1e-12)


def test_correlated_above_multiplicative_at_2km(strong_turb, coherent_beam):
    c = sigma2(PropagationQuery(2e3, mode="correlated"), coherent_beam, strong_turb)
    m = sigma2(PropagationQuery(2e3, mode="multiplicative"), coherent_beam, strong_turb)
    assert c > m


def test_normalization_constants_cancel(strong_turb, diffuser_beam):
    q = PropagationQuery(1500.0)
    base = intensity_moments(q, diffuser_beam, strong_turb)
    scaled = intensity_moments(q, diffuser_beam, strong_turb, normalization=3.7, density_of_states=0.21)
    assert scaled.mean_intensity == pytest.approx(3.7 * 0.21**2 * base.mean_intensity, rel=1e-14)
    assert scaled.sigma2 == pytest.approx(base.sigma2, rel=1e-12)


def test_sampling_methods_agree_with_adaptive(strong_turb, coherent_beam):
    q = PropagationQuery(1e3)
    ref = sigma2_detailed(q, coherent_beam, strong_turb, IntegrationConfig(rel_tol=1e-3))
    for method in ("qmc", "mc"):
        est = sigma2_detailed(q, coherent_beam, strong_turb, IntegrationConfig(method=method, rel_tol=1e-2, seed=4))
        assert est.converged
        assert abs(est.sigma2 - ref.sigma2) <= 3 * (est.sigma2_error + ref.sigma2_error)


def test_sigma2_nonnegative_on_grid(moderate_turb, diffuser_beam):
    for z in (300.0, 3e3, 3e4):
        for mode in ("correlated", "multiplicative"):
            est = sigma2_detailed(PropagationQuery(z, mode=mode), diffuser_beam, moderate_turb)
            assert est.sigma2 >= -est.sigma2_error


def test_off_axis_detector(strong_turb, coherent_beam):
    on = sigma2(PropagationQuery(1e3), coherent_beam, strong_turb)
    off = sigma2(PropagationQuery(1e3, (0.02, 0.0)), coherent_beam, strong_turb)
    rotated = sigma2(PropagationQuery(1e3, (0.0, 0.02)), coherent_beam, strong_turb)
    assert off == pytest.approx(rotated, rel=1e-6)
    assert math.isfinite(on) and off > 0


def test_unmet_tolerance_raises(strong_turb, coherent_beam):
    with pytest.raises(IntegrationFailure):
        sigma2(PropagationQuery(1e3), coherent_beam, strong_turb, IntegrationConfig(method="qmc", rel_tol=1e-9, max_evals=1000))


def test_query_validation():
    with pytest.raises(ValueError):
        PropagationQuery(0.0)
    with pytest.raises(ValueError):
        PropagationQuery(1.0, (1.0, math.inf))
    with pytest.raises(ValueError):
        PropagationQuery(1.0, mode="sideways")


# --- sweeps -----------------------------------------------------------------


def test_sweep_empty(strong_turb, coherent_beam):
    assert sweep([], coherent_beam, strong_turb) == []


def test_sweep_single_point_matches_direct_call(strong_turb, coherent_beam):
    (pt,) = sweep([1200.0], coherent_beam, strong_turb)
    direct_c = sigma2_detailed(PropagationQuery(1200.0, mode="correlated"), coherent_beam, strong_turb)
    direct_m = sigma2_detailed(PropagationQuery(1200.0, mode="multiplicative"), coherent_beam, strong_turb)
    assert pt.sigma2_correlated == direct_c.sigma2
    assert pt.sigma2_multiplicative == direct_m.sigma2
    assert pt.err_sigma2_correlated == direct_c.sigma2_error
    assert pt.dq2 == momentum_diffusion(1200.0, coherent_beam, strong_turb)
    assert pt.beam_radius_sq == beam_radius_sq(1200.0, coherent_beam, strong_turb)
    assert pt.applicability_ratio == applicability_ratio(1200.0, coherent_beam, strong_turb)
    assert pt.ok


def test_sweep_order_and_workers(strong_turb, coherent_beam):
    zs = [600.0, 1e3, 4e3]
    one = sweep(zs, coherent_beam, strong_turb, IntegrationConfig(workers=1), modes=["correlated"])
    three = sweep(zs, coherent_beam, strong_turb, IntegrationConfig(workers=3), modes=["correlated"])
    assert [p.z for p in three] == zs
    assert one == three
    assert all(math.isnan(p.sigma2_multiplicative) for p in one)


def test_sweep_validation_and_warning(strong_turb, coherent_beam):
    with pytest.raises(ValueError):
        sweep([2e3, 1e3], coherent_beam, strong_turb)
    with pytest.raises(ValueError):
        sweep([1e3, 1e3], coherent_beam, strong_turb)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sweep([300.0], coherent_beam, strong_turb, modes=["correlated"])
    assert any("applicability" in str(w.message) for w in caught)


def test_sweep_records_failures(strong_turb, coherent_beam):
    (pt,) = sweep([1e3], coherent_beam, strong_turb, IntegrationConfig(method="qmc", rel_tol=1e-9, max_evals=1000),
                  modes=["correlated"])
    assert not pt.ok
    assert "correlated" in pt.failures[0]


# --- regime properties ------------------------------------------------------


def test_weak_turbulence_modes_agree_at_floor(moderate_turb, coherent_beam):
    # moderate turbulence at the applicability floor (ratio = 5)
    z = 1e3 * math.sqrt(5.0 / applicability_ratio(1e3, coherent_beam, moderate_turb))
    c = sigma2_detailed(PropagationQuery(z, mode="correlated"), coherent_beam, moderate_turb)
    m = sigma2_detailed(PropagationQuery(z, mode="multiplicative"), coherent_beam, moderate_turb)
    assert abs(c.sigma2 - m.sigma2) <= c.sigma2_error + m.sigma2_error, \
        f"correlated {c.sigma2:.4f} vs multiplicative {m.sigma2:.4f} at z = {z:.0f} m"


@pytest.mark.slow
def test_mode_ordering_moderate_one_to_three_km(moderate_turb, coherent_beam):
    pts = sweep([1e3, 1.5e3, 2e3, 2.5e3, 3e3], coherent_beam, moderate_turb, IntegrationConfig(workers=4))
    bad = [(p.z, p.sigma2_correlated, p.sigma2_multiplicative) for p in pts
           if p.sigma2_correlated < p.sigma2_multiplicative - p.err_sigma2_correlated - p.err_sigma2_multiplicative]
    assert not bad, f"multiplicative above correlated at {bad}"
