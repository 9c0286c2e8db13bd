"""Mean intensity, second moment and scintillation index.

Reduction used for the second moment
------------------------------------
Both intensity moments are Gaussian integrals over the photon variables
once the force average has been taken.  For the second moment:

1. The mean momentum ``(q + q')/2`` appears only in a linear phase.  It
   integrates to a delta function that fixes ``p' = -p - (k + k') z / q0``.
2. The remaining variables per Cartesian component are
   ``x = (w, k, k')`` with ``w = p + k z / q0``, plus the momentum
   difference ``Delta = q - q'``, which enters through the phase
   ``exp(i Delta . w)`` and the pair kernel.
3. In a frame aligned with ``Delta`` the kernel is diagonal.  The quadratic
   form therefore splits into two independent 3x3 blocks, one along
   ``Delta`` and one across it, and the six-dimensional Gaussian integral
   is done exactly.  What is left is a one-dimensional integral over
   ``rho = |Delta|``, plus an angle when the detector is off axis.

Each of the two source terms contributes a block matrix
``A = W + K + P + P' + 2 S(rho)``:

* ``W`` and ``K`` come from the source Gaussians.
* ``P`` and ``P'`` are the single-trajectory functionals.
* ``S`` holds the lag moments of the pair kernel.

Setting ``S = 0`` gives a baseline with a closed form.  Only the difference
from that baseline is integrated numerically.

For the first term the source Gaussians are
``exp(-(p**2 + p'**2) / 2 r1**2 - (k**2 + k'**2) r0**2 / 8)``.  For the second
term the shifted combination is
``exp(-(p - p')**2 / 4 r0**2 - (p + p')**2 / 4 r1**2 - (k + k')**2 r0**2 / 16 - (k - k')**2 r1**2 / 16)``.
That is the completed-square image of ``exp(-[(Q - Q')**2 + (k + k')**2/4] r0**2/4 - [(Q + Q')**2 + (k - k')**2/4] r1**2/4)``
under the two-dimensional Gaussian transform.  Both coincide when ``r0 = r1``.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .beam_source import BeamParams
from .quadrature import IntegralResult, IntegrationConfig, Method, integrate
from .trajectory_kernel import Coefficients, KernelMode, pair_moments
from .turbulence import TurbulenceParams, spectral_moment

__all__ = [
    "PropagationQuery",
    "ModelOptions",
    "SigmaCurvePoint",
    "MomentEstimate",
    "IntegrationFailure",
    "mean_intensity",
    "second_moment",
    "intensity_moments",
    "sigma2",
    "sigma2_detailed",
    "momentum_diffusion",
    "beam_radius_sq",
    "broadening_coefficient",
    "applicability_ratio",
    "sweep",
    "DEFAULT_APPLICABILITY_FLOOR",
]

log = logging.getLogger(__name__)

DEFAULT_APPLICABILITY_FLOOR = 5.0
_TWO_PI = 2.0 * math.pi
_RHO_SPAN = 16.0          # e-folds of rho below the truncation radius
_PHI_NODES = 32           # detector-angle nodes when off axis
_TABLE_NODES = 161        # v nodes of the spline table sampled by (Q)MC
_CHECK_NODES = 48         # rho nodes used to estimate the lag-quadrature error


class IntegrationFailure(RuntimeError):
    """A moment integral missed its tolerance."""

    def __init__(self, message: str, estimate: float = math.nan, error: float = math.nan):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class PropagationQuery:
    z: float
    r_perp: tuple = (0.0, 0.0)
    mode: KernelMode = KernelMode.CORRELATED

    def __post_init__(self) -> None:
        if not (self.z > 0 and math.isfinite(self.z)):
            raise ValueError(f"z must be finite and > 0, got {self.z!r}")
        r = tuple(float(x) for x in np.asarray(self.r_perp, dtype=float).reshape(-1))
        if len(r) != 2 or not all(math.isfinite(x) for x in r):
            raise ValueError("r_perp must be a finite 2-vector")
        object.__setattr__(self, "r_perp", r)
        object.__setattr__(self, "mode", KernelMode.parse(self.mode))

    @property
    def r_abs(self) -> float:
        return math.hypot(*self.r_perp)


@dataclass(frozen=True)
class ModelOptions:
    """Model switches that are not integration controls.

    Attributes
    ----------
    coefficients :
        Inner-exponent coefficients, exact (from the spectral moment) or the
        rounded printed constants.
    drop_pair_correlation :
        Force the pair functional to zero.  The second moment is then the
        numerically integrated baseline, which for a coherent beam equals
        twice the squared mean intensity.
    """

    coefficients: Coefficients = Coefficients.EXACT
    drop_pair_correlation: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", Coefficients(self.coefficients))


@dataclass(frozen=True)
class MomentEstimate:
    mean_intensity: float
    second_moment: float
    second_moment_error: float
    evals: int
    converged: bool

    @property
    def sigma2(self) -> float:
        return self.second_moment / self.mean_intensity**2 - 1.0

    @property
    def sigma2_error(self) -> float:
        return self.second_moment_error / self.mean_intensity**2


@dataclass(frozen=True)
class SigmaCurvePoint:
    z: float
    sigma2_correlated: float
    sigma2_multiplicative: float
    mean_intensity: float
    dq2: float
    beam_radius_sq: float
    applicability_ratio: float
    err_sigma2_correlated: float = math.nan
    err_sigma2_multiplicative: float = math.nan
    failures: tuple = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.failures


# ---------------------------------------------------------------------------
# Diagnostics with closed forms
# ---------------------------------------------------------------------------


def broadening_coefficient(turb: TurbulenceParams) -> float:
    """``T = pi**2 J_3 / 3``; for the Tatarskii spectrum ``0.5576 cn2 l0**(-1/3)``."""
    return math.pi**2 * spectral_moment(3, turb) / 3.0


def momentum_diffusion(z: float, beam: BeamParams, turb: TurbulenceParams) -> float:
    """Mean-square transverse momentum gained by random forcing, m^-2.

    ``<dq^2> = 4 pi**2 q0**2 J_3 z``, linear in ``z`` and in ``cn2``.
    """
    if z < 0:
        raise ValueError("z must be >= 0")
    return 4.0 * math.pi**2 * beam.q0**2 * spectral_moment(3, turb) * z


def beam_radius_sq(z: float, beam: BeamParams, turb: TurbulenceParams) -> float:
    """Mean-square beam radius ``(r0**2/2)(1 + 4 z**2/(q0**2 r0**2 r1**2) + 8 z**3 T / r0**2)``."""
    if z < 0:
        raise ValueError("z must be >= 0")
    r0, r1, q0 = beam.r0, beam.r1, beam.q0
    T = broadening_coefficient(turb)
    return 0.5 * r0**2 * (1.0 + 4.0 * z**2 / (q0**2 * r0**2 * r1**2) + 8.0 * z**3 * T / r0**2)


def applicability_ratio(z: float, beam: BeamParams, turb: TurbulenceParams, form: str = "asymptotic") -> float:
    """Momentum spread over momentum uncertainty.

    ``form="asymptotic"`` keeps only the turbulent parts,
    ``sqrt(<dq^2> * 4 T z**3)``, which equals
    ``sqrt(14.93 q0**2 l0**(-2/3) cn2**2 z**4)`` for the Tatarskii spectrum.
    ``form="full"`` uses the whole momentum spread ``2/r1**2 + <dq^2>`` and
    the full mean-square radius.
    """
    if not z > 0:
        raise ValueError("z must be > 0")
    if form == "asymptotic":
        return math.sqrt(momentum_diffusion(z, beam, turb) * 4.0 * broadening_coefficient(turb) * z**3)
    if form == "full":
        return math.sqrt((2.0 / beam.r1**2 + momentum_diffusion(z, beam, turb)) * beam_radius_sq(z, beam, turb))
    raise ValueError(f"unknown form {form!r}")


# ---------------------------------------------------------------------------
# Gaussian block algebra
# ---------------------------------------------------------------------------


def _phi_blocks(z, beam, turb):
    """Single-trajectory functional blocks P (on w,k) and P' (on w,k')."""
    q0 = beam.q0
    c = 2.0 * math.pi**2 * q0**2 * spectral_moment(3, turb)
    P = c * np.array([[z, -z * z / (2 * q0), 0.0],
                      [-z * z / (2 * q0), z**3 / (3 * q0 * q0), 0.0],
                      [0.0, 0.0, 0.0]])
    Pp = c * np.array([[z, 0.0, z * z / (2 * q0)],
                       [0.0, 0.0, 0.0],
                       [z * z / (2 * q0), 0.0, z**3 / (3 * q0 * q0)]])
    return P + Pp


def _source_block(z, beam, term):
    h = z / beam.q0
    r0, r1 = beam.r0, beam.r1
    if term == 1:
        v1 = np.array([1.0, -h, 0.0])
        v2 = np.array([-1.0, 0.0, -h])
        W = (np.outer(v1, v1) + np.outer(v2, v2)) / r1**2
        K = np.diag([0.0, r0**2 / 4, r0**2 / 4])
        N = 1.0 / (_TWO_PI * r1**2) ** 2
    else:
        s = np.array([0.0, -h, -h])
        d = np.array([2.0, -h, h])
        W = np.outer(s, s) / (2 * r1**2) + np.outer(d, d) / (2 * r0**2)
        e1 = np.array([0.0, 1.0, 1.0])
        e2 = np.array([0.0, 1.0, -1.0])
        K = r0**2 / 8 * np.outer(e1, e1) + r1**2 / 8 * np.outer(e2, e2)
        N = 1.0 / (4 * math.pi**2 * r0**2 * r1**2)
    return W + K, N


@dataclass(frozen=True)
class _Term:
    A0: np.ndarray
    B0: np.ndarray  # inverse of A0
    det0: float
    norm: float

    @property
    def s0(self) -> float:
        return float(self.B0[0, 0])


def _terms(z, beam, turb):
    out = []
    phi = _phi_blocks(z, beam, turb)
    for term in (1, 2):
        src, N = _source_block(z, beam, term)
        A0 = src + phi
        out.append(_Term(A0, np.linalg.inv(A0), float(np.linalg.det(A0)), N))
    return out


def _s_matrices(m, q0):
    """Pair blocks ``S`` from lag moments ``m`` of shape (..., 3)."""
    c = _TWO_PI * q0**2
    S = np.zeros(m.shape[:-1] + (3, 3))
    S[..., 0, 0] = -m[..., 0]
    S[..., 0, 1] = S[..., 1, 0] = m[..., 1] / (2 * q0)
    S[..., 0, 2] = S[..., 2, 0] = -m[..., 1] / (2 * q0)
    S[..., 1, 2] = S[..., 2, 1] = m[..., 2] / (2 * q0 * q0)
    return c * S


def _baseline(term: _Term, r2: float) -> float:
    """``(2 pi)**2 integral d^2 Delta`` of the S = 0 block Gaussian (closed form)."""
    B = term.B0
    c = B[0, 1] + B[0, 2]
    d = B[1, 1] + B[2, 2] + 2 * B[1, 2]
    return _TWO_PI**6 * term.norm / (term.det0 * term.s0) * math.exp(-0.5 * r2 * (d - c * c / term.s0))


def _block_gauss(A_par, A_perp, norm, rho, r_vec_par, r_vec_perp):
    """Six-dimensional Gaussian integral with phase vector b, per rho (and angle)."""
    det = np.linalg.det(A_par) * np.linalg.det(A_perp)
    Bp = np.linalg.inv(A_par)
    Bq = np.linalg.inv(A_perp)
    bpar = np.stack([rho, -r_vec_par, -r_vec_par], axis=-1)
    bperp = np.stack([np.zeros_like(rho), -r_vec_perp, -r_vec_perp], axis=-1)
    quad = np.einsum("...i,...ij,...j->...", bpar, Bp, bpar) + np.einsum("...i,...ij,...j->...", bperp, Bq, bperp)
    return norm * _TWO_PI**3 / np.sqrt(det) * np.exp(-0.5 * quad)


def _rho_window(terms, config: IntegrationConfig):
    s0_min = min(t.s0 for t in terms)
    rho_max = 2.0 * config.truncation_sigmas / math.sqrt(s0_min)
    v_hi = math.log(rho_max)
    return v_hi - _RHO_SPAN, v_hi


class _Integrand:
    """Correction integrand in v = log(rho), summed over both source terms.

    Returns ``(2 pi)**2 rho**2 integral dphi [G(rho, phi) - G0(rho, phi)]`` (or the
    full ``G`` when the baseline is to be integrated numerically).
    """

    def __init__(self, z, beam, turb, mode, options: ModelOptions, r_perp, zeta_panels=30, zeta_nodes=12):
        self.z, self.beam, self.turb, self.mode = z, beam, turb, mode
        self.options = options
        self.terms = _terms(z, beam, turb)
        self.r = math.hypot(*r_perp)
        self.zeta_panels = zeta_panels
        self.zeta_nodes = zeta_nodes
        if self.r > 0:
            phi = _TWO_PI * np.arange(_PHI_NODES) / _PHI_NODES
            self.phi_cos = np.cos(phi)
            self.phi_sin = np.sin(phi)
            self.phi_w = _TWO_PI / _PHI_NODES
        else:
            self.phi_cos = np.ones(1)
            self.phi_sin = np.zeros(1)
            self.phi_w = _TWO_PI

    def moments(self, rho):
        return pair_moments(rho, self.z, self.mode, self.turb, self.beam,
                            coefficients=self.options.coefficients,
                            panels=self.zeta_panels, nodes=self.zeta_nodes)

    def values(self, rho, m_par=None, m_perp=None, subtract_baseline=True):
        rho = np.asarray(rho, dtype=float).reshape(-1)
        drop = self.options.drop_pair_correlation
        if not drop and m_par is None:
            m_par, m_perp = self.moments(rho)
        total = np.zeros_like(rho)
        rp = (self.r * self.phi_cos)[None, :] + 0.0 * rho[:, None]
        rq = (self.r * self.phi_sin)[None, :] + 0.0 * rho[:, None]
        rr = rho[:, None] + 0.0 * rp
        for term in self.terms:
            if drop:
                A_par = np.broadcast_to(term.A0, rho.shape + (3, 3))
                A_perp = A_par
            else:
                A_par = term.A0 + 2.0 * _s_matrices(m_par, self.beam.q0)
                A_perp = term.A0 + 2.0 * _s_matrices(m_perp, self.beam.q0)
            G = _block_gauss(A_par[:, None], A_perp[:, None], term.norm, rr, rp, rq)
            if subtract_baseline:
                A0 = np.broadcast_to(term.A0, rho.shape + (3, 3))[:, None]
                G = G - _block_gauss(A0, A0, term.norm, rr, rp, rq)
            total += self.phi_w * np.sum(G, axis=1)
        return _TWO_PI**2 * rho * rho * total

    def __call__(self, v):
        v = np.asarray(v, dtype=float).reshape(-1)
        return self.values(np.exp(v), subtract_baseline=not self.options.drop_pair_correlation)


def _mean_intensity_value(z, r2, beam, turb):
    A_I = (z / beam.q0) ** 2 / (2 * beam.r1**2) + beam.r0**2 / 8 + broadening_coefficient(turb) * z**3
    return (_TWO_PI / beam.r1**2) * (math.pi / A_I) * math.exp(-r2 / (4 * A_I))


def mean_intensity(query: PropagationQuery, beam: BeamParams, turb: TurbulenceParams,
                   config: IntegrationConfig | None = None) -> float:
    """Turbulence-averaged intensity in arbitrary units.

    The single-trajectory average of the transformed intensity is Gaussian
    in ``(p, k)``, and integrating it leaves
    ``(2 pi / r1**2)(pi / A) exp(-r**2 / 4A)`` with ``A = R**2 / 4``, where
    ``R**2`` is :func:`beam_radius_sq`.  ``config`` is accepted for interface
    symmetry; no numerical integration is needed.
    """
    return _mean_intensity_value(query.z, query.r_abs**2, beam, turb)


def _sampling_correction(integrand: _Integrand, v_lo, v_hi, config: IntegrationConfig, tol_abs):
    """(Q)MC estimate of the correction integral.

    The six Gaussian directions are integrated exactly, which is the
    conditional expectation given ``rho``, so the sampler only covers
    ``v = log(rho)``.  Sampling them as well leaves the estimator unbiased
    but multiplies its variance by several orders of magnitude.

    The integrand in ``v`` is smooth but costs milliseconds per point, so it
    is tabulated once on a uniform grid and the sampler draws from a cubic
    spline of the table.  The spline's own error is estimated from a
    half-resolution spline and added to the sampling error.
    """
    nodes = np.linspace(v_lo, v_hi, _TABLE_NODES)
    vals = integrand(nodes)
    fine = CubicSpline(nodes, vals)
    coarse = CubicSpline(nodes[::2], vals[::2])
    table_err = abs(float(fine.integrate(v_lo, v_hi)) - float(coarse.integrate(v_lo, v_hi)))
    res = integrate(lambda u: fine(u[:, 0]), [(v_lo, v_hi)], config.with_(abs_tol=tol_abs))
    err = res.error_estimate + table_err
    return IntegralResult(res.estimate, err, res.evals + nodes.size, res.converged and table_err <= tol_abs)


def intensity_moments(query: PropagationQuery, beam: BeamParams, turb: TurbulenceParams,
                      config: IntegrationConfig | None = None, options: ModelOptions | None = None, *,
                      normalization: float = 1.0, density_of_states: float = 1.0) -> MomentEstimate:
    """Mean intensity and second moment with an error estimate.

    ``normalization`` and ``density_of_states`` reproduce the dropped
    constants.  The first scales each intensity factor.  The second scales
    each momentum-type sum turned into an integral: two in ``<I>`` and four
    in ``<I^2>``.  Neither changes the scintillation index.
    """
    config = config or IntegrationConfig()
    options = options or ModelOptions()
    z = query.z
    r2 = query.r_abs**2
    I = _mean_intensity_value(z, r2, beam, turb)
    f = _Integrand(z, beam, turb, query.mode, options, query.r_perp)
    v_lo, v_hi = _rho_window(f.terms, config)
    baseline = sum(_baseline(t, r2) for t in f.terms)
    scale1 = normalization * density_of_states**2
    scale2 = normalization**2 * density_of_states**4

    if options.drop_pair_correlation:
        # integrate the full baseline numerically (exercises the quadrature path)
        sub = config.with_(method=Method.ADAPTIVE_PRODUCT, rel_tol=0.1 * config.rel_tol, abs_tol=0.0)
        res = integrate(f, [(v_lo, v_hi)], sub)
        second = res.estimate
        return MomentEstimate(scale1 * I, scale2 * second, scale2 * res.error_estimate, res.evals, res.converged)

    tol_abs = 0.1 * config.rel_tol * baseline
    if config.method is Method.ADAPTIVE_PRODUCT:
        res = integrate(f, [(v_lo, v_hi)], config.with_(rel_tol=0.1 * config.rel_tol, abs_tol=tol_abs))
    else:
        res = _sampling_correction(f, v_lo, v_hi, config, tol_abs)
    # lag-quadrature error: compare the production rule with a coarse one
    x, w = np.polynomial.legendre.leggauss(_CHECK_NODES)
    v = 0.5 * (v_lo + v_hi) + 0.5 * (v_hi - v_lo) * x
    w = 0.5 * (v_hi - v_lo) * w
    fine = float(np.dot(w, f(v)))
    coarse_f = _Integrand(z, beam, turb, query.mode, options, query.r_perp, zeta_panels=15, zeta_nodes=8)
    coarse = float(np.dot(w, coarse_f(v)))
    correction = res.estimate
    err = res.error_estimate + abs(fine - coarse)
    evals = res.evals + 2 * _CHECK_NODES
    converged = res.converged and err <= max(config.rel_tol * abs(baseline + correction), config.abs_tol * I * I)
    second = baseline + correction
    return MomentEstimate(scale1 * I, scale2 * second, scale2 * err, evals, bool(converged))


def second_moment(query: PropagationQuery, beam: BeamParams, turb: TurbulenceParams,
                  config: IntegrationConfig | None = None, options: ModelOptions | None = None) -> float:
    """Second intensity moment in arbitrary units squared.

    Raises
    ------
    IntegrationFailure
        When the requested tolerance is not reached.
    """
    est = intensity_moments(query, beam, turb, config, options)
    if not est.converged:
        raise IntegrationFailure("second moment did not converge", est.second_moment, est.second_moment_error)
    return est.second_moment


def sigma2_detailed(query: PropagationQuery, beam: BeamParams, turb: TurbulenceParams,
                    config: IntegrationConfig | None = None, options: ModelOptions | None = None) -> MomentEstimate:
    return intensity_moments(query, beam, turb, config, options)


def sigma2(query: PropagationQuery, beam: BeamParams, turb: TurbulenceParams,
           config: IntegrationConfig | None = None, options: ModelOptions | None = None) -> float:
    """Scintillation index ``(<I^2> - <I>^2) / <I>^2``.

    Raises
    ------
    IntegrationFailure
        When the requested tolerance is not reached.
    """
    est = intensity_moments(query, beam, turb, config, options)
    if not est.converged:
        raise IntegrationFailure("scintillation index did not converge", est.sigma2, est.sigma2_error)
    return est.sigma2


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def _point_task(args):
    z, mode, r_perp, beam, turb, config, options = args
    try:
        est = intensity_moments(PropagationQuery(z, r_perp, mode), beam, turb, config, options)
    except Exception as exc:  # noqa: BLE001 - reported per point
        return math.nan, math.nan, f"{mode.value}: {exc}"
    if not est.converged:
        return est.sigma2, est.sigma2_error, f"{mode.value}: tolerance not met (error {est.sigma2_error:.3g})"
    return est.sigma2, est.sigma2_error, None


def sweep(z_list: Sequence[float], beam: BeamParams, turb: TurbulenceParams,
          config: IntegrationConfig | None = None, options: ModelOptions | None = None, *,
          modes: Sequence[KernelMode] = (KernelMode.CORRELATED, KernelMode.MULTIPLICATIVE),
          r_perp=(0.0, 0.0), applicability_floor: float = DEFAULT_APPLICABILITY_FLOOR) -> list[SigmaCurvePoint]:
    """Evaluate a scintillation curve, one :class:`SigmaCurvePoint` per ``z``.

    Points (and modes) run on a process pool of ``config.workers`` workers;
    results come back in input order and do not depend on the pool size.  A
    failure at one point is recorded on that point (values set to NaN, or
    kept with a flag when only the tolerance was missed).  It does not abort
    the sweep.
    """
    config = config or IntegrationConfig()
    options = options or ModelOptions()
    zs = [float(z) for z in z_list]
    if any(b <= a for a, b in zip(zs, zs[1:])):
        raise ValueError("z_list must be strictly increasing")
    if any(not z > 0 for z in zs):
        raise ValueError("all z must be > 0")
    modes = [KernelMode.parse(m) for m in modes]
    for z in zs:
        ratio = applicability_ratio(z, beam, turb)
        if ratio < applicability_floor:
            warnings.warn(f"z = {z:g} m has applicability ratio {ratio:.3g} < {applicability_floor:g}; "
                          "the pair-correlation model is not valid there", RuntimeWarning, stacklevel=2)
    pooled = config.workers > 1 and len(zs) * len(modes) > 1
    # inside a pool each task runs single-threaded; results do not depend on it
    task_config = config.with_(workers=1) if pooled else config
    tasks = [(z, m, tuple(r_perp), beam, turb, task_config, options) for z in zs for m in modes]
    if pooled:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_point_task, tasks))
    else:
        results = [_point_task(t) for t in tasks]
    by_key = {(t[0], t[1]): r for t, r in zip(tasks, results)}
    points = []
    for z in zs:
        vals = {}
        failures = []
        for m in (KernelMode.CORRELATED, KernelMode.MULTIPLICATIVE):
            if m in modes:
                s2, err, msg = by_key[(z, m)]
                if msg:
                    failures.append(msg)
                vals[m] = (s2, err)
            else:
                vals[m] = (math.nan, math.nan)
        query = PropagationQuery(z, r_perp)
        point = SigmaCurvePoint(
            z=z,
            sigma2_correlated=vals[KernelMode.CORRELATED][0],
            sigma2_multiplicative=vals[KernelMode.MULTIPLICATIVE][0],
            mean_intensity=mean_intensity(query, beam, turb),
            dq2=momentum_diffusion(z, beam, turb),
            beam_radius_sq=beam_radius_sq(z, beam, turb),
            applicability_ratio=applicability_ratio(z, beam, turb),
            err_sigma2_correlated=vals[KernelMode.CORRELATED][1],
            err_sigma2_multiplicative=vals[KernelMode.MULTIPLICATIVE][1],
            failures=tuple(failures),
        )
        log.info("z = %g m: sigma2 corr = %.6g, mult = %.6g%s", z, point.sigma2_correlated,
                 point.sigma2_multiplicative, "" if point.ok else " [" + "; ".join(failures) + "]")
        points.append(point)
    return points
