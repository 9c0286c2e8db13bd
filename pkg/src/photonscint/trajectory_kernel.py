"""Force-correlation functionals along photon trajectories.

Every quantity here is written in path-length variables: the propagation
distance ``z`` replaces ``c t`` and the lag ``zeta`` replaces ``c (t - t')``.
With that substitution the random force per unit length is
``f = q0 * grad n`` and, after the longitudinal integration that turns the
index correlations into a delta function in ``z``, two forces correlate as

    <f_a(z1, r1) f_b(z2, r2)> = 2 pi q0**2 delta(z1 - z2)
                                * integral d^2g g_a g_b psi(g) exp(-i g.(r1 - r2)).

The factor ``2 pi`` is what is left of the time-domain ``2 pi / c`` once
both force factors are converted from per-time to per-length units; it is
applied here and nowhere else.  The transverse photon velocity is
``q / q0``, so two straight trajectories ending at the same point with
momenta ``q`` and ``q'`` are separated by ``(q - q') zeta / q0`` a lag
``zeta`` upstream.

Two treatments of the random part of that separation are offered:

``KernelMode.CORRELATED``
    The one-level closed-form decorrelation exponent (see
    :func:`inner_exponent`).  It vanishes for ``q = q'``.
``KernelMode.MULTIPLICATIVE``
    Each trajectory is averaged separately, which yields the
    ``q``-independent Gaussian damping ``exp(-2 T zeta**3 g**2)`` with
    ``T = pi**2 J_3 / 3``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .beam_source import BeamParams
from .turbulence import (
    KOLMOGOROV_PREFACTOR,
    TurbulenceParams,
    reduced_inner_scale,
    spectral_moment,
    spectrum_psi,
)

__all__ = [
    "PhasePoint",
    "KernelMode",
    "Coefficients",
    "InnerCoefficients",
    "inner_coefficients",
    "inner_exponent",
    "decorrelation_widths",
    "momentum_diffusion_rate",
    "phi_self",
    "phi_self_bilinear",
    "phi_pair",
    "phi_pair_detailed",
    "average_M",
    "transverse_kernel",
    "pair_moments",
    "zeta_rule",
    "markov_reduction_check",
    "PairIntegral",
    "KernelIntegrationError",
]


class KernelIntegrationError(RuntimeError):
    """Raised when a kernel quadrature misses its tolerance."""

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate!r}, error estimate={error!r})")
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class PhasePoint:
    """Integration variables of one trajectory.

    Attributes
    ----------
    q : ndarray, shape (2,)
        Transverse photon momentum at the detector, m^-1.
    p : ndarray, shape (2,)
        Variable conjugate to momentum in the Gaussian transform, m.
    k : ndarray, shape (2,)
        Intensity Fourier variable, m^-1.
    """

    q: np.ndarray
    p: np.ndarray
    k: np.ndarray

    def __post_init__(self) -> None:
        for name in ("q", "p", "k"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            if arr.shape != (2,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"PhasePoint.{name} must be a finite 2-vector")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def of(cls, q=(0.0, 0.0), p=(0.0, 0.0), k=(0.0, 0.0)) -> "PhasePoint":
        return cls(np.asarray(q, float), np.asarray(p, float), np.asarray(k, float))

    def scaled(self, factor: float) -> "PhasePoint":
        """Scale ``p`` and ``k`` (the linear variables) by ``factor``."""
        return PhasePoint(self.q, factor * self.p, factor * self.k)


class KernelMode(str, enum.Enum):
    CORRELATED = "correlated"
    MULTIPLICATIVE = "multiplicative"

    @classmethod
    def parse(cls, text) -> "KernelMode":
        if isinstance(text, KernelMode):
            return text
        key = str(text).strip().lower()
        for member in cls:
            if member.value.startswith(key) and len(key) >= 4:
                return member
        raise ValueError(f"unknown kernel mode {text!r}")


class Coefficients(str, enum.Enum):
    """Source of the inner-exponent coefficients.

    ``EXACT`` evaluates them from the spectral moment ``J_5`` of the active
    spectrum; ``PRINTED`` uses the rounded Tatarskii constants 2.52e-3 and
    1/560.
    """

    EXACT = "exact"
    PRINTED = "printed"


@dataclass(frozen=True)
class InnerCoefficients:
    """``E = -amp * u**2 zeta**5 g**2 [(1 + cos2t/2) + nest * zeta**3 (1 + cos2t/4)]``.

    ``u = |q - q'| / q0``.  ``amp`` has units m^-6 and ``nest`` m^-3.
    """

    amp: float
    nest: float


_PRINTED_AMP = 2.52e-3
_PRINTED_NEST = 1.0 / 560.0


def inner_coefficients(turb: TurbulenceParams, coefficients: Coefficients | str = Coefficients.EXACT) -> InnerCoefficients:
    """Coefficients of the closed-form inner exponent.

    Carrying out the ``g'``, ``g''`` and ``t1`` integrations of the one-level
    hierarchy for an isotropic spectrum gives ``amp = pi**2 J_5 / 60`` and
    ``nest = pi**2 J_5 / 84``.  For the Tatarskii spectrum these equal
    ``2.5180e-3 cn2 l'**(-7/3)`` and ``cn2 l'**(-7/3) / 556.0``.
    """
    coefficients = Coefficients(coefficients)
    if coefficients is Coefficients.PRINTED:
        scale = turb.cn2 * reduced_inner_scale(turb) ** (-7.0 / 3.0)
        return InnerCoefficients(_PRINTED_AMP * scale, _PRINTED_NEST * scale)
    j5 = spectral_moment(5, turb)
    return InnerCoefficients(math.pi**2 * j5 / 60.0, math.pi**2 * j5 / 84.0)


def momentum_diffusion_rate(turb: TurbulenceParams, beam: BeamParams) -> float:
    """Growth rate ``d<dq^2>/dz = 4 pi**2 q0**2 J_3`` in m^-3."""
    return 4.0 * math.pi**2 * beam.q0**2 * spectral_moment(3, turb)


def _broadening_T(turb: TurbulenceParams) -> float:
    return math.pi**2 * spectral_moment(3, turb) / 3.0


def inner_exponent(g, theta, dq, tau, turb: TurbulenceParams, beam: BeamParams,
                   coefficients: Coefficients | str = Coefficients.EXACT):
    """Closed-form decorrelation exponent of two trajectories (always <= 0).

    Parameters
    ----------
    g : float or array_like
        Transverse wavenumber magnitude, m^-1.
    theta : float or array_like
        Angle between the wavevector and ``q - q'``, rad.
    dq : float or array_like
        ``|q - q'|``, m^-1.
    tau : float or array_like
        Lag expressed as a path length ``zeta``, m.
    turb, beam :
        Parameter records; only ``beam.q0`` is used.
    coefficients : {"exact", "printed"}
        See :class:`Coefficients`.

    Raises
    ------
    ValueError
        For negative ``g``, ``dq`` or ``tau``.
    """
    g = np.asarray(g, dtype=float)
    dq = np.asarray(dq, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("inner_exponent requires tau >= 0")
    if np.any(g < 0) or np.any(dq < 0):
        raise ValueError("inner_exponent requires g >= 0 and dq >= 0")
    co = inner_coefficients(turb, coefficients)
    c2 = np.cos(2.0 * np.asarray(theta, dtype=float))
    u = dq / beam.q0
    nest = co.nest * tau**3
    val = -co.amp * u * u * tau**5 * g * g * ((1.0 + 0.5 * c2) + nest * (1.0 + 0.25 * c2))
    val = val + 0.0  # normalise -0.0 to 0.0
    return float(val) if val.ndim == 0 else val


def decorrelation_widths(zeta, dq, mode: KernelMode | str, turb: TurbulenceParams, beam: BeamParams,
                         coefficients: Coefficients | str = Coefficients.EXACT):
    """Split the damping exponent into ``-(w_par g_par**2 + w_perp g_perp**2)``.

    ``g_par`` is the wavevector component along ``q - q'``.  In correlated
    mode ``w_par = K (3/2 + 5Y/4)`` and ``w_perp = K (1/2 + 3Y/4)`` with
    ``K = amp u**2 zeta**5`` and ``Y = nest zeta**3``; in multiplicative mode
    both equal ``2 T zeta**3``.
    """
    mode = KernelMode.parse(mode)
    zeta = np.asarray(zeta, dtype=float)
    dq = np.asarray(dq, dtype=float)
    if mode is KernelMode.MULTIPLICATIVE:
        w = 2.0 * _broadening_T(turb) * zeta**3 + 0.0 * dq
        return w, w.copy()
    co = inner_coefficients(turb, coefficients)
    u = dq / beam.q0
    K = co.amp * u * u * zeta**5
    Y = co.nest * zeta**3
    return K * (1.5 + 1.25 * Y), K * (0.5 + 0.75 * Y)


def _quad_form(a, b, z, q0):
    """``integral_0^z (a + k z'/q0) . (b + k' z'/q0) dz'`` for a=(p,k), b=(p',k')."""
    p, k = a
    pp, kk = b
    return (float(np.dot(p, pp)) * z
            + (float(np.dot(p, kk)) + float(np.dot(k, pp))) * z * z / (2.0 * q0)
            + float(np.dot(k, kk)) * z**3 / (3.0 * q0 * q0))


def phi_self_bilinear(P: PhasePoint, Pp: PhasePoint, z: float, turb: TurbulenceParams, beam: BeamParams) -> float:
    """Bilinear form whose diagonal is :func:`phi_self`.

    Equals ``2 pi**2 q0**2 J_3 integral_0^z (p + k z'/q0).(p' + k' z'/q0) dz'``,
    the pair functional with the oscillating factor and the decorrelation
    exponent both set to one.
    """
    if z < 0:
        raise ValueError("z must be >= 0")
    c = 2.0 * math.pi**2 * beam.q0**2 * spectral_moment(3, turb)
    return c * _quad_form((P.p, P.k), (Pp.p, Pp.k), z, beam.q0)


def phi_self(P: PhasePoint, z: float, turb: TurbulenceParams, beam: BeamParams) -> float:
    """Single-trajectory functional (non-negative quadratic form in ``(p, k)``).

    The angular integral ``integral dtheta (g . v)**2 = pi g**2 |v|**2`` is done
    analytically, leaving the radial moment ``J_3``.
    """
    return phi_self_bilinear(P, P, z, turb, beam)


# ---------------------------------------------------------------------------
# Direct quadrature of the pair functional
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairIntegral:
    """Result of a direct pair-functional quadrature."""

    value: float
    error_estimate: float
    imag_residue: float
    converged: bool


def _gl(n):
    return np.polynomial.legendre.leggauss(n)


def _composite_gl(edges, nodes):
    x, w = _gl(nodes)
    a = edges[:-1, None]
    b = edges[1:, None]
    pts = 0.5 * (a + b) + 0.5 * (b - a) * x[None, :]
    wts = 0.5 * (b - a) * w[None, :]
    return pts.ravel(), wts.ravel()


def zeta_rule(z: float, panels: int = 30, nodes: int = 12, first_fraction: float = 1e-7):
    """Composite Gauss-Legendre rule on ``[0, z]`` with geometric panels.

    The first panel is ``[0, z * first_fraction]``; the remaining ones grow
    geometrically so that the high powers of ``zeta`` in the kernel are
    resolved near both ends.
    """
    if z <= 0:
        return np.zeros(0), np.zeros(0)
    edges = np.concatenate([[0.0], z * np.geomspace(first_fraction, 1.0, panels)])
    return _composite_gl(edges, nodes)


def _radial_remainder(g_lo: float, turb: TurbulenceParams) -> float:
    """``integral_0^g_lo g**3 psi(g) dg`` using the small-g form of psi."""
    if turb.kappa0_sq == 0.0:
        return KOLMOGOROV_PREFACTOR * turb.cn2 * 3.0 * g_lo ** (1.0 / 3.0)
    return KOLMOGOROV_PREFACTOR * turb.cn2 * turb.kappa0_sq ** (-11.0 / 6.0) * g_lo**4 / 4.0


def _pair_direct(P, Pp, z, mode, turb, beam, coefficients, level):
    q0 = beam.q0
    lp = reduced_inner_scale(turb)
    dvec = P.q - Pp.q
    dq = float(np.hypot(*dvec))
    phi_d = math.atan2(dvec[1], dvec[0]) if dq > 0 else 0.0

    g_max = 8.0 * 2.0 * math.pi / turb.l0
    g_lo = 1e-9 / lp
    n_gpan = 24 * level
    v_edges = np.linspace(math.log(g_lo), math.log(g_max), n_gpan + 1)
    v, wv = _composite_gl(v_edges, 16)
    g = np.exp(v)
    wg = wv * g  # dg = g dv
    psi = spectrum_psi(g, turb)

    c_max = dq * z / q0
    n_theta = int(min(8192, 2 * math.ceil(1.25 * g_max * c_max) + 48 * level))
    n_theta += n_theta % 2
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    wth = 2.0 * math.pi / n_theta
    ang = theta + phi_d
    ghat = np.stack([np.cos(ang), np.sin(ang)], axis=-1)  # (nth, 2)

    n_zpan = max(6, int(math.ceil(g_max * c_max / 4.0))) * level
    z_edges = np.linspace(0.0, z, n_zpan + 1)
    zeta, wz = _composite_gl(z_edges, 10)

    total = 0.0 + 0.0j
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)
    for zi, wzi in zip(zeta, wz):
        a = P.p + P.k * (z - zi) / q0
        b = Pp.p + Pp.k * (z - zi) / q0
        ang_fac = (ghat @ a) * (ghat @ b)  # (nth,)
        wpar, wperp = decorrelation_widths(zi, dq, mode, turb, beam, coefficients)
        gam = wpar * cos_t**2 + wperp * sin_t**2  # (nth,)
        phase = np.exp(1j * np.outer(g * dq * zi / q0, cos_t))  # (ng, nth)
        damp = np.exp(-np.outer(g * g, gam))
        integrand = (g**3 * psi)[:, None] * ang_fac[None, :] * phase * damp
        total += wzi * np.sum(wg[:, None] * integrand) * wth
    # contribution of 0 < g < g_lo where the oscillating and damping factors are 1
    rem = math.pi * _quad_form((P.p, P.k), (Pp.p, Pp.k), z, q0) * _radial_remainder(g_lo, turb)
    total += rem
    return 2.0 * math.pi * q0**2 * total


def phi_pair_detailed(P: PhasePoint, Pp: PhasePoint, z: float, mode: KernelMode | str,
                      turb: TurbulenceParams, beam: BeamParams, *,
                      coefficients: Coefficients | str = Coefficients.EXACT,
                      rel_tol: float = 1e-6, abs_tol: float = 0.0,
                      force_quadrature: bool = False) -> PairIntegral:
    """Pair functional with its error estimate and imaginary residue.

    The radial integral uses composite Gauss-Legendre panels in ``log g``
    from ``1e-9 / l'`` up to ``g_max = 8 (2 pi / l0)``.  Beyond ``g_max`` the
    inner-scale factor is below ``exp(-64)``.  Below the lower limit the
    small-``g`` form of the spectrum is integrated analytically.  The angle
    uses a uniform periodic trapezoid and the lag uses uniform
    Gauss-Legendre panels sized to the largest oscillation phase.  The error
    estimate compares a base grid with one refined in every direction.

    With ``q == q'`` in correlated mode both the oscillating factor and the
    exponent are exactly 1, so the closed-form bilinear expression is
    returned unless ``force_quadrature`` is set.
    """
    mode = KernelMode.parse(mode)
    if z < 0:
        raise ValueError("z must be >= 0")
    if turb.cn2 == 0.0 or z == 0.0:
        return PairIntegral(0.0, 0.0, 0.0, True)
    same_q = bool(np.all(P.q == Pp.q))
    if same_q and mode is KernelMode.CORRELATED and not force_quadrature:
        return PairIntegral(phi_self_bilinear(P, Pp, z, turb, beam), 0.0, 0.0, True)
    coarse = _pair_direct(P, Pp, z, mode, turb, beam, coefficients, level=1)
    fine = _pair_direct(P, Pp, z, mode, turb, beam, coefficients, level=2)
    err = abs(fine.real - coarse.real) + abs(fine.imag - coarse.imag)
    converged = err <= max(rel_tol * abs(fine.real), abs_tol)
    return PairIntegral(float(fine.real), float(err), float(abs(fine.imag)), bool(converged))


def phi_pair(P: PhasePoint, Pp: PhasePoint, z: float, mode: KernelMode | str,
             turb: TurbulenceParams, beam: BeamParams, **kwargs) -> float:
    """Two-trajectory functional (real, symmetric under swapping P and P').

    See :func:`phi_pair_detailed` for keyword arguments.

    Raises
    ------
    KernelIntegrationError
        If the quadrature misses its tolerance or leaves an imaginary part
        larger than ten times the error estimate.
    """
    res = phi_pair_detailed(P, Pp, z, mode, turb, beam, **kwargs)
    if not res.converged:
        raise KernelIntegrationError("pair functional did not converge", res.value, res.error_estimate)
    floor = 10.0 * max(res.error_estimate, 1e-14 * abs(res.value))
    if res.imag_residue > floor:
        raise KernelIntegrationError("imaginary residue above tolerance", res.value, res.imag_residue)
    return res.value


def average_M(P: PhasePoint, Pp: PhasePoint, z: float, mode: KernelMode | str,
              turb: TurbulenceParams, beam: BeamParams, **kwargs) -> float:
    """Turbulence-averaged multiplier ``exp(-(phi_PP + 2 phi_PP' + phi_P'P') / 2)``."""
    total = (phi_self(P, z, turb, beam) + 2.0 * phi_pair(P, Pp, z, mode, turb, beam, **kwargs)
             + phi_self(Pp, z, turb, beam))
    return math.exp(-0.5 * total)


# ---------------------------------------------------------------------------
# Angular-integrated kernel used by the intensity-moment assembly
# ---------------------------------------------------------------------------

_T_STEP = 0.2


def transverse_kernel(s, w_par, w_perp, turb: TurbulenceParams, step: float = _T_STEP):
    """Directional kernel pair ``(A_par, A_perp)``.

    ``A_par = integral d^2g psi(g) g_par**2 cos(g_par s) exp(-w_par g_par**2 - w_perp g_perp**2)``
    and ``A_perp`` is the same with ``g_perp**2``.  The power law in psi is
    written as a Schwinger integral,

        (g**2 + kappa**2)**(-11/6) = Gamma(11/6)**-1 integral_0^inf t**(5/6) exp(-t (g**2 + kappa**2)) dt,

    which makes the ``g`` integral Gaussian and leaves a one-dimensional
    ``t`` integral.  That is evaluated with the trapezoid rule in ``log t``
    plus an analytic tail.  All inputs broadcast together.
    """
    s, w_par, w_perp = np.broadcast_arrays(np.asarray(s, float), np.asarray(w_par, float), np.asarray(w_perp, float))
    shape = s.shape
    s = s.ravel()
    w_par = w_par.ravel()
    w_perp = w_perp.ravel()
    out_par = np.empty_like(s)
    out_perp = np.empty_like(s)
    if s.size == 0:
        return out_par.reshape(shape), out_perp.reshape(shape)
    lp2 = reduced_inner_scale(turb) ** 2
    kappa_sq = turb.kappa0_sq
    pre = KOLMOGOROV_PREFACTOR * turb.cn2 / math.gamma(11.0 / 6.0)
    scale = max(lp2, float(np.max(s * s)), float(np.max(w_par)), float(np.max(w_perp)))
    v_lo = math.log(lp2) - 32.0
    v_hi = math.log(scale) + 56.0
    if kappa_sq > 0:
        v_hi = min(v_hi, math.log(60.0 / kappa_sq))
    n = int(math.ceil((v_hi - v_lo) / step)) + 1
    v = np.linspace(v_lo, v_hi, n)
    h = v[1] - v[0]
    t = np.exp(v)
    wt = np.full(n, h)
    wt[0] = wt[-1] = 0.5 * h
    t_hi = t[-1]
    if kappa_sq > 0:
        x = t_hi * kappa_sq
        # integral_T^inf (pi/2) t**(-7/6) exp(-kappa**2 t) dt = (pi/2) kappa**(1/3) Gamma(-1/6, x)
        gamma_m16 = 6.0 * (x ** (-1.0 / 6.0) * math.exp(-x) - special.gammaincc(5.0 / 6.0, x) * math.gamma(5.0 / 6.0))
        tail = 0.5 * math.pi * kappa_sq ** (1.0 / 6.0) * gamma_m16
        tfac = t ** (11.0 / 6.0) * np.exp(-kappa_sq * t)
    else:
        tail = 3.0 * math.pi * t_hi ** (-1.0 / 6.0)
        tfac = t ** (11.0 / 6.0)
    wt = wt * tfac
    chunk = max(1, int(2_000_000 // n))
    for i in range(0, s.size, chunk):
        sl = slice(i, i + chunk)
        a = t[None, :] + lp2 + w_par[sl, None]
        b = t[None, :] + lp2 + w_perp[sl, None]
        ss = s[sl, None] ** 2
        common = math.pi / np.sqrt(a * b) * np.exp(-ss / (4.0 * a))
        out_par[sl] = (common * (1.0 - ss / (2.0 * a)) / (2.0 * a)) @ wt + tail
        out_perp[sl] = (common / (2.0 * b)) @ wt + tail
    # both tails share the s -> 0, w -> 0 asymptote, valid because t_hi dominates every scale
    return (pre * out_par).reshape(shape), (pre * out_perp).reshape(shape)


def pair_moments(rho, z: float, mode: KernelMode | str, turb: TurbulenceParams, beam: BeamParams, *,
                 coefficients: Coefficients | str = Coefficients.EXACT,
                 panels: int = 30, nodes: int = 12):
    """Lag moments ``m_n(rho) = integral_0^z zeta**n A(zeta, rho) dzeta`` for n = 0, 1, 2.

    ``rho = |q - q'|`` and ``A`` is :func:`transverse_kernel` evaluated at
    ``s = rho zeta / q0`` with the mode's damping widths.

    Returns
    -------
    m_par, m_perp : ndarray, shape (len(rho), 3)
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    zeta, wz = zeta_rule(z, panels, nodes)
    weights = np.stack([wz * zeta**n for n in range(3)], axis=1)  # (nz, 3)
    m_par = np.empty((rho.size, 3))
    m_perp = np.empty((rho.size, 3))
    block = 8
    for i in range(0, rho.size, block):
        r = rho[i:i + block, None]
        s = r * zeta[None, :] / beam.q0
        wpar, wperp = decorrelation_widths(zeta[None, :], r, mode, turb, beam, coefficients)
        a_par, a_perp = transverse_kernel(s, wpar + 0.0 * s, wperp + 0.0 * s, turb)
        m_par[i:i + block] = a_par @ weights
        m_perp[i:i + block] = a_perp @ weights
    return m_par, m_perp


def markov_reduction_check(g_perp: float, depth: float, turb: TurbulenceParams):
    """Finite-depth version of the longitudinal delta-function reduction.

    Replaces ``integral dzeta exp(i g_z zeta) = 2 pi delta(g_z)`` by the
    window ``integral_{-D}^{D} exp(i g_z zeta) dzeta = 2 sin(g_z D) / g_z`` and
    integrates it against ``psi(sqrt(g_perp**2 + g_z**2))``.

    Returns
    -------
    finite, limit : float
        The windowed integral and its ``D -> inf`` value ``2 pi psi(g_perp)``.
    """
    if g_perp <= 0 or depth <= 0:
        raise ValueError("g_perp and depth must be > 0")

    def f(gz):
        return spectrum_psi(math.hypot(g_perp, gz), turb)

    split = 50.0 / depth
    inner, _ = integrate.quad(lambda gz: 2.0 * f(gz) * depth * np.sinc(gz * depth / math.pi), 0.0, split, limit=400)
    outer, _ = integrate.quad(lambda gz: 2.0 * f(gz) / gz, split, np.inf, weight="sin", wvar=depth, limlst=200)
    finite = 2.0 * (inner + outer)
    return finite, 2.0 * math.pi * spectrum_psi(g_perp, turb)
