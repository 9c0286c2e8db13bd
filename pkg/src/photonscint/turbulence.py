"""Refractive-index fluctuation spectra and the random-force spectral tensor.

The three-dimensional spectrum used throughout is the von Karman form

    psi(g) = 0.033 * cn2 * exp(-(g * l0 / 2 pi)**2) / (g**2 + L0**-2)**(11/6)

whose Tatarskii variant simply drops the outer-scale term (``L0 = inf``).
Units are strict SI: ``psi`` carries m^3, wavenumbers are in m^-1.

Besides the pointwise spectrum this module exposes the radial moments

    J_n = integral_0^inf g**n psi(g) dg,

which appear in every closed-form transverse integral downstream (for
example ``integral d^2g (g . v)**2 psi(g) = pi * |v|**2 * J_3``).  They are
evaluated in closed form through Tricomi's confluent hypergeometric
function, which covers both spectrum models with one expression.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "SpectrumModel",
    "TurbulenceParams",
    "spectrum_psi",
    "force_spectral_tensor",
    "spectral_moment",
    "reduced_inner_scale",
    "KOLMOGOROV_PREFACTOR",
]

#: Numerical prefactor of the Kolmogorov refractive-index spectrum.
KOLMOGOROV_PREFACTOR = 0.033

_EXPONENT = 11.0 / 6.0


class SpectrumModel(str, enum.Enum):
    """Which spectral form to evaluate."""

    VON_KARMAN = "vonkarman"
    TATARSKII = "tatarskii"

    @classmethod
    def parse(cls, text: str) -> "SpectrumModel":
        key = str(text).strip().lower().replace("_", "").replace("-", "").replace(" ", "")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown spectrum model {text!r}; expected 'vonkarman' or 'tatarskii'")


@dataclass(frozen=True)
class TurbulenceParams:
    """Turbulence strength and scales.

    Parameters
    ----------
    cn2 : float
        Refractive-index structure constant, m^(-2/3).  Must be >= 0.
    l0 : float
        Inner scale, m.  The spectrum's Gaussian cutoff uses ``l0 / (2 pi)``.
    L0 : float
        Outer scale, m.  ``math.inf`` is required for the Tatarskii model.
        A finite value must exceed ``l0``.
    model : SpectrumModel
        ``TATARSKII`` evaluates the von Karman expression with the outer
        scale term removed, so both share a single code path.
    """

    cn2: float
    l0: float
    L0: float = math.inf
    model: SpectrumModel = SpectrumModel.TATARSKII

    def __post_init__(self) -> None:
        model = self.model if isinstance(self.model, SpectrumModel) else SpectrumModel.parse(self.model)
        object.__setattr__(self, "model", model)
        if not math.isfinite(self.cn2) or self.cn2 < 0:
            raise ValueError(f"cn2 must be finite and >= 0, got {self.cn2!r}")
        if not math.isfinite(self.l0) or self.l0 <= 0:
            raise ValueError(f"l0 must be finite and > 0, got {self.l0!r}")
        if math.isnan(self.L0) or self.L0 <= 0:
            raise ValueError(f"L0 must be > 0 (or inf), got {self.L0!r}")
        if math.isfinite(self.L0) and self.L0 <= self.l0:
            raise ValueError(f"finite L0 must exceed l0 ({self.L0!r} <= {self.l0!r})")
        if model is SpectrumModel.TATARSKII and math.isfinite(self.L0):
            raise ValueError("the Tatarskii model has no outer scale; pass L0 = inf")
        if model is SpectrumModel.VON_KARMAN and not math.isfinite(self.L0):
            raise ValueError("the von Karman model needs an explicit finite L0")

    @property
    def kappa0_sq(self) -> float:
        """Outer-scale regulariser ``L0**-2`` (exactly zero for Tatarskii)."""
        if self.model is SpectrumModel.TATARSKII:
            return 0.0
        return self.L0 ** -2

    def with_cn2(self, cn2: float) -> "TurbulenceParams":
        return TurbulenceParams(cn2=cn2, l0=self.l0, L0=self.L0, model=self.model)


def reduced_inner_scale(params: TurbulenceParams) -> float:
    """Return ``l0 / (2 pi)``, the length that sets the Gaussian cutoff."""
    return params.l0 / (2.0 * math.pi)


def spectrum_psi(g, params: TurbulenceParams):
    """Evaluate the refractive-index spectrum.

    Parameters
    ----------
    g : float or array_like
        Wavenumber magnitude(s), m^-1.  Must be >= 0, and strictly
        positive for the Tatarskii model where the spectrum diverges at 0.
    params : TurbulenceParams

    Returns
    -------
    float or ndarray
        Spectral density in m^3, same shape as ``g``.

    Raises
    ------
    ValueError
        For negative ``g``, or ``g == 0`` under the Tatarskii model.
    """
    g_arr = np.asarray(g, dtype=float)
    if np.any(np.isnan(g_arr)) or np.any(g_arr < 0):
        raise ValueError("spectrum_psi requires g >= 0")
    kappa_sq = params.kappa0_sq
    if kappa_sq == 0.0 and np.any(g_arr == 0):
        raise ValueError("the Tatarskii spectrum diverges at g = 0")
    lp = reduced_inner_scale(params)
    out = KOLMOGOROV_PREFACTOR * params.cn2 * np.exp(-(g_arr * lp) ** 2) / (g_arr**2 + kappa_sq) ** _EXPONENT
    if np.ndim(g) == 0:
        return float(out)
    return out


def force_spectral_tensor(g_vec, omega0: float, params: TurbulenceParams) -> np.ndarray:
    """Spectral tensor ``omega0**2 g_a g_b psi(|g|)`` of the random force.

    Parameters
    ----------
    g_vec : array_like, shape (..., 2)
        Transverse wavevector(s), m^-1.
    omega0 : float
        Carrier angular frequency, rad/s.  In the path-length convention
        used elsewhere in the package pass ``q0`` instead.
    params : TurbulenceParams

    Returns
    -------
    ndarray, shape (..., 2, 2)
        Symmetric, rank <= 1, positive semidefinite.
    """
    if not (omega0 > 0 and math.isfinite(omega0)):
        raise ValueError("omega0 must be finite and > 0")
    gv = np.asarray(g_vec, dtype=float)
    if gv.shape[-1] != 2 or not np.all(np.isfinite(gv)):
        raise ValueError("g_vec must be a finite 2-vector (or stack of them)")
    gmag = np.hypot(gv[..., 0], gv[..., 1])
    psi = spectrum_psi(gmag, params)
    outer = gv[..., :, None] * gv[..., None, :]  # formed first so the result is exactly symmetric
    return omega0**2 * np.asarray(psi)[..., None, None] * outer


def spectral_moment(n: float, params: TurbulenceParams) -> float:
    """Radial moment ``J_n = integral_0^inf g**n psi(g) dg``.

    With ``x = g**2`` the integral becomes a Laplace transform with a
    power-law weight, giving

        J_n = 0.033 cn2 / 2 * Gamma(s) * kappa**(2(s - 11/6)) * U(s, s - 5/6, l'^2 kappa^2)

    where ``s = (n + 1)/2``, ``l' = l0/2pi`` and ``U`` is Tricomi's function.
    For ``kappa = 0`` (Tatarskii) this reduces to
    ``0.033 cn2 / 2 * Gamma(s - 11/6) * l'**(11/3 - 2s)``, which requires
    ``n > 8/3``.
    """
    s = 0.5 * (n + 1.0)
    lp = reduced_inner_scale(params)
    pref = 0.5 * KOLMOGOROV_PREFACTOR * params.cn2
    if params.cn2 == 0.0:
        return 0.0
    kappa_sq = params.kappa0_sq
    if kappa_sq == 0.0:
        if s - _EXPONENT <= 0:
            raise ValueError(f"moment J_{n} diverges for the Tatarskii spectrum")
        return pref * math.gamma(s - _EXPONENT) * lp ** (2 * _EXPONENT - 2 * s)
    if s <= 0:
        raise ValueError(f"moment J_{n} diverges at g -> 0")
    a = lp * lp * kappa_sq
    return pref * math.gamma(s) * kappa_sq ** (s - _EXPONENT) * float(special.hyperu(s, s - _EXPONENT + 1.0, a))
