"""Gaussian Shell-model source with an optional phase diffuser.

A coherent Gaussian beam of radius ``r0`` has the transverse field
``exp(-r**2 / r0**2)``.  A phase diffuser multiplies it by a random tilt
``exp(-i a . r)`` whose components are Gaussian with variance
``lambda**-2``.  For a detector much slower than the diffuser only the
tilt-averaged quantities matter, and the averaging can be carried out in
closed form.  It leaves the conjugate (intensity-Fourier) width untouched
and widens the momentum distribution, which is summarised by the effective
radius ``r1 <= r0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BeamParams",
    "effective_radius",
    "initial_phase_density",
    "source_correlation",
    "diffuser_for_ratio",
]


def effective_radius(r0: float, lambda_diffuser: float) -> float:
    """Effective momentum-space radius ``r1`` after diffuser averaging.

    ``r1**2 = r0**2 / (1 + 2 r0**2 / lambda**2)``; ``lambda = inf`` gives the
    coherent beam, ``r1 = r0``.

    Raises
    ------
    ValueError
        If ``r0`` or ``lambda_diffuser`` is not strictly positive.
    """
    if not (r0 > 0 and math.isfinite(r0)):
        raise ValueError(f"r0 must be finite and > 0, got {r0!r}")
    if math.isnan(lambda_diffuser) or lambda_diffuser <= 0:
        raise ValueError(f"lambda_diffuser must be > 0 or inf, got {lambda_diffuser!r}")
    if math.isinf(lambda_diffuser):
        return float(r0)
    return r0 / math.sqrt(1.0 + 2.0 * (r0 / lambda_diffuser) ** 2)


def diffuser_for_ratio(r0: float, ratio: float) -> float:
    """Diffuser parameter giving ``r1**2 / r0**2 = ratio`` (0 < ratio <= 1)."""
    if not 0 < ratio <= 1:
        raise ValueError("ratio must lie in (0, 1]")
    if ratio == 1:
        return math.inf
    return r0 * math.sqrt(2.0 * ratio / (1.0 - ratio))


@dataclass(frozen=True)
class BeamParams:
    """Source description.

    Parameters
    ----------
    r0 : float
        Initial beam radius, m.
    q0 : float
        Central wavenumber, m^-1.
    lambda_diffuser : float
        Diffuser correlation parameter, m.  ``math.inf`` means no diffuser.

    Attributes
    ----------
    r1 : float
        Effective radius derived from ``r0`` and ``lambda_diffuser``.
    """

    r0: float
    q0: float
    lambda_diffuser: float = math.inf
    r1: float = field(init=False)

    def __post_init__(self) -> None:
        if not (self.q0 > 0 and math.isfinite(self.q0)):
            raise ValueError(f"q0 must be finite and > 0, got {self.q0!r}")
        object.__setattr__(self, "r1", effective_radius(self.r0, self.lambda_diffuser))

    @property
    def coherent(self) -> bool:
        return math.isinf(self.lambda_diffuser)


def initial_phase_density(k, q, params: BeamParams):
    """Tilt-averaged initial phase-space density, normalised to 1 at the peak.

    ``exp(-|q|**2 r1**2 / 2 - |k|**2 r0**2 / 8)``; the constant prefactor
    (which carries ``r1**2``) is dropped because every consumer forms ratios.

    Parameters
    ----------
    k, q : array_like, shape (..., 2)
        Intensity-Fourier variable and photon momentum, m^-1.
    """
    k = np.asarray(k, dtype=float)
    q = np.asarray(q, dtype=float)
    k2 = np.sum(k * k, axis=-1)
    q2 = np.sum(q * q, axis=-1)
    out = np.exp(-0.5 * q2 * params.r1**2 - 0.125 * k2 * params.r0**2)
    return float(out) if out.ndim == 0 else out


def source_correlation(r_perp, delta, params: BeamParams):
    """Field correlation ``<E(r) E(r + delta)>`` at the source plane, ``E0 = 1``.

    The two Gaussian-beam factors ``exp(-(r**2 + (r + delta)**2) / r0**2)``
    are multiplied by the diffuser's coherence factor
    ``exp(-delta**2 / lambda**2)``.
    """
    r = np.asarray(r_perp, dtype=float)
    d = np.asarray(delta, dtype=float)
    r2 = np.sum(r * r, axis=-1)
    rd2 = np.sum((r + d) ** 2, axis=-1)
    d2 = np.sum(d * d, axis=-1)
    coherence = 0.0 if params.coherent else 1.0 / params.lambda_diffuser**2
    out = np.exp(-(r2 + rd2) / params.r0**2 - d2 * coherence)
    return float(out) if out.ndim == 0 else out
