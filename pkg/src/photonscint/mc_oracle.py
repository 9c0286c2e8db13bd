"""Monte-Carlo trajectory oracle.

This path shares no quadrature with the analytic kernels.  Photons are
pushed with the ray equations through random index fields built slab by
slab, and the functionals are averaged over the resulting trajectories.

Field model
-----------
The atmosphere is a stack of independent slabs of thickness ``dz``.  A
slab's effect on a photon is the kick ``K(r) = grad Phi(r)`` with
``Phi = q0 * integral_slab n dz``.  When ``dz`` is much larger than the
correlation length, ``Phi`` is a two-dimensional Gaussian field with
spectral density ``2 pi dz q0**2 psi(g)``.  The longitudinal
delta-correlation of the analytic treatment is therefore built in, not
approximated.

``Phi`` lives on an odd ``n x n`` Fourier grid of spacing ``dx``.  Its
frequencies ``2 pi m / (n dx)`` run over ``|m| <= (n-1)/2``, so every mode
has its Hermitian partner and no Nyquist term exists.  That keeps the field
exactly real at arbitrary off-grid points.  Near the origin the
mode variances use exact cell integrals of ``g**2 psi``, not point samples.
The central cell is refined by rings of subharmonics at scales
``dg / 3**l``.  The last central cell's variance is added as a spatially
uniform kick, which is the ``g -> 0`` limit of those modes.  The kick
variance is therefore exact despite the ``g**(-2/3)`` singularity of the
Tatarskii force spectrum.

Randomness is counter based: the normals for lane ``i`` and slab pair ``j``
come from a Philox stream with ``counter = (0, 0, i, j)`` under the run
seed.  A realization therefore does not depend on how lanes are batched.

Integration
-----------
Photons move in path length with ``dr/dz = q/q0``.  Each slab is crossed
with ``ceil(dz/step)`` drift-kick-drift substeps, and each substep applies
the fraction ``step/dz`` of the slab kick at the photon's current position.
With zero field this is exact free flight, and it is time reversible.
Photons leaving the grid wrap periodically, which is harmless because the
statistics are homogeneous.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import integrate as sp_integrate
from scipy import ndimage

from .beam_source import BeamParams
from .trajectory_kernel import PhasePoint
from .turbulence import TurbulenceParams, spectrum_psi

__all__ = [
    "GridSpec",
    "GridConfigurationError",
    "FieldRealization",
    "FieldSequence",
    "TrajectoryEnsemble",
    "PhiEstimate",
    "synthesize_field",
    "launch_ensemble",
    "propagate",
    "momentum_spread",
    "estimate_phi_pair",
    "estimate_phi_pairs",
    "dump_ensemble",
    "dump_realization",
]

#: refinement of the synthesis grid before cubic-spline interpolation of kicks
SPLINE_UPSAMPLE = 3  # odd, so the padded grid stays centred


class GridConfigurationError(ValueError):
    """The synthesis grid does not resolve the turbulence scales."""


@dataclass(frozen=True)
class GridSpec:
    """Transverse grid and slab geometry.

    Parameters
    ----------
    spacing : float
        Grid spacing, m.
    n : int
        Nodes per side; must be odd.
    slab_thickness : float
        Longitudinal thickness of one independent slab, m.
    subharmonic_levels : int
        Number of three-fold refinements of the central Fourier cell.
    exact_cells : int
        Fourier cells with ``max(|m|, |n|) <= exact_cells`` use integrated
        rather than point-sampled variances.
    """

    spacing: float
    n: int
    slab_thickness: float
    subharmonic_levels: int = 8
    exact_cells: int = 3

    def __post_init__(self) -> None:
        if not self.spacing > 0 or not self.slab_thickness > 0:
            raise GridConfigurationError("spacing and slab_thickness must be > 0")
        if int(self.n) != self.n or self.n < 3 or self.n % 2 == 0:
            raise GridConfigurationError("n must be an odd integer >= 3")
        if self.subharmonic_levels < 0 or self.exact_cells < 0:
            raise GridConfigurationError("subharmonic_levels and exact_cells must be >= 0")

    @property
    def extent(self) -> float:
        return self.n * self.spacing

    @property
    def dg(self) -> float:
        return 2.0 * math.pi / self.extent

    @classmethod
    def for_turbulence(cls, turb: TurbulenceParams, *, spacing_fraction: float = 0.25,
                       extent_factor: float = 50.0, slab_thickness: float | None = None,
                       **kwargs) -> "GridSpec":
        """Smallest odd grid with ``spacing = spacing_fraction * l0`` and ``extent >= extent_factor * l0``.

        The slab thickness defaults to ``5 l0``.
        """
        dx = spacing_fraction * turb.l0
        n = int(math.ceil(extent_factor * turb.l0 / dx - 1e-9))
        n += 1 - n % 2
        dz = 5.0 * turb.l0 if slab_thickness is None else slab_thickness
        return cls(spacing=dx, n=n, slab_thickness=dz, **kwargs)

    def validate(self, turb: TurbulenceParams) -> None:
        """Raise :class:`GridConfigurationError` unless spacing <= l0/4 and extent >= 50 l0."""
        tol = 1e-9
        if self.spacing > turb.l0 / 4.0 * (1 + tol):
            raise GridConfigurationError(
                f"grid spacing {self.spacing:g} m exceeds l0/4 = {turb.l0 / 4:g} m")
        if self.extent < 50.0 * turb.l0 * (1 - tol):
            raise GridConfigurationError(
                f"grid extent {self.extent:g} m is below 50 l0 = {50 * turb.l0:g} m")

    def frequencies(self) -> np.ndarray:
        half = (self.n - 1) // 2
        return self.dg * np.arange(-half, half + 1)


# ---------------------------------------------------------------------------
# Spectral weights
# ---------------------------------------------------------------------------


def _unit_turb(turb: TurbulenceParams) -> TurbulenceParams:
    return turb.with_cn2(1.0)


@functools.lru_cache(maxsize=256)
def _cell_integral(cx: float, cy: float, half: float, turb: TurbulenceParams) -> float:
    """``integral g**2 psi d^2g`` over the square cell of half-width ``half`` centred at (cx, cy)."""
    if cx == 0.0 and cy == 0.0:
        def radial(theta):
            gmax = half / math.cos(theta)
            val, _ = sp_integrate.quad(lambda g: g**3 * spectrum_psi(g, turb), 0.0, gmax, limit=200,
                                       epsabs=0.0, epsrel=1e-11)
            return val
        val, _ = sp_integrate.quad(radial, 0.0, math.pi / 4, epsabs=0.0, epsrel=1e-10)
        return 8.0 * val

    def f(x):
        g2 = x[:, 0] ** 2 + x[:, 1] ** 2
        return g2 * spectrum_psi(np.sqrt(g2), turb)

    res = sp_integrate.cubature(f, [cx - half, cy - half], [cx + half, cy + half], rtol=1e-10, atol=0.0)
    return float(res.estimate)


@dataclass(frozen=True)
class _Spectrum:
    """Variances of the potential's Fourier and subharmonic modes for cn2 = 1 and unit q0**2 dz."""

    grid_var: np.ndarray        # (n, n) variances of the centred-index Fourier coefficients
    sub_vectors: np.ndarray     # (S, 2) one wavevector per Hermitian pair
    sub_var: np.ndarray         # (S,)
    uniform_var: float          # per-component variance of the uniform kick


@functools.lru_cache(maxsize=32)
def _spectrum(grid: GridSpec, turb_unit: TurbulenceParams) -> _Spectrum:
    freqs = grid.frequencies()
    gx, gy = np.meshgrid(freqs, freqs, indexing="ij")
    g = np.hypot(gx, gy)
    dg = grid.dg
    two_pi = 2.0 * math.pi
    var = np.zeros_like(g)
    nz = g > 0
    var[nz] = two_pi * spectrum_psi(g[nz], turb_unit) * dg * dg
    half = (grid.n - 1) // 2
    e = min(grid.exact_cells, half)
    for i in range(-e, e + 1):
        for j in range(-e, e + 1):
            if i == 0 and j == 0:
                continue
            w = _cell_integral(i * dg, j * dg, dg / 2, turb_unit)
            var[half + i, half + j] = two_pi * w / ((i * dg) ** 2 + (j * dg) ** 2)
    var[half, half] = 0.0

    vecs, svar = [], []
    b = dg
    for _ in range(grid.subharmonic_levels):
        b = b / 3.0
        for (i, j) in ((1, 0), (0, 1), (1, 1), (-1, 1)):
            w = _cell_integral(abs(i) * b, abs(j) * b, b / 2, turb_unit)
            vecs.append((i * b, j * b))
            svar.append(two_pi * w / ((i * b) ** 2 + (j * b) ** 2))
    centre = _cell_integral(0.0, 0.0, b / 2, turb_unit)
    return _Spectrum(var, np.array(vecs, dtype=float).reshape(-1, 2), np.array(svar, dtype=float),
                     0.5 * two_pi * centre)


# ---------------------------------------------------------------------------
# Realizations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldRealization:
    """Kick field of one slab for a batch of independent lanes.

    Attributes
    ----------
    grid : GridSpec
    seed : int
    slab_index : int
    lanes : tuple of int
        Global lane indices of the batch.
    coefficients : ndarray, complex, shape (L, n, n)
        Hermitian Fourier coefficients of the kick potential, centred index
        order (``coefficients[:, half + m, half + k]`` multiplies
        ``exp(i (g_m x + g_k y))``).
    sub_vectors : ndarray, shape (S, 2)
    sub_coefficients : ndarray, complex, shape (L, S)
        One coefficient per Hermitian subharmonic pair; the pair contributes
        ``2 Re(c exp(i g . r))``.
    uniform_kick : ndarray, shape (L, 2)
    """

    grid: GridSpec
    seed: int
    slab_index: int
    lanes: tuple
    coefficients: np.ndarray
    sub_vectors: np.ndarray
    sub_coefficients: np.ndarray
    uniform_kick: np.ndarray

    def kick(self, points: np.ndarray, method: str = "auto") -> np.ndarray:
        """Slab kick at ``points`` of shape (L, P, 2); returns (L, P, 2).

        ``method="direct"`` sums the Fourier series exactly.
        ``method="spline"`` transforms to the grid and interpolates with
        periodic cubic splines, which is cheaper for many points per lane.
        ``"auto"`` picks direct for up to 96 points per lane.
        """
        pts = np.asarray(points, dtype=float)
        if method == "auto":
            method = "direct" if pts.shape[1] <= 96 else "spline"
        if method == "direct":
            out = self._direct(pts)
        elif method == "spline":
            out = self._spline(pts)
        else:
            raise ValueError(f"unknown kick evaluation method {method!r}")
        return out + self._low_modes(pts)

    def _direct(self, pts):
        freqs = self.grid.frequencies()
        ex = np.exp(1j * pts[..., 0:1] * freqs)  # (L, P, n)
        ey = np.exp(1j * pts[..., 1:2] * freqs)
        c = self.coefficients
        t_plain = np.matmul(c, np.swapaxes(ey, 1, 2))                 # (L, n_x, P)
        t_grad = np.matmul(c * (1j * freqs), np.swapaxes(ey, 1, 2))   # d/dy
        exT = np.swapaxes(ex, 1, 2)                                    # (L, n_x, P)
        kx = np.sum((1j * freqs)[None, :, None] * exT * t_plain, axis=1).real
        ky = np.sum(exT * t_grad, axis=1).real
        return np.stack([kx, ky], axis=-1)

    def grid_kicks(self, upsample: int = 1) -> np.ndarray:
        """Kicks of the Fourier part on nodes ``x_j = j * spacing / upsample``.

        Returns an array of shape (L, m, m, 2) with ``m = n * upsample``.  Upsampling
        zero-pads the spectrum, so the finer grid carries the same band-limited field.
        """
        if upsample < 1 or upsample % 2 == 0:
            raise ValueError(f"upsample must be a positive odd integer, got {upsample}")
        freqs = self.grid.frequencies()
        n = self.grid.n
        m = n * upsample
        pad = (m - n) // 2
        c = np.pad(self.coefficients, ((0, 0), (pad, m - n - pad), (pad, m - n - pad)))
        g = np.pad(freqs, (pad, m - n - pad))
        c = np.fft.ifftshift(c, axes=(1, 2))
        g = np.fft.ifftshift(g)
        kx = np.fft.ifft2(c * (1j * g)[None, :, None], axes=(1, 2)).real * m * m
        ky = np.fft.ifft2(c * (1j * g)[None, None, :], axes=(1, 2)).real * m * m
        return np.stack([kx, ky], axis=-1)

    def _spline(self, pts):
        grid = self.grid_kicks(SPLINE_UPSAMPLE)
        coords = pts * (SPLINE_UPSAMPLE / self.grid.spacing)
        out = np.empty_like(pts)
        for lane in range(pts.shape[0]):
            for comp in range(2):
                out[lane, :, comp] = ndimage.map_coordinates(
                    grid[lane, :, :, comp], coords[lane].T, order=3, mode="grid-wrap")
        return out

    def _low_modes(self, pts):
        if self.sub_vectors.size == 0:
            return np.broadcast_to(self.uniform_kick[:, None, :], pts.shape).copy()
        phase = np.exp(1j * pts @ self.sub_vectors.T)          # (L, P, S)
        amp = 2.0 * 1j * self.sub_coefficients[:, None, :] * phase  # gradient of 2 Re(c e^{igr})
        k = np.einsum("lps,sd->lpd", amp, self.sub_vectors).real
        return k + self.uniform_kick[:, None, :]

    def full_grid_kicks(self) -> np.ndarray:
        """Kicks of all components at the grid nodes; shape (L, n, n, 2)."""
        n = self.grid.n
        x = self.grid.spacing * np.arange(n)
        X, Y = np.meshgrid(x, x, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
        pts = np.broadcast_to(pts, (len(self.lanes),) + pts.shape)
        low = self._low_modes(pts).reshape(len(self.lanes), n, n, 2)
        return self.grid_kicks() + low


class FieldSequence:
    """Lazily generated independent slab realizations for a batch of lanes.

    Slab ``j`` of lane ``i`` is fully determined by ``(seed, i, j)``.
    """

    def __init__(self, turb: TurbulenceParams, beam: BeamParams, grid: GridSpec, seed: int,
                 lanes: Sequence[int], *, validate: bool = True):
        if validate:
            grid.validate(turb)
        self.turb, self.beam, self.grid = turb, beam, grid
        self.seed = int(seed)
        self.lanes = tuple(int(x) for x in lanes)
        self._cache: dict[int, tuple[FieldRealization, FieldRealization]] = {}
        scale = turb.cn2 * beam.q0**2 * grid.slab_thickness
        self._zero = turb.cn2 == 0.0
        spec = _spectrum(grid, _unit_turb(turb))
        self._std = np.sqrt(scale * spec.grid_var)
        self._sub_std = np.sqrt(scale * spec.sub_var / 2.0)
        self._uniform_std = math.sqrt(scale * spec.uniform_var)
        self._sub_vectors = spec.sub_vectors

    def __getitem__(self, slab: int) -> FieldRealization:
        pair, which = divmod(int(slab), 2)
        if pair not in self._cache:
            self._cache.clear()
            self._cache[pair] = self._make_pair(pair)
        return self._cache[pair][which]

    def _make_pair(self, pair: int):
        n = self.grid.n
        L = len(self.lanes)
        S = self._sub_vectors.shape[0]
        a = np.empty((L, n, n), dtype=complex)
        sub = np.empty((2, L, S), dtype=complex)
        uni = np.empty((2, L, 2))
        for idx, lane in enumerate(self.lanes):
            rng = np.random.Generator(np.random.Philox(key=self.seed, counter=[0, 0, lane, pair]))
            w = rng.standard_normal((2, n, n))
            a[idx] = (w[0] + 1j * w[1]) / math.sqrt(2.0)
            rng2 = np.random.Generator(np.random.Philox(key=self.seed, counter=[0, 1, lane, pair]))
            ws = rng2.standard_normal((2, 2, S))
            sub[:, idx] = ws[:, 0] + 1j * ws[:, 1]
            uni[:, idx] = rng2.standard_normal((2, 2))
        flipped = np.conj(a[:, ::-1, ::-1])
        h1 = (a + flipped) / math.sqrt(2.0)
        h2 = (a - flipped) / (1j * math.sqrt(2.0))
        out = []
        for k, h in enumerate((h1, h2)):
            coeff = h * self._std if not self._zero else np.zeros_like(h)
            out.append(FieldRealization(
                grid=self.grid, seed=self.seed, slab_index=2 * pair + k, lanes=self.lanes,
                coefficients=coeff,
                sub_vectors=self._sub_vectors,
                sub_coefficients=sub[k] * self._sub_std,
                uniform_kick=uni[k] * self._uniform_std,
            ))
        return tuple(out)


def synthesize_field(turb: TurbulenceParams, grid: GridSpec, seed: int, *, beam: BeamParams | None = None,
                     slab_index: int = 0, lanes: Sequence[int] = (0,)) -> FieldRealization:
    """One slab realization (for each requested lane).

    ``beam`` supplies ``q0``; without it ``q0 = 1`` and the kicks are in
    units of the index gradient integrated over the slab.

    Raises
    ------
    GridConfigurationError
        If the grid spacing exceeds ``l0/4`` or the extent is below ``50 l0``.
    """
    beam = beam or BeamParams(r0=1.0, q0=1.0)
    return FieldSequence(turb, beam, grid, seed, lanes)[slab_index]


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryEnsemble:
    """Photon positions and momenta for ``L`` lanes of ``P`` photons.

    Attributes
    ----------
    r, q : ndarray, shape (L, P, 2)
        Current positions (m) and transverse momenta (m^-1).
    r_start, q_start : ndarray, shape (L, P, 2)
        Values at launch.
    z : float
        Path length travelled.
    step : float
        Substep length used by the last propagation (``nan`` before any).
    lanes : tuple of int
    history : list of (z, r, q)
        Filled when propagating with ``record=True``.
    """

    r: np.ndarray
    q: np.ndarray
    r_start: np.ndarray
    q_start: np.ndarray
    z: float = 0.0
    step: float = math.nan
    lanes: tuple = ()
    history: list = field(default_factory=list)

    @property
    def dq(self) -> np.ndarray:
        return self.q - self.q_start


def launch_ensemble(beam: BeamParams, lanes: int | Sequence[int], photons_per_lane: int, seed: int, *,
                    spread: float | None = None) -> TrajectoryEnsemble:
    """Sample launch states.

    Momenta follow the source density ``exp(-q**2 r1**2 / 2)`` (standard
    deviation ``1/r1`` per component).  Positions follow the intensity
    profile ``exp(-2 r**2 / r0**2)`` or, with ``spread`` given, are uniform
    over ``[0, spread)**2``.  Spreading photons over the field lowers the
    correlation between photons of one lane.
    """
    lane_ids = tuple(range(lanes)) if isinstance(lanes, int) else tuple(int(x) for x in lanes)
    L, P = len(lane_ids), int(photons_per_lane)
    r = np.empty((L, P, 2))
    q = np.empty((L, P, 2))
    for idx, lane in enumerate(lane_ids):
        rng = np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 2, lane, 0]))
        q[idx] = rng.standard_normal((P, 2)) / beam.r1
        if spread is None:
            r[idx] = rng.standard_normal((P, 2)) * (beam.r0 / 2.0)
        else:
            r[idx] = rng.random((P, 2)) * spread
    return TrajectoryEnsemble(r=r, q=q, r_start=r.copy(), q_start=q.copy(), lanes=lane_ids)


def propagate(ensemble: TrajectoryEnsemble, fields: FieldSequence | None, z_final: float, *,
              step: float | None = None, record: bool = False, kick_method: str = "auto",
              check_step: bool = True, beam: BeamParams | None = None) -> TrajectoryEnsemble:
    """Advance an ensemble to ``z_final`` through successive slabs.

    Parameters
    ----------
    ensemble : TrajectoryEnsemble
        Must sit on a slab boundary (``z`` a multiple of the slab thickness).
    fields : FieldSequence or None
        ``None`` means free propagation, which then needs ``beam`` for ``q0``.
    z_final : float
    step : float, optional
        Substep length; defaults to one substep per slab.  With
        ``check_step`` the transverse displacement per substep must not
        exceed ``l0 / 4``.
    record : bool
        Append ``(z, r, q)`` after every slab to ``history``.

    Returns
    -------
    TrajectoryEnsemble
        A new ensemble; the input is not modified.
    """
    if z_final < ensemble.z:
        raise ValueError("z_final must not be behind the ensemble")
    out = replace(ensemble, r=ensemble.r.copy(), q=ensemble.q.copy(), history=list(ensemble.history))
    if fields is None and beam is None:
        raise ValueError("free propagation needs beam for q0")
    q0 = fields.beam.q0 if fields is not None else beam.q0
    dz = fields.grid.slab_thickness if fields is not None else (z_final - ensemble.z) or 1.0
    step = dz if step is None else float(step)
    if step <= 0:
        raise ValueError("step must be > 0")
    n_sub = max(1, int(math.ceil(dz / step - 1e-12)))
    h = dz / n_sub
    if fields is not None and check_step:
        vmax = float(np.max(np.abs(out.q))) / q0 if out.q.size else 0.0
        if vmax * h > fields.turb.l0 / 4.0:
            raise GridConfigurationError(
                f"transverse displacement per step {vmax * h:g} m exceeds l0/4; reduce the step")
    slab = int(round(out.z / dz))
    if fields is not None and abs(slab * dz - out.z) > 1e-9 * max(dz, out.z):
        raise ValueError("ensemble is not on a slab boundary")
    while out.z < z_final - 1e-12 * max(1.0, z_final):
        frac = min(1.0, (z_final - out.z) / dz)
        field_j = fields[slab] if fields is not None else None
        hh = h * frac
        for _ in range(n_sub):
            out.r += out.q * (0.5 * hh / q0)
            if field_j is not None:
                out.q += field_j.kick(out.r, kick_method) * (hh / dz)
            out.r += out.q * (0.5 * hh / q0)
        out.z += dz * frac
        slab += 1
        if record:
            out.history.append((out.z, out.r.copy(), out.q.copy()))
    out.step = h
    return out


def momentum_spread(ensemble: TrajectoryEnsemble) -> tuple[float, float]:
    """Mean ``|q - q_start|**2`` and its standard error from lane means."""
    per_lane = np.mean(np.sum(ensemble.dq**2, axis=-1), axis=1)
    L = per_lane.size
    se = float(np.std(per_lane, ddof=1) / math.sqrt(L)) if L > 1 else math.inf
    return float(np.mean(per_lane)), se


# ---------------------------------------------------------------------------
# Pair functional estimator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhiEstimate:
    estimate: float
    standard_error: float
    lanes: int


def estimate_phi_pairs(pairs: Sequence[tuple[PhasePoint, PhasePoint]], z: float, turb: TurbulenceParams,
                       beam: BeamParams, grid: GridSpec, *, lanes: int, seed: int,
                       detectors_per_lane: int = 1, batch: int = 64, kick_method: str = "auto",
                       validate: bool = True) -> list[PhiEstimate]:
    """Sample estimates of the pair functional for several ``(P, P')`` at once.

    Trajectories are traced backwards from detector points placed uniformly
    at random over the field, one per distinct ``q``.  Along each one the
    estimator accumulates ``S0 = sum K`` and ``S1 = sum z' K`` over slabs,
    so that ``X = p . S0 + k . S1 / q0`` is available for any ``(p, k)``.
    The functional is ``<X Y>``.  The error is the standard error of lane
    means, because trajectories within a lane share a realization.
    """
    if z < 0:
        raise ValueError("z must be >= 0")
    if turb.cn2 == 0.0 or z == 0.0:
        return [PhiEstimate(0.0, 0.0, lanes) for _ in pairs]
    q0 = beam.q0
    qs: list[tuple] = []
    for P, Pp in pairs:
        for pt in (P, Pp):
            key = tuple(pt.q)
            if key not in qs:
                qs.append(key)
    qarr = np.array(qs, dtype=float)               # (Nq, 2)
    Nq, D = len(qs), int(detectors_per_lane)
    dz = grid.slab_thickness
    n_slabs = int(math.ceil(z / dz - 1e-12))
    lane_values = np.empty((lanes, len(pairs)))
    for start in range(0, lanes, batch):
        ids = list(range(start, min(lanes, start + batch)))
        fields = FieldSequence(turb, beam, grid, seed, ids, validate=validate)
        L = len(ids)
        det = np.empty((L, D, 2))
        for idx, lane in enumerate(ids):
            rng = np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 3, lane, 0]))
            det[idx] = rng.random((D, 2)) * grid.extent
        R = np.repeat(det, Nq, axis=1)                              # (L, D*Nq, 2)
        Q = np.tile(qarr, (L, D, 1))
        S0 = np.zeros_like(R)
        S1 = np.zeros_like(R)
        s = 0.0
        for j in range(n_slabs):
            h = min(dz, z - s)
            R -= Q * (0.5 * h / q0)
            K = fields[j].kick(R, kick_method) * (h / dz)
            zp = z - (s + 0.5 * h)
            S0 += K
            S1 += zp * K
            Q -= K
            R -= Q * (0.5 * h / q0)
            s += h
        S0 = S0.reshape(L, D, Nq, 2)
        S1 = S1.reshape(L, D, Nq, 2)
        for c, (P, Pp) in enumerate(pairs):
            i = qs.index(tuple(P.q))
            ip = qs.index(tuple(Pp.q))
            X = S0[:, :, i] @ P.p + (S1[:, :, i] @ P.k) / q0
            Y = S0[:, :, ip] @ Pp.p + (S1[:, :, ip] @ Pp.k) / q0
            lane_values[start:start + L, c] = np.mean(X * Y, axis=1)
    out = []
    for c in range(len(pairs)):
        v = lane_values[:, c]
        se = float(np.std(v, ddof=1) / math.sqrt(lanes)) if lanes > 1 else math.inf
        out.append(PhiEstimate(float(np.mean(v)), se, lanes))
    return out


def estimate_phi_pair(P: PhasePoint, Pp: PhasePoint, z: float, turb: TurbulenceParams, beam: BeamParams,
                      grid: GridSpec, **kwargs) -> PhiEstimate:
    """Single-pair convenience wrapper around :func:`estimate_phi_pairs`."""
    return estimate_phi_pairs([(P, Pp)], z, turb, beam, grid, **kwargs)[0]


# ---------------------------------------------------------------------------
# Dumps
# ---------------------------------------------------------------------------


def dump_ensemble(ensemble: TrajectoryEnsemble, path) -> None:
    """Write ``lane photon z x y qx qy`` rows (launch, then every recorded slab)."""
    rows = []
    snaps = [(0.0, ensemble.r_start, ensemble.q_start)] + list(ensemble.history)
    if not ensemble.history:
        snaps.append((ensemble.z, ensemble.r, ensemble.q))
    for zz, r, q in snaps:
        L, P, _ = r.shape
        lane = np.repeat(np.array(ensemble.lanes or range(L)), P)
        phot = np.tile(np.arange(P), L)
        rows.append(np.column_stack([lane, phot, np.full(L * P, zz), r.reshape(-1, 2), q.reshape(-1, 2)]))
    np.savetxt(path, np.vstack(rows), fmt=["%d", "%d", "%.17g", "%.17g", "%.17g", "%.17g", "%.17g"],
               header="lane photon z_m x_m y_m qx_m-1 qy_m-1")


def dump_realization(realization: FieldRealization, path) -> None:
    """Write ``lane m k re im`` rows of the Fourier coefficients."""
    L, n, _ = realization.coefficients.shape
    half = (n - 1) // 2
    m, k = np.meshgrid(np.arange(-half, half + 1), np.arange(-half, half + 1), indexing="ij")
    rows = []
    for idx, lane in enumerate(realization.lanes):
        c = realization.coefficients[idx]
        rows.append(np.column_stack([np.full(n * n, lane), m.ravel(), k.ravel(), c.real.ravel(), c.imag.ravel()]))
    np.savetxt(path, np.vstack(rows), fmt=["%d", "%d", "%d", "%.17g", "%.17g"], header="lane m k re im")
