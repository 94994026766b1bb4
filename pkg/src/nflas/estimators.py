"""Position estimators: NF-MUSIC, direct ML positioning, TDOA and RIS-aided NLOS.

The ML estimators share one search strategy.  A coarse grid is scanned with a
relaxed objective that is smooth at the grid scale (independent gains per
BS, or per RIS subarray), a local fine grid then scans the exact concentrated
likelihood around the best coarse cell, and Nelder-Mead polishes the result.
Coherent likelihoods oscillate on a sub-wavelength scale, so scanning them
directly on a 10 cm grid would miss the main lobe.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ._parallel import map_chunks
from .beamforming import GainField
from .channel import OfdmGrid, check_mask, element_response
from .fisher import DmimoScenario
from .geometry import SPEED_OF_LIGHT, ArrayGeometry, Region2D, as_position


class NumericalError(RuntimeError):
    """Estimator failure caused by the data (zero signal, singular least squares)."""


# Subspace methods -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SampleCovariance:
    matrix: np.ndarray
    n_snapshots: int

    def __post_init__(self):
        R = np.asarray(self.matrix, dtype=complex)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError("covariance must be square")
        scale = max(np.max(np.abs(R)), 1e-300)
        if np.max(np.abs(R - R.conj().T)) > 1e-9 * scale:
            raise ValueError("covariance must be Hermitian")
        if self.n_snapshots < 1:
            raise ValueError("need at least one snapshot")
        object.__setattr__(self, "matrix", R)


def sample_covariance(snapshots) -> SampleCovariance:
    """``(1/K) sum_k y_k y_k^H`` for snapshots stacked as rows (K, M)."""
    Y = np.asarray(snapshots, dtype=complex)
    if Y.size == 0:
        raise ValueError("need at least one snapshot")
    Y = np.atleast_2d(Y)
    R = Y.T @ Y.conj() / Y.shape[0]
    return SampleCovariance(0.5 * (R + R.conj().T), Y.shape[0])


def nf_music_spectrum(cov: SampleCovariance, array: ArrayGeometry, region: Region2D,
                      frequency: float, n_sources: int, amplitude: str = "free_space") -> GainField:
    """MUSIC pseudo-spectrum ``1 / ||E_n^H a(x)||^2`` over positions.

    ``a(x)`` is the spherical-wave steering vector normalized to unit norm.
    The noise-subspace projection is evaluated as ``1 - ||E_s^H a||^2``.
    """
    M = array.n_elements
    if cov.matrix.shape != (M, M):
        raise ValueError("covariance size does not match the array")
    if not 0 < n_sources < M:
        raise ValueError("need 0 < n_sources < number of elements")
    _, V = np.linalg.eigh(cov.matrix)
    Es = V[:, M - n_sources:]
    floor = 1e-14

    def chunk(points):
        a = element_response(array.distances(points), frequency, amplitude)[..., 0]
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        resid = 1.0 - np.sum(np.abs(a.conj() @ Es) ** 2, axis=1)
        return 1.0 / np.maximum(resid, floor)

    values = map_chunks(chunk, region.points(), chunk=2048)
    return GainField(region, values.reshape(region.shape))


# Direct ML positioning ------------------------------------------------------------

@dataclass(frozen=True)
class PositionEstimate:
    position: np.ndarray
    objective: float
    converged: bool
    iterations: int
    coarse_position: np.ndarray | None = None


def _nelder_mead(neg_objective, x0, step: float, xatol: float = 1e-6, maxiter: int = 400):
    x0 = np.asarray(x0, dtype=float)
    simplex = np.array([x0, x0 + [step, 0.0], x0 + [0.0, step]])
    return minimize(neg_objective, x0, method="Nelder-Mead",
                    options=dict(initial_simplex=simplex, xatol=xatol, fatol=1e-13,
                                 maxiter=maxiter))


def _split_blocks(observation, sizes) -> list[np.ndarray]:
    if isinstance(observation, (list, tuple)):
        blocks = [np.asarray(o, dtype=complex).ravel() for o in observation]
    else:
        flat = np.asarray(observation, dtype=complex).ravel()
        if flat.size != sum(sizes):
            raise ValueError(f"observation has {flat.size} entries, expected {sum(sizes)}")
        blocks = np.split(flat, np.cumsum(sizes)[:-1])
    if [b.size for b in blocks] != list(sizes):
        raise ValueError("observation blocks do not match the base-station arrays")
    return blocks


class DirectPositioner:
    """Grid-plus-simplex ML positioning for LOS D-MIMO / ELAA uplink.

    Nuisance gains are concentrated out in closed form: one least-squares gain
    per BS in noncoherent mode, one joint gain in coherent mode.  The coarse
    correlation bank depends only on geometry, so it is built once and reused
    across Monte-Carlo trials.
    """

    def __init__(self, scenario: DmimoScenario, grid: OfdmGrid, region: Region2D, *,
                 pilot=None, fine_step: float | None = None, fine_half_width: float | None = None,
                 cache_limit_mb: float = 512.0):
        self.arrays = scenario.bs_arrays
        self.mode = scenario.mode
        self.height = float(scenario.ue[2])
        self.freqs = grid.frequencies
        self.region = region
        n = grid.n_subcarriers
        self.pilot = (np.full(n, 1 / np.sqrt(n), dtype=complex) if pilot is None
                      else np.asarray(pilot, dtype=complex).reshape(-1))
        self.sizes = [a.n_elements * n for a in self.arrays]
        cell = max(region.dx, region.dy)
        self.fine_step = fine_step or min(cell / 2, SPEED_OF_LIGHT / grid.fc / 8)
        self.fine_half_width = fine_half_width or 3 * cell
        self._points = self._lift(region.points()[:, :2])
        bank_mb = len(self._points) * sum(self.sizes) * 8 / 1e6
        self._bank = self._build_bank(self._points) if bank_mb <= cache_limit_mb else None

    def _responses(self, points):
        """Per-BS steering (K, M_b*N) including the pilot."""
        out = []
        for array in self.arrays:
            d = array.distances(points)
            A = element_response(d, self.freqs, "free_space") * self.pilot
            out.append(A.reshape(len(points), -1))
        return out

    def _build_bank(self, points):
        def chunk(p):
            rows = []
            for A in self._responses(p):
                norm = np.sqrt(np.sum(np.abs(A) ** 2, axis=1, keepdims=True))
                rows.append((A.conj() / norm).astype(np.complex64))
            return np.concatenate(rows, axis=1)
        return map_chunks(chunk, points, chunk=1024)

    def _correlations(self, blocks, points):
        """Per-BS ``a_b^H y_b`` and ``||a_b||^2`` for candidate points."""
        cs, ns = [], []
        for A, y in zip(self._responses(points), blocks):
            norm = np.sum(np.abs(A) ** 2, axis=1)
            if np.any(norm == 0):
                raise NumericalError("zero steering norm in least-squares gain")
            cs.append(A.conj() @ y)
            ns.append(norm)
        return np.array(cs), np.array(ns)

    def gains(self, observation, point) -> np.ndarray:
        """Closed-form least-squares gains at ``point`` (one per BS, or one joint gain)."""
        blocks = _split_blocks(observation, self.sizes)
        c, n = self._correlations(blocks, self._lift(point))
        if self.mode == "coherent":
            return np.array([c.sum() / n.sum()])
        return c[:, 0] / n[:, 0]

    def steering(self, point) -> list[np.ndarray]:
        """Per-BS model vectors (without gain) at ``point``."""
        return [A[0] for A in self._responses(self._lift(point))]

    def objective(self, blocks, points, mode: str | None = None) -> np.ndarray:
        """Concentrated log-likelihood gain, normalized to [0, 1] by ``||y||^2``."""
        mode = mode or self.mode
        energy = sum(np.vdot(y, y).real for y in blocks)

        def chunk(p):
            c, n = self._correlations(blocks, self._lift(p))
            if mode == "coherent":
                return np.abs(c.sum(axis=0)) ** 2 / n.sum(axis=0)
            return np.sum(np.abs(c) ** 2 / n, axis=0)

        return map_chunks(chunk, np.asarray(points, dtype=float), chunk=1024) / energy

    def _lift(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.column_stack([p[:, 0], p[:, 1], np.full(len(p), self.height)])

    def _coarse(self, blocks):
        energy = sum(np.vdot(y, y).real for y in blocks)
        if energy == 0:
            raise NumericalError("observation carries no energy")
        if self._bank is None:
            return self.objective(blocks, self._points[:, :2], "noncoherent")
        y = np.concatenate(blocks).astype(np.complex64)
        out = np.zeros(len(self._points))
        start = 0
        for size in self.sizes:
            c = self._bank[:, start:start + size] @ y[start:start + size]
            out += np.abs(c.astype(complex)) ** 2
            start += size
        return out / energy

    def estimate(self, observation, refine: bool = True) -> PositionEstimate:
        blocks = _split_blocks(observation, self.sizes)
        energy = sum(np.vdot(y, y).real for y in blocks)
        coarse = self._coarse(blocks)
        best = self._points[int(np.argmax(coarse)), :2]
        local = self.region.around(best, self.fine_half_width, self.fine_step)
        pts = local.points()[:, :2]
        v = self.objective(blocks, pts)
        start = pts[int(np.argmax(v))]
        v0 = float(v.max())
        step = self.fine_step
        pos, value, converged, iters = start, v0, False, 0
        if refine:
            res = _nelder_mead(lambda p: -self.objective(blocks, p[None])[0], start, step / 2)
            iters = int(res.nit)
            if -res.fun >= v0:
                pos, value = res.x, float(-res.fun)
                spread = np.max(np.abs(res.final_simplex[0] - res.x))
                converged = bool(-res.fun > v0 and spread < 1e-4)
        residual = energy * (1.0 - value)
        return PositionEstimate(np.array([pos[0], pos[1], self.height]), float(residual),
                                converged, iters, np.array([best[0], best[1], self.height]))


def ml_direct_position(observation, scenario: DmimoScenario, grid: OfdmGrid, region: Region2D,
                       refine: bool = True, **kwargs) -> PositionEstimate:
    """One-shot direct ML position estimate; see :class:`DirectPositioner`."""
    return DirectPositioner(scenario, grid, region, cache_limit_mb=0, **kwargs).estimate(
        observation, refine)


# TDOA baseline --------------------------------------------------------------------

def tdoa_localize(delay_differences, bs_positions, weights=None, reference: int = 0,
                  ue_height: float = 0.0, x0=None, max_iter: int = 100,
                  tol: float = 1e-6) -> PositionEstimate:
    """Weighted Gauss-Newton on hyperbolic residuals, started at the BS centroid.

    ``delay_differences[i]`` is ``tau_j - tau_reference`` [s] for the i-th
    non-reference BS j, in BS order.  Divergence is reported through
    ``converged=False`` rather than raised.
    """
    bs = np.array([as_position(p) for p in bs_positions])
    if len(bs) < 3:
        raise ValueError("2D TDOA needs at least 3 base stations")
    others = [i for i in range(len(bs)) if i != reference]
    dtau = np.asarray(delay_differences, dtype=float).reshape(-1)
    if dtau.size != len(others):
        raise ValueError(f"expected {len(others)} delay differences")
    w = np.ones(len(others)) if weights is None else np.asarray(weights, dtype=float)
    theta = np.mean(bs[:, :2], axis=0) if x0 is None else np.asarray(x0, dtype=float)[:2]

    def residual(t):
        p = np.array([t[0], t[1], ue_height])
        diff = p - bs
        d = np.linalg.norm(diff, axis=1)
        g = diff[:, :2] / d[:, None]
        r = (d[others] - d[reference]) / SPEED_OF_LIGHT - dtau
        return r, (g[others] - g[reference]) / SPEED_OF_LIGHT

    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r, H = residual(theta)
        A = H.T @ (w[:, None] * H)
        try:
            step = -np.linalg.solve(A, H.T @ (w * r))
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        theta = theta + step
        if np.linalg.norm(step) < tol:
            converged = True
            break
    r, _ = residual(theta)
    return PositionEstimate(np.array([theta[0], theta[1], ue_height]),
                            float(np.sum(w * r ** 2)), converged, it)


# RIS-aided NLOS positioning -------------------------------------------------------

def dft_profile_schedule(ris: ArrayGeometry, bs, frequency: float) -> np.ndarray:
    """Directional sweep: DFT beams after compensating the BS-to-RIS phase.

    Row t is the unit-modulus profile of slot t; the M x M schedule has
    orthogonal columns (``Phi^H Phi = M I``).
    """
    M = ris.n_elements
    d = ris.distances(as_position(bs))[0]
    comp = np.exp(2j * np.pi * frequency * d / SPEED_OF_LIGHT)
    t = np.arange(M)
    return np.exp(2j * np.pi * np.outer(t, t) / M) * comp[None, :]


class RisPositioner:
    """ML positioning of a single-antenna UE from RIS reflections only.

    Observations are ``z[t, n] = g * s_n * sum_m Phi[t, m] mask_m a_m(bs) a_m(ue)
    + noise`` with one unknown complex gain ``g``.  Only the sufficient
    statistic ``Phi^H z`` is used, so any full-rank schedule works; the coarse
    stage uses the diagonal of ``Phi^H Phi``, which is exact for orthogonal
    schedules such as :func:`dft_profile_schedule`.
    """

    def __init__(self, ris: ArrayGeometry, bs, profiles, grid: OfdmGrid, region: Region2D, *,
                 mask=None, n_subarrays: int = 16, pilot=None, fine_step: float | None = None,
                 fine_half_width: float | None = None, cache_limit_mb: float = 512.0):
        self.ris = ris
        self.profiles = np.asarray(profiles, dtype=complex)
        if self.profiles.ndim != 2 or self.profiles.shape[1] != ris.n_elements:
            raise ValueError("profiles must have shape (slots, RIS elements)")
        if len(self.profiles) < 2:
            raise ValueError("need at least two profiles")
        self.mask = check_mask(mask, ris.n_elements)
        if not np.any(self.mask > 0):
            raise NumericalError("every RIS element is blocked")
        self.freqs = grid.frequencies
        n = grid.n_subcarriers
        self.pilot = (np.ones(n, dtype=complex) if pilot is None
                      else np.asarray(pilot, dtype=complex).reshape(-1))
        self.region = region
        self.height = region.z
        gram = self.profiles.conj().T @ self.profiles
        self.gram_diag = np.real(np.diag(gram))
        off = gram - np.diag(np.diag(gram))
        self.gram = None if np.max(np.abs(off)) <= 1e-9 * np.max(self.gram_diag) else gram
        a_bs = element_response(ris.distances(as_position(bs))[0], self.freqs, "free_space")
        self.a_bs = a_bs * self.mask[:, None] * self.pilot            # (M, N)
        self.groups = [g for g in np.array_split(np.arange(ris.n_elements), n_subarrays) if len(g)]
        cell = max(region.dx, region.dy)
        self.fine_step = fine_step or cell / 10
        self.fine_half_width = fine_half_width or 2.5 * cell
        self._points = region.points()
        bank_mb = len(self._points) * ris.n_elements * n * 8 / 1e6
        self._bank = self._build_bank() if bank_mb <= cache_limit_mb else None

    def _cascade(self, points) -> np.ndarray:
        """Per-element cascaded response (K, M, N)."""
        a_ue = element_response(self.ris.distances(points), self.freqs, "free_space")
        return a_ue * self.a_bs[None]

    def _build_bank(self):
        def chunk(p):
            B = self._cascade(p)
            parts = []
            for g in self.groups:
                Bg = B[:, g, :]
                den = np.einsum("kmn,m->k", np.abs(Bg) ** 2, self.gram_diag[g])
                parts.append((Bg.conj() / np.sqrt(np.maximum(den, 1e-300))[:, None, None])
                             .reshape(len(p), -1).astype(np.complex64))
            return np.concatenate(parts, axis=1)
        return map_chunks(chunk, self._points, chunk=256)

    def _statistic(self, observations) -> np.ndarray:
        z = np.asarray(observations, dtype=complex)
        if z.shape != (len(self.profiles), len(self.freqs)):
            raise ValueError("observations must have shape (slots, subcarriers)")
        w = self.profiles.conj().T @ z                                 # (M, N)
        if not np.any(w):
            raise NumericalError("observation carries no energy")
        return w

    def _coarse(self, w) -> np.ndarray:
        if self._bank is not None:
            out = np.zeros(len(self._points))
            start = 0
            for g in self.groups:
                size = len(g) * w.shape[1]
                c = self._bank[:, start:start + size] @ w[g].ravel().astype(np.complex64)
                out += np.abs(c.astype(complex)) ** 2
                start += size
            return out

        def chunk(p):
            B = self._cascade(p)
            total = np.zeros(len(p))
            for g in self.groups:
                Bg = B[:, g, :]
                den = np.einsum("kmn,m->k", np.abs(Bg) ** 2, self.gram_diag[g])
                c = np.einsum("kmn,mn->k", Bg.conj(), w[g])
                total += np.abs(c) ** 2 / np.maximum(den, 1e-300)
            return total
        return map_chunks(chunk, self._points, chunk=256)

    def objective(self, w, points) -> np.ndarray:
        """Exact concentrated likelihood gain ``|<w, B>|^2 / (B^H G B)``."""
        def chunk(p):
            B = self._cascade(self._lift(p))
            num = np.abs(np.einsum("kmn,mn->k", B.conj(), w)) ** 2
            if self.gram is None:
                den = np.einsum("kmn,m->k", np.abs(B) ** 2, self.gram_diag)
            else:
                den = np.real(np.einsum("kmn,ml,kln->k", B.conj(), self.gram, B))
            if np.any(den <= 0):
                raise NumericalError("zero predicted signal in least-squares gain")
            return num / den
        return map_chunks(chunk, np.asarray(points, dtype=float), chunk=256)

    def _lift(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.column_stack([p[:, 0], p[:, 1], np.full(len(p), self.height)])

    def estimate(self, observations, refine: bool = True) -> PositionEstimate:
        w = self._statistic(observations)
        scale = float(np.sum(np.abs(w) ** 2) / np.max(self.gram_diag))
        coarse = self._coarse(w)
        best = self._points[int(np.argmax(coarse)), :2]
        local = self.region.around(best, self.fine_half_width, self.fine_step)
        pts = local.points()[:, :2]
        v = self.objective(w, pts)
        start = pts[int(np.argmax(v))]
        v0 = float(v.max())
        pos, value, converged, iters = start, v0, False, 0
        if refine:
            res = _nelder_mead(lambda p: -self.objective(w, p[None])[0] / scale, start,
                               self.fine_step / 2)
            iters = int(res.nit)
            if -res.fun * scale >= v0:
                pos, value = res.x, float(-res.fun * scale)
                spread = np.max(np.abs(res.final_simplex[0] - res.x))
                converged = bool(value > v0 and spread < 1e-4)
        return PositionEstimate(np.array([pos[0], pos[1], self.height]), -value, converged,
                                iters, np.array([best[0], best[1], self.height]))


def ris_nlos_localize(observations, profiles, ris: ArrayGeometry, bs, region: Region2D,
                      grid: OfdmGrid, refine: bool = True, **kwargs) -> PositionEstimate:
    """One-shot RIS-only position estimate; see :class:`RisPositioner`."""
    return RisPositioner(ris, bs, profiles, grid, region, cache_limit_mb=0, **kwargs).estimate(
        observations, refine)


def ris_observation(ris: ArrayGeometry, bs, ue, profiles, grid: OfdmGrid, gain=1.0, mask=None,
                    pilot=None) -> np.ndarray:
    """Noiseless RIS-only observation (slots, subcarriers) for a UE position."""
    f = grid.frequencies
    mask = check_mask(mask, ris.n_elements)
    s = np.ones(len(f)) if pilot is None else np.asarray(pilot, dtype=complex)
    a_bs = element_response(ris.distances(as_position(bs))[0], f, "free_space")
    a_ue = element_response(ris.distances(as_position(ue))[0], f, "free_space")
    return gain * (np.asarray(profiles) @ (mask[:, None] * a_bs * a_ue)) * s
