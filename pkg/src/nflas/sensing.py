"""Bistatic near-field matched-filter imaging with distributed apertures."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._parallel import map_chunks
from .beamforming import GainField
from .channel import OfdmGrid, complex_noise, element_response
from .geometry import SPEED_OF_LIGHT, ArrayGeometry, Region2D, as_position


@dataclass(frozen=True)
class Scatterer:
    position: np.ndarray
    reflectivity: complex = 1.0

    def __post_init__(self):
        if not np.isfinite(complex(self.reflectivity)):
            raise ValueError("reflectivity must be finite")
        object.__setattr__(self, "position", as_position(self.position))


def _responses(array: ArrayGeometry, points, freqs) -> np.ndarray:
    d = array.distances(points)
    if np.any(d == 0.0):
        raise ValueError("point coincides with an array element")
    return element_response(d, freqs, "free_space")


def scatterer_observation(tx: ArrayGeometry, rx: ArrayGeometry, targets, grid: OfdmGrid,
                          noise_std: float = 0.0, seed: int = 0) -> np.ndarray:
    """Bistatic MIMO snapshot, shape (tx elements, rx elements, subcarriers).

    :param targets: iterable of :class:`Scatterer`.
    :param noise_std: total complex noise standard deviation per entry.
    :param seed: seed of the noise generator.
    """
    targets = list(targets)
    if not targets:
        raise ValueError("need at least one scatterer")
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    f = grid.frequencies
    pos = np.array([t.position for t in targets])
    a_tx = _responses(tx, pos, f)                       # (T, Mt, N)
    a_rx = _responses(rx, pos, f)                       # (T, Mr, N)
    rho = np.array([complex(t.reflectivity) for t in targets])
    y = np.einsum("t,tmn,tkn->mkn", rho, a_tx, a_rx)
    if noise_std > 0:
        y = y + complex_noise(y.shape, noise_std, np.random.default_rng(seed))
    return y


def back_projection(observation, tx: ArrayGeometry, rx: ArrayGeometry, grid: OfdmGrid,
                    points) -> tuple[np.ndarray, np.ndarray]:
    """Complex matched-filter outputs and steering energies at ``points``.

    Returns ``z(x) = sum_{m,k,n} conj(b_mkn(x)) y_mkn`` with
    ``b = a_tx,m * a_rx,k`` and ``||b(x)||^2``.  The sum is taken in a fixed
    (m, k, n) order for every chunk of points, so results are bit-stable.
    """
    y = np.asarray(observation, dtype=complex)
    f = grid.frequencies
    if y.shape != (tx.n_elements, rx.n_elements, f.size):
        raise ValueError(f"observation shape {y.shape} does not match the arrays and grid")

    def chunk(pts):
        a_tx = _responses(tx, pts, f)                   # (K, Mt, N)
        a_rx = _responses(rx, pts, f)                   # (K, Mr, N)
        z = np.einsum("kmn,mjn,kjn->k", a_tx.conj(), y, a_rx.conj(), optimize=False)
        energy = np.einsum("kmn,kjn->k", np.abs(a_tx) ** 2, np.abs(a_rx) ** 2)
        return np.stack([z, energy.astype(complex)], axis=1)

    out = map_chunks(chunk, np.atleast_2d(np.asarray(points, dtype=float)), chunk=512)
    return out[:, 0], out[:, 1].real


def matched_filter_image(observation, tx: ArrayGeometry, rx: ArrayGeometry, grid: OfdmGrid,
                         region: Region2D, normalize_steering: bool = True) -> GainField:
    """Back-projection image ``|z(x)|^2``, normalized to peak 1.

    With ``normalize_steering`` the statistic is divided by ``||b(x)||^2``,
    which removes the ``1/d^2`` blow-up near the apertures and turns the
    image into a normalized correlation.  See :func:`back_projection`.
    """
    z, energy = back_projection(observation, tx, rx, grid, region.points())
    values = np.abs(z) ** 2
    if normalize_steering:
        values = values / energy
    peak = values.max()
    if peak > 0:
        values = values / peak
    return GainField(region, values.reshape(region.shape))


def range_resolution(bandwidth: float) -> float:
    """Bistatic (sum-)range resolution ``c / B`` in meters."""
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    return SPEED_OF_LIGHT / bandwidth


def detect_peaks(image: GainField, threshold: float = 0.5, min_separation: float = 0.0) -> list[np.ndarray]:
    """Local maxima above ``threshold * max``, strongest first.

    A pixel is a local maximum when it is not below any of its 8 neighbours
    and strictly above at least one of them, so plateaus of a constant image
    yield nothing.  Weaker maxima closer than ``min_separation`` to an already
    accepted peak are dropped.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    v = image.values
    fp = np.ones((3, 3), dtype=bool)
    fp[1, 1] = False
    hi = ndimage.maximum_filter(v, footprint=fp, mode="constant", cval=-np.inf)
    lo = ndimage.minimum_filter(v, footprint=fp, mode="nearest")
    cand = (v >= hi) & (v > lo) & (v >= threshold * v.max())
    idx = np.flatnonzero(cand.ravel())
    idx = idx[np.argsort(-v.ravel()[idx], kind="stable")]
    peaks: list[np.ndarray] = []
    for i in idx:
        p = image.region.node(int(i))
        if all(np.linalg.norm(p - q) >= min_separation for q in peaks):
            peaks.append(p)
    return peaks


def peak_to_sidelobe(image: GainField, targets, exclusion: float) -> float:
    """Ratio of the largest value within ``exclusion`` of any target to the largest outside."""
    pts = image.region.points()
    near = np.zeros(len(pts), dtype=bool)
    for t in targets:
        near |= np.linalg.norm(pts[:, :2] - as_position(t)[:2], axis=1) <= exclusion
    v = image.values.ravel()
    if near.all() or not near.any():
        raise ValueError("exclusion zone must cover part of the region")
    side = v[~near].max()
    return float(np.inf if side == 0 else v[near].max() / side)
