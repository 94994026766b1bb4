"""Spherical-wave steering over an OFDM grid, blockage masks and path assembly.

Sign convention: a propagation delay tau enters as ``exp(-j 2 pi f tau)`` and
steering vectors carry the absolute element-to-source distance, so carrier
phase stays observable across widely separated apertures.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SPEED_OF_LIGHT, ArrayGeometry, as_position

AMPLITUDE_MODELS = ("unit", "free_space")


@dataclass(frozen=True)
class OfdmGrid:
    """Carrier, bandwidth and subcarrier layout.

    Subcarriers span ``[fc - B/2, fc + B/2]`` inclusive, so the extreme tones
    are exactly ``f_min`` and ``f_max``.  A single subcarrier sits on ``fc``.
    """

    fc: float
    bandwidth: float
    n_subcarriers: int

    def __post_init__(self):
        if self.n_subcarriers < 1 or int(self.n_subcarriers) != self.n_subcarriers:
            raise ValueError("n_subcarriers must be a positive integer")
        if self.bandwidth < 0 or not self.fc > self.bandwidth / 2:
            raise ValueError("need fc > bandwidth/2 >= 0")
        if self.n_subcarriers > 1 and self.bandwidth == 0:
            raise ValueError("several subcarriers need a positive bandwidth")
        object.__setattr__(self, "fc", float(self.fc))
        object.__setattr__(self, "bandwidth", float(self.bandwidth))
        object.__setattr__(self, "n_subcarriers", int(self.n_subcarriers))

    @property
    def frequencies(self) -> np.ndarray:
        n = self.n_subcarriers
        if n == 1:
            return np.array([self.fc])
        return self.fc + (np.arange(n) - (n - 1) / 2) * self.bandwidth / (n - 1)

    @property
    def spacing(self) -> float:
        return 0.0 if self.n_subcarriers == 1 else self.bandwidth / (self.n_subcarriers - 1)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.fc

    def with_bandwidth(self, bandwidth: float) -> "OfdmGrid":
        return OfdmGrid(self.fc, bandwidth, self.n_subcarriers)


def make_mask(n_elements: int, blocked=()) -> np.ndarray:
    """All-visible mask with the half-open element ranges in ``blocked`` zeroed."""
    mask = np.ones(n_elements)
    for start, stop in blocked:
        if not 0 <= start <= stop <= n_elements:
            raise ValueError(f"blocked range [{start}, {stop}) outside 0..{n_elements}")
        mask[start:stop] = 0.0
    return mask


def check_mask(mask, n_elements: int) -> np.ndarray:
    if mask is None:
        return np.ones(n_elements)
    mask = np.asarray(mask, dtype=float).reshape(-1)
    if mask.size != n_elements:
        raise ValueError(f"mask has {mask.size} entries, array has {n_elements} elements")
    if np.any(mask < 0) or np.any(mask > 1) or not np.all(np.isfinite(mask)):
        raise ValueError("mask entries must lie in [0, 1]")
    return mask


def element_response(distances, frequencies, amplitude: str = "unit") -> np.ndarray:
    """Response ``amp * exp(-j 2 pi f d / c)`` with a trailing frequency axis.

    ``distances`` of any shape broadcasts against ``frequencies`` (F,), giving
    ``distances.shape + (F,)``.
    """
    if amplitude not in AMPLITUDE_MODELS:
        raise ValueError(f"amplitude model must be one of {AMPLITUDE_MODELS}")
    d = np.asarray(distances, dtype=float)[..., None]
    f = np.atleast_1d(np.asarray(frequencies, dtype=float))
    resp = np.exp(-2j * np.pi * f * d / SPEED_OF_LIGHT)
    if amplitude == "free_space":
        resp *= SPEED_OF_LIGHT / (4 * np.pi * f * d)
    return resp


def _source_distances(array: ArrayGeometry, source) -> np.ndarray:
    d = array.distances(as_position(source))[0]
    if np.any(d == 0.0):
        raise ValueError("source coincides with an array element")
    return d


def nf_steering(array: ArrayGeometry, source, frequency, amplitude: str = "unit") -> np.ndarray:
    """Exact spherical-wave response of every element to a point source.

    Returns shape (M,) for a scalar frequency, (M, F) for a frequency vector.
    """
    f = np.asarray(frequency, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    resp = element_response(_source_distances(array, source), f, amplitude)
    return resp[:, 0] if f.ndim == 0 else resp


def ff_steering(array: ArrayGeometry, direction, frequency) -> np.ndarray:
    """Plane-wave response for a unit arrival direction, referenced at the center."""
    u = as_position(direction)
    if abs(np.linalg.norm(u) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    proj = (array.element_positions - array.reference_center) @ u
    f = np.asarray(frequency, dtype=float)
    phase = 2 * np.pi * np.multiply.outer(proj, np.atleast_1d(f)) / SPEED_OF_LIGHT
    resp = np.exp(1j * phase)
    return resp[:, 0] if f.ndim == 0 else resp


def apply_mask(vector, mask) -> np.ndarray:
    vector = np.asarray(vector)
    mask = check_mask(mask, vector.shape[0])
    return vector * mask.reshape((-1,) + (1,) * (vector.ndim - 1))


@dataclass(frozen=True, eq=False)
class PropagationPath:
    """One geometric path toward the receiving array.

    For ``kind == "ris"`` the path is transmitter -> RIS -> receiver: ``source``
    is the transmitter, ``ris``/``ris_profile`` describe the surface and
    ``mask`` applies to RIS elements.  Otherwise ``mask`` applies to the
    receiving array.
    """

    source: np.ndarray
    complex_gain: complex = 1.0
    mask: np.ndarray | None = None
    kind: str = "los"
    ris: ArrayGeometry | None = None
    ris_profile: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("los", "scatterer", "ris"):
            raise ValueError(f"unknown path kind {self.kind!r}")
        if not np.isfinite(complex(self.complex_gain)):
            raise ValueError("path gain must be finite")
        if self.kind == "ris" and (self.ris is None or self.ris_profile is None):
            raise ValueError("RIS paths need the surface geometry and its profile")
        object.__setattr__(self, "source", as_position(self.source))


def assemble_channel(paths, array: ArrayGeometry, grid: OfdmGrid,
                     amplitude: str = "unit") -> np.ndarray:
    """Sum of path responses, shape (elements, subcarriers).

    The absolute distance phase is already inside each steering vector, so no
    extra reference-delay factor is applied.
    """
    paths = list(paths)
    if not paths:
        raise ValueError("need at least one path")
    f = grid.frequencies
    H = np.zeros((array.n_elements, f.size), dtype=complex)
    for path in paths:
        if path.kind == "ris":
            H += path.complex_gain * _ris_to_array(path, array, f)
        else:
            mask = check_mask(path.mask, array.n_elements)
            H += path.complex_gain * mask[:, None] * nf_steering(array, path.source, f, amplitude)
    return H


def _ris_to_array(path: PropagationPath, array: ArrayGeometry, f: np.ndarray) -> np.ndarray:
    ris = path.ris
    weights = _ris_weights(ris, path.ris_profile, path.mask)
    a_tx = element_response(_source_distances(ris, path.source), f, "free_space")   # (R, F)
    d_rx = ris.distances(array.element_positions)                                    # (M, R)
    if np.any(d_rx == 0.0):
        raise ValueError("receiver coincides with a RIS element")
    a_rx = element_response(d_rx, f, "free_space")                                   # (M, R, F)
    return np.einsum("r,rf,mrf->mf", weights, a_tx, a_rx)


def _ris_weights(ris: ArrayGeometry, profile, mask) -> np.ndarray:
    profile = np.asarray(profile, dtype=complex).reshape(-1)
    if profile.size != ris.n_elements:
        raise ValueError(f"profile has {profile.size} entries, RIS has {ris.n_elements}")
    return check_mask(mask, ris.n_elements) * profile


def ris_cascaded_path(tx, ris: ArrayGeometry, ris_profile, rx, frequency, mask=None):
    """Transmitter -> RIS -> receiver response, free-space amplitudes on both hops.

    Returns a complex scalar for a scalar frequency, else one value per frequency.
    """
    weights = _ris_weights(ris, ris_profile, mask)
    f = np.asarray(frequency, dtype=float)
    a_tx = element_response(_source_distances(ris, tx), f, "free_space")
    a_rx = element_response(_source_distances(ris, rx), f, "free_space")
    out = np.einsum("r,rf,rf->f", weights, a_tx, a_rx)
    return complex(out[0]) if f.ndim == 0 else out


def complex_noise(shape, std: float, rng: np.random.Generator) -> np.ndarray:
    """Circularly-symmetric Gaussian samples with E|n|^2 = std^2."""
    return std / np.sqrt(2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def synth_observation(channel, pilot, noise_std: float, seed: int) -> np.ndarray:
    """``channel * pilot`` (pilot broadcast over the last axis) plus white noise."""
    channel = np.asarray(channel, dtype=complex)
    pilot = np.asarray(pilot, dtype=complex).reshape(-1)
    if pilot.size != channel.shape[-1]:
        raise ValueError(f"pilot length {pilot.size} != {channel.shape[-1]} subcarriers")
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    y = channel * pilot
    if noise_std > 0:
        y = y + complex_noise(y.shape, noise_std, np.random.default_rng(seed))
    return y


__all__ = [
    "AMPLITUDE_MODELS", "OfdmGrid", "PropagationPath", "apply_mask", "assemble_channel",
    "check_mask", "complex_noise", "element_response", "ff_steering", "make_mask",
    "nf_steering", "ris_cascaded_path", "synth_observation",
]
