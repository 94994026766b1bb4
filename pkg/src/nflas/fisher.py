"""Fisher information and position error bounds for uplink D-MIMO localization.

A single-antenna UE at known height transmits flat OFDM pilots; every base
station (BS) receives the LOS path on an M-element array.  Two nuisance
models are supported:

* ``coherent``: the BSs share a phase reference, so one global complex gain
  multiplies the deterministic free-space response of every BS.
* ``noncoherent``: every BS has its own unknown complex gain, which removes
  the inter-BS carrier phase.

Parameter ordering is always ``[x, y, Re g_1, Im g_1, ...]`` with one gain pair
in coherent mode and one pair per BS otherwise.  Observation entries are
stacked BS by BS, each block in (element, subcarrier) row-major order.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .channel import OfdmGrid, element_response
from .geometry import SPEED_OF_LIGHT, ArrayGeometry, as_position, build_ula

MODES = ("coherent", "noncoherent")


@dataclass(frozen=True, eq=False)
class DmimoScenario:
    """LOS uplink geometry with the true nuisance values.

    :param bs_arrays: receiving apertures, one per BS
    :param ue: true UE position; its z is treated as known
    :param mode: ``"coherent"`` or ``"noncoherent"``
    :param gains: true complex gain per BS (all equal in coherent mode)
    :param signal_scale: real amplitude applied to every entry
    """

    bs_arrays: tuple
    ue: np.ndarray
    mode: str = "coherent"
    gains: tuple = None
    signal_scale: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        arrays = tuple(self.bs_arrays)
        if not arrays:
            raise ValueError("need at least one base station")
        gains = tuple(complex(g) for g in (self.gains or (1.0,) * len(arrays)))
        if len(gains) != len(arrays):
            raise ValueError("one gain per base station required")
        if self.mode == "coherent" and len(set(gains)) != 1:
            raise ValueError("coherent mode has a single global gain")
        object.__setattr__(self, "bs_arrays", arrays)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "ue", as_position(self.ue))

    @property
    def n_bs(self) -> int:
        return len(self.bs_arrays)

    def with_mode(self, mode: str) -> "DmimoScenario":
        gains = self.gains if mode == "noncoherent" else (self.gains[0],) * self.n_bs
        return replace(self, mode=mode, gains=gains)


def param_names(scenario: DmimoScenario) -> list[str]:
    names = ["x", "y"]
    if scenario.mode == "coherent":
        return names + ["re_g", "im_g"]
    for b in range(scenario.n_bs):
        names += [f"re_g{b}", f"im_g{b}"]
    return names


def pack_params(scenario: DmimoScenario) -> np.ndarray:
    gains = scenario.gains[:1] if scenario.mode == "coherent" else scenario.gains
    theta = [scenario.ue[0], scenario.ue[1]]
    for g in gains:
        theta += [g.real, g.imag]
    return np.array(theta)


def _unpack(scenario: DmimoScenario, theta):
    theta = np.asarray(theta, dtype=float)
    pos = np.array([theta[0], theta[1], scenario.ue[2]])
    g = theta[2::2] + 1j * theta[3::2]
    if scenario.mode == "coherent":
        g = np.repeat(g[:1], scenario.n_bs)
    return pos, g


def _pilot(grid: OfdmGrid, pilot) -> np.ndarray:
    if pilot is None:
        # unit total energy spread evenly over the subcarriers
        return np.full(grid.n_subcarriers, 1.0 / np.sqrt(grid.n_subcarriers), dtype=complex)
    pilot = np.asarray(pilot, dtype=complex).reshape(-1)
    if pilot.size != grid.n_subcarriers:
        raise ValueError("pilot length must equal the subcarrier count")
    return pilot


def _bs_distances(array: ArrayGeometry, pos: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    diff = pos - array.element_positions
    d = np.linalg.norm(diff, axis=1)
    if np.any(d == 0.0):
        raise ValueError("UE coincides with a BS element")
    return diff, d


def mean_observation(scenario: DmimoScenario, grid: OfdmGrid, theta=None, pilot=None) -> np.ndarray:
    """Noiseless stacked observation for parameters ``theta`` (default: truth)."""
    pos, g = _unpack(scenario, pack_params(scenario) if theta is None else theta)
    s = _pilot(grid, pilot)
    blocks = []
    for b, array in enumerate(scenario.bs_arrays):
        _, d = _bs_distances(array, pos)
        A = element_response(d, grid.frequencies, "free_space")
        blocks.append((scenario.signal_scale * g[b] * A * s).ravel())
    return np.concatenate(blocks)


def observation_jacobian(scenario: DmimoScenario, grid: OfdmGrid, pilot=None) -> np.ndarray:
    """Analytic d(mean)/d(theta) at the true parameters, shape (entries, params)."""
    pos, g = _unpack(scenario, pack_params(scenario))
    s = _pilot(grid, pilot)
    f = grid.frequencies
    n_par = len(param_names(scenario))
    rows = []
    for b, array in enumerate(scenario.bs_arrays):
        diff, d = _bs_distances(array, pos)
        base = scenario.signal_scale * element_response(d, f, "free_space") * s   # (M, N)
        # d/dd of amp(d) exp(-j 2 pi f d / c)
        dd = base * (-1.0 / d[:, None] - 2j * np.pi * f / SPEED_OF_LIGHT)
        block = np.zeros((base.size, n_par), dtype=complex)
        block[:, 0] = (g[b] * dd * (diff[:, 0] / d)[:, None]).ravel()
        block[:, 1] = (g[b] * dd * (diff[:, 1] / d)[:, None]).ravel()
        k = 2 if scenario.mode == "coherent" else 2 + 2 * b
        block[:, k] = base.ravel()
        block[:, k + 1] = 1j * base.ravel()
        rows.append(block)
    return np.concatenate(rows, axis=0)


@dataclass(frozen=True, eq=False)
class FisherBlock:
    """Fisher information ``J`` over a named parameter ordering (position first)."""

    J: np.ndarray
    noise_variance: float
    mode: str = "coherent"
    names: tuple = field(default=("x", "y"))

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1] or J.shape[0] < 2:
            raise ValueError("J must be a square matrix with at least the position block")
        if not np.allclose(J, J.T, rtol=1e-10, atol=1e-12 * np.max(np.abs(J), initial=0.0)):
            raise ValueError("J must be symmetric")
        object.__setattr__(self, "J", 0.5 * (J + J.T))
        object.__setattr__(self, "names", tuple(self.names))


def fim(jacobian, noise_variance: float, mode: str = "coherent", names=None) -> FisherBlock:
    """Slepian-Bangs information ``(2/sigma^2) Re{D^H D}`` for white complex noise."""
    if not noise_variance > 0:
        raise ValueError("noise variance must be positive")
    D = np.asarray(jacobian, dtype=complex)
    J = 2.0 / noise_variance * np.real(D.conj().T @ D)
    if names is None:
        names = ("x", "y") + tuple(f"nuisance{i}" for i in range(D.shape[1] - 2))
    return FisherBlock(J, float(noise_variance), mode, tuple(names))


@dataclass(frozen=True, eq=False)
class PebResult:
    peb: float
    efim: np.ndarray
    singular: bool


SINGULAR_CONDITION = 1e12


def equivalent_fim(J: np.ndarray, n_pos: int = 2) -> np.ndarray:
    """Schur complement of the nuisance block."""
    J = np.asarray(J, dtype=float)
    A, B, C = J[:n_pos, :n_pos], J[:n_pos, n_pos:], J[n_pos:, n_pos:]
    if C.size == 0:
        return A.copy()
    return A - B @ np.linalg.solve(C, B.T)


def peb(fisher: FisherBlock) -> PebResult:
    """Position error bound ``sqrt(trace(EFIM^-1))``; ``inf`` when the EFIM is singular.

    J is equilibrated by its diagonal, and the EFIM inverse is read off as the
    position block of the inverse, which avoids the cancellation of an
    explicit ``A - B C^-1 B^T`` when the EFIM is nearly singular.  A block
    with a non-positive eigenvalue counts as infinitely ill-conditioned.
    """
    J = fisher.J
    scale = np.sqrt(np.clip(np.diag(J), 0.0, None))
    if np.any(scale == 0.0):
        return PebResult(np.inf, np.full((2, 2), np.nan), True)
    Js = J / np.outer(scale, scale)
    C = Js[2:, 2:]
    if C.size and np.linalg.cond(C) > 1e15:
        return PebResult(np.inf, np.full((2, 2), np.nan), True)
    try:
        crb = np.linalg.inv(Js)[:2, :2] / np.outer(scale[:2], scale[:2])
    except np.linalg.LinAlgError:
        return PebResult(np.inf, np.full((2, 2), np.nan), True)
    crb = 0.5 * (crb + crb.T)
    ev = np.linalg.eigvalsh(crb)
    if ev[0] <= 0 or ev[-1] / ev[0] > SINGULAR_CONDITION:
        return PebResult(np.inf, equivalent_fim(J), True)
    return PebResult(float(np.sqrt(np.trace(crb))), np.linalg.inv(crb), False)


# Corner deployment ------------------------------------------------------------------

@dataclass(frozen=True)
class DmimoLayout:
    """Base stations on the corners of a square area, ULAs facing the area center.

    ``power_normalization == "total"`` scales each BS array by ``1/sqrt(M)`` so
    the received energy per BS does not grow with M; ``"per_antenna"`` keeps
    the per-antenna power fixed.
    """

    bs_centers: tuple = ((0.0, 0.0, 3.0), (10.0, 0.0, 3.0), (0.0, 10.0, 3.0), (10.0, 10.0, 3.0))
    ue: tuple = (2.0, 9.0, 1.0)
    fc: float = 3.5e9
    area_center: tuple = (5.0, 5.0)
    n_subcarriers: int = 64
    power_normalization: str = "total"

    def __post_init__(self):
        if self.power_normalization not in ("total", "per_antenna"):
            raise ValueError("power_normalization must be 'total' or 'per_antenna'")

    def arrays(self, m: int) -> tuple[ArrayGeometry, ...]:
        lam = SPEED_OF_LIGHT / self.fc
        out = []
        for c in self.bs_centers:
            c = as_position(c)
            look = np.array([self.area_center[0] - c[0], self.area_center[1] - c[1], 0.0])
            look /= np.linalg.norm(look)
            axis = np.array([-look[1], look[0], 0.0])
            out.append(build_ula(m, lam / 2, c, axis, normal=look, wavelength=lam))
        return tuple(out)

    def grid(self, bandwidth: float) -> OfdmGrid:
        return OfdmGrid(self.fc, bandwidth, self.n_subcarriers)

    def signal_scale(self, m: int, snr_ref: float) -> float:
        """Amplitude giving ``snr_ref`` at 1 m on one antenna with unit noise variance."""
        scale = np.sqrt(snr_ref) * 4 * np.pi * self.fc / SPEED_OF_LIGHT
        if self.power_normalization == "total":
            scale /= np.sqrt(m)
        return float(scale)

    def scenario(self, m: int, mode: str, snr_ref: float = 1.0) -> DmimoScenario:
        return DmimoScenario(self.arrays(m), self.ue, mode, None, self.signal_scale(m, snr_ref))


@dataclass(frozen=True, eq=False)
class ArrayLayout:
    """Explicit receiving arrays with the :class:`DmimoLayout` interface.

    The array count per BS is fixed, so the ``m`` arguments are ignored and
    no power normalization is applied.
    """

    bs_arrays: tuple
    ue: tuple
    fc: float
    n_subcarriers: int = 64

    def arrays(self, m: int | None = None) -> tuple[ArrayGeometry, ...]:
        return tuple(self.bs_arrays)

    def grid(self, bandwidth: float) -> OfdmGrid:
        return OfdmGrid(self.fc, bandwidth, self.n_subcarriers)

    def signal_scale(self, m: int | None, snr_ref: float) -> float:
        return float(np.sqrt(snr_ref) * 4 * np.pi * self.fc / SPEED_OF_LIGHT)

    def scenario(self, m: int | None, mode: str, snr_ref: float = 1.0) -> DmimoScenario:
        return DmimoScenario(self.arrays(), self.ue, mode, None, self.signal_scale(m, snr_ref))


def scenario_peb(scenario: DmimoScenario, grid: OfdmGrid, noise_variance: float = 1.0) -> PebResult:
    J = fim(observation_jacobian(scenario, grid), noise_variance, scenario.mode,
            param_names(scenario))
    return peb(J)


def peb_bandwidth_sweep(layout: DmimoLayout, bandwidths, m: int, mode: str,
                        snr_ref: float) -> list[tuple[float, float]]:
    """PEB per bandwidth at fixed total transmit energy (unit noise variance)."""
    bandwidths = [float(b) for b in bandwidths]
    if any(b <= 0 for b in bandwidths) or bandwidths != sorted(bandwidths):
        raise ValueError("bandwidths must be positive and ascending")
    scen = layout.scenario(m, mode, snr_ref)
    return [(b, scenario_peb(scen, layout.grid(b)).peb) for b in bandwidths]


def calibrate_snr_ref(layout: DmimoLayout, target_peb: float = 0.278, bandwidth: float = 0.1e6,
                      m: int = 4, mode: str = "noncoherent") -> float:
    """``snr_ref`` that pins one sweep point to ``target_peb`` (PEB scales as snr^-1/2)."""
    base = scenario_peb(layout.scenario(m, mode, 1.0), layout.grid(bandwidth)).peb
    if not np.isfinite(base):
        raise ValueError("calibration point has a singular EFIM")
    return float((base / target_peb) ** 2)


# Delay-only bound for TDOA --------------------------------------------------------

def tdoa_fim(bs_positions, ue, sigma_tau: float, reference: int = 0, weights=None) -> FisherBlock:
    """Information on (x, y) from delay differences against ``reference``.

    Each difference carries independent Gaussian error of std ``sigma_tau``
    (scaled by ``1/sqrt(weight)`` when weights are given).  The UE height is
    known.
    """
    bs = np.array([as_position(p) for p in bs_positions])
    u = as_position(ue)
    diff = u - bs
    d = np.linalg.norm(diff, axis=1)
    grad = diff[:, :2] / d[:, None] / SPEED_OF_LIGHT
    others = [i for i in range(len(bs)) if i != reference]
    H = grad[others] - grad[reference]
    w = np.ones(len(others)) if weights is None else np.asarray(weights, dtype=float)
    J = H.T @ (w[:, None] * H) / sigma_tau ** 2
    return FisherBlock(J, sigma_tau ** 2, "tdoa", ("x", "y"))
