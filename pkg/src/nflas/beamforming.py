"""Phase-shifter beamfocusing, spatial gain fields and beam-squint focal curves."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._parallel import map_chunks
from .channel import OfdmGrid, check_mask, element_response
from .geometry import ArrayGeometry, Region2D, as_position


@dataclass(frozen=True, eq=False)
class GainField:
    """Non-negative scalar field sampled on a :class:`Region2D` grid, shape (ny, nx)."""

    region: Region2D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.region.shape:
            raise ValueError(f"values shape {values.shape} != region shape {self.region.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("field values must be finite and non-negative")
        object.__setattr__(self, "values", values)

    def normalized(self) -> "GainField":
        peak = self.values.max()
        if peak <= 0:
            raise ValueError("cannot normalize an all-zero field")
        return GainField(self.region, self.values / peak)

    def value_at(self, point) -> float:
        """Value at the grid node nearest to ``point``."""
        p = as_position(point)
        j = int(np.clip(round((p[0] - self.region.x_min) / self.region.dx), 0, self.region.nx - 1))
        i = int(np.clip(round((p[1] - self.region.y_min) / self.region.dy), 0, self.region.ny - 1))
        return float(self.values[i, j])


def conjugate_focus_weights(array: ArrayGeometry, target, design_frequency: float) -> np.ndarray:
    """Unit-modulus weights that phase-align every element on ``target``."""
    d = array.distances(as_position(target))[0]
    if np.any(d == 0.0):
        raise ValueError("target coincides with an array element")
    return np.conj(element_response(d, design_frequency, "unit")[:, 0])


def gain_field(weights, array: ArrayGeometry, region: Region2D, frequency: float,
               mask=None) -> GainField:
    """Beamformer output power ``|sum_m w_m mask_m a_m(x)|^2`` over the grid (unit amplitudes)."""
    weights = np.asarray(weights, dtype=complex).reshape(-1)
    if weights.size != array.n_elements:
        raise ValueError(f"{weights.size} weights for {array.n_elements} elements")
    wm = weights * check_mask(mask, array.n_elements)

    def chunk(points):
        a = element_response(array.distances(points), frequency, "unit")[..., 0]
        return np.abs(a @ wm) ** 2

    values = map_chunks(chunk, region.points(), chunk=4096)
    return GainField(region, values.reshape(region.shape))


def focal_point(field: GainField) -> np.ndarray:
    """Grid node of maximum value; ties go to the first node in row-major order."""
    v = field.values
    if np.ptp(v) <= 1e-12 * max(np.max(np.abs(v)), 1e-300):
        raise ValueError("field is constant, no unique focus")
    return field.region.node(int(np.argmax(v)))


def bse_focal_curve(array: ArrayGeometry, target, grid: OfdmGrid, region: Region2D,
                    mask=None) -> list[tuple[float, np.ndarray]]:
    """Focal point per subcarrier for weights designed at the carrier.

    Analog phase shifters apply one phase per element to every subcarrier, so
    away from ``fc`` the focus drifts (beam squint).
    """
    if grid.n_subcarriers < 2:
        raise ValueError("a focal curve needs at least two subcarriers")
    w = conjugate_focus_weights(array, target, grid.fc)
    return [(float(f), focal_point(gain_field(w, array, region, f, mask)))
            for f in grid.frequencies]


def superlevel_components(field: GainField, fraction: float = 0.5) -> tuple[int, np.ndarray]:
    """Connected components (8-neighbour) of ``values >= fraction * max``."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    labels, n = ndimage.label(field.values >= fraction * field.values.max(),
                              structure=np.ones((3, 3), dtype=bool))
    return int(n), labels


def component_peaks(field: GainField, labels: np.ndarray, n: int) -> list[np.ndarray]:
    """Location of the maximum inside each labelled component."""
    flat_v = field.values.ravel()
    flat_l = labels.ravel()
    out = []
    for k in range(1, n + 1):
        idx = np.flatnonzero(flat_l == k)
        out.append(field.region.node(int(idx[np.argmax(flat_v[idx])])))
    return out
