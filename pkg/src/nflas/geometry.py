"""Coordinate conventions, aperture constructors and near/far-field diagnostics.

Positions are plain ``numpy`` arrays of shape ``(3,)`` in meters.  Two-element
inputs are accepted everywhere and lifted to ``z = 0``; planar scenarios keep
arrays and users on a common height unless a scenario says otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299792458.0


def as_position(p) -> np.ndarray:
    """Return ``p`` as a finite float array of shape (3,)."""
    arr = np.asarray(p, dtype=float).reshape(-1)
    if arr.size == 2:
        arr = np.append(arr, 0.0)
    if arr.size != 3:
        raise ValueError(f"position must have 2 or 3 coordinates, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"position has non-finite coordinates: {arr}")
    return arr


def as_positions(points) -> np.ndarray:
    """Return a stack of positions with shape (K, 3)."""
    arr = np.atleast_2d(np.asarray(points, dtype=float))
    if arr.shape[-1] == 2:
        arr = np.concatenate([arr, np.zeros(arr.shape[:-1] + (1,))], axis=-1)
    if arr.shape[-1] != 3:
        raise ValueError(f"positions must have 2 or 3 coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("positions contain non-finite coordinates")
    return arr.reshape(-1, 3)


def _unit(v, name: str, tol: float = 1e-9) -> np.ndarray:
    v = as_position(v)
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise ValueError(f"{name} must be a unit vector, |{name}| = {np.linalg.norm(v):.6g}")
    return v


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Element layout of one aperture (ELAA, RIS panel or a D-MIMO base station).

    :param element_positions: (M, 3) element coordinates [m]
    :param reference_center: phase reference point [m]
    :param normal: unit boresight vector
    :param wavelength: carrier wavelength the aperture was designed for [m]
    """

    element_positions: np.ndarray
    reference_center: np.ndarray
    normal: np.ndarray
    wavelength: float

    def __post_init__(self):
        pos = as_positions(self.element_positions)
        if len(pos) < 1:
            raise ValueError("array needs at least one element")
        if len(pos) > 1:
            # pairwise distinctness, checked on sorted coordinates
            order = np.lexsort(pos.T[::-1])
            gaps = np.linalg.norm(np.diff(pos[order], axis=0), axis=1)
            if np.any(gaps == 0.0):
                raise ValueError("element positions must be pairwise distinct")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        object.__setattr__(self, "element_positions", _frozen(pos))
        object.__setattr__(self, "reference_center", _frozen(as_position(self.reference_center)))
        object.__setattr__(self, "normal", _frozen(_unit(self.normal, "normal")))
        object.__setattr__(self, "wavelength", float(self.wavelength))

    @property
    def n_elements(self) -> int:
        return len(self.element_positions)

    def aperture(self) -> float:
        """Largest pairwise element distance (0 for a single element)."""
        pos = self.element_positions
        if len(pos) == 1:
            return 0.0
        if len(pos) <= 2048:
            diff = pos[:, None, :] - pos[None, :, :]
            return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", diff, diff))))
        # double sweep; exact for collinear layouts, which is all we build this large
        d = np.linalg.norm(pos - pos[0], axis=1)
        far = pos[np.argmax(d)]
        return float(np.max(np.linalg.norm(pos - far, axis=1)))

    def distances(self, points) -> np.ndarray:
        """Element-to-point distances, shape (K, M)."""
        pts = as_positions(points)
        diff = pts[:, None, :] - self.element_positions[None, :, :]
        return np.sqrt(np.einsum("kmi,kmi->km", diff, diff))

    def subset(self, index) -> "ArrayGeometry":
        """Array made of the selected elements, same center/normal."""
        return ArrayGeometry(self.element_positions[index], self.reference_center,
                             self.normal, self.wavelength)

    def __eq__(self, other):
        if not isinstance(other, ArrayGeometry):
            return NotImplemented
        return (np.array_equal(self.element_positions, other.element_positions)
                and np.array_equal(self.reference_center, other.reference_center)
                and np.array_equal(self.normal, other.normal)
                and self.wavelength == other.wavelength)

    __hash__ = None


def build_ula(n_elements: int, spacing: float, center=(0.0, 0.0, 0.0), axis=(0.0, 1.0, 0.0),
              normal=None, wavelength: float | None = None) -> ArrayGeometry:
    """Uniform linear array symmetric about ``center``.

    Element k sits at ``center + (k - (n-1)/2) * spacing * axis``.  The default
    normal is the axis rotated by -90 degrees about +z, so an array along +y
    looks toward +x.  ``wavelength`` defaults to ``2 * spacing``.
    """
    if int(n_elements) != n_elements or n_elements < 1:
        raise ValueError("n_elements must be a positive integer")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    n_elements = int(n_elements)
    axis = _unit(axis, "axis")
    center = as_position(center)
    if normal is None:
        normal = np.array([axis[1], -axis[0], 0.0])
        if np.linalg.norm(normal) < 1e-12:
            normal = np.array([1.0, 0.0, 0.0])
        normal = normal / np.linalg.norm(normal)
    offsets = (np.arange(n_elements) - (n_elements - 1) / 2.0) * spacing
    pos = center + offsets[:, None] * axis
    return ArrayGeometry(pos, center, normal, 2.0 * spacing if wavelength is None else wavelength)


def fraunhofer_distance(aperture_diameter: float, wavelength: float) -> float:
    """Classical far-field boundary 2 D^2 / lambda."""
    if not aperture_diameter > 0 or not wavelength > 0:
        raise ValueError("aperture diameter and wavelength must be positive")
    return 2.0 * aperture_diameter ** 2 / wavelength


def plane_wave_phase_deviation(array: ArrayGeometry, source, frequency: float) -> float:
    """Worst per-element gap between spherical and plane-wave phase [rad].

    The plane wave travels along the true center-to-source direction and is
    anchored at the reference center, so the reference point has zero error.
    """
    src = as_position(source)
    d = array.distances(src)[0]
    if np.any(d == 0.0):
        raise ValueError("source coincides with an array element")
    rel = src - array.reference_center
    r0 = np.linalg.norm(rel)
    if r0 == 0.0:
        raise ValueError("source coincides with the reference center")
    u = rel / r0
    d_plane = r0 - (array.element_positions - array.reference_center) @ u
    k = 2.0 * np.pi * frequency / SPEED_OF_LIGHT
    return float(np.max(np.abs(d - d_plane)) * k)


@dataclass(frozen=True)
class Region2D:
    """Rectangular evaluation grid on the plane ``z = z``.

    Grid nodes include both borders; values over the grid are stored as
    (ny, nx) matrices with row i at ``ys[i]`` and column j at ``xs[j]``.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int
    z: float = 0.0

    def __post_init__(self):
        if not self.x_max > self.x_min or not self.y_max > self.y_min:
            raise ValueError("region needs x_max > x_min and y_max > y_min")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("region needs at least 2 nodes per axis")
        for name in ("x_min", "x_max", "y_min", "y_max", "z"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    @classmethod
    def from_cell(cls, x_range, y_range, cell: float, z: float = 0.0) -> "Region2D":
        """Grid with spacing ``cell`` starting at the lower corner.

        The upper bounds are rounded to the nearest whole number of cells.
        """
        if not cell > 0:
            raise ValueError("cell must be positive")
        nx = int(round((x_range[1] - x_range[0]) / cell)) + 1
        ny = int(round((y_range[1] - y_range[0]) / cell)) + 1
        return cls(x_range[0], x_range[0] + (nx - 1) * cell,
                   y_range[0], y_range[0] + (ny - 1) * cell, nx, ny, z)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def xs(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y_min + self.dy * np.arange(self.ny)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def points(self) -> np.ndarray:
        """All grid nodes in row-major order, shape (ny*nx, 3)."""
        X, Y = np.meshgrid(self.xs, self.ys)
        return np.stack([X.ravel(), Y.ravel(), np.full(X.size, self.z)], axis=1)

    def node(self, flat_index: int) -> np.ndarray:
        i, j = divmod(int(flat_index), self.nx)
        return np.array([self.xs[j], self.ys[i], self.z])

    def anchored_at(self, point) -> "Region2D":
        """Same grid shifted by less than one cell so ``point`` is a node."""
        p = as_position(point)
        sx = (p[0] - self.x_min) / self.dx
        sy = (p[1] - self.y_min) / self.dy
        ox = (sx - np.floor(sx)) * self.dx
        oy = (sy - np.floor(sy)) * self.dy
        if ox > self.dx / 2:
            ox -= self.dx
        if oy > self.dy / 2:
            oy -= self.dy
        return Region2D(self.x_min + ox, self.x_max + ox, self.y_min + oy, self.y_max + oy,
                        self.nx, self.ny, self.z)

    def around(self, center, half_width: float, step: float) -> "Region2D":
        """Square grid of side ``2 * half_width`` centered on ``center``."""
        c = as_position(center)
        n = 2 * int(round(half_width / step)) + 1
        h = (n - 1) / 2 * step
        return Region2D(c[0] - h, c[0] + h, c[1] - h, c[1] + h, n, n, self.z)

    def contains(self, point, tol: float = 1e-12) -> bool:
        p = as_position(point)
        return (self.x_min - tol <= p[0] <= self.x_max + tol
                and self.y_min - tol <= p[1] <= self.y_max + tol)


@dataclass(frozen=True)
class TrajectorySpec:
    """Straight-line user trajectory sampled at ``n_points`` uniform positions."""

    start: tuple
    end: tuple
    n_points: int

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("trajectory needs at least 2 points")
        object.__setattr__(self, "start", tuple(float(v) for v in as_position(self.start)))
        object.__setattr__(self, "end", tuple(float(v) for v in as_position(self.end)))
        object.__setattr__(self, "n_points", int(self.n_points))

    def points(self) -> np.ndarray:
        t = np.linspace(0.0, 1.0, self.n_points)[:, None]
        return (1 - t) * np.asarray(self.start) + t * np.asarray(self.end)


def direction_angle(point, center=(0.0, 0.0, 0.0), normal=(1.0, 0.0, 0.0)) -> float:
    """Signed planar angle [rad] of ``point`` seen from ``center`` w.r.t. ``normal``."""
    rel = as_position(point) - as_position(center)
    n = as_position(normal)
    return float(np.arctan2(n[0] * rel[1] - n[1] * rel[0], n[0] * rel[0] + n[1] * rel[1]))

