"""Uniform Cartesian grid, cell fields and ghost-cell handling.

Arrays are stored with shape ``(nx, ny, nz)``; a 2D problem uses ``nz == 1``
and the z-axis is inert (never swept, never differenced).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

PERIODIC = "periodic"
NEUMANN = "zero-neumann"
BC_KINDS = (PERIODIC, NEUMANN)
GHOST_DEPTH = 2


@dataclass(frozen=True)
class Grid:
    nx: int
    ny: int
    nz: int = 1
    dx: float = 1.0
    dy: float = 1.0
    dz: float = 1.0
    origin: tuple = (0.0, 0.0, 0.0)
    bc: tuple = (NEUMANN, NEUMANN, NEUMANN)

    def __post_init__(self):
        counts = (self.nx, self.ny) if self.nz == 1 else (self.nx, self.ny, self.nz)
        if min(counts) < 3:
            raise ValueError(f"grid needs at least 3 cells per active axis, got {self.shape}")
        if min(self.dx, self.dy, self.dz) <= 0:
            raise ValueError("grid spacings must be positive")
        if len(self.bc) != 3 or any(b not in BC_KINDS for b in self.bc):
            raise ValueError(f"bc must be three of {BC_KINDS}, got {self.bc!r}")
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @classmethod
    def uniform(cls, shape, extent, origin=(0.0, 0.0, 0.0), bc=NEUMANN):
        """Grid covering ``extent`` (lengths per axis) with ``shape`` cells.

        ``shape``/``extent`` may have two entries for a 2D grid.  ``bc`` is a
        single kind or one kind per axis.
        """
        shape = tuple(int(n) for n in shape)
        extent = tuple(float(e) for e in extent)
        if len(shape) == 2:
            shape = shape + (1,)
            extent = extent + (1.0,)
        if isinstance(bc, str):
            bc = (bc,) * 3
        origin = tuple(origin) + (0.0,) * (3 - len(origin))
        spacing = tuple(e / n for e, n in zip(extent, shape))
        return cls(*shape, *spacing, origin=origin, bc=tuple(bc))

    @property
    def shape(self):
        return (self.nx, self.ny, self.nz)

    @property
    def ndim(self):
        return 2 if self.nz == 1 else 3

    @property
    def spacing(self):
        return (self.dx, self.dy, self.dz)

    @property
    def cell_volume(self):
        return self.dx * self.dy * self.dz

    @property
    def extent(self):
        return (self.nx * self.dx, self.ny * self.dy, self.nz * self.dz)

    def centers(self, axis):
        n = self.shape[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.spacing[axis]

    def faces(self, axis):
        n = self.shape[axis]
        return self.origin[axis] + np.arange(n + 1) * self.spacing[axis]

    def mesh(self):
        """Cell-center coordinate arrays, each of shape ``(nx, ny, nz)``."""
        return np.meshgrid(self.centers(0), self.centers(1), self.centers(2), indexing="ij")

    def active_axes(self):
        return (0, 1) if self.ndim == 2 else (0, 1, 2)


@dataclass
class ColorField:
    values: np.ndarray
    grid: Grid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    @classmethod
    def zeros(cls, grid):
        return cls(np.zeros(grid.shape), grid)

    def copy(self):
        return ColorField(self.values.copy(), self.grid)


@dataclass
class VelocityField:
    """Cell-centered velocity plus the face-normal values used for fluxing.

    ``faces[d]`` has ``n_d + 1`` entries along axis ``d``; entry ``i`` is the
    face between cells ``i - 1`` and ``i``.
    """

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    grid: Grid
    faces: list = field(default=None)

    def __post_init__(self):
        if self.faces is None:
            self.faces = [face_average(c, self.grid, d) for d, c in enumerate(self.components)]

    @classmethod
    def zeros(cls, grid):
        z = np.zeros(grid.shape)
        return cls(z, z.copy(), z.copy(), grid)

    @property
    def components(self):
        return (self.u, self.v, self.w)

    def __add__(self, other):
        if other.grid != self.grid:
            raise ValueError("cannot add velocity fields on different grids")
        return VelocityField(
            self.u + other.u, self.v + other.v, self.w + other.w, self.grid,
            [a + b for a, b in zip(self.faces, other.faces)],
        )


def pad(values, grid, depth=GHOST_DEPTH):
    """Copy of ``values`` with ``depth`` ghost layers (none along an inert z)."""
    out = values
    for axis in range(3):
        if axis == 2 and grid.nz == 1:
            continue
        width = [(0, 0)] * 3
        width[axis] = (depth, depth)
        mode = "wrap" if grid.bc[axis] == PERIODIC else "edge"
        out = np.pad(out, width, mode=mode)
    return out


def face_average(comp, grid, axis):
    """Arithmetic mean of the two cell values adjacent to each face along ``axis``."""
    if axis == 2 and grid.nz == 1:
        return np.zeros((grid.nx, grid.ny, 2))
    a = np.moveaxis(comp, axis, 0)
    out = np.empty((a.shape[0] + 1,) + a.shape[1:])
    out[1:-1] = 0.5 * (a[:-1] + a[1:])
    if grid.bc[axis] == PERIODIC:
        out[0] = out[-1] = 0.5 * (a[0] + a[-1])
    else:
        out[0] = a[0]
        out[-1] = a[-1]
    return np.moveaxis(out, 0, axis)


def _wrap_index(idx, n, kind):
    if 0 <= idx < n:
        return idx
    depth = -idx if idx < 0 else idx - n + 1
    if depth > GHOST_DEPTH:
        raise IndexError(f"ghost depth {depth} exceeds {GHOST_DEPTH}")
    if kind == PERIODIC:
        return idx % n
    return 0 if idx < 0 else n - 1


def ghost_value(field, i, j, k=0):
    """Value of ``field`` at a possibly out-of-range index (depth at most 2)."""
    g = field.grid
    idx = tuple(_wrap_index(q, n, b) for q, n, b in zip((i, j, k), g.shape, g.bc))
    return field.values[idx]


def total_volume(field):
    return float(field.values.sum() * field.grid.cell_volume)


def gradient_cc(field):
    """Central-difference gradient of C at cell centers -> ``(gx, gy, gz)``."""
    return gradient_array(field.values, field.grid)


def gradient_array(values, grid):
    out = tuple(np.zeros(grid.shape) for _ in range(3))
    px, py, pz = (b == PERIODIC for b in grid.bc)
    _gradient_kernel(np.ascontiguousarray(values, np.float64), px, py, pz, grid.ndim == 3,
                     grid.dx, grid.dy, grid.dz, *out)
    return out


@njit(cache=True)
def _neighbour(idx, n, periodic):
    if idx < 0:
        return n - 1 if periodic else 0
    if idx >= n:
        return 0 if periodic else n - 1
    return idx


@njit(cache=True)
def _gradient_kernel(c, px, py, pz, three_d, dx, dy, dz, gx, gy, gz):
    nx, ny, nz = c.shape
    for i in range(nx):
        im, ip = _neighbour(i - 1, nx, px), _neighbour(i + 1, nx, px)
        for j in range(ny):
            jm, jp = _neighbour(j - 1, ny, py), _neighbour(j + 1, ny, py)
            for k in range(nz):
                gx[i, j, k] = (c[ip, j, k] - c[im, j, k]) / (2.0 * dx)
                gy[i, j, k] = (c[i, jp, k] - c[i, jm, k]) / (2.0 * dy)
                if three_d:
                    km, kp = _neighbour(k - 1, nz, pz), _neighbour(k + 1, nz, pz)
                    gz[i, j, k] = (c[i, j, kp] - c[i, j, km]) / (2.0 * dz)
