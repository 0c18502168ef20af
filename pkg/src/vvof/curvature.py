"""Height-function curvature and the interface-mean curvature.

Heights are column sums of C along the dominant direction of the Youngs
normal.  A column must hold the whole interface crossing (full at one end,
empty at the other); 3-cell columns are tried first and are lengthened to 5
or 7 cells when they fall short, which happens where the interface is steep
relative to the dominant axis.  Positions are measured from a common base so
that columns of different length can be differenced.  A convex blob of
reference fluid has ``kappa > 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .advect import DEFAULT_EPS
from .grid import PERIODIC, gradient_array, pad
from .plic import youngs_padded

POLYNOMIAL = "polynomial"
GRADIENT = "gradient"
DELTA_KINDS = (POLYNOMIAL, GRADIENT)
# a column end counts as full/empty within this tolerance
COLUMN_TOL = 0.5
# curvature magnitudes above this many inverse cells are clipped in motion
KAPPA_LIMIT = 1.0


class InterfaceVanished(RuntimeError):
    """No valid interface cell is left to define the mean curvature."""


@dataclass
class CurvatureField:
    kappa: np.ndarray     # NaN where undefined
    valid: np.ndarray     # mixed cell with a complete column stencil
    mixed: np.ndarray
    dominant: np.ndarray  # dominant axis per mixed cell, -1 elsewhere
    h: float = 1.0        # smallest active cell size

    @property
    def max_kappa_dx(self):
        k = self.kappa[self.valid]
        return float(np.abs(k).max() * self.h) if k.size else 0.0

    def values(self):
        return self.kappa[self.valid]

    def limited(self, kappa_dx):
        """Copy with ``|kappa| <= kappa_dx / h``.

        Height stencils cannot resolve radii of curvature much below a cell,
        so larger values (sharp edges, vertices) only reflect the stencil.
        """
        bound = kappa_dx / self.h
        return replace(self, kappa=np.clip(self.kappa, -bound, bound))


# columns start at 3 cells and grow to at most 2 * MAX_HALF_COLUMN + 1
MAX_HALF_COLUMN = 3
_PAD = MAX_HALF_COLUMN


@njit(cache=True)
def _at(p, ci, cj, ck, axis, l, gz):
    if axis == 0:
        return p[ci + l + _PAD, cj + _PAD, ck + gz]
    if axis == 1:
        return p[ci + _PAD, cj + l + _PAD, ck + gz]
    return p[ci + _PAD, cj + _PAD, ck + l + gz]


@njit(cache=True)
def _column_position(p, ci, cj, ck, axis, gz, orient, tol, ia, n, periodic, da):
    """Interface position along ``axis`` in a column through (ci, cj, ck).

    The column grows symmetrically from 3 cells until its end cells are
    full on the fluid side and empty on the other.  The position is measured
    from the lower face of the centre cell's row.  NaN when no admissible
    column exists.
    """
    for m in range(1, MAX_HALF_COLUMN + 1):
        if not periodic and (ia - m < 0 or ia + m >= n):
            return np.nan
        lo = _at(p, ci, cj, ck, axis, -m, gz)
        hi = _at(p, ci, cj, ck, axis, m, gz)
        if orient > 0:
            ok = lo >= 1.0 - tol and hi <= tol
        else:
            ok = hi >= 1.0 - tol and lo <= tol
        if not ok:
            continue
        h = 0.0
        for l in range(-m, m + 1):
            h += _at(p, ci, cj, ck, axis, l, gz)
        h *= da
        if orient > 0:
            return -m * da + h
        return (m + 1) * da - h
    return np.nan


@njit(cache=True)
def _transverse_ok(i, j, k, a, n, per, three_d):
    # the neighbouring columns must exist across the transverse axes
    for d in range(3 if three_d else 2):
        if d == a or per[d]:
            continue
        idx = i if d == 0 else (j if d == 1 else k)
        if idx - 1 < 0 or idx + 1 >= n[d]:
            return False
    return True


@njit(cache=True)
def _curvature_kernel(c, p, dx, dy, dz, eps, tol, px, py, pz, three_d, literal, kappa, valid, mixed, dom):
    nx, ny, nz = c.shape
    gz = _PAD if three_d else 0
    n = (nx, ny, nz)
    per = (px, py, pz)
    sp = (dx, dy, dz)
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                v = c[i, j, k]
                if not (eps < v < 1.0 - eps):
                    continue
                mixed[i, j, k] = True
                mx, my, mz = youngs_padded(p, i + _PAD, j + _PAD, k + gz, dx, dy, dz, three_d)
                ax, ay, az = abs(mx), abs(my), abs(mz)
                if ax == 0.0 and ay == 0.0 and az == 0.0:
                    continue
                if three_d:
                    if ax >= ay and ax >= az:
                        a = 0
                    elif ay >= az:
                        a = 1
                    else:
                        a = 2
                else:
                    a = 0 if ax >= ay else 1
                dom[i, j, k] = a
                if not _transverse_ok(i, j, k, a, n, per, three_d):
                    continue
                m_a = mx if a == 0 else (my if a == 1 else mz)
                orient = 1 if m_a > 0 else -1
                ia = i if a == 0 else (j if a == 1 else k)
                da = sp[a]
                if not three_d:
                    t = 1 - a
                    dt_ = sp[t]
                    h = np.empty(3)
                    for o in range(-1, 2):
                        ci, cj = i, j
                        if t == 0:
                            ci += o
                        else:
                            cj += o
                        h[o + 1] = _column_position(p, ci, cj, k, a, gz, orient, tol, ia, n[a], per[a], da)
                    if np.isnan(h[0]) or np.isnan(h[1]) or np.isnan(h[2]):
                        continue
                    hx = (h[2] - h[0]) / (2.0 * dt_)
                    hxx = (h[2] - 2.0 * h[1] + h[0]) / (dt_ * dt_)
                    kappa[i, j, k] = -orient * hxx / (1.0 + hx * hx) ** 1.5
                    valid[i, j, k] = True
                    continue
                t1 = 1 if a == 0 else 0
                t2 = 1 if a == 2 else 2
                d1 = sp[t1]
                d2 = sp[t2]
                h = np.empty((3, 3))
                ok = True
                for o1 in range(-1, 2):
                    for o2 in range(-1, 2):
                        ci, cj, ck = i, j, k
                        if t1 == 0:
                            ci += o1
                        else:
                            cj += o1
                        if t2 == 1:
                            cj += o2
                        else:
                            ck += o2
                        h[o1 + 1, o2 + 1] = _column_position(p, ci, cj, ck, a, gz, orient, tol,
                                                             ia, n[a], per[a], da)
                        if np.isnan(h[o1 + 1, o2 + 1]):
                            ok = False
                if not ok:
                    continue
                h1 = (h[2, 1] - h[0, 1]) / (2.0 * d1)
                h2 = (h[1, 2] - h[1, 0]) / (2.0 * d2)
                h11 = (h[2, 1] - 2.0 * h[1, 1] + h[0, 1]) / (d1 * d1)
                h22 = (h[1, 2] - 2.0 * h[1, 1] + h[1, 0]) / (d2 * d2)
                h12 = (h[2, 2] - h[2, 0] - h[0, 2] + h[0, 0]) / (4.0 * d1 * d2)
                num = h11 + h22 + h11 * h2 * h2 + h22 * h1 * h1 - 2.0 * h12 * h1 * h2
                base = 1.0 + h1 * h1 + (h2 if literal else h2 * h2)
                if base <= 0.0:
                    continue
                kappa[i, j, k] = -orient * num / base ** 1.5
                valid[i, j, k] = True


def height_column(field, cell, axis):
    """Fluid height in the 3-cell column centred on ``cell`` along ``axis``.

    Raises ``IndexError`` when the column leaves a non-periodic domain.
    """
    g = field.grid
    cell = tuple(cell) + (0,) * (3 - len(cell))
    total = 0.0
    for l in (-1, 0, 1):
        idx = list(cell)
        idx[axis] += l
        if not 0 <= idx[axis] < g.shape[axis]:
            if g.bc[axis] != PERIODIC:
                raise IndexError("height column leaves the domain")
            idx[axis] %= g.shape[axis]
        total += field.values[tuple(idx)]
    return total * g.spacing[axis]


def compute_curvature(field, eps=DEFAULT_EPS, literal_denominator=False, column_tol=COLUMN_TOL):
    """Height-function curvature in every mixed cell of ``field``."""
    g = field.grid
    three_d = g.ndim == 3
    p = np.ascontiguousarray(pad(field.values, g, _PAD))
    px, py, pz = (b == PERIODIC for b in g.bc)
    kappa = np.full(g.shape, np.nan)
    valid = np.zeros(g.shape, bool)
    mixed = np.zeros(g.shape, bool)
    dom = np.full(g.shape, -1, np.int8)
    _curvature_kernel(field.values, p, g.dx, g.dy, g.dz, eps, column_tol, px, py, pz, three_d,
                      literal_denominator, kappa, valid, mixed, dom)
    h = min(g.spacing[a] for a in g.active_axes())
    return CurvatureField(kappa, valid, mixed, dom, h)


def curvature_2d(field, cell, eps=DEFAULT_EPS):
    """Curvature of one mixed cell of a 2D field (NaN when undefined)."""
    if field.grid.ndim != 2:
        raise ValueError("curvature_2d needs a 2D grid")
    return float(compute_curvature(field, eps).kappa[cell[0], cell[1], 0])


def curvature_3d(field, cell, eps=DEFAULT_EPS, literal_denominator=False):
    """Mean curvature (sum of principal curvatures) of one mixed cell in 3D."""
    if field.grid.ndim != 3:
        raise ValueError("curvature_3d needs a 3D grid")
    return float(compute_curvature(field, eps, literal_denominator).kappa[tuple(cell)])


@njit(cache=True)
def _bfs_fill(kappa, valid, band, px, py, pz, three_d):
    nx, ny, nz = kappa.shape
    total = nx * ny * nz
    out = kappa.copy()
    seen = np.zeros(total, np.bool_)
    queue = np.empty(total, np.int64)
    head = 0
    tail = 0
    for idx in range(total):
        i = idx // (ny * nz)
        j = (idx // nz) % ny
        k = idx % nz
        if valid[i, j, k]:
            seen[idx] = True
            queue[tail] = idx
            tail += 1
    ndir = 6 if three_d else 4
    while head < tail:
        idx = queue[head]
        head += 1
        i = idx // (ny * nz)
        j = (idx // nz) % ny
        k = idx % nz
        for d in range(ndir):
            a, b, q = i, j, k
            if d == 0:
                a -= 1
            elif d == 1:
                a += 1
            elif d == 2:
                b -= 1
            elif d == 3:
                b += 1
            elif d == 4:
                q -= 1
            else:
                q += 1
            if a < 0 or a >= nx:
                if not px:
                    continue
                a %= nx
            if b < 0 or b >= ny:
                if not py:
                    continue
                b %= ny
            if q < 0 or q >= nz:
                if not pz:
                    continue
                q %= nz
            nidx = (a * ny + b) * nz + q
            if seen[nidx] or not band[a, b, q]:
                continue
            seen[nidx] = True
            out[a, b, q] = out[i, j, k]
            queue[tail] = nidx
            tail += 1
    reached = seen.reshape((nx, ny, nz))
    return out, reached


def extend_curvature(kf, band, grid):
    """Give every ``band`` cell the curvature of its nearest valid cell.

    Breadth-first over face neighbours inside the band, seeded in index
    order, so ties go to the lower-index source.  Returns the filled array
    and a mask of the band cells that were reached.
    """
    px, py, pz = (b == PERIODIC for b in grid.bc)
    k = np.where(kf.valid, kf.kappa, 0.0)
    return _bfs_fill(k, kf.valid, band | kf.valid, px, py, pz, grid.ndim == 3)


def dirac_delta(c, kind=POLYNOMIAL, grid=None):
    if kind == POLYNOMIAL:
        return 4.0 * c * (1.0 - c)
    if kind == GRADIENT:
        if grid is None:
            raise ValueError("gradient delta needs the grid")
        gx, gy, gz = gradient_array(c, grid)
        return np.sqrt(gx * gx + gy * gy + gz * gz)
    raise ValueError(f"unknown delta kind {kind!r}; expected one of {DELTA_KINDS}")


VALID_CELLS = "valid"
INTERFACE_CELLS = "interface"


def mean_curvature(field, kf, delta_kind=POLYNOMIAL, cells=INTERFACE_CELLS):
    """Delta-weighted mean of kappa over interface cells.

    ``cells="valid"`` averages over the cells with a complete height stencil
    only.  ``cells="interface"`` averages over every mixed cell, those without
    a stencil carrying the curvature inherited from their nearest valid cell,
    which is the value that drives them.
    """
    if not kf.valid.any():
        raise InterfaceVanished("no valid interface cell")
    if cells == VALID_CELLS:
        mask, kappa = kf.valid, kf.kappa
    elif cells == INTERFACE_CELLS:
        kappa, reached = extend_curvature(kf, kf.mixed, field.grid)
        mask = kf.mixed & reached
    else:
        raise ValueError(f"unknown cell selection {cells!r}")
    w = dirac_delta(field.values, delta_kind, field.grid)[mask]
    total = w.sum()
    if not total > 0:
        raise InterfaceVanished("interface weight vanished")
    return float((kappa[mask] * w).sum() / total)
