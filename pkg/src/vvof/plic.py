"""PLIC interface reconstruction.

Youngs corner-averaged normals and the analytic volume <-> plane-constant
relations of Scardovelli & Zaleski for a plane ``m . x = alpha`` cutting the
unit cube.  The public functions take the plane constant in the *reflected*
frame: normal components made non-negative and normalised to sum 1, so that
``alpha`` lies in ``[0, 1]`` and the reference fluid sits on the side
``m' . x' <= alpha``.

The scalar kernels are numba-compiled; ``advect`` calls them from inside its
own sweep loops.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

MIN_COMPONENT = 1e-12


class DegenerateNormalError(ValueError):
    """Raised for a zero normal, for which no plane orientation exists."""


@njit(cache=True)
def _sort3(a, b, c):
    if a > b:
        a, b = b, a
    if b > c:
        b, c = c, b
    if a > b:
        a, b = b, a
    return a, b, c


@njit(cache=True)
def _vol_half(m1, m2, m3, a):
    """Volume below ``a`` for sorted m1 <= m2 <= m3 (sum 1), ``a`` in [0, 1/2].

    The expansions around m1 avoid the cancellation of the textbook cubic
    when the smallest component is tiny.
    """
    if a <= 0.0:
        return 0.0
    m12 = m1 + m2
    if a < m1:
        return a * a * a / (6.0 * m1 * m2 * m3)
    if a < m2:
        return a * (a - m1) / (2.0 * m2 * m3) + m1 * m1 / (6.0 * m2 * m3)
    if a < m3 and a < m12:
        d2 = a - m2
        return ((3.0 * a * a - 3.0 * a * m1 + m1 * m1) / (6.0 * m2 * m3)
                - d2 * d2 * d2 / (6.0 * m1 * m2 * m3))
    if m3 < m12:
        d2 = a - m2
        d3 = a - m3
        return ((3.0 * a * a - 3.0 * a * m1 + m1 * m1) / (6.0 * m2 * m3)
                - (d2 * d2 * d2 + d3 * d3 * d3) / (6.0 * m1 * m2 * m3))
    return (2.0 * a - m12) / (2.0 * m3)


@njit(cache=True)
def _dvol_half(m1, m2, m3, a):
    if a <= 0.0:
        return 0.0
    m12 = m1 + m2
    if a < m1:
        return a * a / (2.0 * m1 * m2 * m3)
    if a < m2:
        return (2.0 * a - m1) / (2.0 * m2 * m3)
    if a < m3 and a < m12:
        d2 = a - m2
        return (2.0 * a - m1) / (2.0 * m2 * m3) - d2 * d2 / (2.0 * m1 * m2 * m3)
    if m3 < m12:
        d2 = a - m2
        d3 = a - m3
        return (2.0 * a - m1) / (2.0 * m2 * m3) - (d2 * d2 + d3 * d3) / (2.0 * m1 * m2 * m3)
    return 1.0 / (2.0 * m3)


@njit(cache=True)
def vol_sorted(m1, m2, m3, alpha):
    """Cut volume for sorted, normalised, positive components."""
    if alpha <= 0.0:
        return 0.0
    if alpha >= 1.0:
        return 1.0
    if alpha <= 0.5:
        return _vol_half(m1, m2, m3, alpha)
    return 1.0 - _vol_half(m1, m2, m3, 1.0 - alpha)


@njit(cache=True)
def alpha_sorted(m1, m2, m3, c):
    """Plane constant enclosing volume ``c``; sorted, normalised components."""
    if c <= 0.0:
        return 0.0
    if c >= 1.0:
        return 1.0
    ch = min(c, 1.0 - c)
    m12 = m1 + m2
    v1 = _vol_half(m1, m2, m3, m1)
    v2 = _vol_half(m1, m2, m3, m2)
    if m3 < m12:
        v3 = _vol_half(m1, m2, m3, min(m3, 0.5))
    else:
        v3 = _vol_half(m1, m2, m3, min(m12, 0.5))
    if ch < v1:
        a = (6.0 * m1 * m2 * m3 * ch) ** (1.0 / 3.0)
    elif ch < v2:
        a = 0.5 * (m1 + math.sqrt(m1 * m1 + 8.0 * m2 * m3 * (ch - v1)))
    elif ch < v3:
        p12 = math.sqrt(2.0 * m1 * m2)
        q = 3.0 * (m12 - 2.0 * m3 * ch) / (4.0 * p12)
        q = min(1.0, max(-1.0, q))
        cs = math.cos(math.acos(q) / 3.0)
        a = p12 * (math.sqrt(3.0 * (1.0 - cs * cs)) - cs) + m12
    elif m12 <= m3:
        a = m3 * ch + 0.5 * m12
    else:
        p = m1 * (m2 + m3) + m2 * m3 - 0.25
        p12 = math.sqrt(p)
        q = 3.0 * m1 * m2 * m3 * (0.5 - ch) / (2.0 * p * p12)
        q = min(1.0, max(-1.0, q))
        cs = math.cos(math.acos(q) / 3.0)
        a = p12 * (math.sqrt(3.0 * (1.0 - cs * cs)) - cs) + 0.5
    # Newton polish on the stable volume expression, bracketed in [0, 1/2]
    lo = 0.0
    hi = 0.5
    a = min(max(a, lo), hi)
    for _ in range(60):
        f = _vol_half(m1, m2, m3, a) - ch
        if f == 0.0:
            break
        if f > 0.0:
            hi = a
        else:
            lo = a
        d = _dvol_half(m1, m2, m3, a)
        nxt = a - f / d if d > 0.0 else 0.5 * (lo + hi)
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        if abs(nxt - a) <= 1e-17:
            a = nxt
            break
        a = nxt
    if c > 0.5:
        a = 1.0 - a
    return a


@njit(cache=True)
def _normalise(mx, my, mz):
    ax = max(abs(mx), MIN_COMPONENT)
    ay = max(abs(my), MIN_COMPONENT)
    az = max(abs(mz), MIN_COMPONENT)
    s = ax + ay + az
    return ax / s, ay / s, az / s


@njit(cache=True)
def plane_from_fraction(mx, my, mz, c):
    """Signed normalised normal and cell-frame plane constant for fraction ``c``.

    The returned plane satisfies ``nx*x + ny*y + nz*z <= alpha`` inside the
    reference fluid, with x measured from the cell's low corner in cell units.
    """
    ax, ay, az = _normalise(mx, my, mz)
    nx = ax if mx >= 0.0 else -ax
    ny = ay if my >= 0.0 else -ay
    nz = az if mz >= 0.0 else -az
    m1, m2, m3 = _sort3(ax, ay, az)
    a = alpha_sorted(m1, m2, m3, c)
    # back from the reflected frame: each negative component shifts alpha
    shift = 0.0
    if nx < 0.0:
        shift += ax
    if ny < 0.0:
        shift += ay
    if nz < 0.0:
        shift += az
    return nx, ny, nz, a - shift


@njit(cache=True)
def slab_volume(nx, ny, nz, alpha, x0, x1, axis):
    """Fluid volume (cell units) in ``x0 <= x_axis <= x1`` below a cell-frame plane."""
    w = x1 - x0
    if w <= 0.0:
        return 0.0
    if axis == 0:
        a = alpha - nx * x0
        nx = nx * w
    elif axis == 1:
        a = alpha - ny * x0
        ny = ny * w
    else:
        a = alpha - nz * x0
        nz = nz * w
    ax = max(abs(nx), MIN_COMPONENT)
    ay = max(abs(ny), MIN_COMPONENT)
    az = max(abs(nz), MIN_COMPONENT)
    if nx < 0.0:
        a += ax
    if ny < 0.0:
        a += ay
    if nz < 0.0:
        a += az
    s = ax + ay + az
    m1, m2, m3 = _sort3(ax / s, ay / s, az / s)
    return w * vol_sorted(m1, m2, m3, a / s)


@njit(cache=True)
def youngs_padded(p, i, j, k, dx, dy, dz, three_d):
    """Youngs normal ``m = -grad C`` at padded index (i, j, k).

    Closed form of the corner average: (1, 2, 1) weights across the
    transverse directions.
    """
    if not three_d:
        mx = -(p[i + 1, j + 1, k] + 2.0 * p[i + 1, j, k] + p[i + 1, j - 1, k]
               - p[i - 1, j + 1, k] - 2.0 * p[i - 1, j, k] - p[i - 1, j - 1, k]) / (8.0 * dx)
        my = -(p[i + 1, j + 1, k] + 2.0 * p[i, j + 1, k] + p[i - 1, j + 1, k]
               - p[i + 1, j - 1, k] - 2.0 * p[i, j - 1, k] - p[i - 1, j - 1, k]) / (8.0 * dy)
        return mx, my, 0.0
    mx = 0.0
    my = 0.0
    mz = 0.0
    for b in range(-1, 2):
        wb = 2.0 if b == 0 else 1.0
        for c in range(-1, 2):
            wc = 2.0 if c == 0 else 1.0
            w = wb * wc
            mx += w * (p[i + 1, j + b, k + c] - p[i - 1, j + b, k + c])
            my += w * (p[i + b, j + 1, k + c] - p[i + b, j - 1, k + c])
            mz += w * (p[i + b, j + c, k + 1] - p[i + b, j + c, k - 1])
    return -mx / (32.0 * dx), -my / (32.0 * dy), -mz / (32.0 * dz)


# ---------------------------------------------------------------------------
# Python-level API
# ---------------------------------------------------------------------------

def _as3(m):
    m = np.asarray(m, dtype=np.float64).ravel()
    if m.size == 2:
        m = np.array([m[0], m[1], 0.0])
    if m.size != 3:
        raise ValueError("normal must have 2 or 3 components")
    if not np.any(m):
        raise DegenerateNormalError("zero normal has no interface orientation")
    return m


def reflected_normal(m):
    """Non-negative components of ``m`` (clamped at 1e-12) normalised to sum 1."""
    m = _as3(m)
    return np.array(_normalise(m[0], m[1], m[2]))


def alpha_from_volume(m, c):
    """Plane constant (reflected frame) whose cut of the unit cube has volume ``c``."""
    m = _as3(m)
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"volume fraction {c} outside [0, 1]")
    m1, m2, m3 = _sort3(*_normalise(m[0], m[1], m[2]))
    return float(alpha_sorted(m1, m2, m3, float(c)))


def volume_from_alpha(m, alpha):
    """Volume of ``{x in unit cube : m'.x <= alpha}`` with ``m'`` the reflected normal."""
    m = _as3(m)
    m1, m2, m3 = _sort3(*_normalise(m[0], m[1], m[2]))
    return float(vol_sorted(m1, m2, m3, float(alpha)))


def cut_volume(m, alpha, x0, x1, axis):
    """Volume of the reconstructed fluid within the slab ``x0 <= x_axis <= x1``.

    ``m`` and ``alpha`` are as for :func:`volume_from_alpha`; the slab bounds
    are in the cell's own frame (unit cell, low corner at the origin).
    """
    m = _as3(m)
    if not 0.0 <= x0 <= x1 <= 1.0:
        raise ValueError("slab bounds must satisfy 0 <= x0 <= x1 <= 1")
    a = np.array(_normalise(m[0], m[1], m[2]))
    n = np.where(m >= 0.0, a, -a)
    cell_alpha = alpha - a[m < 0.0].sum()
    return float(slab_volume(n[0], n[1], n[2], cell_alpha, float(x0), float(x1), int(axis)))


def youngs_normal(field, cell):
    """Youngs normal estimate ``m = -grad C`` for one cell, ghost cells included.

    Corner normals are formed from the 2x2 (2D) or 2x2x2 (3D) blocks of
    cells sharing each corner and then averaged.
    """
    from .grid import ghost_value

    g = field.grid
    i, j = cell[0], cell[1]
    k = cell[2] if len(cell) > 2 else 0
    val = lambda a, b, c=0: ghost_value(field, i + a, j + b, k + c)  # noqa: E731
    if g.ndim == 2:
        corners = []
        for sx in (0, -1):
            for sy in (0, -1):
                # corner block spans offsets {sx, sx+1} x {sy, sy+1}
                c00 = val(sx, sy)
                c10 = val(sx + 1, sy)
                c01 = val(sx, sy + 1)
                c11 = val(sx + 1, sy + 1)
                mx = -(c11 + c10 - c01 - c00) / (2.0 * g.dx)
                my = -(c11 - c10 + c01 - c00) / (2.0 * g.dy)
                corners.append((mx, my))
        mx, my = np.mean(corners, axis=0)
        return np.array([mx, my, 0.0])
    corners = []
    for sx in (0, -1):
        for sy in (0, -1):
            for sz in (0, -1):
                blk = np.array([[[val(sx + a, sy + b, sz + c) for c in (0, 1)]
                                 for b in (0, 1)] for a in (0, 1)])
                mx = -(blk[1].sum() - blk[0].sum()) / (4.0 * g.dx)
                my = -(blk[:, 1].sum() - blk[:, 0].sum()) / (4.0 * g.dy)
                mz = -(blk[:, :, 1].sum() - blk[:, :, 0].sum()) / (4.0 * g.dz)
                corners.append((mx, my, mz))
    return np.mean(corners, axis=0)
