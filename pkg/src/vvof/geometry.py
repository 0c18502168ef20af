"""Implicit shapes (negative inside the reference fluid) and their voxelization."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from .grid import ColorField
from .plic import _sort3, vol_sorted

SUBDIVISION_DEPTH = 4


class ShapeError(ValueError):
    pass


@dataclass
class ImplicitShape:
    kind: str
    params: dict
    func: Callable = field(repr=False)

    def evaluate(self, x, y, z=0.0):
        x, y, z = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(z, float))
        return self.func(x, y, z)

    def complement(self):
        return ImplicitShape("complement", {"of": self}, lambda x, y, z: -self.func(x, y, z))


def shape_union(shapes):
    """Pointwise minimum of the member level sets."""
    shapes = list(shapes)
    if not shapes:
        raise ShapeError("shape_union needs at least one shape")
    if len(shapes) == 1:
        return shapes[0]

    def func(x, y, z):
        out = shapes[0].func(x, y, z)
        for s in shapes[1:]:
            out = np.minimum(out, s.func(x, y, z))
        return out

    return ImplicitShape("union", {"members": shapes}, func)


def _center(p, n=3):
    c = tuple(float(v) for v in p.get("center", (0.0,) * n))
    return c + (0.0,) * (3 - len(c))


def _positive(p, *names):
    for name in names:
        if name not in p:
            raise ShapeError(f"missing shape parameter {name!r}")
        if not float(p[name]) > 0:
            raise ShapeError(f"shape parameter {name!r} must be > 0, got {p[name]!r}")


def _sphere(p):
    _positive(p, "r")
    cx, cy, cz = _center(p)
    r = float(p["r"])
    return lambda x, y, z: np.sqrt((x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2) - r


def _disc(p):
    _positive(p, "r")
    cx, cy, _ = _center(p)
    r = float(p["r"])
    return lambda x, y, z: np.hypot(x - cx, y - cy) - r


def _slotted_disc(p):
    _positive(p, "r", "slot_width", "slot_length")
    cx, cy, _ = _center(p)
    r, w, ln = float(p["r"]), float(p["slot_width"]), float(p["slot_length"])
    bottom = cy - r

    def func(x, y, z):
        disc = np.hypot(x - cx, y - cy) - r
        # slot opens through the bottom rim, towards the rotation centre
        slot = np.maximum(np.abs(x - cx) - 0.5 * w, np.maximum(y - (bottom + ln), (bottom - r) - y))
        return np.maximum(disc, -slot)

    return func


def _star(p):
    _positive(p, "A")
    k = p.get("K")
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 1:
        raise ShapeError(f"star petal count K must be an integer >= 1, got {k!r}")
    cx, cy, _ = _center(p)
    a, b = float(p["A"]), float(p.get("B", 0.0))

    def func(x, y, z):
        theta = np.arctan2(y - cy, x - cx)
        return np.hypot(x - cx, y - cy) - (a + b * np.cos(k * theta))

    return func


def spiral_points(p):
    """Sample points of the wound spiral, shape ``(n_p, 2)``."""
    n_p = int(p.get("n_p", 400))
    d, a, sf = float(p["D"]), float(p["a"]), float(p["s_f"])
    cx, cy, _ = _center(p)
    k = np.arange(n_p)
    s = (k + a) / (n_p + a)
    theta = 2.0 * np.pi * d * np.sqrt(s)
    rad = sf * d * np.sqrt(s) / (1.0 + d)
    return np.column_stack([cx + rad * np.cos(theta), cy + rad * np.sin(theta)])


def _spiral(p):
    _positive(p, "D", "s_f", "w")
    if int(p.get("n_p", 400)) < 2:
        raise ShapeError("spiral needs n_p >= 2")
    if float(p.get("a", 0.0)) < 0:
        raise ShapeError("spiral head constant a must be >= 0")
    tree = cKDTree(spiral_points(p))
    w = float(p["w"])

    def func(x, y, z):
        q = np.column_stack([x.ravel(), y.ravel()])
        d, _ = tree.query(q)
        return d.reshape(x.shape) - w

    return func


def _ellipsoid(p):
    _positive(p, "a", "b", "c")
    cx, cy, cz = _center(p)
    a, b, c = float(p["a"]), float(p["b"]), float(p["c"])
    return lambda x, y, z: ((x - cx) / a) ** 2 + ((y - cy) / b) ** 2 + ((z - cz) / c) ** 2 - 1.0


def _superellipsoid(p):
    _positive(p, "r")
    n = p.get("n")
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 2 or n % 2:
        raise ShapeError(f"superellipsoid exponent must be an even positive integer, got {n!r}")
    cx, cy, cz = _center(p)
    r = float(p["r"])
    return lambda x, y, z: ((x - cx) / r) ** n + ((y - cy) / r) ** n + ((z - cz) / r) ** n - 1.0


def _octahedron(p):
    _positive(p, "r")
    cx, cy, cz = _center(p)
    r = float(p["r"])
    return lambda x, y, z: np.abs(x - cx) + np.abs(y - cy) + np.abs(z - cz) - r


def _cylinder(p):
    """Infinite cylinder along ``axis`` (default z)."""
    _positive(p, "r")
    cx, cy, cz = _center(p)
    r = float(p["r"])
    axis = p.get("axis", "z")
    if axis == "z":
        return lambda x, y, z: np.hypot(x - cx, y - cy) - r
    if axis == "x":
        return lambda x, y, z: np.hypot(y - cy, z - cz) - r
    if axis == "y":
        return lambda x, y, z: np.hypot(x - cx, z - cz) - r
    raise ShapeError(f"cylinder axis must be x, y or z, got {axis!r}")


def _halfspace(p):
    nrm = np.asarray(p.get("normal", (1.0, 0.0, 0.0)), float)
    nrm = np.concatenate([nrm, np.zeros(3 - nrm.size)])
    if not np.any(nrm):
        raise ShapeError("halfspace normal must be non-zero")
    off = float(p.get("offset", 0.0))
    return lambda x, y, z: nrm[0] * x + nrm[1] * y + nrm[2] * z - off


def _dumbbell(p):
    _positive(p, "r", "w", "o")
    cx, cy, cz = _center(p)
    r, w, o = float(p["r"]), float(p["w"]), float(p["o"])

    def func(x, y, z):
        right = np.sqrt((x - cx + o) ** 2 + (y - cy) ** 2 + (z - cz) ** 2) - r
        left = np.sqrt((x - cx - o) ** 2 + (y - cy) ** 2 + (z - cz) ** 2) - r
        bar = np.maximum(np.abs(x - cx) - o, np.sqrt((y - cy) ** 2 + (z - cz) ** 2) - w)
        return np.minimum(np.minimum(right, left), bar)

    return func


def _spheroids(p):
    for i in (1, 2, 3):
        _positive(p, f"a{i}", f"c{i}")
    cx, cy, cz = _center(p)
    a1, a2, a3 = (float(p[f"a{i}"]) for i in (1, 2, 3))
    c1, c2, c3 = (float(p[f"c{i}"]) for i in (1, 2, 3))

    def func(x, y, z):
        X, Y, Z = x - cx, y - cy, z - cz
        sx = X ** 2 / a1 ** 2 + (Y ** 2 + Z ** 2) / c1 ** 2 - 1.0
        sy = (X ** 2 + Z ** 2) / a2 ** 2 + Y ** 2 / c2 ** 2 - 1.0
        sz = (X ** 2 + Y ** 2) / a3 ** 2 + Z ** 2 / c3 ** 2 - 1.0
        return np.minimum(np.minimum(sx, sy), sz)

    return func


_BUILDERS = {
    "disc": _disc,
    "sphere": _sphere,
    "slotted-disc": _slotted_disc,
    "star": _star,
    "spiral": _spiral,
    "ellipsoid": _ellipsoid,
    "superellipsoid": _superellipsoid,
    "octahedron": _octahedron,
    "cylinder": _cylinder,
    "halfspace": _halfspace,
    "dumbbell": _dumbbell,
    "spheroid-union": _spheroids,
}

SHAPE_KINDS = tuple(_BUILDERS)


def make_shape(kind, params=None, **kw):
    params = dict(params or {}, **kw)
    if kind not in _BUILDERS:
        raise ShapeError(f"unknown shape kind {kind!r}; expected one of {', '.join(SHAPE_KINDS)}")
    return ImplicitShape(kind, params, _BUILDERS[kind](params))


# ---------------------------------------------------------------------------
# voxelization
# ---------------------------------------------------------------------------

def _box_offsets(ndim):
    """Corner offsets of a unit box plus its centre, shape (2**ndim + 1, 3)."""
    if ndim == 2:
        pts = [(a, b, 0.5) for a in (0, 1) for b in (0, 1)]
    else:
        pts = [(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)]
    return np.array(pts + [(0.5, 0.5, 0.5)], float)


def _child_offsets(ndim):
    if ndim == 2:
        return np.array([(a, b, 0) for a in (0, 0.5) for b in (0, 0.5)], float)
    return np.array([(a, b, c) for a in (0, 0.5) for b in (0, 0.5) for c in (0, 0.5)], float)


def _classify(shape, lows, size, spacing, ndim, chunk=200_000):
    """Sign summary of each box: -1 all inside, +1 all outside, 0 mixed."""
    offs = _box_offsets(ndim)
    out = np.empty(len(lows), dtype=np.int8)
    for s in range(0, len(lows), chunk):
        lo = lows[s:s + chunk]
        pts = lo[:, None, :] + offs[None, :, :] * (size * spacing)[None, None, :]
        phi = shape.evaluate(pts[..., 0], pts[..., 1], pts[..., 2])
        inside = np.all(phi <= 0.0, axis=1)
        outside = np.all(phi >= 0.0, axis=1)
        out[s:s + chunk] = np.where(inside & ~outside, -1, np.where(outside & ~inside, 1, 0))
    return out


@njit(cache=True)
def _leaf_fractions(phi, ndim):
    """Inside fraction of each leaf box under the linearised level set.

    ``phi`` rows hold the corner values followed by the centre value, in the
    order of ``_box_offsets``.
    """
    n = phi.shape[0]
    ncorner = phi.shape[1] - 1
    out = np.empty(n)
    for r in range(n):
        g = np.zeros(3)
        for q in range(ncorner):
            bits = (q >> 1, q & 1, 0) if ndim == 2 else (q >> 2, (q >> 1) & 1, q & 1)
            for d in range(ndim):
                g[d] += phi[r, q] if bits[d] else -phi[r, q]
        g /= ncorner / 2
        pc = phi[r, ncorner]
        total = abs(g[0]) + abs(g[1]) + abs(g[2])
        if total == 0.0:
            out[r] = 1.0 if pc < 0.0 else 0.0
            continue
        # inside: sum g_d x_d < alpha on the unit box, reflected to g_d >= 0
        alpha = -pc + 0.5 * (g[0] + g[1] + g[2])
        for d in range(3):
            if g[d] < 0.0:
                alpha -= g[d]
        m = np.empty(3)
        for d in range(3):
            m[d] = max(abs(g[d]) / total, 1e-12)
        msum = m[0] + m[1] + m[2]
        m1, m2, m3 = _sort3(m[0] / msum, m[1] / msum, m[2] / msum)
        out[r] = vol_sorted(m1, m2, m3, alpha / total)
    return out


def voxelize(shape, grid, depth=SUBDIVISION_DEPTH):
    """Volume fraction of ``shape`` in every cell of ``grid``.

    Cells whose corners and centre share a sign are bulk.  Mixed cells are
    split at their midpoints recursively; boxes of uniform sign contribute
    their whole volume.  At ``depth`` each leaf takes the exact volume under
    the plane that linearises the level set over the leaf.
    """
    ndim = grid.ndim
    spacing = np.array(grid.spacing, float)
    origin = np.array(grid.origin, float)
    if ndim == 2:
        spacing[2] = 0.0
        origin[2] = 0.0

    values = np.empty(grid.shape)
    mixed = [np.zeros((0, 3), np.int64)]
    for i0 in range(0, grid.nx, _slab_width(grid)):
        i1 = min(i0 + _slab_width(grid), grid.nx)
        inside, outside = _coarse_signs(shape, grid, i0, i1)
        values[i0:i1] = inside
        cut = np.argwhere(~inside & ~outside)
        cut[:, 0] += i0
        mixed.append(cut)
    mixed = np.concatenate(mixed)

    # bound the leaf count held at once, whatever the number of mixed cells
    step = max(1, _LEAF_BUDGET // (2 ** ndim) ** depth)
    for s in range(0, len(mixed), step):
        cells = mixed[s:s + step]
        frac = _mixed_fractions(shape, cells, origin, spacing, ndim, depth)
        values[tuple(cells.T)] = np.clip(frac, 0.0, 1.0)
    return ColorField(values, grid)


_LEAF_BUDGET = 1 << 21


def _slab_width(grid):
    return max(1, (1 << 22) // ((grid.ny + 1) * (grid.nz + 1)))


def _coarse_signs(shape, grid, i0, i1):
    """Bulk masks for cells ``i0:i1`` from their corners and centres."""
    xs = [grid.faces(0)[i0:i1 + 1], grid.faces(1), grid.faces(2)]
    cs = [grid.centers(0)[i0:i1], grid.centers(1), grid.centers(2)]
    if grid.ndim == 2:
        xs[2] = np.array([0.0, 0.0])
        cs[2] = np.array([0.0])
    corner = shape.evaluate(*np.meshgrid(*xs, indexing="ij"))
    centre = shape.evaluate(*np.meshgrid(*cs, indexing="ij"))
    n = (i1 - i0, grid.ny, grid.nz)
    le = centre <= 0.0
    ge = centre >= 0.0
    for a in (0, 1):
        for b in (0, 1):
            for c in (0, 1):
                block = corner[a:a + n[0], b:b + n[1], c:c + n[2]]
                le &= block <= 0.0
                ge &= block >= 0.0
    return le & ~ge, ge & ~le


def _mixed_fractions(shape, cells, origin, spacing, ndim, depth):
    lows = origin[None, :] + cells * np.where(spacing > 0, spacing, 1.0)[None, :]
    if ndim == 2:
        lows[:, 2] = 0.0
    owner = np.arange(len(cells))
    frac = np.zeros(len(cells))
    nchild = 2 ** ndim
    child = _child_offsets(ndim)
    size = 1.0
    # first level boxes are the mixed cells themselves; start by splitting them
    for level in range(1, depth + 1):
        size *= 0.5
        lows = (lows[:, None, :] + child[None, :, :] * (2 * size) * spacing[None, None, :]).reshape(-1, 3)
        owner = np.repeat(owner, nchild)
        weight = size ** ndim
        if level == depth:
            offs = _box_offsets(ndim)
            pts = lows[:, None, :] + offs[None, :, :] * (size * spacing)[None, None, :]
            phi = shape.evaluate(pts[..., 0], pts[..., 1], pts[..., 2])
            np.add.at(frac, owner, weight * _leaf_fractions(np.ascontiguousarray(phi, float), ndim))
            break
        cls = _classify(shape, lows, size, spacing, ndim)
        np.add.at(frac, owner[cls == -1], weight)
        keep = cls == 0
        lows, owner = lows[keep], owner[keep]
        if len(lows) == 0:
            break
    return frac
