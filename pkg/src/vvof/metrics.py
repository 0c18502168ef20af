"""Field errors, convergence orders, interface extraction and time-series diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _graph_components

from .grid import gradient_cc


class ContourError(ValueError):
    pass


def l1_error(a, b):
    """Mean absolute cell difference between two fields on the same grid."""
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    return float(np.abs(a.values - b.values).mean())


def convergence_order(errors):
    """Pairwise orders for ``[(N, L1), ...]`` on successively doubled grids.

    Positive means the error shrinks with refinement: ``log2(e_N / e_2N)``.
    """
    errors = sorted((int(n), float(e)) for n, e in errors)
    if len(errors) < 2:
        raise ValueError("need at least two (N, error) pairs")
    out = []
    for (n0, e0), (n1, e1) in zip(errors, errors[1:]):
        if n1 != 2 * n0:
            raise ValueError(f"grid sizes must double, got {n0} then {n1}")
        if e0 <= 0 or e1 <= 0:
            raise ValueError("errors must be positive to take logarithms")
        out.append(math.log(e0 / e1) / math.log(2.0))
    return out


def interface_energy(field):
    """Discrete interface measure ``sum |grad C| dV``."""
    gx, gy, gz = gradient_cc(field)
    return float(np.sqrt(gx * gx + gy * gy + gz * gz).sum() * field.grid.cell_volume)


# ---------------------------------------------------------------------------
# contours
# ---------------------------------------------------------------------------

@dataclass
class Polyline:
    points: np.ndarray  # (n, 2); a closed loop does not repeat its first point
    closed: bool

    @property
    def perimeter(self):
        p = np.vstack([self.points, self.points[:1]]) if self.closed else self.points
        return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())

    @property
    def area(self):
        """Signed shoelace area; positive when the high side is enclosed."""
        if not self.closed:
            raise ContourError("open contour has no enclosed area")
        x, y = self.points[:, 0], self.points[:, 1]
        return float(0.5 * (x * np.roll(y, -1) - np.roll(x, -1) * y).sum())


@dataclass
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    @property
    def area(self):
        v = self.vertices[self.faces]
        return float(0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1).sum())

    @property
    def volume(self):
        v = self.vertices[self.faces]
        return float(abs(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum()) / 6.0)

    def components(self):
        if len(self.faces) == 0:
            return 0
        n = len(self.vertices)
        f = self.faces
        rows = np.concatenate([f[:, 0], f[:, 1], f[:, 2]])
        cols = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
        graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        used = np.zeros(n, bool)
        used[f.ravel()] = True
        _, labels = _graph_components(graph, directed=False)
        return len(np.unique(labels[used]))


# corner order (0,0), (1,0), (1,1), (0,1) and the edge leaving each corner ccw
_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))


def _edge_key(i, j, e):
    # e: 0 bottom, 1 right, 2 top, 3 left of the dual cell with lower corner (i, j)
    if e == 0:
        return ("h", i, j)
    if e == 1:
        return ("v", i + 1, j)
    if e == 2:
        return ("h", i, j + 1)
    return ("v", i, j)


def _marching_squares(c, level):
    """Oriented segments (high side on the left) as pairs of edge keys, plus points."""
    hi = c > level
    corners = [hi[:-1, :-1], hi[1:, :-1], hi[1:, 1:], hi[:-1, 1:]]
    code = corners[0] * 1 + corners[1] * 2 + corners[2] * 4 + corners[3] * 8
    points = {}
    segments = []
    for i, j in np.argwhere((code > 0) & (code < 15)):
        vals = [c[i + a, j + b] for a, b in _CORNERS]
        high = [v > level for v in vals]
        down, up = [], []  # ccw crossings high->low and low->high
        for e in range(4):
            a, b = e, (e + 1) % 4
            if high[a] == high[b]:
                continue
            key = _edge_key(i, j, e)
            if key not in points:
                pa, pb = _CORNERS[a], _CORNERS[b]
                t = (level - vals[a]) / (vals[b] - vals[a])
                points[key] = (i + pa[0] + t * (pb[0] - pa[0]), j + pa[1] + t * (pb[1] - pa[1]))
            (down if high[a] else up).append((e, key))
        if len(down) == 1:
            segments.append((down[0][1], up[0][1]))
            continue
        # saddle: the cell average decides whether the high corners connect
        joined = sum(vals) / 4.0 > level
        ups = {e: k for e, k in up}
        for e, key in down:
            # crossings alternate around the cell, so the neighbours of e are ups
            nxt = (e + 1) % 4 if (e + 1) % 4 in ups else (e + 2) % 4
            prv = (e - 1) % 4 if (e - 1) % 4 in ups else (e - 2) % 4
            segments.append((key, ups[nxt] if joined else ups[prv]))
    return segments, points


def _chain(segments):
    nxt = {a: b for a, b in segments}
    has_prev = {b for _, b in segments}
    seen = set()
    chains = []
    starts = [a for a, _ in segments if a not in has_prev] + [a for a, _ in segments]
    for s in starts:
        if s in seen:
            continue
        path = [s]
        seen.add(s)
        cur = s
        closed = False
        while cur in nxt:
            cur = nxt[cur]
            if cur == s:
                closed = True
                break
            if cur in seen:
                break
            path.append(cur)
            seen.add(cur)
        chains.append((path, closed))
    return chains


def extract_contour(field, level=0.5):
    """Iso-contour of C through cell centres.

    2D fields give a list of :class:`Polyline` with the ``C > level`` side on
    the left (closed loops around a blob run counter-clockwise); 3D fields
    give a :class:`TriangleMesh`.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("contour level must lie strictly between 0 and 1")
    g = field.grid
    if g.ndim == 3:
        return _marching_cubes(field, level)
    c = field.values[:, :, 0]
    segments, points = _marching_squares(c, level)
    out = []
    for path, closed in _chain(segments):
        pts = np.array([points[k] for k in path], float)
        pts = (pts + 0.5) * np.array([g.dx, g.dy]) + np.array(g.origin[:2])
        out.append(Polyline(pts, closed))
    return out


def _marching_cubes(field, level):
    from skimage.measure import marching_cubes

    c = field.values
    g = field.grid
    if c.min() > level or c.max() < level:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), int))
    verts, faces, _, _ = marching_cubes(c, level, spacing=g.spacing)
    verts = verts + np.array(g.origin) + 0.5 * np.array(g.spacing)
    return TriangleMesh(verts, faces)


def circularity(contour):
    """``perimeter**2 / (4 pi area)`` of the largest closed loop."""
    loops = [contour] if isinstance(contour, Polyline) else list(contour)
    if not loops:
        raise ContourError("empty contour")
    for p in loops:
        if not p.closed:
            raise ContourError("circularity needs closed contours")
    big = max(loops, key=lambda p: abs(p.area))
    return big.perimeter ** 2 / (4.0 * math.pi * abs(big.area))


def sphericity(mesh):
    """``pi**(1/3) (6 V)**(2/3) / A``; 1 for a sphere, smaller otherwise."""
    return math.pi ** (1 / 3) * (6.0 * mesh.volume) ** (2 / 3) / mesh.area


def connected_components(field, threshold=0.5):
    """Number of face-connected regions with ``C > threshold``."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie strictly between 0 and 1")
    mask = field.values > threshold
    if field.grid.ndim == 2:
        _, n = ndimage.label(mask[:, :, 0])
    else:
        _, n = ndimage.label(mask)
    return int(n)


# ---------------------------------------------------------------------------
# time series
# ---------------------------------------------------------------------------

@dataclass
class Record:
    t: float
    volume: float
    volume_norm: float
    energy: float
    kappa_bar: float
    clipped_mass: float
    wisps: int
    cfl: float


CSV_COLUMNS = tuple(f.name for f in fields(Record))


@dataclass
class Diagnostics:
    records: list = field(default_factory=list)
    stop_reason: str = ""
    stop_step: int = -1

    def append(self, record):
        if self.records and not record.t > self.records[-1].t:
            raise ValueError("diagnostic times must increase")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def column(self, name):
        if name not in CSV_COLUMNS:
            raise KeyError(name)
        return np.array([getattr(r, name) for r in self.records], float)

    @property
    def completed(self):
        return not self.stop_reason
