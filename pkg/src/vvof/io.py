"""Config files, snapshot files and diagnostic tables.

Configs are JSON objects.  Snapshots are ASCII legacy-VTK structured points
with cell data, written with 17 significant digits so that reading them back
reproduces every double exactly.  Diagnostics and contours are plain CSV.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .cases import CASE_NAMES, CaseConfig, CaseError, ShapeSpec, builtin_case
from .curvature import DELTA_KINDS
from .geometry import SHAPE_KINDS, ShapeError
from .grid import BC_KINDS, NEUMANN, PERIODIC, ColorField, Grid
from .metrics import CSV_COLUMNS, Diagnostics, Record
from .motion import MOTION_KINDS, MotionError, MotionSpec

OUT_ENV = "VVOF_OUT"
DEFAULT_OUT = "vvof_out"
CUSTOM = "custom"

_TOP_KEYS = {
    "case", "grid", "dt", "t_final", "extent", "bc", "shapes", "invert", "motion",
    "clip_eps", "delta", "rp_mode", "literal_denominator", "outputs",
}
_CUSTOM_REQUIRED = ("extent", "grid", "dt", "t_final", "shapes", "motion")
_MOTION_KEYS = {"kind", "T", "center", "period", "U_max", "V_max", "W_max", "dp", "rho",
                "band", "parts"}
_OUTPUT_KEYS = {"dir", "snapshots", "stride"}
_BC_NAMES = {"periodic": PERIODIC, "neumann": NEUMANN, NEUMANN: NEUMANN}


class ConfigError(ValueError):
    """A config problem, reported as ``<json path>: <message>``."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _number(value, path, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(path, f"must be positive, got {value!r}")
    return float(value)


def _integer(value, path, minimum=1):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(path, f"must be at least {minimum}, got {value}")
    return value


def _boolean(value, path):
    if not isinstance(value, bool):
        raise ConfigError(path, f"expected true or false, got {value!r}")
    return value


def _choice(value, path, options):
    if value not in options:
        raise ConfigError(path, f"expected one of {', '.join(options)}, got {value!r}")
    return value


def _array(value, path, length=None):
    if not isinstance(value, list):
        raise ConfigError(path, f"expected a list, got {value!r}")
    if length is not None and len(value) not in length:
        raise ConfigError(path, f"expected {' or '.join(map(str, length))} entries, got {len(value)}")
    return value


def _object(value, path, allowed):
    if not isinstance(value, dict):
        raise ConfigError(path, f"expected an object, got {value!r}")
    for key in value:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown key")
    return value


def _grid(value, path):
    if isinstance(value, list):
        _array(value, path, (2, 3))
        return tuple(_integer(n, f"{path}[{i}]", 3) for i, n in enumerate(value))
    return _integer(value, path, 3)


def _motion(value, path):
    _object(value, path, _MOTION_KEYS)
    if "kind" not in value:
        raise ConfigError(path, "missing required key 'kind'")
    kw = {"kind": _choice(value["kind"], f"{path}.kind", MOTION_KINDS)}
    for key in ("T", "period", "rho"):
        if key in value:
            kw[key] = _number(value[key], f"{path}.{key}", positive=True)
    for key in ("U_max", "V_max", "W_max", "dp"):
        if key in value:
            kw[key] = _number(value[key], f"{path}.{key}")
    if "center" in value:
        c = _array(value["center"], f"{path}.center", (2, 3))
        kw["center"] = tuple(_number(x, f"{path}.center[{i}]") for i, x in enumerate(c))
    if "band" in value:
        kw["band"] = _choice(value["band"], f"{path}.band", ("gradient", "mixed"))
    if "parts" in value:
        parts = _array(value["parts"], f"{path}.parts")
        kw["parts"] = [_motion(p, f"{path}.parts[{i}]") for i, p in enumerate(parts)]
    try:
        return MotionSpec(**kw)
    except MotionError as exc:
        raise ConfigError(path, str(exc)) from None


def _shapes(value, path):
    out = []
    for i, item in enumerate(_array(value, path)):
        p = f"{path}[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(p, f"expected an object, got {item!r}")
        if "kind" not in item:
            raise ConfigError(p, "missing required key 'kind'")
        kind = _choice(item["kind"], f"{p}.kind", SHAPE_KINDS)
        params = {}
        for key, v in item.items():
            if key == "kind":
                continue
            if isinstance(v, list):
                params[key] = tuple(_number(x, f"{p}.{key}[{j}]") for j, x in enumerate(v))
            elif key in ("K", "n", "n_p"):
                params[key] = _integer(v, f"{p}.{key}", 1)
            else:
                params[key] = _number(v, f"{p}.{key}")
        spec = ShapeSpec(kind, params)
        try:
            spec.build()
        except (ShapeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(p, f"invalid {kind} parameters: {exc}") from None
        out.append(spec)
    if not out:
        raise ConfigError(path, "need at least one shape")
    return out


def config_from_dict(data):
    """Validate a decoded JSON object and build the :class:`CaseConfig`.

    ``case`` names a built-in benchmark whose settings the other keys
    override, or is ``"custom"``, in which case extent, grid, dt, t_final,
    shapes and motion must all be given.
    """
    _object(data, "$", _TOP_KEYS)
    if "case" not in data:
        raise ConfigError("$", "missing required key 'case'")
    name = data["case"]
    if name != CUSTOM and name not in CASE_NAMES:
        raise ConfigError("$.case", f"unknown case {name!r}; valid ids: {', '.join(CASE_NAMES)}, {CUSTOM}")

    kw = {}
    if "t_final" in data:
        kw["t_final"] = _number(data["t_final"], "$.t_final", positive=True)
    if "extent" in data:
        ext = _array(data["extent"], "$.extent", (2, 3))
        kw["extent"] = tuple(_number(e, f"$.extent[{i}]", positive=True) for i, e in enumerate(ext))
    if "bc" in data:
        kw["bc"] = _BC_NAMES[_choice(data["bc"], "$.bc", tuple(_BC_NAMES))]
    if "shapes" in data:
        kw["shapes"] = _shapes(data["shapes"], "$.shapes")
    if "invert" in data:
        kw["invert"] = _boolean(data["invert"], "$.invert")
    if "motion" in data:
        kw["motion"] = _motion(data["motion"], "$.motion")
    if "clip_eps" in data:
        kw["clip_eps"] = _number(data["clip_eps"], "$.clip_eps", positive=True)
    if "delta" in data:
        kw["delta_kind"] = _choice(data["delta"], "$.delta", DELTA_KINDS)
    if "rp_mode" in data:
        kw["rp_mode"] = _choice(data["rp_mode"], "$.rp_mode", ("split", "source"))
    if "literal_denominator" in data:
        kw["literal_denominator"] = _boolean(data["literal_denominator"], "$.literal_denominator")
    if "outputs" in data:
        out = _object(data["outputs"], "$.outputs", _OUTPUT_KEYS)
        if "dir" in out:
            if not isinstance(out["dir"], str):
                raise ConfigError("$.outputs.dir", f"expected a string, got {out['dir']!r}")
            kw["output_dir"] = out["dir"]
        if "snapshots" in out:
            times = _array(out["snapshots"], "$.outputs.snapshots")
            kw["snapshot_times"] = [_number(t, f"$.outputs.snapshots[{i}]") for i, t in enumerate(times)]
        if "stride" in out:
            kw["csv_stride"] = _integer(out["stride"], "$.outputs.stride", 1)
    grid = _grid(data["grid"], "$.grid") if "grid" in data else None
    dt = _number(data["dt"], "$.dt", positive=True) if "dt" in data else None

    try:
        if name == CUSTOM:
            missing = [k for k in _CUSTOM_REQUIRED if k not in data]
            if missing:
                raise ConfigError("$", f"custom case is missing {', '.join(missing)}")
            cells = grid if isinstance(grid, tuple) else (grid,) * len(kw["extent"])
            if len(cells) != len(kw["extent"]):
                raise ConfigError("$.grid", "needs one count per extent entry")
            return CaseConfig(CUSTOM, grids=[cells], dt=[dt], **kw)
        base = builtin_case(name)
        if "t_final" in kw and "snapshot_times" not in kw:
            # inherited snapshot times past a shortened run are dropped
            kw["snapshot_times"] = [s for s in base.snapshot_times if s <= kw["t_final"]]
        merged = CaseConfig(**{**base.__dict__, **kw})
        if grid is not None or dt is not None:
            merged = merged.with_grid(grid if grid is not None else merged.cells, dt)
        return merged
    except CaseError as exc:
        raise ConfigError("$", str(exc)) from None


def parse_config(path):
    """Read and validate a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("$", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON in {path} (line {exc.lineno}): {exc.msg}") from None
    return config_from_dict(data)


def output_dir(config=None, override=None):
    """Explicit override, then the config, then ``$VVOF_OUT``, then ``vvof_out``."""
    if override:
        return Path(override)
    if config is not None and config.output_dir:
        return Path(config.output_dir)
    return Path(os.environ.get(OUT_ENV) or DEFAULT_OUT)


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

def _fmt(a):
    return "\n".join(f"{v:.17g}" for v in a)


def write_snapshot(field, path, aux=None, title="vvof snapshot"):
    """Write C (and any ``aux`` cell arrays such as kappa, u, v, w) as VTK.

    Values run x fastest, as VTK expects.  NaN entries are written as
    ``nan``, which VTK readers accept.
    """
    g = field.grid
    arrays = {"C": field.values}
    for name, arr in (aux or {}).items():
        arr = np.asarray(arr, float)
        if arr.shape != g.shape:
            raise ValueError(f"aux array {name!r} has shape {arr.shape}, expected {g.shape}")
        arrays[name] = arr
    bc = ",".join(g.bc)
    lines = [
        "# vtk DataFile Version 3.0",
        f"{title} bc={bc}".replace("\n", " "),
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {g.nx + 1} {g.ny + 1} {g.nz + 1}",
        f"ORIGIN {g.origin[0]:.17g} {g.origin[1]:.17g} {g.origin[2]:.17g}",
        f"SPACING {g.dx:.17g} {g.dy:.17g} {g.dz:.17g}",
        f"CELL_DATA {g.nx * g.ny * g.nz}",
    ]
    for name, arr in arrays.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default",
                  _fmt(arr.ravel(order="F"))]
    path = Path(path)
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write snapshot: {exc.strerror}", str(path)) from None


def read_snapshot(path):
    """Read a file from :func:`write_snapshot`; returns ``(ColorField, aux)``."""
    tokens = Path(path).read_text().split("\n")
    title = tokens[1]
    bc = (NEUMANN,) * 3
    if " bc=" in title:
        bc = tuple(title.rsplit(" bc=", 1)[1].split(","))
        if len(bc) != 3 or any(b not in BC_KINDS for b in bc):
            bc = (NEUMANN,) * 3
    words = " ".join(tokens[2:]).split()
    if words[0] != "ASCII" or words[1:3] != ["DATASET", "STRUCTURED_POINTS"]:
        raise ValueError(f"{path}: not an ASCII structured-points file")
    pos = words.index("DIMENSIONS")
    dims = [int(w) - 1 for w in words[pos + 1:pos + 4]]
    pos = words.index("ORIGIN")
    origin = tuple(float(w) for w in words[pos + 1:pos + 4])
    pos = words.index("SPACING")
    spacing = [float(w) for w in words[pos + 1:pos + 4]]
    pos = words.index("CELL_DATA")
    n = int(words[pos + 1])
    grid = Grid(*dims, *spacing, origin=origin, bc=bc)
    arrays = {}
    pos += 2
    while pos < len(words):
        if words[pos] != "SCALARS":
            raise ValueError(f"{path}: unexpected token {words[pos]!r}")
        name = words[pos + 1]
        # SCALARS name type [ncomp] LOOKUP_TABLE default
        lut = pos + 4 if words[pos + 4] == "LOOKUP_TABLE" else pos + 3
        start = lut + 2
        vals = np.array([float(w) for w in words[start:start + n]])
        arrays[name] = vals.reshape(grid.shape, order="F")
        pos = start + n
    c = arrays.pop("C")
    return ColorField(c, grid), arrays


def write_contours(polylines, path):
    """Contour polylines as ``loop,closed,x,y`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["loop", "closed", "x", "y"])
        for i, line in enumerate(polylines):
            for x, y in line.points:
                w.writerow([i, int(line.closed), repr(float(x)), repr(float(y))])


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def write_diagnostics(diag, path, stride=1):
    """One row per ``stride`` records; the final record is always included."""
    rows = diag.records
    keep = list(range(0, len(rows), stride))
    if rows and keep[-1] != len(rows) - 1:
        keep.append(len(rows) - 1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for i in keep:
            r = rows[i]
            w.writerow([repr(getattr(r, c)) if isinstance(getattr(r, c), float) else getattr(r, c)
                        for c in CSV_COLUMNS])


def read_diagnostics(path):
    diag = Diagnostics()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            vals = {c: float(row[c]) for c in CSV_COLUMNS}
            vals["wisps"] = int(vals["wisps"])
            diag.append(Record(**vals))
    return diag


def write_rp_history(history, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "R_reference", "R_equivalent"])
        for row in history:
            w.writerow([repr(float(v)) for v in row])
