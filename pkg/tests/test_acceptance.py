"""End-to-end acceptance checks.

Each test reports one ``criterion N: PASS|FAIL`` line, repeated in the
terminal summary.  Runs are cached so criteria that look at the same case
share one simulation.  The 200^3 dumbbell run needs ``VVOF_FULL=1``.
"""
import functools
import math
import os
from dataclasses import replace

import numpy as np
import pytest

from vvof.cases import builtin_case, run_case
from vvof.curvature import GRADIENT, POLYNOMIAL, compute_curvature
from vvof.geometry import make_shape, voxelize
from vvof.grid import Grid
from vvof.metrics import (
    circularity, connected_components, convergence_order, extract_contour, l1_error, sphericity,
)
from vvof.motion import rp_trajectory
from vvof.plic import alpha_from_volume, reflected_normal, volume_from_alpha

pytestmark = pytest.mark.slow
FULL = os.environ.get("VVOF_FULL") == "1"


def verdict(request, n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    lines = getattr(request.config, "acceptance_lines", [])
    lines.append((n, line))
    request.config.acceptance_lines = lines
    assert ok, line


@functools.cache
def run(name, resolution=0, cells=None, **overrides):
    """Cached run of a built-in case; snapshot fields are kept by step."""
    config = builtin_case(name, resolution)
    if cells is not None:
        config = config.with_grid(cells)
    if overrides:
        config = replace(config, **overrides)
    fields = {}
    result = run_case(config, on_snapshot=lambda s: fields.__setitem__(s.step, s.field))
    return result, fields


def max_drift(result):
    return float(np.abs(result.diagnostics.column("volume_norm") - 1).max())


# ---------------------------------------------------------------------------


def test_1_exact_advection_conservation(request):
    result, _ = run("deformation-sphere", 0)
    d = result.diagnostics
    drift = max_drift(result)
    ok = d.completed and len(d) - 1 == result.config.steps and drift <= 1e-12
    verdict(request, 1, ok, f"deformation sphere 64^3, {len(d) - 1} steps, "
                            f"max |V/V0 - 1| = {drift:.2e} (bound 1e-12)")


def _orders(name):
    errors = []
    for res in range(4):
        result, _ = run(name, res)
        assert result.diagnostics.completed, result.diagnostics.stop_reason
        errors.append((result.config.cells[0], l1_error(result.final, result.initial)))
    return errors, convergence_order(errors)


def test_2_zalesak_convergence(request):
    errors, orders = _orders("zalesak")
    ok = abs(orders[-1] - 1.6) <= 0.4
    table = ", ".join(f"{n}: {e:.3e}" for n, e in errors)
    verdict(request, 2, ok, f"Zalesak L1 {table}; orders {', '.join(f'{o:.2f}' for o in orders)} "
                            f"(finest pair must lie in 1.6 +- 0.4)")


def test_3_vortex_star_reversibility(request):
    errors, orders = _orders("vortex-star")
    ok = abs(orders[-1] - 2.5) <= 0.6
    table = ", ".join(f"{n}: {e:.3e}" for n, e in errors)
    verdict(request, 3, ok, f"vortex star L1 {table}; orders {', '.join(f'{o:.2f}' for o in orders)} "
                            f"(finest pair must lie in 2.5 +- 0.6)")


def subcell_volume(m, alpha, n=512):
    """Cut volume of the unit cube from n^3 subcells.

    Subcells are grouped in columns along the largest normal component; the
    filled share of each column is exact, which removes the lattice noise of
    point counting while keeping the n^2 subcell resolution across.
    """
    a, b, c = sorted(reflected_normal(m))
    s = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(s, s, indexing="ij")
    return float(np.clip((alpha - a * X - b * Y) / c, 0.0, 1.0).mean())


def test_4_plic_oracle(request):
    rng = np.random.default_rng(4)
    normals = rng.uniform(-1, 1, (1000, 3))
    fracs = rng.uniform(0, 1, 1000)
    alphas = rng.uniform(0, 1, 1000)
    forward = inverse = trip = 0.0
    for m, c, al in zip(normals, fracs, alphas):
        forward = max(forward, abs(subcell_volume(m, alpha_from_volume(m, c)) - c))
        inverse = max(inverse, abs(volume_from_alpha(m, al) - subcell_volume(m, al)))
        trip = max(trip, abs(volume_from_alpha(m, alpha_from_volume(m, c)) - c))
    ok = forward <= 1e-6 and inverse <= 1e-6 and trip <= 1e-12
    verdict(request, 4, ok, f"1000 pairs: alpha_from_volume err {forward:.2e}, volume_from_alpha "
                            f"err {inverse:.2e} (bound 1e-6), round trip {trip:.2e} (bound 1e-12)")


def test_5_curvature_accuracy(request):
    errs = []
    for n in (64, 128):
        g = Grid.uniform((n, n), (1.0, 1.0))
        f = voxelize(make_shape("disc", r=0.25, center=(0.5, 0.5)), g)
        errs.append(float(np.mean(np.abs(compute_curvature(f).values() * 0.25 - 1))))
    ratio = errs[0] / errs[1]
    g = Grid.uniform((64, 64, 64), (1.0, 1.0, 1.0))
    f = voxelize(make_shape("sphere", r=0.25, center=(0.5, 0.5, 0.5)), g)
    sphere = float(np.mean(np.abs(compute_curvature(f).values() * 0.25 - 2)))
    ok = 3.5 <= ratio <= 4.5 and sphere < 0.15
    verdict(request, 5, ok, f"disc mean |kr - 1| {errs[0]:.2e} -> {errs[1]:.2e}, ratio {ratio:.2f} "
                            f"(3.5 to 4.5); sphere 64^3 mean |kr - 2| {sphere:.3f} (< 0.15)")


def _rp_error(result):
    hist = np.array(result.rp_history)
    t, ref, eq = hist[:, 0], hist[:, 1], hist[:, 2]
    h = result.final.grid.dx
    keep = ref >= 4 * h
    # a fine independent integration is the reference curve
    tf, rf, _ = rp_trajectory(ref[0], 1e-5, t[keep][-1])
    rf = np.interp(t[keep], tf, rf)
    return float(np.max(np.abs(eq[keep] - rf) / rf)), int(keep.sum())


def test_6_rayleigh_plesset(request):
    split, _ = run("rp-collapse", 1)
    source, _ = run("rp-collapse", 1, rp_mode="source")
    e_split, n_split = _rp_error(split)
    e_source, _ = _rp_error(source)
    ok = e_split <= 0.05 and e_source > e_split
    verdict(request, 6, ok, f"100^3 collapse over {n_split} samples with R >= 4dx: split max rel "
                            f"err {e_split:.2%} (bound 5%), source mode {e_source:.2%} (must be larger)")


CONSTRAINED = [
    ("ellipsoid", 0, 0.010), ("ellipsoid", 1, 0.003),
    ("squircle", 0, 0.010), ("squircle", 1, 0.006),
    ("octahedron", 0, 0.006), ("octahedron", 1, 0.0035),
    ("helical-sphere", 0, 0.010),
]


def test_7_constrained_volume_drift(request):
    rows, ok = [], True
    for name, res, bound in CONSTRAINED:
        result, _ = run(name, res)
        drift = max_drift(result)
        good = result.diagnostics.completed and drift <= bound
        ok &= good
        cells = "x".join(map(str, result.config.cells))
        rows.append(f"{name} {cells} {drift:.2%}/{bound:.2%}{'' if good else ' FAIL'}")
    verdict(request, 7, ok, "max |V/V0 - 1| against bound: " + "; ".join(rows))


def _pinch(result, fields):
    comps = {s: connected_components(f) for s, f in sorted(fields.items())}
    wisps = result.diagnostics.column("wisps")
    return comps, wisps


def test_8_topology_wisps_at_100(request):
    result, fields = run("dumbbell", 0)
    comps, wisps = _pinch(result, fields)
    dt = result.config.time_step
    split = [s for s, c in comps.items() if c >= 2]
    ok = wisps.max() > 0
    detail = (f"dumbbell 100^3: peak wisps {int(wisps.max())} at t={wisps.argmax() * dt:.2f} "
              f"(must be > 0); components by t " +
              ", ".join(f"{s * dt:g}:{c}" for s, c in comps.items()))
    if split:
        detail += f"; split by t={split[0] * dt:g}"
    if FULL:
        full, ffields = run("dumbbell", 1)
        fcomps, fwisps = _pinch(full, ffields)
        fsplit = [s for s, c in fcomps.items() if c == 2]
        fdt = full.config.time_step
        good = bool(fsplit) and fsplit[0] * fdt < 16 and list(fcomps.values())[0] == 1 \
            and fwisps.max() == 0
        ok &= good
        detail += (f"; 200^3: components {', '.join(f'{s * fdt:g}:{c}' for s, c in fcomps.items())}, "
                   f"peak wisps {int(fwisps.max())} (must split before t=16 with 0 wisps)")
    else:
        detail += "; 200^3 part not run (set VVOF_FULL=1)"
    verdict(request, 8, ok, detail)


def _window_rise(energy, window=50):
    worst = 0.0
    for k in range(len(energy) - 1):
        seg = energy[k:k + window + 1]
        worst = max(worst, float((np.max(seg[1:]) - seg[0]) / seg[0]))
    return worst


def test_9_energy_descent(request):
    rows, ok = [], True
    for name in ("pointed-star", "spiral"):
        result, fields = run(name)
        rise = _window_rise(result.diagnostics.column("energy"))
        good = rise <= 1e-3
        rows.append(f"{name} {len(result.diagnostics) - 1} steps, worst 50-step rise {rise:.2e}")
        if name == "pointed-star":
            final = fields[max(fields)]
            s = circularity(extract_contour(final))
            good &= s < 1.02
            rows[-1] += f", final circularity {s:.4f} (< 1.02)"
        ok &= good
    verdict(request, 9, ok, "; ".join(rows) + " (rise bound 1e-3)")


def test_10_equilibrium_stability(request):
    result, fields = run("ellipsoid", 0)
    vol = result.diagnostics.column("volume_norm")
    half = result.config.steps - 5000
    settled = fields[half]
    spher = [sphericity(extract_contour(settled)), sphericity(extract_contour(result.final))]
    swing = float(vol[half:].max() - vol[half:].min())
    ok = result.diagnostics.completed and min(spher) > 0.99 and swing < 1e-3
    verdict(request, 10, ok, f"ellipsoid 50^3: sphericity {spher[0]:.4f} at step {half} and "
                             f"{spher[1]:.4f} at the end (> 0.99); V/V0 range over the last 5000 "
                             f"steps {swing:.2e} (< 1e-3)")


def test_11_dirac_delta_comparison(request):
    poly, pf = run("squircle", 0)
    grad, _ = run("squircle", 0, delta_kind=GRADIENT)
    jump = lambda r: float(np.var(np.diff(r.diagnostics.column("kappa_bar")[1:])))
    vp, vg = jump(poly), jump(grad)
    intact = poly.diagnostics.completed and all(connected_components(f) == 1 for f in pf.values()) \
        and connected_components(poly.final) == 1
    ok = vg > vp and intact
    verdict(request, 11, ok, f"squircle 50^3 step-to-step kappa_bar variance: gradient delta "
                             f"{vg:.3e} ({len(grad.diagnostics) - 1} steps, "
                             f"{grad.diagnostics.stop_reason or 'completed'}), polynomial {vp:.3e}; "
                             f"polynomial run intact: {intact}")
