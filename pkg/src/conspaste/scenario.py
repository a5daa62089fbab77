"""JSON scenarios: seeded recipes for inputs and one runner per pipeline.

A scenario is a single JSON object::

    {"kind": "paste", "grid": 64, "seed": 0, "X": {...}, "Y": {...},
     "regions": {"kind": "ball", "center": [0.5, 0.5], "k_radius": 0.1,
                 "u_radius": 0.35, "delta": 0.15}}

Every runner writes its artifacts to an output directory and returns a
summary dict.  JSON is written with sorted keys and CSV with ``repr`` floats,
so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io as _io
import json
import logging
from pathlib import Path

import numpy as np

from . import fd, recipes
from .diffeo import inverse_consistency, linear_blend, weak_paste
from .divsolve import annulus_weight, constant_sweep, de_mean, solve_divergence_torus, sweep_csv, zero_boundary_solver
from .errors import InvalidParameter, SpecMismatch
from .grid import GridMap, GridSpec, ScalarField, VectorField, divergence, norms
from .io import read_field, write_field, write_patch, write_regions
from .moser import MoserProblem, det_residual, jacobian_determinant, solve_jacobian_eq
from .mollify import kernel, mollify_field
from .pasting import paste_vector_fields, smooth_conservative
from .regions import RegionSet, annulus_regions, ball_regions, box_mask, nested_regions
from .symplectic import (
    blend_generating,
    fd_jacobian_det,
    generating_from_map,
    generating_map,
    linear_map,
    map_from_generating,
    patch_from_generating,
    patch_nodes,
    standard_map,
    standard_map_linearisation,
)

log = logging.getLogger(__name__)

KINDS = ("mollify", "smooth", "paste", "divsolve", "sweep", "moser", "weakpaste", "symplectic")
TWO_PI = 2.0 * np.pi


def _need(cfg: dict, key: str):
    if key not in cfg:
        raise InvalidParameter(f"scenario entry lacks {key!r}")
    return cfg[key]


def _spec(cfg: dict) -> GridSpec:
    grid = cfg.get("grid", 64)
    dim = int(cfg.get("dim", 2))
    if isinstance(grid, int):
        return GridSpec.square(grid, dim)
    if isinstance(grid, list):
        return GridSpec(tuple(int(g) for g in grid))
    raise InvalidParameter(f"grid must be an integer or a list, got {grid!r}")


# --- recipes ------------------------------------------------------------------------

_FACTORS = {"sin": np.sin, "cos": np.cos, "one": lambda t: np.ones_like(t)}


def scalar_recipe(spec: GridSpec, cfg: dict, seed: int) -> ScalarField:
    name = _need(cfg, "recipe")
    if name == "file":
        s = read_field(_need(cfg, "path"))
        if not isinstance(s, ScalarField) or s.spec != spec:
            raise SpecMismatch("file does not hold a scalar field on the scenario grid")
        return s
    if name == "trig":
        # const + sum amp * prod_axis factor(2 pi k x_axis)
        vals = np.full(spec.sizes, float(cfg.get("const", 0.0)))
        coords = spec.coords()
        for term in cfg.get("terms", []):
            part = np.full(spec.sizes, float(term.get("amp", 1.0)))
            factors = term.get("factors", [])
            if len(factors) > spec.dim:
                raise InvalidParameter("more factors than axes in a trig term")
            for (fname, k), x in zip(factors, coords):
                if fname not in _FACTORS:
                    raise InvalidParameter(f"unknown trig factor {fname!r}")
                part = part * _FACTORS[fname](TWO_PI * float(k) * x)
            vals = vals + part
        return ScalarField(spec, vals)
    if name == "random":
        return recipes.random_stream_function(spec, int(cfg.get("seed", seed)), int(cfg.get("max_freq", 3)))
    raise InvalidParameter(f"unknown scalar recipe {name!r}")


def vector_recipe(spec: GridSpec, cfg: dict, seed: int) -> VectorField:
    name = _need(cfg, "recipe")
    scale = float(cfg.get("scale", 1.0))
    s = int(cfg.get("seed", seed))
    if name == "file":
        F = read_field(_need(cfg, "path"))
        if not isinstance(F, VectorField) or F.spec != spec:
            raise SpecMismatch("file does not hold a vector field on the scenario grid")
        return F * scale
    if name == "cellular":
        F = recipes.cellular_flow(spec)
    elif name == "random_divfree":
        mf = int(cfg.get("max_freq", 3))
        if cfg.get("discrete", True):
            F = recipes.random_divfree_discrete(spec, s, mf)
        else:
            F = recipes.random_divfree_spectral(spec, s, mf)
    elif name == "localized":
        F = recipes.localized_perturbation(spec, _need(cfg, "center"), float(_need(cfg, "radius")), s)
    elif name == "gradient":
        F = fd.gradient_fwd(scalar_recipe(spec, _need(cfg, "potential"), seed))
    elif name == "sum":
        F = VectorField.zeros(spec)
        for i, term in enumerate(_need(cfg, "terms")):
            F = F + vector_recipe(spec, term, seed + i)
    elif name == "zero":
        F = VectorField.zeros(spec)
    else:
        raise InvalidParameter(f"unknown vector recipe {name!r}")
    return F * scale


def map_recipe(spec: GridSpec, cfg: dict) -> GridMap:
    name = _need(cfg, "recipe")
    if name == "two_shear":
        disp = recipes.two_shear_displacement(float(cfg.get("a", 0.02)), float(cfg.get("b", 0.02)))
    elif name == "shear":
        a, axis = float(cfg.get("a", 0.1)), int(cfg.get("axis", 0))
        return GridMap(recipes.shear_map(spec, a, axis).displacement, diffeo=True)
    elif name == "identity":
        return GridMap.identity(spec)
    elif name == "stretch":
        # x -> x + a sin(2 pi x): a fold once 2 pi a > 1
        a = float(cfg.get("a", 0.3))
        disp = lambda x, y: (a * np.sin(TWO_PI * x), np.zeros_like(y))  # noqa: E731
    else:
        raise InvalidParameter(f"unknown map recipe {name!r}")
    return GridMap.from_function(spec, disp, diffeo=True)


def local_map_recipe(cfg: dict, delta: float):
    name = _need(cfg, "recipe")
    if name == "standard":
        return standard_map(float(cfg.get("k", 0.3)), delta)
    if name == "standard_linear":
        return standard_map_linearisation(float(cfg.get("k", 0.3)), delta)
    if name == "linear":
        return linear_map(_need(cfg, "matrix"), delta)
    if name == "identity":
        return linear_map(np.eye(2), delta)
    raise InvalidParameter(f"unknown local map recipe {name!r}")


def regions_recipe(spec: GridSpec, cfg: dict) -> RegionSet:
    kind = _need(cfg, "kind")
    center = [float(c) for c in _need(cfg, "center")]
    if kind == "ball":
        return ball_regions(spec, center, float(_need(cfg, "k_radius")), float(_need(cfg, "u_radius")), float(_need(cfg, "delta")))
    if kind == "annulus":
        return annulus_regions(spec, center, float(_need(cfg, "r_in")), float(_need(cfg, "r_out")))
    if kind == "box":
        K = box_mask(spec, center, _need(cfg, "k_half"))
        U = box_mask(spec, center, _need(cfg, "u_half"))
        desc = {"kind": "box", "center": center, "k_half": cfg["k_half"], "u_half": cfg["u_half"]}
        return nested_regions(K, U, float(_need(cfg, "delta")), spec, desc)
    raise InvalidParameter(f"unknown region kind {kind!r}")


# --- output helpers -----------------------------------------------------------------


def dump_json(path: Path, data) -> None:
    path.write_text(json.dumps(plain(data), indent=2, sort_keys=True) + "\n")


def plain(obj):
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    path.write_text(buf.getvalue())


def report(Z: VectorField, X: VectorField, rs: RegionSet, alpha: float, out: Path, extras: dict | None = None) -> dict:
    """Closeness, conservation and support diagnostics of a pasted field, written as ``report.json``."""
    if Z.spec != X.spec or Z.spec != rs.spec:
        raise SpecMismatch("Z, X and the regions must share one grid")
    diff = Z - X
    close = norms(diff, alpha, derivative=fd.derivative_matrix_fwd(diff))
    differs = np.any(Z.values != X.values, axis=0)
    data = {
        "closeness": close.as_dict(),
        "divergence_residual_sup": float(np.max(np.abs(fd.divergence_fwd(Z).values))),
        "support_radius": float(np.max(rs.dist[differs])) if differs.any() else 0.0,
        "margin": rs.margin,
        "regions": rs.metadata(),
    }
    if extras:
        data.update(extras)
    dump_json(out / "report.json", data)
    return data


# --- runners --------------------------------------------------------------------------


def run_mollify(cfg, spec, seed, out):
    F = vector_recipe(spec, _need(cfg, "field"), seed)
    k = kernel(float(_need(cfg, "eps")), spec)
    Fe = mollify_field(F, k)
    comm = np.max(np.abs(divergence(Fe).values - mollify_field(divergence(F), k).values))
    write_field(out / "input.cvf", F)
    write_field(out / "mollified.cvf", Fe, {"eps": k.eps})
    data = {
        "eps": k.eps,
        "kernel_support_nodes": k.support_size,
        "commutation_error": float(comm),
        "input_divergence_sup": float(np.max(np.abs(divergence(F).values))),
        "output_divergence_sup": float(np.max(np.abs(divergence(Fe).values))),
        "input_norms": norms(F, float(cfg.get("alpha", 0.5))).as_dict(),
    }
    dump_json(out / "report.json", data)
    return data


def run_smooth(cfg, spec, seed, out):
    F = vector_recipe(spec, _need(cfg, "field"), seed)
    Z, achieved = smooth_conservative(F, float(_need(cfg, "eps")), float(cfg.get("alpha", 0.5)))
    write_field(out / "input.cvf", F)
    write_field(out / "smoothed.cvf", Z)
    data = {"eps": float(cfg["eps"]), "achieved": achieved.as_dict()}
    dump_json(out / "report.json", data)
    return data


def run_paste(cfg, spec, seed, out):
    alpha = float(cfg.get("alpha", 0.5))
    X = vector_recipe(spec, _need(cfg, "X"), seed)
    Y = vector_recipe(spec, _need(cfg, "Y"), seed + 1)
    rs = regions_recipe(spec, _need(cfg, "regions"))
    Z, rep = paste_vector_fields(X, Y, rs, alpha=alpha)
    write_field(out / "X.cvf", X)
    write_field(out / "Y.cvf", Y)
    write_field(out / "Z.cvf", Z)
    write_regions(out / "regions.cvf", rs)
    plateau = {
        "max_abs_Z_minus_Y_on_V": float(np.max(np.abs(Z.values - Y.values)[:, rs.v])) if rs.v.any() else 0.0,
        "max_abs_Z_minus_X_on_W": float(np.max(np.abs(Z.values - X.values)[:, rs.w])),
    }
    data = report(Z, X, rs, alpha, out, {
        "defect_integral": rep.defect_integral,
        "plateaus": plateau,
        "paste_extras": rep.extras,
    })
    scales = cfg.get("scales")
    if scales:
        pert = Y - X
        c1 = norms(pert, alpha, derivative=fd.derivative_matrix_fwd(pert)).c1
        rows = []
        for s in scales:
            Ys = X + pert * (float(s) / c1)
            Zs, r = paste_vector_fields(X, Ys, rs, alpha=alpha)
            inp = norms(Ys - X, alpha, derivative=fd.derivative_matrix_fwd(Ys - X)).c1
            rows.append([float(s), inp, r.closeness.c1, r.closeness.c1 / inp, r.support_radius])
        write_csv(out / "scales.csv", ["scale", "input_c1", "output_c1", "ratio", "support_radius"], rows)
    return data


def run_divsolve(cfg, spec, seed, out):
    mode = cfg.get("mode", "torus")
    g = scalar_recipe(spec, _need(cfg, "g"), seed)
    if mode == "torus":
        v = solve_divergence_torus(g)
        res = float(np.max(np.abs(divergence(v).values - g.values)))
        data = {"mode": mode, "residual_sup": res}
    elif mode == "annulus":
        rs = regions_recipe(spec, _need(cfg, "regions"))
        solver = zero_boundary_solver(rs)
        gv = np.where(solver.row_mask, g.values, 0.0)
        if cfg.get("weight", True):
            gv = gv * annulus_weight(rs)
        g = ScalarField(spec, gv)
        if cfg.get("de_mean", True):
            g = de_mean(g, solver.row_mask)
        v, info = solver.solve(g, max_iter=cfg.get("max_iter"))
        outside = ~rs.omega
        data = {
            "mode": mode,
            "residual_sup": float(np.max(np.abs(fd.divergence_fwd(v).values - g.values))),
            "outside_sup": float(np.max(np.abs(v.values[:, outside]))),
            "iterations": info.iterations,
            "regions": rs.metadata(),
        }
        write_regions(out / "regions.cvf", rs)
    else:
        raise InvalidParameter(f"unknown divsolve mode {mode!r}")
    write_field(out / "g.cvf", g)
    write_field(out / "v.cvf", v)
    dump_json(out / "report.json", data)
    return data


def run_sweep(cfg, spec, seed, out):
    rs = regions_recipe(spec, _need(cfg, "regions"))
    rows = constant_sweep(rs, int(cfg.get("n_samples", 4)), int(cfg.get("seed", seed)), float(cfg.get("alpha", 0.5)))
    (out / "sweep.csv").write_text(sweep_csv(rows))
    ok = [r for r in rows if r.status == "ok"]
    rh = [r.ratio_holder for r in ok]
    r0 = [r.ratio_c0 for r in ok]
    data = {
        "rows": len(rows),
        "failed": len(rows) - len(ok),
        "holder_ratio_spread": (max(rh) / min(rh)) if rh else None,
        "c0_ratio_increasing": bool(all(b > a for a, b in zip(r0, r0[1:]))),
        "regions": rs.metadata(),
    }
    dump_json(out / "report.json", data)
    return data


def run_moser(cfg, spec, seed, out):
    f = scalar_recipe(spec, _need(cfg, "f"), seed)
    g = scalar_recipe(spec, cfg["g"], seed) if "g" in cfg else None
    rs = regions_recipe(spec, cfg["regions"]) if "regions" in cfg else None
    p = MoserProblem(f, g, rs)
    u, trace = solve_jacobian_eq(p, float(cfg.get("tol", 1e-10)), int(cfg.get("max_iter", 50)))
    (out / "trace.csv").write_text(trace.to_csv())
    write_field(out / "u.cvf", u)
    det = jacobian_determinant(u, p)
    data = {
        "status": trace.status,
        "iterations": trace.iterations,
        "final_residual": trace.final_residual,
        "geometric_ratio": trace.geometric_ratio(),
        "lambda": p.lam,
        "det_residual_sup": float(np.max(np.abs(det_residual(u, p, trace.lambdas[-1]).values[p.domain]))),
        "det_min": float(np.min(det.values)),
        "volume": float(np.sum(det.values) * spec.cell_volume),
    }
    dump_json(out / "report.json", data)
    return data


def run_weakpaste(cfg, spec, seed, out):
    f = map_recipe(spec, _need(cfg, "map"))
    x0 = [float(c) for c in _need(cfg, "x0")]
    r = float(_need(cfg, "r"))
    alpha = float(cfg.get("alpha", 0.5))
    wp = weak_paste(f, x0, r, alpha)
    write_field(out / "f.cvf", f)
    write_field(out / "g.cvf", wp.g, {"x0": x0, "r": r})
    write_field(out / "det_g.cvf", wp.det_g)
    off = spec.distance_from(wp.blend.x0)
    inner = off <= r / 2
    affine = wp.blend.affine_displacement(spec.offsets_from(wp.blend.x0))
    data = wp.report.as_dict()
    data["plateaus"] = {
        "max_abs_g_minus_affine_inner": float(np.max(np.abs(wp.g.values - affine)[:, inner])),
        "max_abs_g_minus_f_outer": float(np.max(np.abs(wp.g.values - f.values)[:, off >= r])),
    }
    data["inverse_consistency"] = inverse_consistency(wp)
    sweep = cfg.get("r_sweep")
    if sweep:
        rows = []
        for rr in sweep:
            b = linear_blend(f, x0, float(rr))
            d = (b.h.displacement - f.displacement)
            c1 = norms(d, alpha).c1
            th = norms(b.theta - ScalarField.constant(spec, 1.0), alpha)
            rows.append([float(rr), c1, c1 / float(rr), th.c0 + th.holder, (th.c0 + th.holder) / float(rr) ** (1 - alpha)])
        write_csv(out / "r_sweep.csv", ["r", "blend_c1", "blend_c1_over_r", "theta_holder", "theta_holder_over_r_pow"], rows)
    dump_json(out / "report.json", data)
    return data


def run_symplectic(cfg, spec, seed, out):
    delta = float(_need(cfg, "delta"))
    n = int(cfg.get("n", 41))
    outer = generating_from_map(local_map_recipe(_need(cfg, "outer"), delta))
    inner = generating_from_map(local_map_recipe(_need(cfg, "inner"), delta))
    B = blend_generating(outer, inner, float(cfg.get("blend_radius", delta)))
    center = tuple(float(c) for c in cfg.get("center", (0.0, 0.0)))
    patch = patch_from_generating(B, n, center)
    write_patch(out / "patch.cvf", patch)
    x, y = patch_nodes(delta, n)
    det = fd_jacobian_det(generating_map(B), x, y, 2e-4 * delta)
    ok = np.isfinite(det)
    rb = B.blend_radius

    def plateau_gap(S, keep):
        # seed the blend's Newton with S's converged iterate so the comparison is free of solver noise
        Xs, Ys, vs = map_from_generating(S, x, y)
        Xb, Yb, vb = map_from_generating(B, x, y, seed=np.where(vs, Xs, x + y))
        sel = vs & vb & keep(np.hypot(x, np.where(vs, Xs, np.inf)))
        if not sel.any():
            return 0.0
        return float(np.max(np.abs(np.stack([Xb - Xs, Yb - Ys])[:, sel])))

    data = {
        "delta": delta,
        "blend_radius": rb,
        "twist_bound": B.twist_bound(),
        "twist_outer": outer.twist_bound(),
        "twist_inner": inner.twist_bound(),
        "det_error_sup": float(np.max(np.abs(det[ok] - 1.0))) if ok.any() else None,
        "valid_fraction": float(patch.valid.mean()),
        "inner_max_diff": plateau_gap(inner, lambda rad: rad <= rb / 4),
        "outer_max_diff": plateau_gap(outer, lambda rad: (rad >= rb / 2) & np.isfinite(rad)),
    }
    dump_json(out / "report.json", data)
    return data


RUNNERS = {
    "mollify": run_mollify,
    "smooth": run_smooth,
    "paste": run_paste,
    "divsolve": run_divsolve,
    "sweep": run_sweep,
    "moser": run_moser,
    "weakpaste": run_weakpaste,
    "symplectic": run_symplectic,
}


def load_scenario(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise InvalidParameter(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidParameter(f"scenario is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InvalidParameter("scenario must be a JSON object")
    return cfg


def run_scenario(cfg: dict, out: Path, grid: int | None = None, seed: int | None = None) -> dict:
    kind = cfg.get("kind")
    if kind not in RUNNERS:
        raise InvalidParameter(f"scenario kind must be one of {KINDS}, got {kind!r}")
    cfg = dict(cfg)
    if grid is not None:
        cfg["grid"] = grid
    if seed is not None:
        cfg["seed"] = seed
    spec = _spec(cfg)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    log.info("running %s scenario on %s", kind, spec.sizes)
    return RUNNERS[kind](cfg, spec, int(cfg.get("seed", 0)), out)
