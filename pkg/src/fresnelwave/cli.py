"""Command-line entry point: ``fresnelwave {identities,geometry,solve,probe,report}``.

Exit codes: 0 when every report flag passes, 1 for invalid input, 2 for a
numerical failure or a failing check. Each run writes ``<out>/<subcommand>.json``.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import FresnelError, NumericalFailure, ValidationError
from .materials import MaterialTensors
from .report import ProbeReport, ReportEnvelope, jsonable

THREADS_ENV = "FRESNELWAVE_THREADS"


@dataclass
class RunConfig:
    subcommand: str
    material: dict | None = None
    params: dict = field(default_factory=dict)
    seed: int = 0
    out: str = "fresnelwave-out"
    threads: int | None = None

    def to_dict(self) -> dict:
        return jsonable(asdict(self))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"cannot parse number list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--eps", default="1,5,15")
    common.add_argument("--mu", default="1,1,1")
    common.add_argument("--omega", default="1")
    common.add_argument("--config", help="JSON file; keys override defaults, flags override keys")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--threads", type=int, default=None, help=f"BLAS/FFT threads (else ${THREADS_ENV})")

    p = _Parser(prog="fresnelwave", description="Anisotropic Maxwell solver and wave-surface probes")
    sub = p.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    s = sub.add_parser("identities", parents=[common], help="symbol algebra identities at random frequencies")
    s.add_argument("--samples", type=int, default=None)
    s.add_argument("--random-materials", action="store_true")

    s = sub.add_parser("geometry", parents=[common], help="singular points, curvature, meshing, cone factorization")
    s.add_argument("--cmd", choices=["singular", "curvature", "mesh", "cone"], default="singular")
    s.add_argument("--level", type=float, default=None)
    s.add_argument("--h", type=float, default=None)
    s.add_argument("--band-width", type=float, default=None)
    s.add_argument("--singular-radius", type=float, default=None)

    s = sub.add_parser("solve", parents=[common], help="regularized solve, delta sweep or principal-value solve")
    s.add_argument("--mode", choices=["regularized", "sweep", "vp"], default="regularized")
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--L", type=float, default=None)
    s.add_argument("--delta", default=None, help="comma-separated list")
    s.add_argument("--write-fields", action="store_true")

    s = sub.add_parser("probe", parents=[common], help="oscillatory-integral and operator probes")
    s.add_argument("--cmd", choices=["decay", "kernel", "dyadic", "riesz", "foliation", "region"], required=True)

    s = sub.add_parser("report", parents=[common], help="turn saved report JSON into plot CSVs")
    s.add_argument("--in", dest="inp", required=True)
    return p


def _load_config(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError("config must be a JSON object")
    material = data.get("material")
    if material is None or any(a != d for a, d in ((args.eps, "1,5,15"), (args.mu, "1,1,1"), (args.omega, "1"))):
        material = MaterialTensors.from_flags(args.eps, args.mu, args.omega).to_dict()
    MaterialTensors.from_dict(material)
    params = dict(data.get("params", {}))
    seed = args.seed if args.seed is not None else int(data.get("seed", 0))
    out = args.out or data.get("out", "fresnelwave-out")
    threads = args.threads if args.threads is not None else data.get("threads")
    if threads is None and os.environ.get(THREADS_ENV):
        threads = int(os.environ[THREADS_ENV])
    return RunConfig(args.subcommand, material, params, seed, out, threads)


def _arg(args, name, cfg, key=None, default=None):
    v = getattr(args, name, None)
    if v is not None and v is not False:
        return v
    return cfg.params.get(key or name, default)


# ------------------------------------------------------------------ handlers


def run_identities(args, cfg):
    from .symbols import identity_suite

    m = None if (args.random_materials or cfg.params.get("random_materials")) else MaterialTensors.from_dict(cfg.material)
    n = int(_arg(args, "samples", cfg, default=10000))
    return [identity_suite(m, n, cfg.seed, raise_on_violation=False)], {}


def run_geometry(args, cfg, out: Path):
    from . import suites

    m = MaterialTensors.from_dict(cfg.material)
    cmd = args.cmd
    if cmd == "singular":
        return [suites.singular_report(m)], {}
    if cmd == "curvature":
        return [suites.curvature_report(m, seed=cfg.seed)], {}
    if cmd == "cone":
        from .geometry import cone_factorize_fresnel
        from .materials import normalize

        fac = cone_factorize_fresnel(normalize(m), rng_seed=cfg.seed, radius=float(cfg.params.get("radius", 0.2)))
        rep = ProbeReport("cone_factorization", {"material": cfg.material}, info=fac.to_dict(),
                          residuals={"max_root_residual": fac.max_root_residual},
                          flags={"m_bounded_away_from_zero": fac.min_abs_m > 0})
        return [rep], {}
    from .io import export_mesh
    from .meshing import classify_and_mesh

    mesh = classify_and_mesh(
        m,
        level=float(_arg(args, "level", cfg, default=0.0)),
        h=float(_arg(args, "h", cfg, default=0.1)),
        band_width=_arg(args, "band_width", cfg),
        singular_radius=_arg(args, "singular_radius", cfg),
    )
    obj, side = export_mesh(mesh, out / "mesh")
    rep = ProbeReport(
        "mesh",
        {"material": cfg.material, "level": mesh.level},
        residuals={"max_projection_residual": mesh.info["max_projection_residual"]},
        flags={"nonempty": len(mesh.vertices) > 0},
        info={**mesh.info, "n_vertices": len(mesh.vertices), "n_triangles": len(mesh.triangles)},
    )
    return [rep], {"obj": str(obj), "sidecar": str(side)}


def _current_family(spec: dict):
    from .solver import GaussianBump, RingCurrent

    kind = spec.get("type", "gaussian")
    if kind == "gaussian":
        return GaussianBump(tuple(spec.get("center", (0.0, 1.0, 0.0))), float(spec.get("width", 0.3)),
                            tuple(spec.get("amp_e", (1.0, 0.0, 1.0))), tuple(spec.get("amp_m", (0.0, 0.0, 0.0))),
                            bool(spec.get("real", False)))
    if kind == "ring":
        return RingCurrent(float(spec["radius"]), float(spec.get("width", 0.2)), float(spec.get("amp_e", 1.0)),
                           float(spec.get("amp_m", 0.0)))
    raise ValidationError(f"unknown current type {kind!r}")


def run_solve(args, cfg, out: Path):
    from . import solver
    from .io import write_field
    from .meshing import classify_and_mesh, surface_extent

    m = MaterialTensors.from_dict(cfg.material)
    family = _current_family(cfg.params.get("current", {}))
    mode = _arg(args, "mode", cfg, default="regularized")
    n = int(_arg(args, "n", cfg, default=64))
    L = float(_arg(args, "L", cfg, default=1.6 * surface_extent(m)))
    deltas = args.delta and _floats(args.delta) or cfg.params.get("deltas", [0.1, 0.01])
    artifacts = {}
    if mode == "vp":
        rng = np.random.default_rng(cfg.seed)
        npts = int(cfg.params.get("n_points", 64))
        v = rng.standard_normal((npts, 3))
        pts = 3.0 * v / np.linalg.norm(v, axis=1)[:, None] * rng.uniform(0, 1, (npts, 1)) ** (1 / 3)
        mesh = classify_and_mesh(m, 0.0, h=float(cfg.params.get("h", 0.1)), curvatures=False)
        c = getattr(family, "center", (0.0, 0.0, 0.0))
        w = getattr(family, "width", 0.3)
        window = solver.SpectralGrid(5 * w, n, center=c)
        fp = solver.vp_delta_solve(m, family, mesh, pts, window, vp_band=cfg.params.get("vp_band", 0.3))
        rep = ProbeReport("vp_delta_solve", {"material": cfg.material, "n_points": npts, "window": window.to_dict()},
                          info={"E_norm": float(np.linalg.norm(fp.E)), "H_norm": float(np.linalg.norm(fp.H)),
                                "n_layers": fp.metadata["n_layers"], "t0": fp.metadata["t0"]},
                          provenance={"seed": cfg.seed})
        if args.write_fields:
            artifacts["fields"] = [str(p) for p in write_field(out / "vp_fields", np.concatenate([fp.E, fp.H], axis=1),
                                                               {"points": pts, "components": "E1 E2 E3 H1 H2 H3"})]
        return [rep], artifacts
    grid = solver.SpectralGrid(L, n)
    grid.check_contains_surface(m)
    # the identities hold for the current actually solved, i.e. its divergence-free part
    J = solver.leray_project(family.on_grid(grid).to_frequency())
    if mode == "sweep":
        return [solver.delta_sweep(m, J, deltas)], {}
    reports = []
    for d in deltas:
        fp = solver.solve_regularized(m, J, d)
        rep = solver.residual_check(m, J, fp, raise_on_violation=False)
        rep.parameters["delta"] = d
        reports.append(rep)
        if args.write_fields:
            E = grid.to_physical(fp.E)
            H = grid.to_physical(fp.H)
            artifacts[f"delta_{d:g}"] = [str(p) for p in write_field(
                out / f"field_delta_{d:g}", np.stack([E, H]), {"grid": grid.to_dict(), "delta": d,
                                                                "layout": "[E|H, x1, x2, x3, component]"})]
    return reports, artifacts


def _patch(name: str):
    from . import riesz

    table = {
        "sphere": riesz.unit_sphere,
        "paraboloid": riesz.paraboloid_patch,
        "cone": riesz.cone_patch,
        "sphere_cap": riesz.sphere_cap_patch,
    }
    if name not in table:
        raise ValidationError(f"unknown surface {name!r}; choose from {sorted(table)}")
    return table[name]()


def _sample_points(rng, n, radius):
    v = rng.standard_normal((n, 3))
    return radius * v / np.linalg.norm(v, axis=1)[:, None] * rng.uniform(0, 1, (n, 1)) ** (1 / 3)


def run_probe(args, cfg):
    from . import riesz

    P = cfg.params
    cmd = args.cmd
    if cmd == "decay":
        surf = _patch(P.get("surface", "sphere"))
        dirs = P.get("directions", [[0.3, -0.5, 0.81]])
        return [riesz.decay_fit(surf, dirs, tuple(P.get("r_range", (10, 100))))]
    if cmd == "kernel":
        patch = _patch(P.get("patch", "paraboloid"))
        deltas = P.get("deltas", [2.0**-j for j in range(3, 10)])
        return [riesz.layer_kernel_probe(patch, deltas, P.get("aperture"))]
    if cmd == "dyadic":
        alphas = P.get("alphas", [0.3, 0.5, 0.7, 0.9])
        J = int(P.get("J", 12))
        errs = {f"alpha_{a:g}": riesz.dyadic_family(a).telescoping_error(J) for a in alphas}
        tol = {f"alpha_{a:g}": (5e-3 if a >= 0.9 else 1e-3) for a in alphas}
        return [ProbeReport("dyadic", {"alphas": alphas, "J": J}, residuals=errs,
                            flags={k: errs[k] < tol[k] for k in errs},
                            info={"construction": riesz.DyadicFamily(alphas[0]).construction})]
    rng = np.random.default_rng(cfg.seed)
    if cmd == "riesz":
        if P.get("operator", "patch") == "cone":
            sheets = riesz.exact_cone(float(P.get("radius", 0.2)))
            c = sheets.radius
            fh = riesz.gaussian_f_hat(0.5 * c * np.array([1, 0, 1]) / np.sqrt(2), c / 20)
            pts = _sample_points(rng, int(P.get("n_points", 64)), float(P.get("point_radius", 50.0)))
            alpha = float(P.get("alpha", 1.0))
            res = riesz.cone_multiplier_apply(sheets, alpha, fh, pts, ell_max=int(P.get("ell_max", 6)))
            resid, flags = {}, {}
            if alpha == 1.0:
                ref = riesz.cone_surface_quadrature(sheets, fh, pts)
                resid["vs_surface_quadrature"] = riesz.relative_l2(res.values, ref)
                flags["within_3pct"] = resid["vs_surface_quadrature"] < 0.03
            scal = riesz.annulus_scaling(sheets, alpha, 1 / 0.8, 1 / 0.2)
            rep = ProbeReport("cone_multiplier", {"alpha": alpha, "sheets": sheets.name, "ell_max": res.info["ell_max"]},
                              residuals=resid, flags=flags, info=res.info)
            return [rep, scal]
        patch = _patch(P.get("patch", "paraboloid"))
        alpha = float(P.get("alpha", 1.0))
        fh = riesz.gaussian_f_hat(P.get("f_center", [0.1, 0.0, 0.005]), float(P.get("f_width", 0.15)))
        pts = _sample_points(rng, int(P.get("n_points", 32)), float(P.get("point_radius", 5.0)))
        val = riesz.bochner_riesz_apply(patch, alpha, fh, pts, delta_floor=float(P.get("delta_floor", 2.0**-14)))
        resid, flags = {}, {}
        if alpha == 1.0:
            resid["vs_restriction_extension"] = riesz.relative_l2(val, riesz.restriction_extension(patch, fh, pts))
            flags["within_2pct"] = resid["vs_restriction_extension"] < 0.02
        return [ProbeReport("bochner_riesz", {"patch": patch.name, "alpha": alpha}, residuals=resid, flags=flags,
                            info={"output_l2": float(np.linalg.norm(val))}, provenance={"seed": cfg.seed})]
    if cmd == "foliation":
        from .foliation import SlabBump, foliation_apply
        from .solver import SpectralGrid

        m = MaterialTensors.from_dict(cfg.material)
        t0 = float(P.get("t0", 0.3))
        center = tuple(P.get("center", (0.0, 1.0, 0.0)))
        width = float(P.get("width", 0.15))
        f = SlabBump(m, center, width, t0)
        grid = SpectralGrid(4 * width, int(P.get("grid_n", 64)), center=center)
        pts = _sample_points(rng, int(P.get("n_points", 64)), float(P.get("point_radius", 3.0)))
        _, rep = foliation_apply(m, f, float(P.get("delta", 0.05)), t0, int(P.get("layer_count", 64)),
                                 points=pts, grid=grid)
        return [rep]
    patch = _patch(P.get("patch", "sphere_cap"))
    nodes = [tuple(n) for n in P.get("nodes", [(0.8, 0.2), (0.55, 0.45)])]
    return [riesz.norm_region_probe(patch, float(P.get("alpha", 1.0)), nodes,
                                    tuple(P.get("families", riesz.REGION_FAMILIES)),
                                    tuple(P.get("scales", (4, 8, 16, 32, 64))), seed=cfg.seed)]


def run_report(args, cfg, out: Path):
    from .io import emit_plotdata

    try:
        env = json.loads(Path(args.inp).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read report {args.inp}: {exc}") from exc
    files = emit_plotdata(env, out)
    print("\n".join(str(f) for f in files))
    return 0 if env.get("passed", False) else 2


def _thread_limit(n):
    if n is None:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        with _thread_limit(cfg.threads):
            if cfg.subcommand == "report":
                return run_report(args, cfg, out)
            artifacts = {}
            if cfg.subcommand == "identities":
                reports, artifacts = run_identities(args, cfg)
            elif cfg.subcommand == "geometry":
                reports, artifacts = run_geometry(args, cfg, out)
            elif cfg.subcommand == "solve":
                reports, artifacts = run_solve(args, cfg, out)
            else:
                reports = run_probe(args, cfg)
        config_echo = {**cfg.to_dict(), "argv": list(sys.argv[1:] if argv is None else argv)}
        env = ReportEnvelope(config_echo, reports)
        doc = env.to_dict()
        if artifacts:
            doc["artifacts"] = jsonable(artifacts)
        path = out / f"{cfg.subcommand}{'_' + args.cmd if hasattr(args, 'cmd') else ''}.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True))
        status = "PASS" if env.passed else "FAIL"
        print(f"{status} {path}")
        for r in reports:
            bad = [k for k, v in r.flags.items() if not v]
            if bad:
                print(f"  {r.experiment}: failing flags {', '.join(bad)}", file=sys.stderr)
        return 0 if env.passed else 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except FresnelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
