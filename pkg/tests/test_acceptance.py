"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line in the summary."""

import time

import numpy as np
import pytest

from fresnelwave import geometry, riesz, solver, symbols
from fresnelwave.foliation import SlabBump, foliation_apply
from fresnelwave.materials import MaterialTensors, normalize, normalized_symbol
from fresnelwave.meshing import classify_and_mesh
from fresnelwave.suites import curvature_report, singular_report


def _ball_points(seed, n, radius):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, 3))
    return radius * v / np.linalg.norm(v, axis=1)[:, None] * rng.uniform(0, 1, (n, 1)) ** (1 / 3)


def test_c01_algebra_identities(record):
    t = time.perf_counter()
    rep = symbols.identity_suite(None, 10_000, rng_seed=7, raise_on_violation=False)
    dt = time.perf_counter() - t
    keys = ("adjugate", "cancellation_curl", "cancellation_second_order", "determinant")
    worst = max(rep.residuals[k] for k in keys)
    ok = worst < 1e-10 and dt < 10
    record(1, "algebra identities", ok, f"max rel residual {worst:.2e} (< 1e-10), {dt:.1f}s (< 10s)")
    assert worst < 1e-10
    assert dt < 10


def test_c02_singular_points(record, biaxial):
    t = time.perf_counter()
    rep = singular_report(biaxial)
    pts = np.asarray(rep.info["points_xi"])
    a, c = np.sqrt(30 / 7), np.sqrt(5 / 7)
    expected = np.array([[sa * a, 0.0, sc * c] for sa in (1, -1) for sc in (1, -1)])
    # match as sets
    err = max(np.min(np.linalg.norm(pts - e, axis=1)) for e in expected)
    nm = normalize(biaxial)
    eta = nm.to_eta(expected)
    N = np.abs(normalized_symbol(nm.eps, eta)).max()
    gN = np.linalg.norm(geometry.normalized_gradient(nm.eps, eta), axis=1).max()
    # second oracle: the unnormalized symbol p and its gradient at the closed-form points
    scale = np.linalg.norm(symbols.dispersion_gradient(biaxial, 2 * expected), axis=1).max()
    N = max(N, np.abs(symbols.dispersion(biaxial, expected)).max() / scale)
    gN = max(gN, np.linalg.norm(symbols.dispersion_gradient(biaxial, expected), axis=1).max() / scale)
    sig_ok = all(h["signature_p"] == [2, 1] for h in rep.to_dict()["info"]["hessians"])
    dt = time.perf_counter() - t
    ok = err < 1e-12 and N < 1e-10 and gN < 1e-10 and sig_ok and dt < 1
    record(2, "singular points", ok,
           f"point error {err:.1e}, |N| {N:.1e}, |grad N| {gN:.1e}, D2p signature (2,1) {sig_ok}, {dt:.2f}s")
    assert err < 1e-12 and N < 1e-10 and gN < 1e-10
    assert sig_ok
    assert dt < 1


def test_c03_curvature(record, biaxial):
    t = time.perf_counter()
    rep = curvature_report(biaxial, n_circle=200, n_regular=500, seed=3)
    dt = time.perf_counter() - t
    r = rep.residuals
    ok = rep.passed and dt < 30
    record(3, "curvature", ok,
           f"|K| on circles {r['circle_max_abs_K']:.1e}, |alpha-eps2| {r['circle_max_alpha_minus_eps2']:.1e}, "
           f"chart vs implicit {r['chart_vs_implicit_K']:.1e}, sign pattern {rep.flags['sign_pattern']}, {dt:.1f}s")
    assert rep.passed, rep.flags
    assert dt < 30


def test_c04_solver_residual_identity(record, biaxial):
    t = time.perf_counter()
    grid = solver.SpectralGrid(8.0, 64)
    worst = 0.0
    for seed in range(5):
        J = solver.random_current(grid, np.random.default_rng(seed))
        for d in (1e-2, 0.1, 1.0):
            fp = solver.solve_regularized(biaxial, J, d)
            rep = solver.residual_check(biaxial, J, fp, raise_on_violation=False)
            worst = max(worst, rep.residuals["faraday"], rep.residuals["ampere"])
    dt = time.perf_counter() - t
    ok = worst < 1e-9 and dt < 60
    record(4, "solver residual identity", ok, f"max rel residual {worst:.2e} (< 1e-9), 5 currents x 3 deltas, {dt:.1f}s")
    assert worst < 1e-9
    assert dt < 60


def test_c05_delta_convergence(record, biaxial):
    t = time.perf_counter()
    grid = solver.SpectralGrid(6.0, 96)
    center = 1.1829 * np.ones(3) / np.sqrt(3)  # on the inner sheet
    J = solver.GaussianBump(tuple(center), 0.4, (0.0, 1.0, -1.0), real=True).on_grid(grid)
    deltas = [2.0**-k for k in range(3, 11)]
    rep = solver.delta_sweep(biaxial, J, deltas, q_norms=(6,))
    dt = time.perf_counter() - t
    diffs = rep.tables["L6"]["rel_diff"][1:]
    dec = rep.flags["L6_decreasing"]
    final = diffs[-1]
    ok = dec and final < 1e-2 and dt < 300
    record(5, "delta convergence", ok,
           f"L6 successive diffs {' '.join(f'{x:.3f}' for x in diffs)}; decreasing {dec}, final {final:.3f} (< 1e-2), {dt:.1f}s")
    assert dt < 300
    assert dec and final < 1e-2


def test_c06_sokhotsky_cross_validation(record, biaxial):
    t = time.perf_counter()
    c = (0.0, 1.0, 0.0)
    fam = solver.GaussianBump(c, 0.3, (1.0, 0.0, 1.0))
    pts = _ball_points(0, 64, 3.0)
    deltas = [0.2, 0.1, 0.05]
    reg = solver.regularized_at_points(biaxial, fam, solver.SpectralGrid(1.8, 128, center=c), pts, deltas)
    ref = solver.richardson(reg, deltas, order=2)
    discrepancies = []
    for h in (0.2, 0.1):
        mesh = classify_and_mesh(biaxial, 0.0, h=h, curvatures=False)
        fp = solver.vp_delta_solve(biaxial, fam, mesh, pts, solver.SpectralGrid(1.5, 64, center=c), vp_band=0.3)
        got = np.concatenate([fp.E, fp.H], axis=1)
        discrepancies.append(float(np.linalg.norm(got - ref) / np.linalg.norm(ref)))
    dt = time.perf_counter() - t
    ok = discrepancies[-1] < 0.02 and discrepancies[-1] < discrepancies[0] and dt < 300
    record(6, "Sokhotsky cross-validation", ok,
           f"rel L2 by mesh h=0.2/0.1: {discrepancies[0]:.4f} / {discrepancies[1]:.4f} (< 0.02, decreasing), {dt:.1f}s")
    assert discrepancies[-1] < 0.02
    assert discrepancies[-1] < discrepancies[0]
    assert dt < 300


def test_c07_decay_exponents(record):
    t = time.perf_counter()
    sphere = riesz.unit_sphere()
    errs = []
    rng = np.random.default_rng(5)
    for R in (0.0, 2.5, 7.0, 12.0, 20.0):
        th = rng.standard_normal(3)
        th /= np.linalg.norm(th)
        v = riesz.surface_measure_ft(sphere, R * th, tol=1e-8)
        exact = riesz.sphere_closed_form(R * th)[0]
        errs.append(abs(v - exact) / (4 * np.pi / max(1.0, R)))
    closed_err = max(errs)
    s_sph = riesz.decay_fit(sphere, [[0.3, -0.5, 0.81]]).info["summary_slope"]
    s_par = riesz.decay_fit(riesz.paraboloid_patch(), [[0, 0, 1]]).info["summary_slope"]
    s_cone = riesz.decay_fit(riesz.cone_patch(), [[1, 0, -1]]).info["summary_slope"]
    dt = time.perf_counter() - t
    ok = (closed_err < 1e-6 and abs(s_sph + 1) <= 0.1 and abs(s_par + 1) <= 0.1 and abs(s_cone + 0.5) <= 0.1
          and dt < 120)
    record(7, "decay exponents", ok,
           f"sphere {s_sph:.3f}, paraboloid {s_par:.3f}, cone {s_cone:.3f}; sphere closed-form error {closed_err:.1e}, {dt:.1f}s")
    assert closed_err < 1e-6
    assert abs(s_sph + 1) <= 0.1 and abs(s_par + 1) <= 0.1 and abs(s_cone + 0.5) <= 0.1
    assert dt < 120


def test_c08_layer_kernel(record):
    t = time.perf_counter()
    deltas = [2.0**-k for k in range(3, 10)]
    par = riesz.layer_kernel_probe(riesz.paraboloid_patch(), deltas)
    cone = riesz.layer_kernel_probe(riesz.cone_patch(), deltas)
    e_par = par.fits["sup_exponent"].slope
    e_cone = cone.fits["sup_exponent"].slope
    leak = max(par.residuals["max_outside_support_ratio"], cone.residuals["max_outside_support_ratio"])
    dt = time.perf_counter() - t
    ok = abs(e_par - 2) <= 0.15 and abs(e_cone - 1.5) <= 0.15 and leak < 1e-6 and dt < 120
    record(8, "layer kernel", ok, f"paraboloid {e_par:.3f}, cone {e_cone:.3f}, outside-support ratio {leak:.1e}, {dt:.1f}s")
    assert abs(e_par - 2) <= 0.15 and abs(e_cone - 1.5) <= 0.15
    assert leak < 1e-6
    assert dt < 120


def test_c09_dyadic_telescoping(record):
    t = time.perf_counter()
    errs = {a: riesz.dyadic_family(a).telescoping_error(J=12, lo=2.0**-10, hi=2.0**10) for a in (0.3, 0.5, 0.7, 0.9)}
    tol = {a: (5e-3 if a == 0.9 else 1e-3) for a in errs}
    dt = time.perf_counter() - t
    ok = all(errs[a] < tol[a] for a in errs) and dt < 10
    record(9, "dyadic telescoping", ok, ", ".join(f"alpha={a}: {e:.1e}" for a, e in errs.items()) + f", {dt:.2f}s")
    assert all(errs[a] < tol[a] for a in errs)
    assert dt < 10


def test_c10_foliation(record, biaxial):
    t = time.perf_counter()
    c = (0.0, 1.0, 0.0)
    t0 = 0.3
    f = SlabBump(biaxial, c, 0.15, t0)
    mesh = classify_and_mesh(biaxial, 0.0, h=0.1, t0=t0, curvatures=False)
    pts = _ball_points(0, 64, 3.0)
    _, rep = foliation_apply(biaxial, f, 0.05, t0, 64, points=pts, mesh=mesh,
                             grid=solver.SpectralGrid(0.6, 64, center=c))
    vs_direct = rep.residuals["vs_direct"]
    im = []
    for d in (0.04, 0.02, 0.01):
        _, r = foliation_apply(biaxial, f, d, t0, 64, points=pts, mesh=mesh)
        im.append(r.residuals["imag_vs_pi_G0"])
    dt = time.perf_counter() - t
    dec = all(b < a for a, b in zip(im, im[1:]))
    ok = vs_direct < 0.02 and im[-1] < 0.05 and dec and dt < 300
    record(10, "foliation", ok,
           f"vs direct {vs_direct:.4f} (< 0.02); imag vs pi G(0) at delta 0.04/0.02/0.01: "
           f"{' / '.join(f'{x:.4f}' for x in im)} (< 0.05, decreasing), {dt:.1f}s")
    assert vs_direct < 0.02
    assert im[-1] < 0.05 and dec
    assert dt < 300


def test_c11_region_probe(record):
    t = time.perf_counter()
    rep = riesz.norm_region_probe(riesz.sphere_cap_patch(), 1.0, [(0.80, 0.20), (0.55, 0.45)])
    cls = rep.info["classification"]
    corners = riesz.pentagon_corners(1.0, 2)
    dt = time.perf_counter() - t
    cls_ok = cls["(0.80,0.20)"] == "bounded-consistent" and cls["(0.55,0.45)"] == "growth"
    b_ok = np.allclose(corners["B"], (2 / 3, 1 / 6), atol=1e-12)
    c_ok = np.allclose(corners["C"], (2 / 3, 0.0), atol=1e-12)
    cp_ok = np.allclose(corners["C_prime"], (1.0, 1 / 6), atol=1e-12)
    ok = cls_ok and b_ok and c_ok and cp_ok and dt < 600
    record(11, "region probe", ok,
           f"(0.80,0.20) {cls['(0.80,0.20)']}, (0.55,0.45) {cls['(0.55,0.45)']}; B={corners['B']} C={corners['C']} "
           f"C'={tuple(round(x, 6) for x in corners['C_prime'])} (target (1, 1/6)), {dt:.1f}s")
    assert cls_ok
    assert b_ok and c_ok
    assert dt < 600
    assert cp_ok, f"C' computed from the corner formula is {corners['C_prime']}, target (1, 1/6)"


def test_c12_cone_multiplier(record, biaxial):
    t = time.perf_counter()
    cone = riesz.exact_cone(0.2)
    c = cone.radius
    fh = riesz.gaussian_f_hat(0.5 * c * np.array([1.0, 0.0, 1.0]) / np.sqrt(2), c / 20)
    pts = _ball_points(0, 64, 50.0)
    got = riesz.cone_multiplier_apply(cone, 1.0, fh, pts, ell_max=6, delta_floor=2.0**-8)
    ref = riesz.cone_surface_quadrature(cone, fh, pts)
    agree = riesz.relative_l2(got.values, ref)
    fac = geometry.cone_factorize_fresnel(normalize(biaxial))
    scal = {}
    for name, sheets in (("exact", cone), ("fresnel", riesz.sheets_from_factorization(fac))):
        r = riesz.annulus_scaling(sheets, 1.0, 1 / 0.8, 1 / 0.2)
        scal[name] = (r.info["fitted_exponent"], r.info["expected_exponent"])
    dt = time.perf_counter() - t
    sc_ok = all(abs(a - b) <= 0.2 for a, b in scal.values())
    ok = agree < 0.03 and sc_ok and dt < 300
    record(12, "cone multiplier", ok,
           f"exact cone vs surface quadrature {agree:.4f} (< 0.03); annulus exponent exact {scal['exact'][0]:.3f}, "
           f"Fresnel {scal['fresnel'][0]:.3f} (target {scal['exact'][1]:.2f} +- 0.2), {dt:.1f}s")
    assert agree < 0.03
    assert sc_ok
    assert dt < 300
