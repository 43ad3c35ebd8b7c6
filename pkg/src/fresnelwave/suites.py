"""Report-producing checks for the wave-surface geometry, used by the CLI and the tests."""

from __future__ import annotations

import numpy as np

from . import geometry as G
from .geometry import (
    circle_parameter,
    curvature_at,
    darboux_chart,
    hamiltonian_circle_window,
    hessian_signature,
    implicit_curvatures,
    singular_points,
)
from .materials import MaterialTensors, normalize
from .report import ProbeReport

SINGULAR_TOL = 1e-10


def singular_report(m: MaterialTensors) -> ProbeReport:
    nm = normalize(m)
    sp = singular_points(nm)
    sigs = hessian_signature(nm)
    return ProbeReport(
        experiment="singular_points",
        parameters={"material": m.to_dict()},
        residuals={"N": sp.residual_N, "grad_N": sp.residual_grad},
        flags={
            "N_small": sp.residual_N < SINGULAR_TOL,
            "grad_small": sp.residual_grad < SINGULAR_TOL,
            "signature_2_1": all(s.signature_p == (2, 1) or s.signature_minus_p == (2, 1) for s in sigs),
        },
        info={
            "points_eta": sp.points,
            "points_xi": nm.to_xi(sp.points),
            "axis_index": sp.axis_index,
            "hessians": [s.to_dict() for s in sigs],
            "sign_convention": "p = -omega^6 N(eta); D^2 p has signature (2, 1)",
        },
    )


def curvature_report(m: MaterialTensors, n_circle: int = 200, n_regular: int = 500, seed: int = 0,
                     margin: float = 0.02) -> ProbeReport:
    """Curvature along the Hamiltonian circles, chart-vs-implicit agreement and the K sign pattern."""
    nm = normalize(m)
    e = np.sort(nm.eps)
    lo, hi = hamiltonian_circle_window(nm)
    s_circ = np.linspace(lo, hi, n_circle + 2)[1:-1]
    k_circ, a_circ = [], []
    for s in s_circ:
        t = G.hamiltonian_circle(nm, s)
        K, _, a = curvature_at(nm, s, t)
        k_circ.append(abs(K))
        a_circ.append(abs(a - e[1]))

    rng = np.random.default_rng(seed)
    rel, signs_ok, counts = [], True, {"inner": 0, "outer_outside": 0, "outer_inside": 0}
    mat = nm.as_material()
    e1, e2, e3 = e
    for i in range(n_regular):
        f1, f2 = rng.uniform(margin, 1 - margin, 2)
        if i % 2 == 0:
            s, t = e1 + f1 * (e2 - e1), e2 + f2 * (e3 - e2)
        else:
            s, t = e2 + f1 * (e3 - e2), e1 + f2 * (e2 - e1)
        try:
            d = darboux_chart(nm, s, t)
        except Exception:
            continue
        K_imp, _ = implicit_curvatures(mat, d.point)
        rel.append(abs(K_imp - d.gauss_K) / max(abs(d.gauss_K), 1e-300))
        if d.sheet == "inner":
            counts["inner"] += 1
            signs_ok &= d.gauss_K > 0
        else:
            T = circle_parameter(e, s)
            if abs(t - T) < 1e-6:
                continue
            inside = t > T
            counts["outer_inside" if inside else "outer_outside"] += 1
            signs_ok &= (d.gauss_K < 0) if inside else (d.gauss_K > 0)
    res = {
        "circle_max_abs_K": float(max(k_circ)),
        "circle_max_alpha_minus_eps2": float(max(a_circ)),
        "chart_vs_implicit_K": float(max(rel)),
    }
    return ProbeReport(
        experiment="curvature",
        parameters={"material": m.to_dict(), "n_circle": n_circle, "n_regular": n_regular, "margin": margin},
        residuals=res,
        flags={
            "circle_K_zero": res["circle_max_abs_K"] < 1e-9,
            "circle_alpha_eps2": res["circle_max_alpha_minus_eps2"] < 1e-10,
            "chart_matches_implicit": res["chart_vs_implicit_K"] < 1e-6,
            "sign_pattern": bool(signs_ok),
        },
        info={"sample_counts": counts, "circle_window": [lo, hi],
              "sign_rule": "inner K > 0; outer K > 0 for t < T(s) and K < 0 for t > T(s)"},
        provenance={"seed": seed},
    )
