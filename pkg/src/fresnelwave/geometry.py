"""Geometry of the normalized Fresnel surface N(eta) = 0.

Chart formulas assume ascending permittivities e1 < e2 < e3. A
:class:`NormalizedMaterial` with another ordering is sorted internally and
points are mapped back to the caller's axis labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import symbols
from .errors import (
    BracketFailure,
    DegenerateHessian,
    NoAdmissibleAxis,
    OutOfChart,
    SingularGradient,
)
from .materials import MaterialTensors, NormalizedMaterial, normalized_symbol

CHART_MARGIN = 1e-9
GRADIENT_FLOOR = 1e-8


def _unit_material(eps) -> MaterialTensors:
    return MaterialTensors(tuple(eps), (1.0, 1.0, 1.0), 1.0)


def normalized_gradient(eps, eta) -> np.ndarray:
    """Closed-form gradient of N: component i is t_i(eta) * eta_i."""
    e = np.asarray(eps, float)
    eta = np.asarray(eta, float)
    sq = eta**2
    r2 = sq.sum(axis=-1)[..., None]
    w = (sq @ e)[..., None]
    nxt = np.roll(e, -1)
    nxt2 = np.roll(e, -2)
    coef = -2 / nxt - 2 / nxt2 + (2 * e * r2 + 2 * w) / np.prod(e)
    return coef * eta


def normalized_hessian(eps, eta) -> np.ndarray:
    # p = -N for unit permeability and frequency
    return -symbols.dispersion_hessian(_unit_material(eps), eta)


def unit_dispersion_hessian(eps, eta) -> np.ndarray:
    """D^2 p at unit permeability and frequency, where p = -N."""
    return symbols.dispersion_hessian(_unit_material(eps), eta)


# ------------------------------------------------------------ singular points


@dataclass(frozen=True)
class SingularPointSet:
    points: np.ndarray  # (4, 3)
    axis_index: int  # 1-based i with eps_{i+1} strictly between eps_i and eps_{i+2}
    residual_N: float
    residual_grad: float


def singular_points(nm: NormalizedMaterial) -> SingularPointSet:
    e = nm.eps
    for i in range(3):
        a, b, c = e[i], e[(i + 1) % 3], e[(i + 2) % 3]
        if min(a, c) < b < max(a, c):
            break
    else:
        raise NoAdmissibleAxis(f"no middle permittivity in {tuple(e)}")
    sq_i = c * (a - b) / (a - c)
    sq_k = a * (c - b) / (c - a)
    if sq_i <= 0 or sq_k <= 0:
        raise NoAdmissibleAxis(f"non-positive squares {sq_i}, {sq_k}")
    k = (i + 2) % 3
    pts = np.zeros((4, 3))
    for n, (si, sk) in enumerate(((1, 1), (1, -1), (-1, 1), (-1, -1))):
        pts[n, i] = si * np.sqrt(sq_i)
        pts[n, k] = sk * np.sqrt(sq_k)
    res_n = float(np.max(np.abs(normalized_symbol(e, pts))))
    res_g = float(np.max(np.linalg.norm(normalized_gradient(e, pts), axis=1)))
    return SingularPointSet(pts, i + 1, res_n, res_g)


# --------------------------------------------------------------- Darboux chart


def _sorted(nm: NormalizedMaterial):
    order = np.argsort(nm.eps)
    return nm.eps[order], order


def chart_sheet(e, s, t, margin=CHART_MARGIN):
    """Return 'inner' or 'outer' for sorted permittivities e, or raise OutOfChart."""
    e1, e2, e3 = e
    if e1 + margin < s < e2 - margin and e2 + margin < t < e3 - margin:
        return "inner"
    if e1 + margin < t < e2 - margin and e2 + margin < s < e3 - margin:
        return "outer"
    raise OutOfChart(f"(s, t) = ({s}, {t}) outside both chart windows for eps = {tuple(e)}")


def chart_point(e, s, t) -> np.ndarray:
    """Unsigned chart point for sorted permittivities, vectorized in s and t."""
    e = np.asarray(e, float)
    s = np.asarray(s, float)[..., None]
    t = np.asarray(t, float)[..., None]
    nxt, nxt2 = np.roll(e, -1), np.roll(e, -2)
    arg = np.prod(e) * (e - s) * (1 / t - 1 / e) / ((e - nxt) * (e - nxt2))
    return np.sqrt(np.maximum(arg, 0.0))


def chart_derivatives(e, s, t, phi):
    """First and second partial derivatives of the chart, each (..., 3)."""
    e = np.asarray(e, float)
    s = np.asarray(s, float)[..., None]
    t = np.asarray(t, float)[..., None]
    ds = phi / (2 * (s - e))
    dt = e * phi / (2 * t * (t - e))
    dss = -phi / (4 * (s - e) ** 2)
    dst = e * phi / (4 * t * (t - e) * (s - e))
    dtt = e * (3 * e - 4 * t) * phi / (4 * t**2 * (t - e) ** 2)
    return ds, dt, dss, dst, dtt


def _symmetric_functions(e):
    e1, e2, e3 = e
    return e1 + e2 + e3, e1 * e2 + e1 * e3 + e2 * e3, e1 * e2 * e3


def first_form(e, s, t):
    sig1, sig2, sig3 = _symmetric_functions(e)
    Q = s * s * t - sig1 * s * t + sig2 * t - sig3
    ps = np.prod([s - ei for ei in e], axis=0)
    pt = np.prod([t - ei for ei in e], axis=0)
    E = Q / (4 * t * ps)
    G = sig3 * (s - t) / (4 * t * t * pt)
    return E, np.zeros_like(np.asarray(E, float)), G


def second_form(e, s, t):
    sig1, sig2, sig3 = _symmetric_functions(e)
    Q = s * s * t - sig1 * s * t + sig2 * t - sig3
    m = np.sqrt(sig3 / ((t - s) * Q))
    P_L = s * s * t - 2 * s * t * t + sig1 * t * t - sig2 * t + sig3
    P_N = -s * s * t * t + sig1 * s * t * t - sig2 * t * t + sig3 * (2 * t - s)
    ps = np.prod([s - ei for ei in e], axis=0)
    pt = np.prod([t - ei for ei in e], axis=0)
    return m * P_L / (4 * t * ps), m / (4 * t), m * P_N / (4 * t * t * pt)


def support_function(e, s, t):
    """Squared distance from the origin to the tangent plane at the chart point."""
    sig1, sig2, sig3 = _symmetric_functions(e)
    Q = s * s * t - sig1 * s * t + sig2 * t - sig3
    return (t - s) * sig3 / Q


def gauss_curvature(e, s, t):
    e1, e2, e3 = e
    sig1, sig2, sig3 = _symmetric_functions(e)
    Q = s * s * t - sig1 * s * t + sig2 * t - sig3
    num = (s * t - (e1 + e2) * t + e1 * e2) * (s * t - (e1 + e3) * t + e1 * e3) * (s * t - (e2 + e3) * t + e2 * e3)
    return num / ((s - t) * Q * Q)


def gauss_from_support(e, s, alpha):
    e1, e2, e3 = e
    return (alpha - e1) * (alpha - e2) * (alpha - e3) / (alpha * (s - e1) * (s - e2) * (s - e3))


def mean_curvature(e, s, t):
    """Mean curvature with the leading -1/2 normalization of the closed form."""
    e1, e2, e3 = e
    a = support_function(e, s, t)
    K = gauss_curvature(e, s, t)
    ra = np.sqrt(a)
    bracket = (
        (a - e1) * (a - e2) / ((s - e1) * (s - e2))
        + (a - e2) * (a - e3) / ((s - e2) * (s - e3))
        + (a - e1) * (a - e3) / ((s - e1) * (s - e3))
    )
    return -0.5 * (s * K / ra - bracket / ra)


def mean_from_forms(e, s, t):
    """(GL - 2FM + EN) / (2(EG - F^2)) from the closed-form fundamental forms."""
    E, F, G = first_form(e, s, t)
    L, M, N = second_form(e, s, t)
    return (G * L - 2 * F * M + E * N) / (2 * (E * G - F * F))


@dataclass(frozen=True)
class DarbouxSample:
    s: float
    t: float
    signs: tuple
    sheet: str
    point: np.ndarray
    firstform: tuple
    secondform: tuple
    gauss_K: float
    mean_Km: float
    mean_from_forms: float
    alpha: float

    def to_dict(self):
        return {
            "s": self.s,
            "t": self.t,
            "signs": list(self.signs),
            "sheet": self.sheet,
            "point": self.point.tolist(),
            "firstform": list(self.firstform),
            "secondform": list(self.secondform),
            "gauss_K": self.gauss_K,
            "mean_Km": self.mean_Km,
            "mean_from_forms": self.mean_from_forms,
            "alpha": self.alpha,
        }


def _apply_signs(nm, unsigned_sorted, signs):
    e, order = _sorted(nm)
    point = np.empty(3)
    point[order] = unsigned_sorted
    return point * np.asarray(signs, float)


def darboux_chart(nm: NormalizedMaterial, s: float, t: float, signs=(1, 1, 1)) -> DarbouxSample:
    """Chart point with forms and curvatures. ``signs`` refer to the caller's axis order."""
    e, _ = _sorted(nm)
    sheet = chart_sheet(e, s, t)
    phi = chart_point(e, s, t)
    pt = _apply_signs(nm, phi, signs)
    E, F, G = first_form(e, s, t)
    L, M, N = second_form(e, s, t)
    return DarbouxSample(
        s=float(s),
        t=float(t),
        signs=tuple(int(x) for x in signs),
        sheet=sheet,
        point=pt,
        firstform=(float(E), float(F), float(G)),
        secondform=(float(L), float(M), float(N)),
        gauss_K=float(gauss_curvature(e, s, t)),
        mean_Km=float(mean_curvature(e, s, t)),
        mean_from_forms=float(mean_from_forms(e, s, t)),
        alpha=float(support_function(e, s, t)),
    )


def curvature_at(nm: NormalizedMaterial, s: float, t: float, signs=(1, 1, 1)):
    """(K, K_m, alpha) at a chart point; K is cross-checked against the support-function form."""
    e, _ = _sorted(nm)
    chart_sheet(e, s, t)
    K = float(gauss_curvature(e, s, t))
    a = float(support_function(e, s, t))
    K2 = float(gauss_from_support(e, s, a))
    if abs(K - K2) > 1e-9 * max(abs(K), abs(K2), 1e-300) and abs(K - K2) > 1e-12:
        raise ArithmeticError(f"Gaussian curvature forms disagree: {K} vs {K2}")
    return K, float(mean_curvature(e, s, t)), a


def circle_parameter(e, s):
    """t = e1 e3 / (e1 + e3 - s) for sorted permittivities, without domain checks."""
    e1, _, e3 = e
    return e1 * e3 / (e1 + e3 - s)


def hamiltonian_circle(nm: NormalizedMaterial, s: float) -> float:
    e, _ = _sorted(nm)
    t = float(circle_parameter(e, s))
    if chart_sheet(e, s, t) != "outer":
        raise OutOfChart(f"Hamiltonian circle point ({s}, {t}) is not on the outer sheet")
    return t


def hamiltonian_circle_window(nm: NormalizedMaterial, margin=CHART_MARGIN):
    """Open interval of s for which (s, T(s)) lies in the outer window."""
    e1, e2, e3 = _sorted(nm)[0]
    # T(s) < e2  <=>  s < e1 + e3 - e1 e3 / e2
    return e2 + margin, min(e3, e1 + e3 - e1 * e3 / e2) - margin


# ------------------------------------------------------- implicit curvatures


def implicit_curvatures_from(grad, hess):
    """Bordered-Hessian Gaussian curvature and -div(grad F / |grad F|)."""
    grad = np.asarray(grad, float)
    hess = np.asarray(hess, float)
    g2 = np.sum(grad * grad, axis=-1)
    border = np.zeros(grad.shape[:-1] + (4, 4))
    border[..., :3, :3] = hess
    border[..., :3, 3] = grad
    border[..., 3, :3] = grad
    K = -np.linalg.det(border) / g2**2
    gn = np.sqrt(g2)
    tr = np.trace(hess, axis1=-2, axis2=-1)
    ghg = np.einsum("...i,...ij,...j->...", grad, hess, grad)
    Km = -(tr / gn - ghg / gn**3)
    return K, Km


def implicit_curvatures(m: MaterialTensors, xi) -> tuple[float, float]:
    """Curvatures of the level set of p through xi.

    Returns (K, Km) with Km = -div(grad p / |grad p|) / 2, the mean curvature
    for the orientation of grad p; see :func:`mean_curvature` for the closed form.
    """
    xi = np.asarray(xi, float)
    g = symbols.dispersion_gradient(m, xi)
    if np.linalg.norm(g) < GRADIENT_FLOOR:
        raise SingularGradient(f"|grad p| = {np.linalg.norm(g):.3e} at {xi}")
    K, div = implicit_curvatures_from(g, symbols.dispersion_hessian(m, xi))
    return float(K), 0.5 * float(div)


# ----------------------------------------------------- Hessian at singular pts


@dataclass(frozen=True)
class HessianSignature:
    point: np.ndarray
    hessian: np.ndarray  # D^2 p at the point, p = -N
    eigenvalues: np.ndarray
    frame: np.ndarray  # columns are eigenvectors
    signature_p: tuple  # (positive, negative) for D^2 p
    signature_minus_p: tuple

    @property
    def realizing_sign(self) -> str:
        return "+p" if self.signature_p == (2, 1) else "-p"

    def to_dict(self):
        return {
            "point": self.point.tolist(),
            "hessian": self.hessian.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "signature_p": list(self.signature_p),
            "signature_minus_p": list(self.signature_minus_p),
            "realizing_sign": self.realizing_sign,
        }


def closed_form_singular_hessian(e) -> dict:
    """Entries of D^2 p at the singular point with positive coordinates, ascending e."""
    e1, e2, e3 = e
    return {
        "D11": -8 * (e2 - e1) / (e2 * (e3 - e1)),
        "D22": 2 * (e1 - e2) * (e2 - e3) / (e1 * e2 * e3),
        "D33": -8 * (e2 - e3) / (e2 * (e1 - e3)),
        "D13": -4 * (e1 + e3) * np.sqrt((e2 - e1) * (e3 - e2)) / (e2 * np.sqrt(e1 * e3) * (e3 - e1)),
    }


def hessian_signature(nm: NormalizedMaterial) -> list[HessianSignature]:
    sp = singular_points(nm)
    out = []
    for z in sp.points:
        h = unit_dispersion_hessian(nm.eps, z)
        h = 0.5 * (h + h.T)
        lam, vec = np.linalg.eigh(h)
        scale = np.max(np.abs(lam))
        if np.min(np.abs(lam)) < 1e-8 * scale:
            raise DegenerateHessian(f"eigenvalues {lam} at {z}")
        pos, neg = int(np.sum(lam > 0)), int(np.sum(lam < 0))
        out.append(HessianSignature(z, h, lam, vec, (pos, neg), (neg, pos)))
    return out


# ------------------------------------------------------- cone factorization


@dataclass
class ConeFactorization:
    center: np.ndarray
    radius: float
    samples: list = field(default_factory=list)  # dicts per sample
    remainder_constant: float = 0.0
    remainder_exponent: float = float("nan")
    min_abs_m: float = float("nan")
    max_root_residual: float = 0.0
    transform: np.ndarray | None = None  # xi - center = transform @ y
    symbol: object = None  # callable y -> p_tilde(y)

    def to_dict(self):
        return {
            "center": np.asarray(self.center).tolist(),
            "radius": self.radius,
            "n_samples": len(self.samples),
            "remainder_constant": self.remainder_constant,
            "remainder_exponent": self.remainder_exponent,
            "min_abs_m": self.min_abs_m,
            "max_root_residual": self.max_root_residual,
        }


def fresnel_cone_symbol(nm: NormalizedMaterial, which_point: int = 0):
    """Return (p_tilde, center, transform) with D^2 p_tilde(0) = diag(-1, -1, 1).

    p_tilde(y) = -2 p(zeta + transform @ y) where the columns of ``transform``
    are Hessian eigenvectors of -D^2 p scaled by |lambda|^(-1/2), negative
    eigenvalues first.
    """
    sig = hessian_signature(nm)[which_point]
    lam, vec = np.linalg.eigh(-sig.hessian)
    order = np.argsort(lam)  # two negative then one positive
    lam, vec = lam[order], vec[:, order]
    transform = vec / np.sqrt(np.abs(lam))
    center = sig.point
    e = nm.eps

    def p_tilde(y):
        y = np.asarray(y, float)
        x = center + y @ transform.T
        return 2.0 * normalized_symbol(e, x)  # -2p = 2N at unit frequency

    return p_tilde, center, transform


def cone_roots(p_tilde, yp):
    """Roots psi1 > 0 and -psi2 < 0 of y_d -> p_tilde(y', y_d) on the monotonicity brackets."""
    r = float(np.linalg.norm(yp))

    def f(z):
        return float(p_tilde(np.array([yp[0], yp[1], z])))

    from scipy.optimize import brentq

    out = []
    for sgn in (1.0, -1.0):
        a, b = sgn * r / 2, sgn * 2 * r
        fa, fb = f(a), f(b)
        if not (np.sign(fa) != np.sign(fb)):
            return None
        root = brentq(f, min(a, b), max(a, b), xtol=1e-16 * max(r, 1e-300), rtol=4 * np.finfo(float).eps, maxiter=500)
        out.append(abs(root))
    return out[0], out[1]


def cone_factorize(p_tilde, radius: float, n_samples: int = 200, rng_seed: int = 0, center=None,
                   transform=None, max_halvings: int = 20) -> ConeFactorization:
    """Factor p_tilde = (y_d - psi1)(y_d + psi2) m near the origin.

    ``p_tilde`` must have Hessian diag(-1, -1, 1) at 0. The radius is halved
    until every sampled bracket shows a sign change.
    """
    rng = np.random.default_rng(rng_seed)
    c = float(radius)
    for _ in range(max_halvings + 1):
        rho = c * np.geomspace(1e-2, 1.0, n_samples)
        theta = rng.uniform(0, 2 * np.pi, n_samples)
        ok = True
        samples = []
        for rr, th in zip(rho, theta):
            # keep the full sample point (y', y_d) inside the c-ball for y_d <= 2|y'|
            yp = (rr / np.sqrt(5)) * np.array([np.cos(th), np.sin(th)])
            roots = cone_roots(p_tilde, yp)
            if roots is None:
                ok = False
                break
            psi1, psi2 = roots
            n = float(np.linalg.norm(yp))
            yd = rng.uniform(-2 * n, 2 * n)
            y = np.array([yp[0], yp[1], yd])
            denom = (yd - psi1) * (yd + psi2)
            m_val = float(p_tilde(y)) / denom if denom != 0 else np.nan
            samples.append(
                {
                    "xi_prime": yp.tolist(),
                    "psi1": psi1,
                    "psi2": psi2,
                    "r1": n - psi1,
                    "r2": psi2 - n,
                    "m": m_val,
                    "res1": abs(float(p_tilde(np.array([yp[0], yp[1], psi1])))),
                    "res2": abs(float(p_tilde(np.array([yp[0], yp[1], -psi2])))),
                }
            )
        if ok:
            break
        c *= 0.5
    else:
        raise BracketFailure("no sign change on monotonicity brackets", largest_radius=None)
    norms = np.array([np.linalg.norm(s["xi_prime"]) for s in samples])
    rem = np.array([max(abs(s["r1"]), abs(s["r2"])) for s in samples])
    nz = rem > 0
    const = float(np.max(rem[nz] / norms[nz] ** 2)) if nz.any() else 0.0
    if nz.sum() >= 3 and np.ptp(np.log(rem[nz])) > 0:
        from .report import loglog_fit

        expo = loglog_fit(norms[nz], rem[nz]).slope
    else:
        expo = float("nan")
    ms = np.array([s["m"] for s in samples])
    return ConeFactorization(
        center=np.zeros(3) if center is None else np.asarray(center),
        radius=c,
        samples=samples,
        remainder_constant=const,
        remainder_exponent=expo,
        min_abs_m=float(np.nanmin(np.abs(ms))),
        max_root_residual=float(max(max(s["res1"], s["res2"]) for s in samples)),
        transform=transform,
        symbol=p_tilde,
    )


def cone_factorize_fresnel(nm: NormalizedMaterial, which_point: int = 0, radius: float = 0.2,
                           n_samples: int = 200, rng_seed: int = 0) -> ConeFactorization:
    p_tilde, center, transform = fresnel_cone_symbol(nm, which_point)
    return cone_factorize(p_tilde, radius, n_samples, rng_seed, center=center, transform=transform)
