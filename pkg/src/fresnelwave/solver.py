"""Regularized Fourier-multiplier solutions of the time-harmonic anisotropic Maxwell system.

Transform convention: f_hat(xi) = int e^{-i x.xi} f(x) dx and
f(x) = (2 pi)^{-3} int e^{i x.xi} f_hat(xi) dxi. Grid sums carry the
weights dx^3 and dxi^3 / (2 pi)^3 exactly once, in :meth:`SpectralGrid.to_frequency`
and :meth:`SpectralGrid.to_physical`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import symbols
from .errors import InvalidBand, MeshFailure, ResidualViolation, SupportViolation, ValidationError
from .materials import MaterialTensors
from .meshing import circle_distance, project_to_level, singular_points_xi, vertex_areas
from .report import ProbeReport
from .smooth import plateau

CONVENTION = "forward exp(-i x.xi); inverse (2pi)^-3 exp(+i x.xi)"
RESIDUAL_RTOL = 1e-9


def _is_smooth(n: int) -> bool:
    for f in (2, 3, 5):
        while n % f == 0:
            n //= f
    return n == 1


# below this, subnormal arithmetic loses relative precision; pointwise ratios skip such nodes
FULL_PRECISION_FLOOR = np.finfo(float).tiny / np.finfo(float).eps


@dataclass(frozen=True)
class SpectralGrid:
    """Cartesian frequency grid on [c - L, c + L)^3 with n nodes per axis.

    ``center`` other than the origin gives a window grid used for local
    quadrature around a compactly concentrated current; the full-surface
    containment check applies to centered grids only.
    """

    L: float
    n: int
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.n < 16 or self.n % 2 or not _is_smooth(self.n):
            raise ValidationError(f"grid size n must be an even 5-smooth integer >= 16, got {self.n}")
        if self.L <= 0:
            raise ValidationError("grid extent L must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def check_contains_surface(self, m: MaterialTensors):
        need = 1.5 * abs(m.omega) * np.sqrt(max(m.eps) * max(m.mu))
        if any(abs(c) > 0 for c in self.center):
            return
        if self.L <= need:
            raise ValidationError(f"grid extent L={self.L} must exceed {need:.4g} to contain the Fresnel surface")

    @property
    def dxi(self) -> float:
        return 2 * self.L / self.n

    @property
    def dx(self) -> float:
        return np.pi / self.L

    def axis(self, k: int) -> np.ndarray:
        return self.center[k] + self.dxi * (np.arange(self.n) - self.n // 2)

    def xi(self) -> np.ndarray:
        return np.stack(np.meshgrid(self.axis(0), self.axis(1), self.axis(2), indexing="ij"), axis=-1)

    def x_axis(self) -> np.ndarray:
        return self.dx * (np.arange(self.n) - self.n // 2)

    def x(self) -> np.ndarray:
        a = self.x_axis()
        return np.stack(np.meshgrid(a, a, a, indexing="ij"), axis=-1)

    def _modulation(self, sign):
        if not any(self.center):
            return None
        return np.exp(sign * 1j * (self.x() @ np.array(self.center)))

    def to_physical(self, f_hat: np.ndarray) -> np.ndarray:
        """Inverse transform; trailing component axes after the three grid axes are allowed."""
        axes = (0, 1, 2)
        out = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(f_hat, axes=axes), axes=axes), axes=axes)
        out *= self.n**3 * self.dxi**3 / (2 * np.pi) ** 3
        mod = self._modulation(+1)
        if mod is not None:
            out *= mod.reshape(mod.shape + (1,) * (out.ndim - 3))
        return out

    def to_frequency(self, f: np.ndarray) -> np.ndarray:
        axes = (0, 1, 2)
        mod = self._modulation(-1)
        if mod is not None:
            f = f * mod.reshape(mod.shape + (1,) * (f.ndim - 3))
        out = np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(f, axes=axes), axes=axes), axes=axes)
        return out * self.dx**3

    def evaluate_at(self, f_hat: np.ndarray, points, chunk: int = 65536) -> np.ndarray:
        """(2pi)^-3 sum_k e^{i x.xi_k} f_hat_k dxi^3 at arbitrary physical points."""
        points = np.atleast_2d(np.asarray(points, float))
        xi = self.xi().reshape(-1, 3)
        vals = f_hat.reshape(len(xi), -1)
        out = np.zeros((len(points), vals.shape[1]), dtype=complex)
        for s in range(0, len(xi), chunk):
            ph = np.exp(1j * points @ xi[s : s + chunk].T)
            out += ph @ vals[s : s + chunk]
        out *= self.dxi**3 / (2 * np.pi) ** 3
        return out.reshape((len(points),) + f_hat.shape[3:])

    def lebesgue_norm(self, f: np.ndarray, q) -> float:
        """Riemann-sum L^q norm of a physical-side field; vector components combine pointwise."""
        a = np.abs(f)
        if f.ndim > 3:
            a = np.sqrt(np.sum(a**2, axis=tuple(range(3, f.ndim))))
        if q == np.inf or q == "inf":
            return float(a.max())
        return float((np.sum(a**q) * self.dx**3) ** (1.0 / q))

    def to_dict(self):
        return {"L": self.L, "n": self.n, "center": list(self.center), "convention": CONVENTION}


# --------------------------------------------------------------- currents


def leray_array(J: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """(I - xi xi^T / |xi|^2) J at every node; the zero mode is left unchanged.

    Where J is nearly parallel to xi the first pass leaves a roundoff remnant
    that is not itself transverse, so the projection is applied twice and a
    result at roundoff level relative to the input is set to zero.
    """
    x2 = np.sum(xi * xi, axis=-1)
    safe = np.where(x2 > 0, x2, 1.0)
    size = np.linalg.norm(J, axis=-1)
    for _ in range(2):
        coef = np.where(x2 > 0, np.sum(xi * J, axis=-1) / safe, 0.0)
        J = J - coef[..., None] * xi
    lost = (np.linalg.norm(J, axis=-1) <= 16 * np.finfo(float).eps * size) & (x2 > 0)
    return np.where(lost[..., None], 0, J)


@dataclass
class CurrentPair:
    Je: np.ndarray
    Jm: np.ndarray
    grid: SpectralGrid
    side: str = "frequency"

    def to_frequency(self) -> "CurrentPair":
        if self.side == "frequency":
            return self
        return CurrentPair(self.grid.to_frequency(self.Je), self.grid.to_frequency(self.Jm), self.grid, "frequency")

    def divergence_residual(self) -> float:
        """max |xi . J(xi)| / (|xi| |J(xi)|) over nodes with nonzero data."""
        xi = self.grid.xi()
        worst = 0.0
        for J in (self.Je, self.Jm):
            num = np.abs(np.sum(xi * J, axis=-1))
            den = np.linalg.norm(xi, axis=-1) * np.linalg.norm(J, axis=-1)
            mask = den > FULL_PRECISION_FLOOR
            if mask.any():
                worst = max(worst, float(np.max(num[mask] / den[mask])))
        return worst


def leray_project(J: CurrentPair) -> CurrentPair:
    if J.side != "frequency":
        raise ValidationError("Leray projection acts on frequency-side currents")
    xi = J.grid.xi()
    return CurrentPair(leray_array(J.Je, xi), leray_array(J.Jm, xi), J.grid, "frequency")


class CurrentFamily:
    """Analytic frequency-side current, already divergence-free pointwise."""

    def evaluate(self, xi) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def on_grid(self, grid: SpectralGrid) -> CurrentPair:
        Je, Jm = self.evaluate(grid.xi())
        return CurrentPair(Je, Jm, grid)


@dataclass
class GaussianBump(CurrentFamily):
    """Gaussian in frequency around ``center``; with ``real`` the mirrored conjugate bump is added."""

    center: tuple
    width: float
    amp_e: tuple = (1.0, 0.0, 0.0)
    amp_m: tuple = (0.0, 0.0, 0.0)
    real: bool = False

    def evaluate(self, xi):
        xi = np.asarray(xi, float)
        c = np.asarray(self.center, float)
        ae = np.asarray(self.amp_e, complex)
        am = np.asarray(self.amp_m, complex)
        g = np.exp(-np.sum((xi - c) ** 2, axis=-1) / (2 * self.width**2))[..., None]
        Je = g * ae
        Jm = g * am
        if self.real:
            gm = np.exp(-np.sum((xi + c) ** 2, axis=-1) / (2 * self.width**2))[..., None]
            Je = Je + gm * np.conj(ae)
            Jm = Jm + gm * np.conj(am)
        return leray_array(Je, xi), leray_array(Jm, xi)


@dataclass
class RingCurrent(CurrentFamily):
    """Azimuthal (hence divergence-free) ring of radius ``radius`` in the xi_1 xi_2 plane."""

    radius: float
    width: float
    amp_e: float = 1.0
    amp_m: float = 0.0

    def evaluate(self, xi):
        xi = np.asarray(xi, float)
        rho = np.hypot(xi[..., 0], xi[..., 1])
        g = np.exp(-((rho - self.radius) ** 2 + xi[..., 2] ** 2) / (2 * self.width**2))
        az = np.stack([-xi[..., 1], xi[..., 0], np.zeros_like(rho)], axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            az = np.where(rho[..., None] > 0, az / np.where(rho > 0, rho, 1.0)[..., None], 0.0)
        base = (g[..., None] * az).astype(complex)
        return self.amp_e * base, self.amp_m * base


def single_mode(grid: SpectralGrid, index, vector, magnetic: bool = False) -> CurrentPair:
    Je = np.zeros((grid.n,) * 3 + (3,), complex)
    Jm = np.zeros_like(Je)
    (Jm if magnetic else Je)[tuple(index)] = np.asarray(vector, complex)
    return CurrentPair(Je, Jm, grid)


def random_current(grid: SpectralGrid, rng: np.random.Generator, project: bool = True) -> CurrentPair:
    shape = (grid.n,) * 3 + (3,)
    Je = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    Jm = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    J = CurrentPair(Je, Jm, grid)
    return leray_project(J) if project else J


# ---------------------------------------------------------------- cutoffs


@dataclass
class CutoffSet:
    beta1: np.ndarray
    beta2: np.ndarray
    beta11: np.ndarray
    beta12: np.ndarray
    beta13: np.ndarray
    t0: float
    band_width: float
    singular_radius: float

    def part(self, tag: str):
        if tag == "full":
            return None
        key = {"beta2_global": "beta2", "beta11": "beta11", "beta12": "beta12", "beta13": "beta13", "beta1": "beta1"}
        if tag not in key:
            raise ValidationError(f"unknown cutoff part {tag!r}")
        return getattr(self, key[tag])

    def partition_error(self) -> float:
        return float(
            max(
                np.max(np.abs(self.beta1 + self.beta2 - 1.0)),
                np.max(np.abs(self.beta11 + self.beta12 + self.beta13 - self.beta1)),
            )
        )


def cutoff_values(m: MaterialTensors, xi, t0, band_width, singular_radius):
    """Pointwise (beta1, beta11, beta12, beta13) at arbitrary frequencies."""
    xi = np.asarray(xi, float)
    p = symbols.dispersion(m, xi)
    beta1 = plateau(np.abs(p) / t0)
    z = singular_points_xi(m)
    d = np.min(np.linalg.norm(xi[..., None, :] - z, axis=-1), axis=-1)
    ball = plateau(d / singular_radius)
    band = plateau(circle_distance(m, xi) / band_width)
    b13 = beta1 * ball
    b12 = beta1 * band * (1.0 - ball)
    b11 = beta1 - b12 - b13
    return beta1, b11, b12, b13


def _check_band(m, band_width, singular_radius):
    from .geometry import chart_point, circle_parameter, hamiltonian_circle_window
    from .materials import normalize

    nm = normalize(m)
    e = np.sort(nm.eps)
    order = np.argsort(nm.eps)
    lo, hi = hamiltonian_circle_window(nm)
    s = np.linspace(lo, hi, 400)
    t = circle_parameter(e, s)
    phi = chart_point(e, s, t)
    eta = np.empty_like(phi)
    eta[:, order] = phi
    pts = []
    for sg in np.array(np.meshgrid([1, -1], [1, -1], [1, -1])).T.reshape(-1, 3):
        pts.append(nm.to_xi(eta * sg))
    pts = np.concatenate(pts)
    z = singular_points_xi(m)
    dmin = float(np.min(np.linalg.norm(pts[:, None, :] - z[None], axis=-1)))
    if dmin <= 2 * singular_radius:
        raise InvalidBand(
            f"Hamiltonian circles come within {dmin:.3g} of a singular point; singular-ball support 2*rho={2 * singular_radius:.3g}"
        )
    return dmin


def build_cutoffs(m: MaterialTensors, grid: SpectralGrid, t0: float, band_width: float, singular_radius: float) -> CutoffSet:
    _check_band(m, band_width, singular_radius)
    b1, b11, b12, b13 = cutoff_values(m, grid.xi(), t0, band_width, singular_radius)
    return CutoffSet(b1, 1.0 - b1, b11, b12, b13, t0, band_width, singular_radius)


# ----------------------------------------------------------------- solver


@dataclass
class FieldPair:
    E: np.ndarray
    H: np.ndarray
    delta: float
    cutoff_part: str
    metadata: dict = field(default_factory=dict)


def _matvec(A, v):
    return np.einsum("...ij,...j->...i", A, v)


def field_numerators(m: MaterialTensors, xi, Je, Jm, effective: bool = False):
    """Return (num_E, num_H, p) with E = num_E / (p + i delta) and H = num_H / (p + i delta)."""
    eps, mu, w = m.eps_arr, m.mu_arr, m.omega
    b = symbols.curl_symbol(xi)
    z_em = symbols.z_matrix(eps, mu, w, xi, effective=effective)
    rhs_e = -w * Je + _matvec(b, Jm / mu)
    num_E = 1j * _matvec(z_em, rhs_e) / m.eps_prod
    del z_em
    z_me = symbols.z_matrix(mu, eps, w, xi, effective=effective)
    rhs_h = _matvec(b, Je / eps) + w * Jm
    num_H = 1j * _matvec(z_me, rhs_h) / m.mu_prod
    return num_E, num_H, symbols.dispersion(m, xi)


def solve_regularized(
    m: MaterialTensors,
    J: CurrentPair,
    delta: float,
    part: str = "full",
    cutoffs: CutoffSet | None = None,
    effective: bool = False,
    project: bool = True,
) -> FieldPair:
    if delta == 0:
        raise ValidationError("regularization delta must be nonzero")
    J = J.to_frequency()
    if project:
        J = leray_project(J)
    xi = J.grid.xi()
    num_E, num_H, p = field_numerators(m, xi, J.Je, J.Jm, effective)
    den = (p + 1j * delta)[..., None]
    E, H = num_E / den, num_H / den
    if part != "full":
        if cutoffs is None:
            raise ValidationError(f"cutoff part {part!r} needs a CutoffSet")
        c = cutoffs.part(part)[..., None]
        E, H = E * c, H * c
    return FieldPair(E, H, float(delta), part, {"material": m.to_dict(), "grid": J.grid.to_dict(), "effective": effective})


def residual_check(m: MaterialTensors, J: CurrentPair, fields: FieldPair, raise_on_violation: bool = True) -> ProbeReport:
    """Pointwise first-order and second-order residual identities on the grid."""
    if fields.cutoff_part != "full":
        raise ValidationError("residual identities hold for the uncut fields only")
    J = J.to_frequency()
    xi = J.grid.xi()
    eps, mu, w = m.eps_arr, m.mu_arr, m.omega
    b = symbols.curl_symbol(xi)
    p = symbols.dispersion(m, xi)
    d = fields.delta
    factor = (-1j * d / (p + 1j * d))[..., None]
    E, H = fields.E, fields.H

    t1 = 1j * _matvec(b, E)
    t2 = 1j * w * mu * H
    lhs_m = t1 + t2 - J.Jm
    rhs_m = factor * J.Jm
    scale_m = np.linalg.norm(t1, axis=-1) + np.linalg.norm(t2, axis=-1) + np.linalg.norm(J.Jm, axis=-1)

    u1 = 1j * _matvec(b, H)
    u2 = -1j * w * eps * E
    lhs_e = u1 + u2 - J.Je
    rhs_e = factor * J.Je
    scale_e = np.linalg.norm(u1, axis=-1) + np.linalg.norm(u2, axis=-1) + np.linalg.norm(J.Je, axis=-1)

    def rel(a, s):
        mask = s > FULL_PRECISION_FLOOR
        return float(np.max(np.linalg.norm(a, axis=-1)[mask] / s[mask])) if mask.any() else 0.0

    _, m_e, _ = symbols.second_order_symbols(eps, mu, xi)
    A = m_e - w * w * np.eye(3)
    rhs_red = -1j * w * J.Je / eps + 1j * _matvec(b, J.Jm / mu) / eps
    lhs2 = _matvec(A, E)
    red = lhs2 - (p / (p + 1j * d))[..., None] * rhs_red
    scale2 = np.linalg.norm(A, axis=(-2, -1)) * np.linalg.norm(E, axis=-1) + np.linalg.norm(rhs_red, axis=-1)

    res = {
        "faraday": rel(lhs_m - rhs_m, scale_m),
        "ampere": rel(lhs_e - rhs_e, scale_e),
        "second_order": rel(red, scale2),
    }
    report = ProbeReport(
        experiment="residual",
        parameters={"delta": d, "grid": J.grid.to_dict(), "material": m.to_dict()},
        residuals=res,
        flags={f"{k}_ok": v < RESIDUAL_RTOL for k, v in res.items()},
        info={"divergence_residual": J.divergence_residual()},
    )
    if raise_on_violation and not report.passed:
        raise ResidualViolation(f"residual identities violated: {res}")
    return report


def delta_sweep(m: MaterialTensors, J: CurrentPair, deltas, q_norms=(2, 6), singular_radius=None) -> ProbeReport:
    """Grid L^q norms of (E_delta, H_delta) along a decreasing delta schedule."""
    J = leray_project(J.to_frequency())
    grid = J.grid
    xi = grid.xi()
    warnings = []
    z = singular_points_xi(m)
    rho = singular_radius
    if rho is None:
        from .meshing import default_singular_radius

        rho = default_singular_radius(m)
    mag = np.linalg.norm(J.Je, axis=-1) + np.linalg.norm(J.Jm, axis=-1)
    near = np.min(np.linalg.norm(xi[..., None, :] - z, axis=-1), axis=-1) < rho
    if near.any() and mag[near].max() > 1e-8 * mag.max():
        warnings.append("current overlaps singular balls")
    num_E, num_H, p = field_numerators(m, xi, J.Je, J.Jm)
    norms = {q: [] for q in q_norms}
    prev = None
    diffs = {q: [] for q in q_norms}
    for d in deltas:
        den = (p + 1j * d)[..., None]
        F = np.concatenate([grid.to_physical(num_E / den), grid.to_physical(num_H / den)], axis=-1)
        for q in q_norms:
            norms[q].append(grid.lebesgue_norm(F, q))
        if prev is not None:
            for q in q_norms:
                diffs[q].append(grid.lebesgue_norm(F - prev, q) / grid.lebesgue_norm(F, q))
        prev = F
    flags = {}
    for q in q_norms:
        dq = np.array(diffs[q])
        flags[f"L{q}_decreasing"] = bool(np.all(np.diff(dq) < 0)) if len(dq) > 1 else True
    report = ProbeReport(
        experiment="delta_sweep",
        parameters={"deltas": list(deltas), "q_norms": list(q_norms), "grid": grid.to_dict()},
        residuals={f"final_rel_diff_L{q}": (diffs[q][-1] if diffs[q] else 0.0) for q in q_norms},
        flags=flags,
        info={"warnings": warnings},
        tables={f"L{q}": {"delta": list(deltas), "norm": norms[q], "rel_diff": [None] + diffs[q]} for q in q_norms},
    )
    return report


def richardson(values, deltas, order: int = 1):
    """Polynomial extrapolation to delta = 0 assuming an error expansion in powers of delta.

    ``order=1`` is the two-point rule 2 F(d/2) - F(d) for halved deltas.
    """
    vals = [np.asarray(v) for v in values][: order + 1]
    ds = np.asarray(deltas[: order + 1], float)
    if len(vals) < order + 1:
        raise ValidationError(f"order {order} extrapolation needs {order + 1} values")
    # Lagrange weights of the interpolating polynomial evaluated at 0
    out = 0
    for i in range(order + 1):
        w = 1.0
        for j in range(order + 1):
            if j != i:
                w *= (0 - ds[j]) / (ds[i] - ds[j])
        out = out + w * vals[i]
    return out


# ---------------------------------------------- principal value + surface delta


def _layer_rule(t0, n_layers, t_min_ratio=1e-5):
    """Nodes and weights for int_0^{2 t0} beta(t) h(t) dt / t: Gauss-Legendre in log t on two panels."""
    n2 = max(4, n_layers // 3)
    n1 = max(4, n_layers - n2)
    nodes, weights = [], []
    for lo, hi, n in ((np.log(t_min_ratio * t0), np.log(t0), n1), (np.log(t0), np.log(2 * t0), n2)):
        u, w = np.polynomial.legendre.leggauss(n)
        u = 0.5 * (hi - lo) * u + 0.5 * (hi + lo)
        w = 0.5 * (hi - lo) * w
        nodes.append(np.exp(u))
        weights.append(w)
    t = np.concatenate(nodes)
    w = np.concatenate(weights) * plateau(t / t0)
    return t, w


def _integrands(m, xi, family: CurrentFamily):
    Je, Jm = family.evaluate(xi)
    eps, mu, w = m.eps_arr, m.mu_arr, m.omega
    b = symbols.curl_symbol(xi)
    gE = _matvec(symbols.z_matrix(eps, mu, w, xi), -1j * w * Je + 1j * _matvec(b, Jm / mu)) / m.eps_prod
    gH = _matvec(symbols.z_matrix(mu, eps, w, xi), 1j * _matvec(b, Je / eps) + 1j * w * Jm) / m.mu_prod
    return np.concatenate([gE, gH], axis=-1)


def _surface_sum(m, verts, faces, family, points, chunk=8192):
    """sum_v A_v / |grad p(v)| e^{i x.v} g(v) for each physical point x."""
    areas = vertex_areas(verts, faces)
    gn = np.linalg.norm(symbols.dispersion_gradient(m, verts), axis=1)
    g = _integrands(m, verts, family) * (areas / gn)[:, None]
    keep = np.linalg.norm(g, axis=1) > 0
    verts, g = verts[keep], g[keep]
    out = np.zeros((len(points), 6), complex)
    for s in range(0, len(verts), chunk):
        out += np.exp(1j * points @ verts[s : s + chunk].T) @ g[s : s + chunk]
    return out


def vp_delta_solve(
    m: MaterialTensors,
    family: CurrentFamily,
    mesh,
    points,
    window: SpectralGrid,
    vp_band: float | None = None,
    n_layers: int = 48,
    singular_radius: float | None = None,
    support_tol: float = 1e-10,
) -> FieldPair:
    """Physical-side (E, H) at ``points`` from the surface-delta part plus a layered principal value.

    ``mesh`` is a level-0 mesh (or patch) covering the frequency support of the
    current; its vertices are re-projected onto the levels +-t_j for the
    principal value. ``window`` is the frequency grid used for the smooth
    remainder int (1 - beta1) g / p. ``vp_band`` is the plateau half-width of
    the layered part (layers reach |p| = 2 vp_band); it defaults to the mesh t0.
    """
    t0 = float(mesh.info.get("t0", 0.1) if vp_band is None else vp_band)
    points = np.atleast_2d(np.asarray(points, float))
    verts, faces = np.asarray(mesh.vertices), np.asarray(mesh.triangles)
    z = singular_points_xi(m)
    if singular_radius is None:
        from .meshing import default_singular_radius

        singular_radius = default_singular_radius(m)
    g_mesh = np.linalg.norm(_integrands(m, verts, family), axis=1)
    near = np.min(np.linalg.norm(verts[:, None, :] - z[None], axis=-1), axis=1) < singular_radius
    if near.any() and g_mesh[near].max() > support_tol * max(g_mesh.max(), 1e-300):
        raise SupportViolation("current does not vanish on the singular balls")

    # restrict to vertices where the current is non-negligible (plus one ring of neighbours)
    active = g_mesh > 1e-14 * g_mesh.max()
    tri_keep = active[faces].any(axis=1)
    faces = faces[tri_keep]
    used = np.unique(faces)
    remap = -np.ones(len(verts), np.int64)
    remap[used] = np.arange(len(used))
    verts = verts[used]
    faces = remap[faces]

    surface = _surface_sum(m, verts, faces, family, points)

    t_nodes, t_weights = _layer_rule(t0, n_layers)
    vp_layers = np.zeros((len(points), 6), complex)
    for t, wt in zip(t_nodes, t_weights):
        up, r_up = project_to_level(m, verts, t)
        dn, r_dn = project_to_level(m, verts, -t)
        worst = max(r_up.max(), r_dn.max())
        if worst > 1e-8 * max(abs(m.omega) ** 6, 1.0):
            raise MeshFailure(f"layer |p| = {t:.3g} not reached by projection (residual {worst:.2e}); reduce vp_band")
        vp_layers += wt * (_surface_sum(m, up, faces, family, points) - _surface_sum(m, dn, faces, family, points))

    xi = window.xi()
    p = symbols.dispersion(m, xi)
    beta1 = plateau(np.abs(p) / t0)
    g = _integrands(m, xi, family)
    with np.errstate(divide="ignore", invalid="ignore"):
        smooth = np.where(beta1[..., None] < 1, g * ((1 - beta1) / p)[..., None], 0.0)
    remainder = window.evaluate_at(smooth, points) * (2 * np.pi) ** 3  # undo the inverse-transform factor

    total = (-1j * np.pi * surface + vp_layers + remainder) / (2 * np.pi) ** 3
    return FieldPair(
        total[:, :3],
        total[:, 3:],
        0.0,
        "full",
        {
            "surface_part": surface / (2 * np.pi) ** 3,
            "vp_layers": vp_layers / (2 * np.pi) ** 3,
            "vp_remainder": remainder / (2 * np.pi) ** 3,
            "n_layers": len(t_nodes),
            "t0": t0,
        },
    )


def regularized_at_points(m: MaterialTensors, family: CurrentFamily, window: SpectralGrid, points, deltas):
    """(E_delta, H_delta) at physical points by grid quadrature on the window, for each delta."""
    xi = window.xi()
    Je, Jm = family.evaluate(xi)
    num_E, num_H, p = field_numerators(m, xi, Je, Jm)
    num = np.concatenate([num_E, num_H], axis=-1)
    pts = np.atleast_2d(np.asarray(points, float))
    flat_xi = xi.reshape(-1, 3)
    flat_num = num.reshape(-1, 6)
    flat_p = p.reshape(-1)
    out = [np.zeros((len(pts), 6), complex) for _ in deltas]
    chunk = 32768
    for s in range(0, len(flat_xi), chunk):
        ph = np.exp(1j * pts @ flat_xi[s : s + chunk].T)
        for k, d in enumerate(deltas):
            out[k] += ph @ (flat_num[s : s + chunk] / (flat_p[s : s + chunk] + 1j * d)[:, None])
    scale = window.dxi**3 / (2 * np.pi) ** 3
    return [o * scale for o in out]
