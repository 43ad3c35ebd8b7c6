"""Oscillatory-integral probes: surface measures, layer kernels, dyadic Bochner-Riesz multipliers.

Frequency-side operators follow the solver convention: an operator with
multiplier m acts as f -> (2 pi)^-d int e^{i x.xi} m(xi) f_hat(xi) dxi, and the
surface measure transform is mu_hat(xi) = int e^{-i y(x').xi} chi(x') dx'.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gamma, j0

from .errors import BandViolation, QuadratureStall, ValidationError
from .report import ProbeReport, loglog_fit
from .smooth import annulus, annulus_deriv, plateau, ramp

GL_ORDER = 16
PHASE_PER_PANEL = 12.0
MIN_PANELS = 16  # resolves the partition-of-unity transitions at low frequency


def gl_panels(a: float, b: float, n_panels: int, order: int = GL_ORDER):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n_panels + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + 0.5 * h[:, None] * (x + 1)).ravel()
    weights = (0.5 * h[:, None] * w).ravel()
    return nodes, weights


# ----------------------------------------------------------------- patches


@dataclass(frozen=True)
class SurfacePatch:
    """Graph {(x', psi(x'))} weighted by a compactly supported amplitude chi.

    ``support`` bounds the box [-support, support]^(d-1) outside which chi
    vanishes; ``radial`` = (psi_r, chi_r, r_max) enables the Hankel path for
    rotation-invariant patches in d = 3.
    """

    name: str
    psi: Callable
    grad: Callable
    hess: Callable
    chi: Callable
    k: int
    d: int = 3
    support: float = 1.0
    curvature_floor: float = 0.0
    slope_bound: float = 1.0
    radial: tuple | None = None

    def check_curvature(self, n: int = 400, seed: int = 0) -> bool:
        """At least k Hessian eigenvalues of modulus >= curvature_floor wherever chi > 0."""
        rng = np.random.default_rng(seed)
        x = rng.uniform(-self.support, self.support, (n, self.d - 1))
        x = x[self.chi(x) > 1e-12]
        if len(x) == 0:
            return True
        lam = np.linalg.eigvalsh(self.hess(x))
        return bool(np.all(np.sum(np.abs(lam) >= self.curvature_floor, axis=1) >= self.k))

    def mass(self) -> float:
        return float(abs(surface_measure_ft(self, np.zeros(self.d))))


def _norm(x):
    return np.linalg.norm(x, axis=-1)


def taper(r, inner: float, outer: float):
    """1 for r <= inner, 0 for r >= outer."""
    return plateau(1.0 + (np.asarray(r, float) - inner) / (outer - inner))


def paraboloid_patch(d: int = 3, inner: float = 0.05, outer: float = 1.0) -> SurfacePatch:
    """psi = |x'|^2 / 2 with chi tapering from 1 at |x'| = inner to 0 at |x'| = outer.

    The long taper keeps the cutoff's own Fourier tail well below the
    stationary-point term already at |xi| ~ 10.
    """
    n = d - 1

    def chi_r(r):
        return taper(r, inner, outer)

    return SurfacePatch(
        name="paraboloid",
        psi=lambda x: 0.5 * np.sum(np.asarray(x) ** 2, axis=-1),
        grad=lambda x: np.asarray(x, float),
        hess=lambda x: np.broadcast_to(np.eye(n), np.shape(x)[:-1] + (n, n)).copy(),
        chi=lambda x: chi_r(_norm(x)),
        k=n,
        d=d,
        support=outer,
        curvature_floor=1.0,
        slope_bound=outer,
        radial=(lambda r: 0.5 * r**2, chi_r, outer) if d == 3 else None,
    )


def _cone_chi_r(r):
    return ramp(r, 0.2, 0.4) * plateau(r / 0.45)


def cone_patch() -> SurfacePatch:
    """psi = |x'| on the annulus 0.2 < |x'| < 0.9 (chi vanishes near the tip)."""

    def hess(x):
        x = np.asarray(x, float)
        r = np.maximum(_norm(x), 1e-300)[..., None, None]
        u = x[..., :, None] * x[..., None, :] / r**2
        return (np.eye(2) - u) / r

    return SurfacePatch(
        name="cone",
        psi=lambda x: _norm(x),
        grad=lambda x: np.asarray(x, float) / np.maximum(_norm(x), 1e-300)[..., None],
        hess=hess,
        chi=lambda x: _cone_chi_r(_norm(x)),
        k=1,
        support=0.9,
        curvature_floor=1.0,
        slope_bound=1.0,
        radial=(lambda r: r, _cone_chi_r, 0.9),
    )


def sphere_cap_patch(radius: float = 0.3) -> SurfacePatch:
    """Upper unit sphere psi = sqrt(1 - |x'|^2) near the north pole."""

    def psi(x):
        return np.sqrt(np.clip(1.0 - np.sum(np.asarray(x) ** 2, axis=-1), 1e-12, None))

    def hess(x):
        x = np.asarray(x, float)
        s = psi(x)[..., None, None]
        return -(np.eye(2) / s + x[..., :, None] * x[..., None, :] / s**3)

    r_out = 2 * radius
    return SurfacePatch(
        name="sphere_cap",
        psi=psi,
        grad=lambda x: -np.asarray(x, float) / psi(x)[..., None],
        hess=hess,
        chi=lambda x: plateau(_norm(x) / radius),
        k=2,
        support=r_out,
        curvature_floor=1.0,
        slope_bound=r_out / math.sqrt(1 - r_out**2),
        radial=(lambda r: np.sqrt(np.clip(1 - r**2, 1e-12, None)), lambda r: plateau(r / radius), r_out),
    )


@dataclass(frozen=True)
class CompositeSurface:
    """Sum of patches, each placed by an orthogonal frame (local -> ambient)."""

    parts: tuple
    name: str = "composite"
    k: int = 2
    d: int = 3

    def mass(self) -> float:
        return float(abs(surface_measure_ft(self, np.zeros(self.d))))


def unit_sphere(low: float = 0.3, high: float = 0.5) -> CompositeSurface:
    """Unit sphere from six graph patches with a smooth partition of unity.

    Patch (axis a, sign s) carries the weight h(s x_a) / sum_b,s' h(s' x_b)
    with h rising from 0 at ``low`` to 1 at ``high``; since max |x_b| >= 1/sqrt 3
    the denominator never vanishes. The area element 1/psi is folded into chi.
    """
    r_max = math.sqrt(1 - low**2)

    def h(u):
        return ramp(u, low, high)

    parts = []
    for a in range(3):
        for s in (1.0, -1.0):
            frame = np.zeros((3, 3))
            frame[(a + 1) % 3, 0] = 1.0
            frame[(a + 2) % 3, 1] = 1.0
            frame[a, 2] = s

            def make(frame=frame):
                def psi(x):
                    return np.sqrt(np.clip(1.0 - np.sum(np.asarray(x) ** 2, axis=-1), 0.0, None))

                def chi(x):
                    x = np.asarray(x, float)
                    z = psi(x)
                    y = np.concatenate([x, z[..., None]], axis=-1)
                    P = y @ frame.T
                    den = sum(h(P[..., b]) + h(-P[..., b]) for b in range(3))
                    w = h(z) / den
                    with np.errstate(divide="ignore", invalid="ignore"):
                        return np.where(z > low * 0.99, w / np.where(z > 0, z, 1.0), 0.0)

                def grad(x):
                    return -np.asarray(x, float) / np.maximum(psi(x), 1e-12)[..., None]

                def hess(x):
                    x = np.asarray(x, float)
                    sz = np.maximum(psi(x), 1e-12)[..., None, None]
                    return -(np.eye(2) / sz + x[..., :, None] * x[..., None, :] / sz**3)

                return SurfacePatch(
                    name=f"sphere_{'xyz'[a]}{'+' if s > 0 else '-'}",
                    psi=psi,
                    grad=grad,
                    hess=hess,
                    chi=chi,
                    k=2,
                    support=r_max,
                    curvature_floor=1.0,
                    slope_bound=r_max / low,
                )

            parts.append((make(), frame))
    return CompositeSurface(tuple(parts), name="unit_sphere")


def sphere_closed_form(xi) -> np.ndarray:
    """4 pi sin|xi| / |xi| (4 pi at the origin)."""
    r = _norm(np.atleast_2d(np.asarray(xi, float)))
    return 4 * np.pi * np.sinc(r / np.pi)


def sphere_radial_oracle(radius: float) -> complex:
    """2 pi int_0^pi e^{-i r cos theta} sin theta d theta by adaptive quadrature."""
    from scipy.integrate import quad

    re = quad(lambda t: np.cos(radius * np.cos(t)) * np.sin(t), 0, np.pi, limit=400, epsabs=1e-14, epsrel=1e-13)[0]
    im = quad(lambda t: -np.sin(radius * np.cos(t)) * np.sin(t), 0, np.pi, limit=400, epsabs=1e-14, epsrel=1e-13)[0]
    return 2 * np.pi * complex(re, im)


# ------------------------------------------------------- surface transforms


def _tensor_nodes(support, dim, n_panels):
    x, w = gl_panels(-support, support, n_panels)
    if dim == 1:
        return x[:, None], w
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=-1)
    W = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    return X, W


def _patch_ft_level(patch: SurfacePatch, xi: np.ndarray, level: int, chunk: int = 1 << 17) -> np.ndarray:
    xi = np.atleast_2d(xi)
    xp, xd = xi[:, :-1], xi[:, -1]
    G = float(np.max(_norm(xp) + np.abs(xd) * patch.slope_bound)) + 20.0
    if patch.radial is not None and patch.d == 3:
        psi_r, chi_r, r_max = patch.radial
        n_pan = max(4, math.ceil(r_max * G / PHASE_PER_PANEL)) * 2**level
        r, w = gl_panels(0.0, r_max, n_pan)
        a = 2 * np.pi * chi_r(r) * r * w
        keep = a != 0
        r, a = r[keep], a[keep]
        out = np.empty(len(xi), complex)
        rho = _norm(xp)
        for i in range(len(xi)):
            out[i] = np.sum(j0(rho[i] * r) * np.exp(-1j * xd[i] * psi_r(r)) * a)
        return out
    n_pan = max(MIN_PANELS, math.ceil(2 * patch.support * G / PHASE_PER_PANEL)) * 2**level
    out = np.zeros(len(xi), complex)
    x1, w1 = gl_panels(-patch.support, patch.support, n_pan)
    if patch.d == 2:
        X, W = x1[:, None], w1
        blocks = [(X, W)]
    else:
        # stream over the first coordinate to bound memory
        blocks = []
        dim = patch.d - 1
        rest, wrest = _tensor_nodes(patch.support, dim - 1, n_pan)
        step = max(1, chunk // len(rest))
        for s in range(0, len(x1), step):
            a = x1[s : s + step]
            X = np.concatenate([np.repeat(a, len(rest))[:, None], np.tile(rest, (len(a), 1))], axis=1)
            W = np.repeat(w1[s : s + step], len(rest)) * np.tile(wrest, len(a))
            blocks.append((X, W))
    for X, W in blocks:
        c = patch.chi(X) * W
        keep = c != 0
        if not keep.any():
            continue
        X, c = X[keep], c[keep]
        psi = patch.psi(X)
        out += np.exp(-1j * (xp @ X.T + xd[:, None] * psi[None, :])) @ c
    return out


def _surface_levels(surface, xi, level):
    if isinstance(surface, CompositeSurface):
        total = 0
        for patch, frame in surface.parts:
            total = total + _patch_ft_level(patch, xi @ frame, level)
        return total
    return _patch_ft_level(surface, xi, level)


def surface_measure_ft(surface, xi, tol: float = 1e-10, max_level: int = 4, full_output: bool = False,
                       raise_on_stall: bool = False):
    """mu_hat(xi) for a patch or composite surface; xi may be a single vector or a batch.

    Panels are sized from the phase gradient and doubled until successive
    levels agree to ``tol`` times the surface mass. On stall the best value is
    returned with ``converged = False`` (or QuadratureStall is raised).
    """
    xi = np.asarray(xi, float)
    single = xi.ndim == 1
    xi2 = np.atleast_2d(xi)
    prev = _surface_levels(surface, xi2, 0)
    zero = _surface_levels(surface, np.zeros((1, xi2.shape[1])), 0)
    scale = max(abs(complex(zero[0])), 1e-300)
    err = np.full(len(xi2), np.inf)
    converged = False
    level = 0
    while level < max_level:
        level += 1
        cur = _surface_levels(surface, xi2, level)
        err = np.abs(cur - prev)
        prev = cur
        if np.all(err <= tol * scale):
            converged = True
            break
    if not converged and raise_on_stall:
        raise QuadratureStall(f"surface quadrature did not reach tol {tol} (error {err.max():.2e})")
    value = prev[0] if single else prev
    if full_output:
        return value, (float(err[0]) if single else err), converged
    return value


def decay_fit(surface, directions, r_range=(10.0, 100.0), n_windows: int = 6, window_samples: int = 8,
              tol: float = 1e-7) -> ProbeReport:
    """Log-log slope of the local envelope max |mu_hat(R theta)| over windows [R, R + pi].

    The summary slope is the largest (least negative) slope over directions.
    """
    directions = np.atleast_2d(np.asarray(directions, float))
    directions = directions / _norm(directions)[:, None]
    centers = np.geomspace(r_range[0], r_range[1], n_windows)
    fits, conv = {}, True
    for i, th in enumerate(directions):
        env = []
        for c in centers:
            R = c + np.linspace(0, np.pi, window_samples, endpoint=False)
            vals, _, ok = surface_measure_ft(surface, R[:, None] * th, tol=tol, full_output=True)
            conv &= ok
            env.append(float(np.max(np.abs(vals))))
        fits[f"direction_{i}"] = loglog_fit(centers, env)
    worst = max(f.slope for f in fits.values())
    return ProbeReport(
        experiment="decay",
        parameters={"surface": surface.name, "directions": directions, "r_range": list(r_range),
                    "n_windows": n_windows, "window_samples": window_samples},
        fits=fits,
        flags={"quadrature_converged": bool(conv)},
        info={"summary_slope": worst, "expected_slope": -getattr(surface, "k", 0) / 2},
    )


# ------------------------------------------------------------ layer kernels


def layer_kernel_probe(patch: SurfacePatch, deltas, aperture: float | None = None,
                       xd_factors=(0.6, 0.8, 1.0, 1.25, 1.6), n_images: int = 5, tol: float = 1e-9) -> ProbeReport:
    """K_delta(x) = (2pi)^(1-d) delta phi_check(delta x_d) int e^{i(x'.xi' + x_d psi)} chi dxi'.

    phi_check is the dyadic annulus bump, so K_delta vanishes identically
    outside 1/(2 delta) <= |x_d| <= 2/delta. The sup over the cone
    |x'| <= c |x_d| is taken over stationary images x' = -x_d grad psi(xi'_0).
    """
    d = patch.d
    c = aperture if aperture is not None else 1.25 * patch.slope_bound
    # stationary images from points of the chi plateau
    r0 = np.linspace(0.0, 0.9 * patch.support, 4 * n_images)
    base = np.zeros((len(r0), d - 1))
    base[:, 0] = r0
    keep = patch.chi(base) > 0.5
    v = patch.grad(base[keep])[:n_images]
    v = v[_norm(v) <= c]

    def kernel(xp, xd, delta):
        x = np.concatenate([xp, xd[:, None]], axis=1)
        I = surface_measure_ft(patch, -x, tol=tol)
        return (2 * np.pi) ** (1 - d) * delta * annulus(delta * xd) * I

    sups, outside, peak_ratio, rapid = [], [], [], []
    for delta in deltas:
        xd = np.repeat(np.asarray(xd_factors) / delta, len(v))
        xp = -xd[:, None] * np.tile(v, (len(xd_factors), 1))
        k_in = np.abs(kernel(xp, xd, delta))
        sup = float(k_in.max())
        sups.append(sup)
        scan = np.geomspace(0.01 / delta, 50 / delta, 240)
        k_scan = np.abs(kernel(np.zeros((len(scan), d - 1)), scan, delta))
        out = (scan < 0.25 / delta) | (scan > 4 / delta)
        outside.append(float(k_scan[out].max() / max(k_scan.max(), sup)))
        # beyond the aperture: |x'| = 2c|x_d|
        xd_r = np.asarray(xd_factors) / delta
        xp_r = np.zeros((len(xd_r), d - 1))
        xp_r[:, 0] = 2 * c * xd_r
        rapid.append(float(np.abs(kernel(xp_r, xd_r, delta)).max() / sup))
        peak_ratio.append(sup)
    fit = loglog_fit(deltas, sups)
    expected = (patch.k + 2) / 2
    return ProbeReport(
        experiment="kernel",
        parameters={"patch": patch.name, "deltas": list(deltas), "aperture": c, "profile": "dyadic annulus bump"},
        fits={"sup_exponent": fit},
        residuals={"max_outside_support_ratio": max(outside), "max_beyond_aperture_ratio": max(rapid)},
        flags={"support_concentrated": max(outside) < 1e-6},
        info={"expected_exponent": expected, "sup_values": sups},
    )


# ------------------------------------------------------------ dyadic family


@dataclass(frozen=True)
class DyadicFamily:
    """phi_alpha with sum_j 2^(alpha j) phi_alpha(2^j u) = u_+^(-alpha) / Gamma(1 - alpha).

    For alpha < 1, phi_alpha(u) = u_+^(-alpha) phi(u) / Gamma(1 - alpha) with phi
    the dyadic annulus bump. For 1 <= alpha < 2 the derivative form
    phi_alpha = d/du [u_+^(1-alpha) phi(u) / Gamma(2 - alpha)] continues the
    family analytically; at alpha = 1 the sum is a smoothed delta.
    """

    alpha: float
    j_min: int = -12
    j_max: int = 12
    construction: str = "t-space dyadic annulus, supp in [1/2, 2]"

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ValidationError(f"alpha must lie in (0, 2), got {self.alpha}")

    def profile(self, u):
        a = self.alpha
        u = np.asarray(u, float)
        pos = u > 0
        us = np.where(pos, u, 1.0)
        if a < 1:
            val = us ** (-a) * annulus(us) / gamma(1 - a)
        else:
            val = ((1 - a) * us ** (-a) * annulus(us) + us ** (1 - a) * annulus_deriv(us)) / gamma(2 - a)
        return np.where(pos, val, 0.0)

    def layer(self, j: int, u):
        return 2.0 ** (self.alpha * j) * self.profile(2.0**j * np.asarray(u, float))

    def partial_sum(self, u, J: int | None = None):
        lo, hi = (-J, J) if J is not None else (self.j_min, self.j_max)
        return sum(self.layer(j, u) for j in range(lo, hi + 1))

    def target(self, u):
        if self.alpha >= 1:
            raise ValidationError("the pointwise target exists for alpha < 1 only")
        u = np.asarray(u, float)
        pos = u > 0
        return np.where(pos, np.where(pos, u, 1.0) ** (-self.alpha) / gamma(1 - self.alpha), 0.0)

    def telescoping_error(self, J: int = 12, lo: float = 2.0**-10, hi: float = 2.0**10, n: int = 4001) -> float:
        u = np.geomspace(lo, hi, n)
        return float(np.max(np.abs(self.partial_sum(u, J) / self.target(u) - 1.0)))


def dyadic_family(alpha: float, j_range=(-12, 12)) -> DyadicFamily:
    return DyadicFamily(float(alpha), int(j_range[0]), int(j_range[1]))


def _layer_rule(n_s: int):
    """Gauss-Legendre nodes on [1/2, 2] split at 1 where the annulus bump changes regime."""
    a, wa = gl_panels(0.5, 1.0, 1, n_s)
    b, wb = gl_panels(1.0, 2.0, 1, n_s)
    return np.concatenate([a, b]), np.concatenate([wa, wb])


# --------------------------------------------------- Bochner-Riesz operators


def _patch_nodes(patch: SurfacePatch, points, freq_scale: float, level: int = 0):
    xp, xd = points[:, :-1], points[:, -1]
    G = float(np.max(_norm(xp) + np.abs(xd) * patch.slope_bound)) + freq_scale
    n_pan = max(4, math.ceil(2 * patch.support * G / PHASE_PER_PANEL)) * 2**level
    X, W = _tensor_nodes(patch.support, patch.d - 1, n_pan)
    c = patch.chi(X) * W
    keep = c != 0
    return X[keep], c[keep]


def restriction_extension(patch: SurfacePatch, f_hat: Callable, points, freq_scale: float = 20.0, level: int = 0):
    """(2pi)^-d int chi(xi') f_hat(xi', psi(xi')) e^{i(x'.xi' + x_d psi)} dxi' at each point."""
    points = np.atleast_2d(np.asarray(points, float))
    X, cw = _patch_nodes(patch, points, freq_scale, level)
    psi = patch.psi(X)
    F = f_hat(np.concatenate([X, psi[:, None]], axis=1))
    ph = np.exp(1j * (points[:, :-1] @ X.T + points[:, -1:] * psi[None, :]))
    return ph @ (cw * F) / (2 * np.pi) ** patch.d


def bochner_riesz_apply(patch: SurfacePatch, alpha: float, f_hat: Callable, points, delta_floor: float = 2.0**-14,
                        j_min: int = -3, n_s: int = 12, freq_scale: float = 20.0, level: int = 0):
    """T^alpha f at physical points as the truncated dyadic layer sum over 2^-j >= delta_floor.

    Each layer 2^(alpha j) phi_alpha(2^j (xi_d - psi)) chi is integrated in
    (xi', u) coordinates, u = xi_d - psi(xi'), so only f_hat evaluations along
    the layers are needed. Layers with 2^-j beyond 2^-j_min are dropped (the
    far remainder; f_hat must be negligible there).
    """
    kmax = (patch.k + 2) / 2
    if not 0 < alpha < kmax:
        raise ValidationError(f"alpha must lie in (0, {kmax}) for k = {patch.k}")
    points = np.atleast_2d(np.asarray(points, float))
    fam = DyadicFamily(alpha, j_min, int(math.ceil(-math.log2(delta_floor))))
    X, cw = _patch_nodes(patch, points, freq_scale, level)
    psi = patch.psi(X)
    s, ws = _layer_rule(n_s)
    prof = fam.profile(s)
    xd = points[:, -1]
    acc = np.zeros((len(points), len(X)), complex)
    for j in range(fam.j_min, fam.j_max + 1):
        u = 2.0**-j * s
        w = 2.0 ** ((alpha - 1) * j) * ws * prof
        F = np.stack([f_hat(np.concatenate([X, (psi + uk)[:, None]], axis=1)) for uk in u])
        acc += (np.exp(1j * xd[:, None] * u[None, :]) * w[None, :]) @ F
    ph = np.exp(1j * (points[:, :-1] @ X.T + xd[:, None] * psi[None, :]))
    return np.sum(ph * acc * cw[None, :], axis=1) / (2 * np.pi) ** patch.d


def gaussian_f_hat(center, width: float, amplitude: complex = 1.0) -> Callable:
    center = np.asarray(center, float)

    def f(xi):
        return amplitude * np.exp(-np.sum((np.asarray(xi) - center) ** 2, axis=-1) / (2 * width**2))

    return f


def relative_l2(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / np.linalg.norm(np.asarray(b)))


# ---------------------------------------------------------- cone multiplier


@dataclass(frozen=True)
class ConeSheets:
    """Near-tip sheets y_d = psi1(y') and y_d = -psi2(y') inside the ball |y| < radius."""

    radius: float
    psi1: Callable
    psi2: Callable
    name: str = "cone"


def exact_cone(radius: float = 0.2) -> ConeSheets:
    return ConeSheets(radius, lambda yp: _norm(yp), lambda yp: _norm(yp), "exact_cone")


def sheets_from_symbol(symbol: Callable, radius: float, name: str = "perturbed_cone", iters: int = 80) -> ConeSheets:
    """Sheets of a symbol with Hessian diag(-1, -1, 1) at 0, by vectorized bisection on [r/2, 2r]."""

    def root(yp, sign):
        yp = np.atleast_2d(np.asarray(yp, float))
        r = _norm(yp)
        lo, hi = sign * 0.5 * r, sign * 2.0 * r
        f = lambda z: symbol(np.concatenate([yp, z[:, None]], axis=1))
        flo = f(lo)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            fm = f(mid)
            same = np.sign(fm) == np.sign(flo)
            lo = np.where(same, mid, lo)
            flo = np.where(same, fm, flo)
            hi = np.where(same, hi, mid)
        return np.abs(0.5 * (lo + hi))

    return ConeSheets(radius, lambda yp: root(yp, 1.0), lambda yp: root(yp, -1.0), name)


def sheets_from_factorization(fac) -> ConeSheets:
    return sheets_from_symbol(fac.symbol, fac.radius, "fresnel_cone")


def _sheet_cutoffs(zeta):
    """gamma_1, gamma_2 near the upper and lower sheets (in terms of zeta_d / |zeta|); gamma_0 is the rest."""
    tau = zeta[..., -1] / np.maximum(_norm(zeta), 1e-300)
    t1 = 1 / math.sqrt(2)
    g1 = plateau(np.abs(tau - t1) / 0.15)
    g2 = plateau(np.abs(tau + t1) / 0.15)
    return 1.0 - g1 - g2, g1, g2


def _check_band(sheets: ConeSheets, f_hat, n: int = 4000, seed: int = 0):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, 3))
    v /= _norm(v)[:, None]
    inside = np.abs(f_hat(v * sheets.radius * rng.uniform(0, 1, (n, 1)) ** (1 / 3)))
    outside = np.abs(f_hat(v * sheets.radius * rng.uniform(1, 3, (n, 1))))
    ref = max(float(inside.max()), 1e-300)
    if outside.max() > 1e-10 * ref:
        raise BandViolation(f"f_hat leaks outside the radius-{sheets.radius} ball ({outside.max() / ref:.2e} of peak)")


def _polar_nodes(r_lo, r_hi, n_panels, n_theta, order=GL_ORDER):
    r, wr = gl_panels(r_lo, r_hi, n_panels, order)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    R, T = np.meshgrid(r, th, indexing="ij")
    X = np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], axis=1)
    W = (np.repeat(wr * r, n_theta)) * (2 * np.pi / n_theta)
    return X, W


@dataclass
class ConeApplication:
    values: np.ndarray
    partial_sums: list
    annulus_values: list
    tail_exponent: float | None
    info: dict = field(default_factory=dict)


def cone_multiplier_apply(sheets: ConeSheets, alpha: float, f_hat: Callable, points, ell_max: int = 6,
                          delta_floor: float = 2.0**-12, n_s: int = 12, n_r_panels: int = 6, n_theta: int = 96,
                          p: float | None = None, q: float | None = None, check_band: bool = True) -> ConeApplication:
    """C^alpha f at physical points via Littlewood-Paley annuli rescaled to unit frequency.

    For annulus l the scale is lam = 2^(l+1)/c; at unit scale the annulus is split
    by gamma_0/gamma_1/gamma_2, the factor (ps1 + psi2 + u)^-alpha is divided out
    pointwise and the remaining single-sheet multiplier u_+^-alpha is applied by
    the dyadic layer sum. The off-cone gamma_0 part vanishes at alpha = 1
    (1/Gamma(0) = 0) and is integrated directly otherwise.
    """
    if not 0.5 < alpha < 1.5:
        raise ValidationError("alpha must lie in (1/2, 3/2)")
    if check_band:
        _check_band(sheets, f_hat)
    points = np.atleast_2d(np.asarray(points, float))
    d = 3
    fam = DyadicFamily(alpha, -1, int(math.ceil(-math.log2(delta_floor))))
    s, ws = _layer_rule(n_s)
    prof = fam.profile(s)
    c = sheets.radius
    Zp, Wp = _polar_nodes(0.0, 2.0, n_r_panels, n_theta)
    contributions = []
    for ell in range(ell_max + 1):
        lam = 2.0 ** (ell + 1) / c
        y = points / lam
        p1 = lam * sheets.psi1(Zp / lam)
        p2 = lam * sheets.psi2(Zp / lam)
        total = np.zeros(len(points), complex)
        for sheet in (1, 2):
            sgn = 1.0 if sheet == 1 else -1.0
            base = p1 if sheet == 1 else -p2
            acc = np.zeros((len(points), len(Zp)), complex)
            for j in range(fam.j_min, fam.j_max + 1):
                u = 2.0**-j * s
                w = 2.0 ** ((alpha - 1) * j) * ws * prof
                H = np.empty((len(u), len(Zp)), complex)
                for i, uk in enumerate(u):
                    zeta = np.concatenate([Zp, (base + sgn * uk)[:, None]], axis=1)
                    g = _sheet_cutoffs(zeta)[sheet]
                    H[i] = g * annulus(_norm(zeta)) * f_hat(zeta / lam) / (p1 + p2 + uk) ** alpha
                # zeta_d = base + sgn u, so the layer phase splits off the sheet phase
                acc += (np.exp(1j * sgn * y[:, -1][:, None] * u[None, :]) * w[None, :]) @ H
            ph = np.exp(1j * (y[:, :-1] @ Zp.T + y[:, -1][:, None] * base[None, :]))
            total += np.sum(ph * acc * Wp[None, :], axis=1)
        if not math.isclose(alpha, 1.0):
            total += _off_cone_part(sheets, alpha, f_hat, lam, y)
        contributions.append(lam ** (2 * alpha - d) * total / (2 * np.pi) ** d)
    partial = list(np.cumsum(contributions, axis=0))
    tail = None
    if p is not None and q is not None:
        tail = 2 * alpha + d / q - d / p
    return ConeApplication(
        values=partial[-1],
        partial_sums=partial,
        annulus_values=contributions,
        tail_exponent=tail,
        info={"ell_max": ell_max, "delta_floor": delta_floor, "sheets": sheets.name, "alpha": alpha},
    )


def _off_cone_part(sheets, alpha, f_hat, lam, y, n_panels=8, n_theta=64, order=12):
    """Direct quadrature of gamma_0 beta_0 g_hat P_+^-alpha / Gamma(1 - alpha) at unit scale."""
    Zp, Wp = _polar_nodes(0.0, 2.0, n_panels, n_theta, order)
    zd, wd = gl_panels(-2.0, 2.0, 2 * n_panels, order)
    p1 = lam * sheets.psi1(Zp / lam)
    p2 = lam * sheets.psi2(Zp / lam)
    out = np.zeros(len(y), complex)
    for z, w in zip(zd, wd):
        zeta = np.concatenate([Zp, np.full((len(Zp), 1), z)], axis=1)
        g0 = _sheet_cutoffs(zeta)[0]
        P = (z - p1) * (z + p2)
        mult = np.where(P > 0, np.abs(np.where(P > 0, P, 1.0)) ** (-alpha), 0.0) / gamma(1 - alpha)
        amp = g0 * annulus(_norm(zeta)) * mult * f_hat(zeta / lam) * Wp * w
        out += np.exp(1j * (y @ zeta.T)) @ amp
    return out


def cone_surface_quadrature(sheets: ConeSheets, f_hat: Callable, points, n_r_panels: int = 12, n_theta: int = 192):
    """(2pi)^-3 sum over both sheets of int e^{i x.xi} beta f_hat / (psi1 + psi2) dxi'.

    This is the alpha = 1 cone multiplier, delta((xi_d - psi1)(xi_d + psi2)) beta,
    integrated directly over the double cone without annuli or layers.
    """
    points = np.atleast_2d(np.asarray(points, float))
    c = sheets.radius
    X, W = _polar_nodes(0.0, c, n_r_panels, n_theta)
    p1, p2 = sheets.psi1(X), sheets.psi2(X)
    out = np.zeros(len(points), complex)
    for zd in (p1, -p2):
        xi = np.concatenate([X, zd[:, None]], axis=1)
        beta = plateau(2 * _norm(xi) / c)
        amp = beta * f_hat(xi) / (p1 + p2) * W
        out += np.exp(1j * (points @ xi.T)) @ amp
    return out / (2 * np.pi) ** 3


def annulus_scaling(sheets: ConeSheets, alpha: float, p: float, q: float, ells=(0, 1, 2, 3, 4), n: int = 48,
                    j_floor: int = 2) -> ProbeReport:
    """Per-annulus ratio ||C_l f_l||_q / ||f_l||_p for the self-similar family f_l_hat = G(lam_l xi).

    The multiplier of annulus l is evaluated directly at the grid frequencies
    (layer sum truncated at 2^-j_floor in unit-scale units), fields are
    obtained by FFT on a box adapted to the annulus and norms are grid
    Riemann sums.
    """
    from .solver import SpectralGrid

    d = 3
    fam = DyadicFamily(alpha, -1, j_floor)
    c = sheets.radius
    t1 = 1 / math.sqrt(2)

    def G(zeta):
        tau = zeta[..., -1] / np.maximum(_norm(zeta), 1e-300)
        return annulus(_norm(zeta)) * np.exp(-((tau - t1) ** 2) / (2 * 0.08**2))

    ratios = []
    for ell in ells:
        lam = 2.0 ** (ell + 1) / c
        grid = SpectralGrid(2.2 / lam, n)
        xi = grid.xi()
        zeta = lam * xi
        zp = zeta[..., :-1].reshape(-1, 2)
        p1 = (lam * sheets.psi1(zp / lam)).reshape(zeta.shape[:-1])
        p2 = (lam * sheets.psi2(zp / lam)).reshape(zeta.shape[:-1])
        g0, g1, g2 = _sheet_cutoffs(zeta)
        b0 = annulus(_norm(zeta))
        u1 = zeta[..., -1] - p1
        u2 = -zeta[..., -1] - p2
        M = np.zeros(zeta.shape[:-1])
        for g, u in ((g1, u1), (g2, u2)):
            lay = sum(fam.layer(j, u) for j in range(fam.j_min, fam.j_max + 1))
            M += g * b0 * lay / np.maximum(p1 + p2 + np.maximum(u, 0), 1e-300) ** alpha
        if not math.isclose(alpha, 1.0):
            P = u1 * (zeta[..., -1] + p2)
            M += g0 * b0 * np.where(P > 0, np.abs(np.where(P > 0, P, 1.0)) ** (-alpha), 0.0) / gamma(1 - alpha)
        M *= lam ** (2 * alpha)
        fh = G(zeta)
        out = grid.to_physical(M * fh)
        f = grid.to_physical(fh)
        ratios.append(grid.lebesgue_norm(out, q) / grid.lebesgue_norm(f, p))
    ells = np.asarray(ells, float)
    slope_log2 = np.polyfit(ells, np.log2(ratios), 1)[0]
    fit = loglog_fit(2.0**ells, ratios)
    expected = 2 * alpha + d / q - d / p
    return ProbeReport(
        experiment="cone_annulus_scaling",
        parameters={"sheets": sheets.name, "alpha": alpha, "p": p, "q": q, "ells": ells, "n": n, "j_floor": j_floor},
        fits={"annulus_exponent": fit},
        flags={"exponent_within_0.2": abs(slope_log2 - expected) <= 0.2},
        info={"expected_exponent": expected, "fitted_exponent": float(slope_log2), "ratios": ratios},
    )


# ---------------------------------------------------------- region probing


def pentagon_corners(alpha: float, k: int, d: int = 3) -> dict:
    """Corners B, C, B', C', A of the (1/p, 1/q) region for T^alpha with k curvatures."""
    if not 0 < alpha < (k + 2) / 2:
        raise ValidationError("alpha must lie in (0, (k+2)/2)")
    if alpha >= 0.5:
        x = (k + 2 * alpha) / (2 * (k + 1))
        y = (k + 2 - 2 * alpha) / (2 * (k + 1))
        B = (x, k * (k + 2 - 2 * alpha) / (2 * (k + 1) * (k + 2)))
        Bp = ((k * k + 2 * (2 + alpha) * k + 4) / (2 * (k + 1) * (k + 2)), y)
        C, Cp = (x, 0.0), (1.0, y)
    else:
        x = (d - 1 + 2 * alpha) / (2 * d)
        y = (d + 1 - 2 * alpha) / (2 * d)
        B = (x, k / (2 * (2 + k)))
        Bp = ((4 + k) / (2 * (2 + k)), y)
        C, Cp = (x, 0.0), (1.0, y)
    return {"B": B, "C": C, "B_prime": Bp, "C_prime": Cp, "A": (1.0, 0.0)}


def in_region(x: float, y: float, alpha: float, k: int, d: int = 3) -> bool:
    if alpha >= 0.5:
        return x > (k + 2 * alpha) / (2 * (k + 1)) and y < (k + 2 - 2 * alpha) / (2 * (k + 1)) and x - y >= 2 * alpha / (k + 2)
    gap = (2 * (d - 1 + 2 * alpha) + k * (2 * alpha - 1)) / (2 * d * (2 + k))
    return x > (d - 1 + 2 * alpha) / (2 * d) and y < (d + 1 - 2 * alpha) / (2 * d) and x - y >= gap


def _riesz_profile(alpha: float, R: float, x3: np.ndarray) -> np.ndarray:
    """int_0^inf u^-alpha / Gamma(1-alpha) e^{-(R u)^2/2} e^{i x3 u} du (analytic continuation at alpha >= 1)."""
    if math.isclose(alpha, 1.0):
        return np.ones_like(x3, dtype=complex)
    w = x3[:, None] / R
    if alpha < 1:
        v, wv = gl_panels(0.0, 8.0 ** (1 - alpha), 16, 16)
        s = v ** (1 / (1 - alpha))
        vals = np.exp(-(s**2) / 2 + 1j * w * s) @ wv / (1 - alpha)
        return R ** (alpha - 1) * vals / gamma(1 - alpha)
    # 1 < alpha < 2: integrate by parts once
    v, wv = gl_panels(0.0, 8.0 ** (2 - alpha), 16, 16)
    s = v ** (1 / (2 - alpha))
    dF = (-s + 1j * w) * np.exp(-(s**2) / 2 + 1j * w * s)
    vals = -(dF @ wv) / (2 - alpha)
    return R ** (alpha - 1) * vals / gamma(2 - alpha)


def _knapp_amplitude(R, patch):
    return lambda q: np.exp(-R * np.sum(q**2, axis=-1) / 2) * plateau(_norm(q) / (0.5 * patch.support))


def _focusing_amplitude(R, patch):
    return lambda q: patch.chi(q)


def _random_amplitude(R, patch, rng):
    n_caps = 6
    r = 0.5 * patch.support * np.sqrt(rng.uniform(0, 1, n_caps))
    th = rng.uniform(0, 2 * np.pi, n_caps)
    centers = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    coef = rng.standard_normal(n_caps) + 1j * rng.standard_normal(n_caps)

    def amp(q):
        out = 0
        for cvec, a in zip(centers, coef):
            out = out + a * np.exp(-R * np.sum((q - cvec) ** 2, axis=-1) / 2)
        return out * plateau(_norm(q) / (0.5 * patch.support) * 0.8)

    return amp


REGION_FAMILIES = ("knapp", "focusing", "random")


def _family_norms(patch, alpha, R, family, p, q, rng, extent=4.0, n_perp=96):
    """(||T f_R||_q, ||f_R||_p) for f_hat = A(xi') exp(-(R (xi_d - psi(xi')))^2 / 2)."""
    if family == "knapp":
        A, h = _knapp_amplitude(R, patch), min(patch.support, 7.0 / math.sqrt(R))
    elif family == "focusing":
        A, h = _focusing_amplitude(R, patch), patch.support
    elif family == "random":
        A, h = _random_amplitude(R, patch, rng), patch.support
    else:
        raise ValidationError(f"unknown family {family!r}")
    dq = 2 * h / n_perp
    qa = dq * (np.arange(n_perp) - n_perp // 2)
    Q = np.stack(np.meshgrid(qa, qa, indexing="ij"), axis=-1)
    amp = A(Q)
    psi = patch.psi(Q)
    dpsi = float(np.ptp(psi[np.abs(amp) > 1e-12 * np.abs(amp).max()]))
    L3 = extent * R
    dx3 = min(np.pi / (2 * max(dpsi, 1e-6)), R / 4)
    n3 = max(32, int(math.ceil(2 * L3 / dx3)))
    x3 = np.linspace(-L3, L3, n3, endpoint=False)
    dx3 = 2 * L3 / n3
    dxp = 2 * np.pi / (n_perp * dq)
    prof_T = _riesz_profile(alpha, R, x3)
    prof_f = math.sqrt(2 * np.pi) / R * np.exp(-(x3**2) / (2 * R**2))
    chi = patch.chi(Q)
    sq, sp = 0.0, 0.0
    scale = n_perp**2 * dq**2 / (2 * np.pi) ** 3
    for i, z in enumerate(x3):
        base = amp * np.exp(1j * z * psi)
        Ef = np.fft.ifft2(np.fft.ifftshift(base)) * scale
        Et = np.fft.ifft2(np.fft.ifftshift(base * chi)) * scale
        sq += np.sum(np.abs(Et * prof_T[i]) ** q)
        sp += np.sum(np.abs(Ef * prof_f[i]) ** p)
    vol = dxp**2 * dx3
    return (sq * vol) ** (1 / q), (sp * vol) ** (1 / p)


def norm_region_probe(patch: SurfacePatch, alpha: float, nodes, families=REGION_FAMILIES, scales=(4, 8, 16, 32, 64),
                      seed: int = 0, bounded_tol: float = 0.1, growth_tol: float = 0.2) -> ProbeReport:
    """Growth exponents of ||T^alpha f_R||_q / ||f_R||_p over the scale sweep at each (1/p, 1/q) node.

    Families: Knapp caps (width R^-1/2 tangentially, R^-1 normally), focusing
    packets (full patch amplitude, thickness R^-1) and random superpositions of
    Knapp caps. A node is "growth" if some family grows faster than R^growth_tol,
    "bounded-consistent" if no family grows faster than R^bounded_tol, and
    "inconclusive" otherwise.
    """
    classes, exps = {}, {}
    for (x, y) in nodes:
        p, q = 1.0 / x, 1.0 / y
        node_exps = {}
        for fam in families:
            rng = np.random.default_rng(seed)
            ratios = []
            for R in scales:
                nt, nf = _family_norms(patch, alpha, float(R), fam, p, q, rng if fam != "random" else np.random.default_rng(seed))
                ratios.append(nt / nf)
            node_exps[fam] = loglog_fit(scales, ratios)
        worst = max(f.slope for f in node_exps.values())
        if worst > growth_tol:
            cls = "growth"
        elif worst <= bounded_tol:
            cls = "bounded-consistent"
        else:
            cls = "inconclusive"
        key = f"({x:.2f},{y:.2f})"
        classes[key] = cls
        exps[key] = {k: v.slope for k, v in node_exps.items()}
        exps[key]["_fits"] = {k: v.to_dict() for k, v in node_exps.items()}
    return ProbeReport(
        experiment="region",
        parameters={"patch": patch.name, "alpha": alpha, "nodes": [list(n) for n in nodes], "families": list(families),
                    "scales": list(scales), "seed": seed},
        flags={},
        info={
            "classification": classes,
            "exponents": exps,
            "corners": pentagon_corners(alpha, patch.k, patch.d),
            "theory_membership": {f"({x:.2f},{y:.2f})": in_region(x, y, alpha, patch.k, patch.d) for x, y in nodes},
            "note": "finite-box Riemann-sum norms; endpoint and Lorentz-space statements are out of numeric scope",
        },
    )
