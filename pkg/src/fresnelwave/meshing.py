"""Triangulated level sets of the dispersion polynomial with coarea weights and region tags."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from skimage.measure import marching_cubes

from . import symbols
from .errors import LevelTooFar, MeshFailure, ValidationError
from .geometry import implicit_curvatures_from, singular_points
from .materials import MaterialTensors, normalize

S1, S2, S3 = "S1_elliptic", "S2_hamiltonian_band", "S3_singular_ball"
REGION_TAGS = (S1, S2, S3)
PROJECTION_TOL = 1e-10


@dataclass
class SurfaceMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray
    weights: np.ndarray  # 1 / |grad p|
    regions: np.ndarray  # tag strings
    level: float
    K: np.ndarray = None
    Km: np.ndarray = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.vertices)
        if self.K is None:
            self.K = np.zeros(n)
        if self.Km is None:
            self.Km = np.zeros(n)

    @property
    def vertex_areas(self) -> np.ndarray:
        """Barycentric (one third of incident triangle areas) area per vertex."""
        return vertex_areas(self.vertices, self.triangles)

    def integrate(self, values, coarea: bool = False) -> float:
        """Surface integral of per-vertex values; with ``coarea`` multiply by 1/|grad p|."""
        w = self.vertex_areas * (self.weights if coarea else 1.0)
        return float(np.sum(np.asarray(values) * w))

    def area(self) -> float:
        return float(triangle_areas(self.vertices, self.triangles).sum())

    @classmethod
    def empty(cls, level=0.0):
        z = np.zeros((0, 3))
        return cls(z, np.zeros((0, 3), dtype=np.int64), z.copy(), np.zeros(0), np.array([], dtype=object), level)


def triangle_areas(vertices, triangles):
    if len(triangles) == 0:
        return np.zeros(0)
    a, b, c = (vertices[triangles[:, k]] for k in range(3))
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def vertex_areas(vertices, triangles):
    out = np.zeros(len(vertices))
    ar = triangle_areas(vertices, triangles) / 3.0
    for k in range(3):
        np.add.at(out, triangles[:, k], ar)
    return out


def surface_extent(m: MaterialTensors) -> float:
    """Radius of a ball containing both sheets of {p = 0} with some room."""
    return 1.15 * abs(m.omega) * np.sqrt(max(m.eps) * max(m.mu)) * 1.05


def singular_points_xi(m: MaterialTensors) -> np.ndarray:
    nm = normalize(m)
    return nm.to_xi(singular_points(nm).points)


def default_singular_radius(m: MaterialTensors) -> float:
    z = singular_points_xi(m)
    d = np.linalg.norm(z[:, None, :] - z[None, :, :], axis=-1)
    return 0.15 * float(d[d > 0].min())


def project_to_level(m, pts, level, tol=PROJECTION_TOL, maxiter=60):
    """Newton iteration along the gradient onto {p = level}."""
    pts = np.array(pts, dtype=float)
    scale = max(abs(m.omega) ** 6, 1.0)
    active = np.ones(len(pts), bool)
    for _ in range(maxiter):
        if not active.any():
            break
        x = pts[active]
        r = symbols.dispersion(m, x) - level
        g = symbols.dispersion_gradient(m, x)
        g2 = np.sum(g * g, axis=1)
        ok = g2 > 1e-24
        step = np.zeros_like(x)
        step[ok] = (r[ok] / g2[ok])[:, None] * g[ok]
        # damp very long steps, which only happen next to conical points
        n = np.linalg.norm(step, axis=1)
        cap = 0.25 * np.maximum(np.sqrt(g2) / scale, 1e-3)
        big = n > cap
        step[big] *= (cap[big] / n[big])[:, None]
        pts[active] = x - step
        done = np.abs(r) <= tol * scale
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return pts, np.abs(symbols.dispersion(m, pts) - level)


def adaptive_level_halfwidth(m: MaterialTensors, rho: float | None = None, n: int = 72) -> float:
    """Largest t0 <= 0.1 omega^6 keeping |grad p| >= half its surface minimum on the slab |p| <= 2 t0."""
    rho = default_singular_radius(m) if rho is None else rho
    R = surface_extent(m)
    ax = np.linspace(-R, R, n)
    X = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    z = singular_points_xi(m)
    dist = np.min(np.linalg.norm(X[:, None, :] - z[None], axis=-1), axis=1)
    X = X[dist > rho]
    p = symbols.dispersion(m, X)
    g = np.linalg.norm(symbols.dispersion_gradient(m, X), axis=1)
    mesh = _raw_mesh(m, 0.0, 2 * R / 48)
    surf = mesh[0]
    sd = np.min(np.linalg.norm(surf[:, None, :] - z[None], axis=-1), axis=1)
    gmin = float(np.linalg.norm(symbols.dispersion_gradient(m, surf[sd > rho]), axis=1).min())
    t0 = 0.1 * abs(m.omega) ** 6
    for _ in range(40):
        slab = np.abs(p) <= 2 * t0
        if not slab.any() or g[slab].min() >= 0.5 * gmin:
            return t0
        t0 *= 0.5
    return t0


def _raw_mesh(m, level, h):
    R = surface_extent(m)
    n = int(np.ceil(2 * R / h)) + 1
    ax = -R + h * np.arange(n)
    X = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1)
    vals = symbols.dispersion(m, X) - level
    if not (vals.min() < 0 < vals.max()):
        raise MeshFailure(f"level {level} not crossed on the grid")
    verts, faces, _, _ = marching_cubes(vals, level=0.0, spacing=(h, h, h), allow_degenerate=False)
    verts = verts - R
    return verts, faces.astype(np.int64)


def _clean(verts, faces):
    """Merge vertices that coincide after projection and drop collapsed triangles."""
    key = np.round(verts / 1e-12).astype(np.int64)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    new_verts = verts[first[order]]
    faces = remap[inv.reshape(-1)[faces]]
    keep = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    faces = faces[keep]
    if len(faces):
        keep = triangle_areas(new_verts, faces) > 0
        faces = faces[keep]
    used = np.zeros(len(new_verts), bool)
    used[faces.reshape(-1)] = True
    idx = np.cumsum(used) - 1
    return new_verts[used], idx[faces]


def chart_coordinates(m: MaterialTensors, xi):
    """(s, t) of the normalized point: s = |eta|^2, t = e1 e2 e3 / sum e_i eta_i^2."""
    nm = normalize(m)
    eta = nm.to_eta(xi)
    e = nm.eps
    s = np.sum(eta**2, axis=-1)
    w = eta**2 @ e
    return s, np.prod(e) / w


def circle_distance(m: MaterialTensors, xi):
    """|t - T(s)| on the outer sheet; +inf on the inner sheet."""
    nm = normalize(m)
    e = np.sort(nm.eps)
    s, t = chart_coordinates(m, xi)
    T = e[0] * e[2] / (e[0] + e[2] - s)
    outer = s > e[1]
    out = np.full(np.shape(s), np.inf)
    out[outer] = np.abs(t[outer] - T[outer])
    return out


def classify_and_mesh(
    m: MaterialTensors,
    level: float = 0.0,
    h: float = 0.1,
    band_width: float | None = None,
    singular_radius: float | None = None,
    t0: float | None = None,
    curvatures: bool = True,
) -> SurfaceMesh:
    """Mesh {p = level}, project vertices, attach weights, normals, curvatures and tags."""
    if h <= 0 or (band_width is not None and band_width <= 0) or (singular_radius is not None and singular_radius <= 0):
        raise ValidationError("h, band_width and singular_radius must be positive")
    rho = default_singular_radius(m) if singular_radius is None else singular_radius
    if t0 is None:
        t0 = adaptive_level_halfwidth(m, rho)
    if abs(level) > t0:
        raise LevelTooFar(f"|level| = {abs(level)} exceeds foliation half-width t0 = {t0}")
    verts, faces = _raw_mesh(m, level, h)
    verts, res = project_to_level(m, verts, level)
    scale = max(abs(m.omega) ** 6, 1.0)
    z = singular_points_xi(m)
    dsing = np.min(np.linalg.norm(verts[:, None, :] - z[None], axis=-1), axis=1)
    bad = (res > 1e-8 * scale) & (dsing > h)
    if bad.any():
        raise MeshFailure(f"{int(bad.sum())} vertices failed to project onto the level set (max residual {res.max():.2e})")
    verts, faces = _clean(verts, faces)
    if len(faces) == 0:
        raise MeshFailure("empty triangulation")
    g = symbols.dispersion_gradient(m, verts)
    gn = np.linalg.norm(g, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        normals = np.where(gn[:, None] > 0, g / gn[:, None], 0.0)
        weights = np.where(gn > 0, 1.0 / gn, np.inf)
    K = np.zeros(len(verts))
    Km = np.zeros(len(verts))
    if curvatures:
        reg = gn > 1e-8
        Kr, div = implicit_curvatures_from(g[reg], symbols.dispersion_hessian(m, verts[reg]))
        K[reg] = Kr
        Km[reg] = 0.5 * div
        K[~reg] = np.nan
        Km[~reg] = np.nan
    dsing = np.min(np.linalg.norm(verts[:, None, :] - z[None], axis=-1), axis=1)
    cd = circle_distance(m, verts)
    in_ball = dsing < rho
    if band_width is None:
        band_width = _default_band_width(K, cd, in_ball)
    regions = np.full(len(verts), S1, dtype=object)
    regions[(cd < band_width) & ~in_ball] = S2
    regions[in_ball] = S3
    mesh = SurfaceMesh(verts, faces, normals, weights, regions, float(level), K, Km)
    band = regions == S2
    k_band = float(np.nanmax(np.abs(K[band]))) if band.any() else 0.0
    s1 = regions == S1
    mesh.info = {
        "h": h,
        "singular_radius": rho,
        "band_width": band_width,
        "t0": t0,
        "max_projection_residual": float(np.max(np.abs(symbols.dispersion(m, verts) - level))),
        "area": mesh.area(),
        "K_band": k_band,
        "fraction_S1_below_K_band": float(np.mean(np.abs(K[s1]) < k_band)) if s1.any() else 0.0,
        "median_abs_K_S1": float(np.nanmedian(np.abs(K[s1]))) if s1.any() else 0.0,
        "region_counts": {tag: int(np.sum(regions == tag)) for tag in REGION_TAGS},
        "S3_area": float(np.sum(mesh.vertex_areas[in_ball])),
    }
    return mesh


def _default_band_width(K, cd, in_ball):
    """Widest band around the Hamiltonian circles where |K| stays below 0.1 median |K| off the band."""
    finite = np.isfinite(cd) & ~in_ball & np.isfinite(K)
    if not finite.any():
        return 1e-3
    ref = np.nanmedian(np.abs(K[~in_ball & np.isfinite(K)]))
    thresh = 0.1 * ref
    order = np.argsort(cd[finite])
    cds = cd[finite][order]
    ks = np.abs(K[finite][order])
    viol = np.flatnonzero(ks >= thresh)
    if len(viol) == 0:
        return float(cds[-1])
    first = viol[0]
    return float(cds[first]) if first > 0 else float(cds[0]) * 0.5 + 1e-12
