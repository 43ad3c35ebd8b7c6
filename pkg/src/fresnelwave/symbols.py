"""Matrix symbols of the time-harmonic Maxwell operator and the dispersion polynomial.

All functions broadcast over leading axes: frequencies have shape ``(..., 3)``
and material arrays (``eps``, ``mu``) shape ``(..., 3)`` with ``omega`` of shape
``(...)``. The public wrappers take a :class:`MaterialTensors`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IdentityViolation
from .materials import MaterialTensors
from .report import ProbeReport

IDENTITY_RTOL = 1e-9


def curl_symbol(xi) -> np.ndarray:
    """Skew matrix b(xi) with b(xi) v = xi x v."""
    xi = np.asarray(xi, dtype=float)
    b = np.zeros(xi.shape + (3,), dtype=float)
    x1, x2, x3 = xi[..., 0], xi[..., 1], xi[..., 2]
    b[..., 0, 1] = -x3
    b[..., 0, 2] = x2
    b[..., 1, 0] = x3
    b[..., 1, 2] = -x1
    b[..., 2, 0] = -x2
    b[..., 2, 1] = x1
    return b


def _unpack(m):
    if isinstance(m, MaterialTensors):
        return m.eps_arr, m.mu_arr, np.float64(m.omega)
    eps, mu, omega = m
    return np.asarray(eps, float), np.asarray(mu, float), np.asarray(omega, float)


def _q0_coefficients(eps, mu):
    """Coefficients a_i with q0 = sum a_i xi_i^2."""
    e1, e2, e3 = eps[..., 0], eps[..., 1], eps[..., 2]
    m1, m2, m3 = mu[..., 0], mu[..., 1], mu[..., 2]
    return np.stack(
        [1 / (e2 * m3) + 1 / (m2 * e3), 1 / (e1 * m3) + 1 / (m1 * e3), 1 / (e1 * m2) + 1 / (e2 * m1)], axis=-1
    )


def q0_q1(m, xi):
    eps, mu, _ = _unpack(m)
    xi = np.asarray(xi, dtype=float)
    sq = xi**2
    q0 = np.sum(_q0_coefficients(eps, mu) * sq, axis=-1)
    q1 = np.sum(eps * sq, axis=-1) * np.sum(mu * sq, axis=-1) / (np.prod(eps, axis=-1) * np.prod(mu, axis=-1))
    return q0, q1


def dispersion(m, xi) -> np.ndarray:
    """p(omega, xi) = -omega^2 (omega^4 - omega^2 q0 + q1)."""
    _, _, w = _unpack(m)
    q0, q1 = q0_q1(m, xi)
    w2 = w * w
    return -w2 * (w2 * w2 - w2 * q0 + q1)


def dispersion_gradient(m, xi) -> np.ndarray:
    eps, mu, w = _unpack(m)
    xi = np.asarray(xi, dtype=float)
    sq = xi**2
    w2 = np.asarray(w * w)[..., None]
    c = (np.prod(eps, axis=-1) * np.prod(mu, axis=-1))[..., None]
    A = np.sum(eps * sq, axis=-1)[..., None]
    B = np.sum(mu * sq, axis=-1)[..., None]
    grad_q0 = 2 * _q0_coefficients(eps, mu) * xi
    grad_q1 = 2 * xi * (eps * B + mu * A) / c
    return w2 * w2 * grad_q0 - w2 * grad_q1


def dispersion_hessian(m, xi) -> np.ndarray:
    eps, mu, w = _unpack(m)
    xi = np.asarray(xi, dtype=float)
    sq = xi**2
    w2 = np.asarray(w * w)[..., None, None]
    c = (np.prod(eps, axis=-1) * np.prod(mu, axis=-1))[..., None, None]
    A = np.sum(eps * sq, axis=-1)[..., None, None]
    B = np.sum(mu * sq, axis=-1)[..., None, None]
    eye = np.eye(3)
    hess_q0 = 2 * eye * _q0_coefficients(eps, mu)[..., None, :]
    ex = eps * xi
    mx = mu * xi
    outer = ex[..., :, None] * mx[..., None, :]
    hess_q1 = (2 * eye * (eps[..., None, :] * B + mu[..., None, :] * A) + 4 * (outer + np.swapaxes(outer, -1, -2))) / c
    return w2 * w2 * hess_q0 - w2 * hess_q1


@dataclass(frozen=True)
class SymbolBundle:
    p_value: np.ndarray
    grad_p: np.ndarray
    hess_upper: np.ndarray  # (..., 6): entries 11, 12, 13, 22, 23, 33
    q0: np.ndarray
    q1: np.ndarray
    xi: np.ndarray
    omega: float

    @property
    def hess_p(self) -> np.ndarray:
        return unpack_upper(self.hess_upper)


_UPPER = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def unpack_upper(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u)
    h = np.empty(u.shape[:-1] + (3, 3), dtype=u.dtype)
    for k, (i, j) in enumerate(_UPPER):
        h[..., i, j] = u[..., k]
        h[..., j, i] = u[..., k]
    return h


def dispersion_bundle(m: MaterialTensors, xi) -> SymbolBundle:
    xi = np.asarray(xi, dtype=float)
    q0, q1 = q0_q1(m, xi)
    hess = dispersion_hessian(m, xi)
    upper = np.stack([hess[..., i, j] for i, j in _UPPER], axis=-1)
    return SymbolBundle(dispersion(m, xi), dispersion_gradient(m, xi), upper, q0, q1, xi, m.omega)


def z_matrix(eps, mu, omega, xi, effective: bool = False) -> np.ndarray:
    """Explicit entries of Z_{eps,mu}(xi); swap the first two arguments for Z_{mu,eps}.

    With ``effective=True`` the quartic rank-one part xi xi^T S(xi) is dropped,
    which leaves Z unchanged on vectors orthogonal to xi.
    """
    eps = np.asarray(eps, float)
    mu = np.asarray(mu, float)
    xi = np.asarray(xi, float)
    w2 = np.asarray(omega, float) ** 2
    e1, e2, e3 = eps[..., 0], eps[..., 1], eps[..., 2]
    m1, m2, m3 = mu[..., 0], mu[..., 1], mu[..., 2]
    x1, x2, x3 = xi[..., 0], xi[..., 1], xi[..., 2]
    s1, s2, s3 = x1**2, x2**2, x3**2
    quartic = 0.0 if effective else s1 / (m2 * m3) + s2 / (m1 * m3) + s3 / (m1 * m2)
    w4 = w2 * w2

    z = np.empty(np.broadcast_shapes(xi.shape, eps.shape, mu.shape)[:-1] + (3, 3))
    z[..., 0, 0] = s1 * quartic - w2 * (e2 / m2 * s1 + e3 / m3 * s1 + e2 / m1 * s2 + e3 / m1 * s3) + w4 * e2 * e3
    z[..., 1, 1] = s2 * quartic - w2 * (e1 / m2 * s1 + e3 / m3 * s2 + e1 / m1 * s2 + e3 / m2 * s3) + w4 * e1 * e3
    z[..., 2, 2] = s3 * quartic - w2 * (e1 / m3 * s1 + e2 / m3 * s2 + e1 / m1 * s3 + e2 / m2 * s3) + w4 * e1 * e2
    z[..., 0, 1] = z[..., 1, 0] = x1 * x2 * (quartic - w2 * e3 / m3)
    z[..., 0, 2] = z[..., 2, 0] = x1 * x3 * (quartic - w2 * e2 / m2)
    z[..., 1, 2] = z[..., 2, 1] = x2 * x3 * (quartic - w2 * e1 / m1)
    return z


def _diag(v):
    return v[..., :, None] * np.eye(3)


def second_order_symbols(eps, mu, xi):
    """M_E = -eps^{-1} b mu^{-1} b and M_H = -mu^{-1} b eps^{-1} b."""
    b = curl_symbol(xi)
    inv_e = _diag(1 / np.asarray(eps, float))
    inv_m = _diag(1 / np.asarray(mu, float))
    m_e = -inv_e @ b @ inv_m @ b
    m_h = -inv_m @ b @ inv_e @ b
    return b, m_e, m_h


@dataclass(frozen=True)
class MatrixSymbols:
    b: np.ndarray
    M_E: np.ndarray
    M_H: np.ndarray
    Z_em: np.ndarray
    Z_me: np.ndarray
    Z_em_eff: np.ndarray
    Z_me_eff: np.ndarray


def maxwell_symbols(m: MaterialTensors, xi) -> MatrixSymbols:
    eps, mu, w = _unpack(m)
    b, m_e, m_h = second_order_symbols(eps, mu, xi)
    return MatrixSymbols(
        b=b,
        M_E=m_e,
        M_H=m_h,
        Z_em=z_matrix(eps, mu, w, xi),
        Z_me=z_matrix(mu, eps, w, xi),
        Z_em_eff=z_matrix(eps, mu, w, xi, effective=True),
        Z_me_eff=z_matrix(mu, eps, w, xi, effective=True),
    )


# ----------------------------------------------------------------- sampling


def sample_ball(rng: np.random.Generator, n: int, radius) -> np.ndarray:
    """Uniform samples in a ball of the given (possibly per-sample) radius."""
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = np.asarray(radius, float) * rng.random(n) ** (1 / 3)
    return v * np.reshape(r, (-1, 1))


def random_materials(rng: np.random.Generator, n: int):
    """Log-uniform eps in [0.5, 20], mu in [0.5, 4], |omega| in [0.5, 2] with random sign."""
    eps = np.exp(rng.uniform(np.log(0.5), np.log(20.0), (n, 3)))
    mu = np.exp(rng.uniform(np.log(0.5), np.log(4.0), (n, 3)))
    omega = rng.uniform(0.5, 2.0, n) * rng.choice([-1.0, 1.0], n)
    return eps, mu, omega


def _rel(res, scale):
    return np.linalg.norm(res, axis=(-2, -1)) / scale


def identity_residuals(eps, mu, omega, xi, z_em=None, z_me=None) -> dict:
    """Relative residuals of the Cramer, cancellation and determinant identities.

    Each residual is divided by the natural magnitude of the terms being
    cancelled (product of Frobenius norms) so the numbers are floating-point
    relative errors independent of units.
    """
    eps = np.asarray(eps, float)
    mu = np.asarray(mu, float)
    omega = np.asarray(omega, float)
    b, m_e, m_h = second_order_symbols(eps, mu, xi)
    if z_em is None:
        z_em = z_matrix(eps, mu, omega, xi)
    if z_me is None:
        z_me = z_matrix(mu, eps, omega, xi)
    w2 = (omega**2)[..., None, None]
    eye = np.eye(3)
    pe = np.prod(eps, axis=-1)[..., None, None]
    pm = np.prod(mu, axis=-1)[..., None, None]
    p = dispersion((eps, mu, omega), xi)
    pI = p[..., None, None] * eye
    nrm = lambda a: np.linalg.norm(a, axis=(-2, -1))  # noqa: E731
    E, M = _diag(eps), _diag(mu)
    inv_e = _diag(1 / eps)
    inv_m = _diag(1 / mu)

    lhs_e = m_e - w2 * eye
    zr_e = z_em @ E / pe
    cramer_e = _rel(lhs_e @ zr_e - pI, nrm(lhs_e) * nrm(zr_e))
    lhs_h = m_h - w2 * eye
    zr_h = z_me @ M / pm
    cramer_h = _rel(lhs_h @ zr_h - pI, nrm(lhs_h) * nrm(zr_h))

    t1 = b @ z_em / pe
    t2 = M @ z_me @ b @ inv_e / pm
    cancel_b = _rel(t1 - t2, nrm(t1) + nrm(t2))

    u1 = b @ z_em @ b @ inv_m / pe
    u2 = w2 * M @ z_me / pm
    cancel_c = _rel(u1 + u2 + pI, nrm(u1) + nrm(u2))

    det_e = np.linalg.det(lhs_e)
    det_h = np.linalg.det(lhs_h)
    q0, q1 = q0_q1((eps, mu, omega), xi)
    w2s = omega**2
    term_scale = np.maximum.reduce([np.abs(p), w2s**3, w2s**2 * np.abs(q0), w2s * np.abs(q1)])
    det_rel = np.maximum(np.abs(det_e - p), np.abs(det_h - p)) / term_scale
    return {
        "cramer_E": cramer_e,
        "cramer_H": cramer_h,
        "cancellation_curl": cancel_b,
        "cancellation_second_order": cancel_c,
        "determinant": det_rel,
    }


def identity_suite(
    m: MaterialTensors | None,
    samples: int,
    rng_seed: int,
    perturb: tuple[int, int, float] | None = None,
    raise_on_violation: bool = True,
) -> ProbeReport:
    """Check the algebraic identities at random frequencies.

    With ``m=None`` the materials are random as well (one per sample). ``perturb``
    adds a constant to one Z_em entry, ``(row, col, amount)``, as a negative control.
    """
    rng = np.random.default_rng(rng_seed)
    if m is None:
        eps, mu, omega = random_materials(rng, samples)
        radius = 3 * np.abs(omega) * np.sqrt(eps.max(axis=1) * mu.max(axis=1))
    else:
        eps = np.broadcast_to(m.eps_arr, (samples, 3))
        mu = np.broadcast_to(m.mu_arr, (samples, 3))
        omega = np.full(samples, m.omega)
        radius = m.sampling_radius()
    xi = sample_ball(rng, samples, radius)
    z_em = z_matrix(eps, mu, omega, xi)
    if perturb is not None:
        i, j, amount = perturb
        z_em = z_em.copy()
        z_em[:, i, j] += amount
    res = identity_residuals(eps, mu, omega, xi, z_em=z_em)
    maxima = {k: float(np.max(v)) for k, v in res.items()}
    grouped = {
        "adjugate": max(maxima["cramer_E"], maxima["cramer_H"]),
        "cancellation_curl": maxima["cancellation_curl"],
        "cancellation_second_order": maxima["cancellation_second_order"],
        "determinant": maxima["determinant"],
    }
    report = ProbeReport(
        experiment="identities",
        parameters={
            "material": m.to_dict() if m is not None else "random",
            "samples": samples,
            "perturbed": perturb is not None,
        },
        residuals={**grouped, **{f"detail_{k}": v for k, v in maxima.items()}},
        flags={f"{k}_ok": v < IDENTITY_RTOL for k, v in grouped.items()},
        provenance={"seed": rng_seed},
    )
    if raise_on_violation and not report.passed:
        worst = max(grouped, key=grouped.get)
        raise IdentityViolation(f"identity '{worst}' residual {grouped[worst]:.3e} exceeds {IDENTITY_RTOL:g}")
    return report
