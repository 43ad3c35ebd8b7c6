"""Material parameters, reduction to the normalized case and exponent admissibility."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import NotFullyAnisotropic, ValidationError

RATIO_RTOL = 1e-12


@dataclass(frozen=True)
class MaterialTensors:
    """Diagonal permittivity and permeability together with the frequency."""

    eps: tuple[float, float, float]
    mu: tuple[float, float, float] = (1.0, 1.0, 1.0)
    omega: float = 1.0

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps)
        mu = tuple(float(m) for m in self.mu)
        if len(eps) != 3 or len(mu) != 3:
            raise ValidationError("eps and mu need exactly three entries each")
        if not all(np.isfinite(eps + mu)) or min(eps + mu) <= 0:
            raise ValidationError(f"material entries must be positive and finite, got eps={eps} mu={mu}")
        omega = float(self.omega)
        if not np.isfinite(omega) or omega == 0:
            raise ValidationError("omega must be a nonzero finite real")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "omega", omega)

    @property
    def eps_arr(self) -> np.ndarray:
        return np.array(self.eps)

    @property
    def mu_arr(self) -> np.ndarray:
        return np.array(self.mu)

    @property
    def eps_prod(self) -> float:
        return float(np.prod(self.eps))

    @property
    def mu_prod(self) -> float:
        return float(np.prod(self.mu))

    def sampling_radius(self) -> float:
        """Radius of the ball used for random frequency samples."""
        return 3.0 * abs(self.omega) * np.sqrt(max(self.eps) * max(self.mu))

    def permuted(self, perm: Sequence[int]) -> "MaterialTensors":
        perm = list(perm)
        return MaterialTensors(tuple(self.eps[i] for i in perm), tuple(self.mu[i] for i in perm), self.omega)

    def to_dict(self) -> dict:
        return {"eps": list(self.eps), "mu": list(self.mu), "omega": self.omega}

    @classmethod
    def from_dict(cls, data: dict) -> "MaterialTensors":
        try:
            return cls(tuple(data["eps"]), tuple(data.get("mu", (1, 1, 1))), data.get("omega", 1.0))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"material config needs eps:[3], mu:[3], omega: {exc}") from exc

    @classmethod
    def from_json(cls, path: str | Path) -> "MaterialTensors":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read material config {path}: {exc}") from exc
        return cls.from_dict(data.get("material", data))

    @classmethod
    def from_flags(cls, eps: str, mu: str = "1,1,1", omega: str | float = 1.0) -> "MaterialTensors":
        return cls(parse_triple(eps, "eps"), parse_triple(mu, "mu"), _parse_float(omega, "omega"))


def _parse_float(text, name):
    try:
        return float(text)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"cannot parse {name}={text!r} as a real number") from exc


def parse_triple(text: str, name: str = "value") -> tuple[float, float, float]:
    """Parse ``"a,b,c"`` into three floats."""
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 3 or any(p == "" for p in parts):
        raise ValidationError(f"{name} must be three comma-separated numbers, got {text!r}")
    return tuple(_parse_float(p, name) for p in parts)


class AnisotropyClass(enum.Enum):
    FULL = "Full"
    PARTIAL = "Partial"
    ISOTROPIC = "Isotropic"


def _ratios_equal(a: float, b: float) -> bool:
    return abs(a - b) <= RATIO_RTOL * max(abs(a), abs(b))


def classify_anisotropy(m: MaterialTensors) -> AnisotropyClass:
    r = [e / u for e, u in zip(m.eps, m.mu)]
    ties = sum(_ratios_equal(r[i], r[j]) for i, j in ((0, 1), (0, 2), (1, 2)))
    if ties == 0:
        return AnisotropyClass.FULL
    if ties == 3 or (_ratios_equal(r[0], r[1]) and _ratios_equal(r[1], r[2])):
        return AnisotropyClass.ISOTROPIC
    return AnisotropyClass.PARTIAL


@dataclass(frozen=True)
class NormalizedMaterial:
    """Permittivities after rescaling to unit permeability and frequency.

    ``coordinate_scale[i]`` is the factor with ``xi_i = coordinate_scale[i] * eta_i``.
    """

    eps_star: tuple[float, float, float]
    coordinate_scale: tuple[float, float, float] = (1.0, 1.0, 1.0)
    omega: float = 1.0

    def __post_init__(self):
        es = tuple(float(e) for e in self.eps_star)
        if min(es) <= 0:
            raise ValidationError("normalized permittivities must be positive")
        for i, j in ((0, 1), (0, 2), (1, 2)):
            if _ratios_equal(es[i], es[j]):
                raise NotFullyAnisotropic(f"normalized permittivities not pairwise distinct: {es}")
        object.__setattr__(self, "eps_star", es)
        object.__setattr__(self, "coordinate_scale", tuple(float(c) for c in self.coordinate_scale))

    @property
    def eps(self) -> np.ndarray:
        return np.array(self.eps_star)

    def to_eta(self, xi: np.ndarray) -> np.ndarray:
        return np.asarray(xi, dtype=float) / np.array(self.coordinate_scale)

    def to_xi(self, eta: np.ndarray) -> np.ndarray:
        return np.asarray(eta, dtype=float) * np.array(self.coordinate_scale)

    def as_material(self) -> MaterialTensors:
        return MaterialTensors(self.eps_star, (1.0, 1.0, 1.0), 1.0)


def normalize(m: MaterialTensors) -> NormalizedMaterial:
    """Reduce to unit permeability and frequency.

    The coordinate change eta_i = xi_i / (omega sqrt(mu_{i+1} mu_{i+2})) with
    eps*_i = eps_i / mu_i turns the quartic factor
    omega^4 - omega^2 q0 + q1 into omega^4 N(eta), so p(omega, xi) = -omega^6 N(eta).
    """
    if classify_anisotropy(m) is not AnisotropyClass.FULL:
        raise NotFullyAnisotropic(f"ratios eps/mu not pairwise distinct for {m}")
    mu = m.mu
    scale = tuple(abs(m.omega) * np.sqrt(mu[(i + 1) % 3] * mu[(i + 2) % 3]) for i in range(3))
    eps_star = tuple(e / u for e, u in zip(m.eps, mu))
    return NormalizedMaterial(eps_star, scale, m.omega)


def normalized_symbol(eps_star, eta: np.ndarray) -> np.ndarray:
    """N(eta) = 1 - q0*(eta) + q1*(eta) for unit permeability and frequency."""
    e = np.asarray(eps_star, dtype=float)
    eta = np.asarray(eta, dtype=float)
    sq = eta**2
    q0 = sq[..., 0] * (1 / e[1] + 1 / e[2]) + sq[..., 1] * (1 / e[0] + 1 / e[2]) + sq[..., 2] * (1 / e[0] + 1 / e[1])
    q1 = (sq @ e) * sq.sum(axis=-1) / np.prod(e)
    return 1.0 - q0 + q1


# ---------------------------------------------------------------- exponents


class _Infinity:
    """Symbolic infinite Lebesgue exponent; its reciprocal is exactly zero."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


def as_exponent(value) -> Fraction | _Infinity:
    """Convert user input to an exact exponent; ``inf``/``"inf"``/INF map to INF."""
    if value is INF:
        return INF
    if isinstance(value, str) and value.strip().lower() in {"inf", "infinity", "∞"}:
        return INF
    if isinstance(value, float) and np.isinf(value):
        return INF
    try:
        # decimal text is taken at face value so that 1.2 means 6/5
        frac = Fraction(str(value)) if not isinstance(value, Fraction) else value
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"cannot parse exponent {value!r}") from exc
    if frac < 1:
        raise ValidationError(f"Lebesgue exponent must lie in [1, inf], got {value!r}")
    return frac


def reciprocal(p) -> Fraction:
    p = as_exponent(p)
    return Fraction(0) if p is INF else 1 / p


@dataclass(frozen=True)
class ExponentTriple:
    p1: object
    p2: object
    q: object

    def __post_init__(self):
        for name in ("p1", "p2", "q"):
            object.__setattr__(self, name, as_exponent(getattr(self, name)))


@dataclass
class AdmissibilityReport:
    conditions: dict[str, bool] = field(default_factory=dict)

    @property
    def admissible(self) -> bool:
        return all(self.conditions.values())

    def to_dict(self) -> dict:
        return {"conditions": dict(self.conditions), "admissible": self.admissible}


EXCLUDED_PAIRS = ((Fraction(1), Fraction(1)), (Fraction(3), INF), (INF, INF))


def validate_exponents(t: ExponentTriple) -> AdmissibilityReport:
    a1, a2, b = reciprocal(t.p1), reciprocal(t.p2), reciprocal(t.q)
    pair = (t.p2, t.q)
    return AdmissibilityReport(
        {
            "inv_p1_gt_3_4": a1 > Fraction(3, 4),
            "inv_q_lt_1_4": b < Fraction(1, 4),
            "gap_p1_q_ge_2_3": a1 - b >= Fraction(2, 3),
            "gap_p2_q_in_0_1_3": Fraction(0) <= a2 - b <= Fraction(1, 3),
            "pair_p2_q_not_excluded": pair not in EXCLUDED_PAIRS,
        }
    )
