"""Named, validated instances of amplitudes, phases, symbols and data.

Every builder checks its result with the matching validator, so an
instance returned by :func:`instantiate` is known to satisfy its
declared assumptions on the probe grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Mapping, Optional

import numpy as np

from .core import (
    LowerEnvelope,
    PhaseDescriptor,
    PreconditionError,
    RealFunctionHandle,
    SingularAmplitude,
    SymbolDescriptor,
    UpperEnvelope,
    validate_amplitude,
    validate_phase,
    validate_symbol,
)
from .dispersive import BandDatum, LineSingularDatum, WeightedDatum, validate_weighted


class CatalogError(KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "catalog error"


KINDS = ("amplitude", "phase", "symbol", "datum")


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: str
    parameters: Mapping[str, float]
    builder: Callable[..., Any]
    description: str

    def build(self, overrides: Optional[Mapping[str, float]] = None) -> Any:
        params = dict(self.parameters)
        for key, val in (overrides or {}).items():
            if key not in params:
                raise CatalogError(f"{self.name}: unknown parameter {key!r}; expected one of {sorted(params)}")
            params[key] = float(val)
        return self.builder(**params)


# ---------------------------------------------------------------------------
# regular parts


class Polynomial:
    """c0 + c1 (p - x0) + c2 (p - x0)^2 as a vectorised callable pair."""

    def __init__(self, x0: float, c0: float, c1: float, c2: float):
        self.x0, self.c = x0, (c0, c1, c2)

    def value(self, p):
        d = np.asarray(p, dtype=float) - self.x0
        return self.c[0] + d * (self.c[1] + d * self.c[2])

    def d1(self, p):
        d = np.asarray(p, dtype=float) - self.x0
        return self.c[1] + 2 * self.c[2] * d + 0 * d

    def d2(self, p):
        return np.full(np.shape(p), 2 * self.c[2])

    def handle(self) -> RealFunctionHandle:
        return RealFunctionHandle(self.value, self.d1, self.d2)


class Bump:
    """(1 + (p - x0)^2)^(-alpha/2)."""

    def __init__(self, x0: float, alpha: float):
        self.x0, self.alpha = x0, alpha

    def value(self, p):
        d = np.asarray(p, dtype=float) - self.x0
        return (1 + d * d) ** (-self.alpha / 2)

    def d1(self, p):
        d = np.asarray(p, dtype=float) - self.x0
        return -self.alpha * d * (1 + d * d) ** (-self.alpha / 2 - 1)

    def d2(self, p):
        d = np.asarray(p, dtype=float) - self.x0
        a = self.alpha
        return a * (1 + d * d) ** (-a / 2 - 2) * ((a + 1) * d * d - 1)

    def handle(self) -> RealFunctionHandle:
        return RealFunctionHandle(self.value, self.d1, self.d2)


def _checked(report, what: str):
    if not report.ok:
        raise PreconditionError(f"catalog {what} failed validation: {report}")


# ---------------------------------------------------------------------------
# amplitudes


def power_singular_amplitude(p1: float, p2: float, mu: float, c0: float, c1: float, c2: float) -> SingularAmplitude:
    a = SingularAmplitude(p1, p2, mu, Polynomial(p1, c0, c1, c2).handle())
    _checked(validate_amplitude(a), "amplitude")
    return a


def vanishing_edge_amplitude(p1: float, p2: float, mu: float, scale: float) -> SingularAmplitude:
    width = p2 - p1
    if not width > 0:
        raise PreconditionError("need p1 < p2")
    # scale * (p2 - p) / (p2 - p1), written around p1
    poly = Polynomial(p1, scale, -scale / width, 0.0)
    a = SingularAmplitude(p1, p2, mu, poly.handle())
    _checked(validate_amplitude(a), "amplitude")
    return a


def zero_amplitude(p1: float, p2: float, mu: float) -> SingularAmplitude:
    return SingularAmplitude(p1, p2, mu, Polynomial(p1, 0.0, 0.0, 0.0).handle())


# ---------------------------------------------------------------------------
# phases


class _Quadratic:
    def __init__(self, p0: float, c: float):
        self.p0, self.c = p0, c

    def value(self, p):
        p = np.asarray(p, dtype=float)
        return self.c * p * p - 2 * self.c * self.p0 * p

    def d1(self, p):
        return 2 * self.c * (np.asarray(p, dtype=float) - self.p0)

    def d2(self, p):
        return np.full(np.shape(p), 2 * self.c)

    def nondegenerate(self, p):
        return 2 * self.c * np.where(np.asarray(p, dtype=float) >= self.p0, 1.0, -1.0)


class _Power:
    """psi'(p) = scale |p - p0|^alpha."""

    def __init__(self, p0: float, alpha: float, scale: float):
        self.p0, self.alpha, self.scale = p0, alpha, scale

    def value(self, p):
        d = np.asarray(p, dtype=float) - self.p0
        return self.scale * np.sign(d) * np.abs(d) ** (self.alpha + 1) / (self.alpha + 1)

    def d1(self, p):
        d = np.asarray(p, dtype=float) - self.p0
        return self.scale * np.abs(d) ** self.alpha

    def d2(self, p):
        d = np.asarray(p, dtype=float) - self.p0
        return self.scale * self.alpha * np.sign(d) * np.abs(d) ** (self.alpha - 1)

    def nondegenerate(self, p):
        return np.full(np.shape(p), self.scale)


class _Cubic:
    def __init__(self, p0: float, scale: float):
        self.p0, self.scale = p0, scale

    def value(self, p):
        return self.scale * (np.asarray(p, dtype=float) - self.p0) ** 3

    def d1(self, p):
        return 3 * self.scale * (np.asarray(p, dtype=float) - self.p0) ** 2

    def d2(self, p):
        return 6 * self.scale * (np.asarray(p, dtype=float) - self.p0)

    def nondegenerate(self, p):
        return np.full(np.shape(p), 3 * self.scale)


class _Linear:
    def __init__(self, slope: float):
        self.slope = slope

    def value(self, p):
        return self.slope * np.asarray(p, dtype=float)

    def d1(self, p):
        return np.full(np.shape(p), self.slope)

    def d2(self, p):
        return np.zeros(np.shape(p))


def _phase(obj, p0: Optional[float], rho: float, check_band: tuple[float, float]) -> PhaseDescriptor:
    nd = obj.nondegenerate if p0 is not None else obj.d1
    ph = PhaseDescriptor(RealFunctionHandle(obj.value, obj.d1, obj.d2), p0, rho, nd)
    _checked(validate_phase(ph, check_band), "phase")
    return ph


def quadratic_phase(p0: float, curvature: float) -> PhaseDescriptor:
    """psi(p) = c p^2 - 2 c p0 p; with c = -1 this is v p - p^2 at v = 2 p0."""
    if curvature == 0:
        raise PreconditionError("curvature must be non-zero")
    return _phase(_Quadratic(p0, curvature), p0, 2.0, (p0 - 1, p0 + 1))


def power_phase(alpha: float, p0: float, scale: float) -> PhaseDescriptor:
    """psi'(p) = scale |p - p0|^alpha, a stationary point of order alpha."""
    if not alpha >= 1:
        raise PreconditionError(f"alpha must be at least 1 for a C^2 phase, got {alpha}")
    if scale == 0:
        raise PreconditionError("scale must be non-zero")
    return _phase(_Power(p0, alpha, scale), p0, alpha + 1, (p0 - 1, p0 + 1))


def cubic_phase(p0: float, scale: float) -> PhaseDescriptor:
    """psi(p) = scale (p - p0)^3."""
    if scale == 0:
        raise PreconditionError("scale must be non-zero")
    return _phase(_Cubic(p0, scale), p0, 3.0, (p0 - 1, p0 + 1))


def linear_phase(slope: float) -> PhaseDescriptor:
    """psi(p) = slope p, no stationary point."""
    if slope == 0:
        raise PreconditionError("slope must be non-zero")
    return _phase(_Linear(slope), None, 2.0, (0.0, 1.0))


# ---------------------------------------------------------------------------
# symbols


class _Square:
    def value(self, p):
        p = np.asarray(p, dtype=float)
        return p * p

    def d1(self, p):
        return 2 * np.asarray(p, dtype=float)

    def d2(self, p):
        return np.full(np.shape(p), 2.0)


class _HalfKleinGordon:
    def value(self, p):
        return np.sqrt(1 + np.asarray(p, dtype=float) ** 2)

    def d1(self, p):
        p = np.asarray(p, dtype=float)
        return p / np.sqrt(1 + p * p)

    def d2(self, p):
        return (1 + np.asarray(p, dtype=float) ** 2) ** -1.5

    # cancellation-free distances to the asymptotic velocities -1 and 1
    def lower_gap(self, p):
        p = np.asarray(p, dtype=float)
        s = np.sqrt(1 + p * p)
        neg = np.minimum(p, 0.0)
        return np.where(p >= 0, (s + np.maximum(p, 0.0)) / s, 1 / (s * (s - neg)))

    def upper_gap(self, p):
        p = np.asarray(p, dtype=float)
        s = np.sqrt(1 + p * p)
        pos = np.maximum(p, 0.0)
        return np.where(p <= 0, (s - np.minimum(p, 0.0)) / s, 1 / (s * (s + pos)))


def schrodinger_symbol() -> SymbolDescriptor:
    sq = _Square()
    s = SymbolDescriptor(RealFunctionHandle(sq.value, sq.d1, sq.d2), convexity_floor=2.0, name="schrodinger")
    _checked(validate_symbol(s), "symbol")
    return s


def half_klein_gordon_symbol() -> SymbolDescriptor:
    """f(p) = sqrt(1 + p^2); f'' = (1+p^2)^(-3/2) lies between 2^(-3/2)|p|^-3 and |p|^-3 for |p| >= 1."""
    kg = _HalfKleinGordon()
    s = SymbolDescriptor(
        RealFunctionHandle(kg.value, kg.d1, kg.d2),
        lower_envelope=LowerEnvelope(R=1.0, c=2**-1.5, beta=3.0),
        upper_envelope=UpperEnvelope(c_plus=1.0, beta_plus=3.0),
        asymptotic_velocities=(-1.0, 1.0),
        gap_to_lower=kg.lower_gap,
        gap_to_upper=kg.upper_gap,
        name="half_klein_gordon",
    )
    _checked(validate_symbol(s), "symbol")
    return s


# ---------------------------------------------------------------------------
# data


def band_datum(p1: float, p2: float, mu: float, c0: float, c1: float, c2: float) -> BandDatum:
    return BandDatum(power_singular_amplitude(p1, p2, mu, c0, c1, c2))


def vanishing_edge_datum(p1: float, p2: float, mu: float, scale: float) -> BandDatum:
    return BandDatum(vanishing_edge_amplitude(p1, p2, mu, scale))


def weighted_datum(mu: float, alpha: float) -> WeightedDatum:
    """F(p) = |p|^(mu-1) (1+p^2)^(-alpha/2) with r = 2, M = 1 and M' = 2^alpha."""
    d = WeightedDatum(mu, alpha, 2.0, 1.0, 2.0**alpha, Bump(0.0, alpha).handle())
    _checked(validate_weighted(d), "datum")
    return d


def line_singular_datum(p1: float, mu: float, alpha: float) -> LineSingularDatum:
    """F(p) = |p - p1|^(mu-1) (1+(p-p1)^2)^(-alpha/2); sup u = 1 and total variation 2."""
    if not alpha > 0:
        raise PreconditionError("alpha must be positive")
    return LineSingularDatum(p1, mu, Bump(p1, alpha).handle(), 1.0, alpha, sup_u=1.0, l1_du=2.0)


_BAND = {"p1": 0.0, "p2": 1.0, "mu": 0.5, "c0": 1.0, "c1": 0.0, "c2": 0.0}

_ENTRIES = [
    CatalogEntry("power_singular_amplitude", "amplitude", _BAND, power_singular_amplitude,
                 "(p-p1)^(mu-1) (c0 + c1 (p-p1) + c2 (p-p1)^2) on [p1, p2]"),
    CatalogEntry("vanishing_edge_amplitude", "amplitude", {"p1": 0.0, "p2": 1.0, "mu": 0.5, "scale": 1.0},
                 vanishing_edge_amplitude, "(p-p1)^(mu-1) scale (p2-p)/(p2-p1), vanishing at p2"),
    CatalogEntry("zero_amplitude", "amplitude", {"p1": 0.0, "p2": 1.0, "mu": 1.0}, zero_amplitude,
                 "identically zero amplitude"),
    CatalogEntry("quadratic_phase", "phase", {"p0": 0.0, "curvature": -1.0}, quadratic_phase,
                 "c p^2 - 2 c p0 p, stationary at p0, rho = 2"),
    CatalogEntry("power_phase", "phase", {"alpha": 1.5, "p0": 0.0, "scale": 1.0}, power_phase,
                 "psi' = scale |p-p0|^alpha, rho = alpha + 1 (alpha >= 1)"),
    CatalogEntry("cubic_phase", "phase", {"p0": 0.0, "scale": 1.0}, cubic_phase,
                 "scale (p-p0)^3, rho = 3"),
    CatalogEntry("linear_phase", "phase", {"slope": 1.0}, linear_phase, "slope p, no stationary point"),
    CatalogEntry("schrodinger_symbol", "symbol", {}, schrodinger_symbol, "f = p^2, f'' = 2"),
    CatalogEntry("half_klein_gordon_symbol", "symbol", {}, half_klein_gordon_symbol,
                 "f = sqrt(1+p^2), bounded velocities (-1, 1)"),
    CatalogEntry("band_datum", "datum", _BAND, band_datum, "band-limited datum with the power-singular amplitude"),
    CatalogEntry("vanishing_edge_datum", "datum", {"p1": 0.0, "p2": 1.0, "mu": 0.5, "scale": 1.0},
                 vanishing_edge_datum, "band-limited datum vanishing at p2"),
    CatalogEntry("weighted_datum", "datum", {"mu": 0.5, "alpha": 4.0}, weighted_datum,
                 "|p|^(mu-1) (1+p^2)^(-alpha/2) on the line"),
    CatalogEntry("line_singular_datum", "datum", {"p1": 0.0, "mu": 0.5, "alpha": 4.0}, line_singular_datum,
                 "|p-p1|^(mu-1) (1+(p-p1)^2)^(-alpha/2) on the line"),
]

CATALOG: dict[str, CatalogEntry] = {e.name: e for e in _ENTRIES}


def list_catalog(kind: Optional[str] = None) -> list[CatalogEntry]:
    if kind is not None and kind not in KINDS:
        raise CatalogError(f"unknown kind {kind!r}")
    return [e for e in _ENTRIES if kind is None or e.kind == kind]


def instantiate(name: str, parameters: Optional[Mapping[str, float]] = None) -> Any:
    try:
        entry = CATALOG[name]
    except KeyError:
        raise CatalogError(f"unknown catalog name {name!r}; known: {', '.join(CATALOG)}") from None
    return entry.build(parameters)
