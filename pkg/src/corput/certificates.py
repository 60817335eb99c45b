"""Decay constants for oscillatory integrals, envelope checks and decay fits.

Four estimates are provided, each of the form |I(omega)| <= C omega^e:

* interior stationary point (p0 in [p1, p2]), e = -mu/rho;
* exterior stationary point, e = -mu/rho, with a smaller constant;
* uniform in p0, e = -mu/rho, with the interior constant;
* no stationary point, e = -mu, with a constant driven by min |psi'|.

For regular amplitudes (mu = 1) each has a sharper variant.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.stats import linregress

from .core import (
    DEFAULT_PROBES,
    PhaseDescriptor,
    PreconditionError,
    SingularAmplitude,
    validate_amplitude,
    validate_phase,
)
from .quadrature import (
    COMPACT_TOL,
    QuadratureResult,
    l1_norm_derivative,
    min_abs_derivative,
    min_abs_nondegenerate,
    oscillatory_integral,
    sup_norm,
)

MIN_FIT_SAMPLES = 8


class Theorem(str, enum.Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"
    UNIFORM = "uniform"
    NONSTATIONARY = "nonstationary"


def _check(mu: float, sup_u: float, l1_du: float, denom: float, refined: bool, what: str) -> None:
    if not 0 < mu <= 1:
        raise PreconditionError(f"mu must lie in (0, 1], got {mu}")
    if refined and mu != 1:
        raise PreconditionError("the sharper constants apply only to regular amplitudes (mu = 1)")
    if sup_u < 0 or l1_du < 0:
        raise PreconditionError("norms must be non-negative")
    if not denom > 0:
        raise PreconditionError(f"{what} must be positive, got {denom}")


def constant_interior(mu: float, sup_u: float, l1_du: float, m: float, refined: bool = False) -> float:
    """Constant for a stationary point inside the band; m = min |psi-tilde|."""
    _check(mu, sup_u, l1_du, m, refined, "m")
    if refined:
        return 2 * sup_u + (6 * sup_u + 2 * l1_du) / m
    return (3 / mu) * sup_u + (8 * sup_u + 2 * l1_du) / m


def constant_exterior(mu: float, sup_u: float, l1_du: float, m: float, refined: bool = False) -> float:
    """Constant for a stationary point outside the band."""
    _check(mu, sup_u, l1_du, m, refined, "m")
    if refined:
        return 2 * sup_u + (3 * sup_u + l1_du) / m
    return (2 / mu) * sup_u + (4 * sup_u + l1_du) / m


def constant_uniform(mu: float, sup_u: float, l1_du: float, m: float, refined: bool = False) -> float:
    """Constant valid wherever the stationary point lies; equals the interior one."""
    return constant_interior(mu, sup_u, l1_du, m, refined)


def constant_nonstationary(
    mu: float, sup_u: float, l1_du: float, min_psi_prime: float, refined: bool = False
) -> float:
    """Constant at rate omega^-mu when psi' does not vanish on the band."""
    _check(mu, sup_u, l1_du, min_psi_prime, refined, "min |psi'|")
    if refined:
        return (3 * sup_u + l1_du) / min_psi_prime
    return (1 / mu) * sup_u + (4 * sup_u + l1_du) / min_psi_prime


_CALCULATORS = {
    Theorem.INTERIOR: constant_interior,
    Theorem.EXTERIOR: constant_exterior,
    Theorem.UNIFORM: constant_uniform,
    Theorem.NONSTATIONARY: constant_nonstationary,
}


@dataclass(frozen=True)
class CertificateInputs:
    mu: float
    rho: Optional[float]
    sup_u: float
    l1_du: float
    m: float


@dataclass(frozen=True)
class BoundCertificate:
    constant: float
    exponent: float
    theorem_id: Theorem
    refined: bool
    inputs: CertificateInputs

    def bound(self, omega):
        return self.constant * np.asarray(omega, dtype=float) ** self.exponent

    @property
    def uniform_in_stationary_point(self) -> bool:
        return self.theorem_id in (Theorem.UNIFORM, Theorem.INTERIOR)


@dataclass(frozen=True)
class BandNorms:
    sup_u: float
    l1_du: float


def amplitude_norms(a: SingularAmplitude, probes: int = DEFAULT_PROBES, tol: float = COMPACT_TOL) -> BandNorms:
    band = (a.p1, a.p2)
    return BandNorms(sup_norm(a.regular_part, band, probes), l1_norm_derivative(a.regular_part, band, tol))


def _make(theorem: Theorem, mu: float, rho: Optional[float], norms: BandNorms, m: float) -> BoundCertificate:
    refined = mu == 1.0
    inputs = CertificateInputs(mu, rho, norms.sup_u, norms.l1_du, m)
    if norms.sup_u == 0 and norms.l1_du == 0:
        constant = 0.0
    else:
        constant = _CALCULATORS[theorem](mu, norms.sup_u, norms.l1_du, m, refined)
    exponent = -mu if theorem is Theorem.NONSTATIONARY else -mu / rho
    return BoundCertificate(constant, exponent, theorem, refined, inputs)


def _prepare(a: SingularAmplitude, ph: PhaseDescriptor, probes: int, validate: bool) -> BandNorms:
    band = (a.p1, a.p2)
    if validate:
        validate_amplitude(a, probes).raise_if_invalid()
        validate_phase(ph, band, probes).raise_if_invalid()
    return amplitude_norms(a, probes)


def uniform_certificate(
    a: SingularAmplitude, ph: PhaseDescriptor, probes: int = DEFAULT_PROBES, validate: bool = True
) -> BoundCertificate:
    """The p0-independent certificate at rate omega^(-mu/rho)."""
    if ph.p0 is None:
        raise PreconditionError("the uniform estimate needs a declared stationary point")
    norms = _prepare(a, ph, probes, validate)
    m = min_abs_nondegenerate(ph, (a.p1, a.p2), probes)
    return _make(Theorem.UNIFORM, a.mu, ph.rho, norms, m)


def certify(
    a: SingularAmplitude, ph: PhaseDescriptor, probes: int = DEFAULT_PROBES, validate: bool = True
) -> tuple[BoundCertificate, ...]:
    """Every estimate that applies to the pair, best-uniform first.

    A stationary point on the closed band (endpoints included) yields the
    interior certificate alone. Outside the band both the uniform and the
    non-stationary certificates are returned; the first keeps its constant
    as p0 approaches the band, the second decays faster but its constant
    blows up. A phase declared without stationary point gets only the
    non-stationary certificate.
    """
    norms = _prepare(a, ph, probes, validate)
    band = (a.p1, a.p2)
    if ph.p0 is None:
        return (_make(Theorem.NONSTATIONARY, a.mu, None, norms, min_abs_derivative(ph, band, probes)),)
    m = min_abs_nondegenerate(ph, band, probes)
    if a.p1 <= ph.p0 <= a.p2:
        return (_make(Theorem.INTERIOR, a.mu, ph.rho, norms, m),)
    return (
        _make(Theorem.UNIFORM, a.mu, ph.rho, norms, m),
        _make(Theorem.NONSTATIONARY, a.mu, ph.rho, norms, min_abs_derivative(ph, band, probes)),
    )


def exterior_certificate(
    a: SingularAmplitude, ph: PhaseDescriptor, probes: int = DEFAULT_PROBES, validate: bool = True
) -> BoundCertificate:
    """The sharper constant for a stationary point strictly outside the band."""
    if ph.p0 is None or a.p1 <= ph.p0 <= a.p2:
        raise PreconditionError("the exterior estimate needs p0 outside [p1, p2]")
    norms = _prepare(a, ph, probes, validate)
    return _make(Theorem.EXTERIOR, a.mu, ph.rho, norms, min_abs_nondegenerate(ph, (a.p1, a.p2), probes))


# ---------------------------------------------------------------------------
# sweeps


def geometric_grid(lo: float, hi: float, points: int) -> np.ndarray:
    if not (lo > 0 and math.isfinite(hi) and hi > lo):
        raise PreconditionError(f"invalid grid: need 0 < min < max, got [{lo}, {hi}]")
    if points < 2:
        raise PreconditionError(f"invalid grid: need at least 2 points, got {points}")
    return np.geomspace(lo, hi, points)


def _check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size == 0 or not np.all(g > 0) or not np.all(np.diff(g) > 0):
        raise PreconditionError("invalid grid: must be positive and strictly increasing")
    return g


@dataclass(frozen=True)
class EnvelopeRow:
    omega: float
    magnitude: float
    quad_err: float
    bound: float
    converged: bool

    @property
    def ratio(self) -> float:
        measured = self.magnitude + self.quad_err
        if self.bound == 0:
            return 0.0 if measured == 0 else math.inf
        return measured / self.bound

    @property
    def violated(self) -> bool:
        return self.magnitude + self.quad_err > self.bound


@dataclass(frozen=True)
class EnvelopeReport:
    rows: tuple[EnvelopeRow, ...]
    sweep: str = ""
    violations: tuple[tuple[float, float, float], ...] = field(init=False)
    flagged: tuple[float, ...] = field(init=False)
    max_ratio: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "violations", tuple((r.omega, r.magnitude, r.bound) for r in self.rows if r.violated)
        )
        object.__setattr__(self, "flagged", tuple(r.omega for r in self.rows if not r.converged))
        object.__setattr__(self, "max_ratio", max((r.ratio for r in self.rows), default=0.0))

    @property
    def ok(self) -> bool:
        return not self.violations


def measure(
    a: SingularAmplitude,
    ph: PhaseDescriptor,
    omegas: Iterable[float],
    tol: float = COMPACT_TOL,
    workers: int = 1,
) -> list[QuadratureResult]:
    omegas = list(omegas)
    if workers <= 1:
        return [oscillatory_integral(a, ph, w, tol) for w in omegas]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda w: oscillatory_integral(a, ph, w, tol), omegas))


def verify_envelope(
    cert: BoundCertificate,
    a: SingularAmplitude,
    ph: PhaseDescriptor,
    omega_grid,
    tol: float = COMPACT_TOL,
    workers: int = 1,
) -> EnvelopeReport:
    """Compare |I(omega)| + quadrature error against the certified bound."""
    grid = _check_grid(omega_grid)
    results = measure(a, ph, grid, tol, workers)
    rows = tuple(
        EnvelopeRow(float(w), abs(r.value), r.abs_error_estimate, float(cert.bound(w)), r.converged)
        for w, r in zip(grid, results)
    )
    sweep = f"{grid.size} omegas in [{grid[0]:.6g}, {grid[-1]:.6g}] against {cert.theorem_id.value}"
    return EnvelopeReport(rows, sweep)


# ---------------------------------------------------------------------------
# decay fits


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    stderr: float
    window: tuple[float, float]
    samples_used: int

    def within(self, target: float, tolerance: float) -> bool:
        return abs(self.slope - target) <= tolerance


def sliding_max(values: np.ndarray, reach: int = 1) -> np.ndarray:
    """Max over each sample and its ``reach`` neighbours on either side."""
    v = np.asarray(values, dtype=float)
    out = v.copy()
    for k in range(1, reach + 1):
        out[k:] = np.maximum(out[k:], v[:-k])
        out[:-k] = np.maximum(out[:-k], v[k:])
    return out


def default_window(xs: np.ndarray) -> tuple[float, float]:
    """Drop the lowest decade when the data spans at least two decades."""
    lo, hi = float(xs[0]), float(xs[-1])
    if hi >= 100 * lo:
        return 10 * lo, hi
    return lo, hi


def fit_decay(samples: Sequence[tuple[float, float]], window: Optional[tuple[float, float]] = None) -> DecayFit:
    """Least-squares slope of log|I| against log omega after a 3-point sliding max."""
    if len(samples) == 0:
        raise PreconditionError("no samples to fit")
    arr = np.asarray(sorted(samples), dtype=float)
    xs, ys = arr[:, 0], np.abs(arr[:, 1])
    if np.any(xs <= 0):
        raise PreconditionError("grid values must be positive")
    env = sliding_max(ys)
    lo, hi = default_window(xs) if window is None else window
    if not lo < hi:
        raise PreconditionError("fit window must be ordered")
    eps = 1e-12 * max(abs(lo), abs(hi))
    keep = (xs >= lo - eps) & (xs <= hi + eps) & (env > 0) & np.isfinite(env)
    used = int(np.count_nonzero(keep))
    if used < MIN_FIT_SAMPLES:
        raise PreconditionError(f"need at least {MIN_FIT_SAMPLES} usable samples in the window, got {used}")
    fit = linregress(np.log(xs[keep]), np.log(env[keep]))
    stderr = float(fit.stderr) if math.isfinite(fit.stderr) else 0.0
    return DecayFit(float(fit.slope), float(fit.intercept), stderr, (float(lo), float(hi)), used)
