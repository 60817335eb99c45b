"""Fourier-multiplier evolution and its pointwise decay constants.

The solution of i u_t = f(D) u is

    u(t, x) = (1/2 pi) * integral of F(p) exp(i t psi(p)) dp,
    psi(p) = (x/t) p - f(p),

with F the Fourier transform of the initial datum. Three kinds of data
are supported:

* :class:`BandDatum`: F supported on a compact band, singular at its left end;
* :class:`LineSingularDatum`: F(p) = |p - p1|^(mu-1) u(p) on the whole line;
* :class:`WeightedDatum`: as above with p1 = 0 and power weights on u and u'.

Each constant set records which (t, x) region it applies to and at which
power of t.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .certificates import DecayFit, fit_decay
from .core import (
    DEFAULT_PROBES,
    LineAmplitude,
    PhaseDescriptor,
    PreconditionError,
    RealFunctionHandle,
    SingularAmplitude,
    SpaceTimeCone,
    SymbolDescriptor,
    ValidationReport,
    Violation,
    reflect_band,
)
from .quadrature import (
    COMPACT_TOL,
    LINE_TOL,
    QuadratureResult,
    l1_norm_derivative,
    oscillatory_integral,
    oscillatory_integral_line,
    refined_minimum,
    sup_norm,
)

TWO_PI = 2.0 * math.pi
DEFAULT_CLIP = 5.0
NORM_WINDOW = 1000.0


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class BandDatum:
    """F = U on [p1, p2] and zero elsewhere."""

    amplitude: SingularAmplitude

    def __post_init__(self):
        if self.amplitude.side != "left":
            raise PreconditionError("band data are stored in left-singular form; reflect first")

    @property
    def mu(self) -> float:
        return self.amplitude.mu

    @property
    def band(self) -> tuple[float, float]:
        return self.amplitude.p1, self.amplitude.p2


@dataclass(frozen=True)
class LineSingularDatum:
    """F(p) = |p - p1|^(mu-1) u(p) with |F(p)| <= tail_M |p - p1|^(mu-1-tail_alpha).

    ``sup_u`` and ``l1_du`` are the norms of u and u' over the whole line.
    Left as ``None`` they are measured on a window of half-width 1000.
    """

    p1: float
    mu: float
    regular_part: RealFunctionHandle
    tail_M: float
    tail_alpha: float
    sup_u: Optional[float] = None
    l1_du: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.mu <= 1:
            raise PreconditionError(f"mu must lie in (0, 1], got {self.mu}")
        if not self.tail_alpha > self.mu:
            raise PreconditionError("non-integrable datum: need tail_alpha > mu")

    def amplitude(self) -> LineAmplitude:
        return LineAmplitude(self.p1, self.mu, self.regular_part, self.tail_M, self.tail_alpha)

    def line_norms(self) -> tuple[float, float]:
        window = (self.p1 - NORM_WINDOW, self.p1 + NORM_WINDOW)
        s = self.sup_u if self.sup_u is not None else sup_norm(self.regular_part, window, 4097)
        l1 = self.l1_du if self.l1_du is not None else l1_norm_derivative(self.regular_part, window, 1e-10)
        return s, l1


@dataclass(frozen=True)
class WeightedDatum:
    """F(p) = |p|^(mu-1) u(p) with |u(p)| <= M (1+p^2)^(-alpha/2)
    and ||u'||_{L1(n, n+1)} <= M' |n|^-alpha for |n| >= r."""

    mu: float
    alpha: float
    r: float
    M: float
    M_prime: float
    regular_part: RealFunctionHandle

    def __post_init__(self):
        if not 0 < self.mu <= 1:
            raise PreconditionError(f"mu must lie in (0, 1], got {self.mu}")
        if not self.alpha > self.mu:
            raise PreconditionError("non-integrable datum: need alpha > mu")
        if self.r <= 0 or self.M < 0 or self.M_prime < 0:
            raise PreconditionError("need r > 0 and non-negative M, M'")

    @property
    def p1(self) -> float:
        return 0.0

    def amplitude(self) -> LineAmplitude:
        return LineAmplitude(0.0, self.mu, self.regular_part, self.M, self.alpha)

    def density(self, p):
        p = np.asarray(p, dtype=float)
        return np.abs(p) ** (self.mu - 1.0) * self.regular_part(p)

    def density_derivative(self, p):
        return self.amplitude().derivative(p)


Datum = Union[BandDatum, LineSingularDatum, WeightedDatum]


def validate_weighted(d: WeightedDatum, window: float = 50.0, probes: int = DEFAULT_PROBES) -> ValidationReport:
    from .core import probe_grid

    found: list[Violation] = []
    grid = probe_grid(-window, window, probes)
    u = np.abs(np.asarray(d.regular_part(grid)))
    env = d.M * (1 + grid**2) ** (-d.alpha / 2)
    over = u > env * (1 + 1e-12) + 1e-300
    if over.any():
        j = int(np.argmax(np.where(over, u - env, -np.inf)))
        found.append(Violation("weight envelope on u violated", float(grid[j]), float(u[j] - env[j])))
    for n in range(-int(window), int(window)):
        if abs(n) < d.r:
            continue
        l1 = l1_norm_derivative(d.regular_part, (n, n + 1), 1e-12)
        cap = d.M_prime * abs(n) ** (-d.alpha)
        if l1 > cap * (1 + 1e-9):
            found.append(Violation("derivative weight violated", float(n), l1 - cap))
            break
    return ValidationReport("weighted datum", tuple(found))


# ---------------------------------------------------------------------------
# solution


class _RayPhase:
    def __init__(self, s: SymbolDescriptor, v: float):
        self.f = s.f
        self.v = v

    def value(self, p):
        return self.v * p - self.f(p)

    def d1(self, p):
        return self.v - self.f.d1(p)

    def d2(self, p):
        return -self.f.d2(p)


class _RayNondegenerate:
    def __init__(self, s: SymbolDescriptor, v: float, p0: float):
        self.f = s.f
        self.v = v
        self.p0 = p0
        self.at_p0 = -float(s.f.d2(np.array([p0]))[0])

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        d = np.abs(p - self.p0)
        safe = np.where(d > 0, d, 1.0)
        return np.where(d > 0, (self.v - self.f.d1(p)) / safe, self.at_p0)


def stationary_point(s: SymbolDescriptor, v: float, limit: float = 1e8) -> Optional[float]:
    """The p with f'(p) = v, or None when v lies outside the range of f'."""
    if s.asymptotic_velocities is not None:
        a, b = s.asymptotic_velocities
        if not a < v < b:
            return None

    def g(p):
        return float(s.f.d1(np.array([p]))[0]) - v

    lo, hi = -1.0, 1.0
    while g(lo) > 0:
        lo *= 2
        if lo < -limit:
            return None
    while g(hi) < 0:
        hi *= 2
        if hi > limit:
            return None
    if g(lo) == 0:
        return lo
    if g(hi) == 0:
        return hi
    return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def ray_phase(s: SymbolDescriptor, v: float) -> PhaseDescriptor:
    """psi(p) = v p - f(p), the phase seen along x = v t."""
    rp = _RayPhase(s, v)
    handle = RealFunctionHandle(rp.value, rp.d1, rp.d2, s.f.domain)
    p0 = stationary_point(s, v)
    if p0 is None:
        return PhaseDescriptor(handle, None, 2.0, rp.d1)
    return PhaseDescriptor(handle, p0, 2.0, _RayNondegenerate(s, v, p0))


def solution_result(d: Datum, s: SymbolDescriptor, t: float, x: float, tol: Optional[float] = None) -> QuadratureResult:
    """u(t, x) with an error estimate; the 1/(2 pi) factor is included."""
    if not t > 0:
        raise PreconditionError(f"t must be positive, got {t}")
    ph = ray_phase(s, x / t)
    if isinstance(d, BandDatum):
        tol = COMPACT_TOL if tol is None else tol
        res = oscillatory_integral(d.amplitude, ph, t, tol * TWO_PI)
    else:
        tol = LINE_TOL if tol is None else tol
        res = oscillatory_integral_line(d.amplitude(), ph, t, tol * TWO_PI)
    return res.scaled(1.0 / TWO_PI)


def solution_value(d: Datum, s: SymbolDescriptor, t: float, x: float, tol: Optional[float] = None) -> complex:
    res = solution_result(d, s, t, x, tol)
    if not res.converged:
        warnings.warn(f"u({t}, {x}) did not converge", RuntimeWarning, stacklevel=2)
    return res.value


# ---------------------------------------------------------------------------
# constant sets


@dataclass(frozen=True)
class ConeConstantSet:
    """Named constants c_k with exponents e_k; the bound is sum c_k t^e_k.

    ``regions`` tags each constant with where it applies: "inside" or
    "outside" the cone, or "global".
    """

    theorem_id: str
    constants: dict
    exponents: dict
    regions: dict
    cone: Optional[SpaceTimeCone] = None
    method: str = ""
    notes: dict = field(default_factory=dict)

    def bound(self, t, region: Optional[str] = None):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise PreconditionError("t must be positive")
        total = np.zeros_like(t)
        for name, c in self.constants.items():
            if region is None or self.regions[name] == region:
                total = total + c * t ** self.exponents[name]
        return total

    def applies(self, t, x) -> np.ndarray:
        """Whether the whole bound applies at (t, x)."""
        kinds = set(self.regions.values())
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        if kinds == {"global"}:
            return t > 0
        if kinds == {"inside"}:
            return self.cone.contains(t, x)
        if kinds == {"outside"}:
            return self.cone.complement_contains(t, x)
        raise PreconditionError("mixed regions; use region_bound")

    def region_bound(self, t: float, x: float) -> float:
        """The bound valid at one point, picking inside/outside terms."""
        kinds = set(self.regions.values())
        if kinds == {"inside", "outside"}:
            inside = bool(self.cone.contains(t, x))
            return float(self.bound(t, "inside" if inside else "outside"))
        if not bool(self.applies(t, x)):
            raise PreconditionError(f"({t}, {x}) lies outside the region of this estimate")
        return float(self.bound(t))


def cone_of_band(s: SymbolDescriptor, q1: float, q2: float) -> SpaceTimeCone:
    """The velocity cone (f'(q1), f'(q2))."""
    if not q1 < q2:
        raise PreconditionError(f"need q1 < q2, got ({q1}, {q2})")
    return SpaceTimeCone(float(s.f.d1(np.array([q1]))[0]), float(s.f.d1(np.array([q2]))[0]))


def _min_curvature(s: SymbolDescriptor, lo: float, hi: float) -> float:
    m = refined_minimum(s.f.d2, (lo, hi))
    if not m > 0:
        raise PreconditionError(f"f'' is not positive on [{lo}, {hi}]")
    return m


def _norms(u: RealFunctionHandle, lo: float, hi: float) -> tuple[float, float]:
    return sup_norm(u, (lo, hi)), l1_norm_derivative(u, (lo, hi))


def _gap(s: SymbolDescriptor, lo: float, hi: float) -> float:
    g = s.velocity_gap(lo, hi)
    if not g > 0:
        raise PreconditionError(f"f'({hi}) - f'({lo}) must be positive")
    return g


def band_constants(d: BandDatum, s: SymbolDescriptor, q1: float, q2: float) -> ConeConstantSet:
    """Inside the band cone at t^(-mu/2), outside it at t^-mu."""
    p1, p2 = d.band
    if not (q1 < p1 and p2 < q2):
        raise PreconditionError(f"band [{p1}, {p2}] must lie strictly inside ({q1}, {q2})")
    mu = d.mu
    S, L = _norms(d.amplitude.regular_part, p1, p2)
    m = _min_curvature(s, p1, p2)
    m_right = _gap(s, p2, q2)
    m_left = _gap(s, q1, p1)
    if S == 0 and L == 0:
        c_in = c_out = 0.0
    else:
        c_in = (3 / (TWO_PI * mu)) * S + (4 * S + L) / (math.pi * m)
        c_out = sum(S / (TWO_PI * mu) + (4 * S + L) / (TWO_PI * g) for g in (m_left, m_right))
    return ConeConstantSet(
        "band_cone",
        {"c_inside": c_in, "c_outside": c_out},
        {"c_inside": -mu / 2, "c_outside": -mu},
        {"c_inside": "inside", "c_outside": "outside"},
        cone_of_band(s, q1, q2),
        "band",
        {"sup_u": S, "l1_du": L, "min_curvature": m, "gap_left": m_left, "gap_right": m_right},
    )


def linfty_band_bound(d: BandDatum, s: SymbolDescriptor, q1: float, q2: float, t: float, merged: bool = False) -> float:
    """sup_x |u(t, x)| <= c_inside t^(-mu/2) + c_outside t^-mu.

    ``merged=True`` gives (c_inside + c_outside) t^(-mu/2), valid for t >= 1.
    """
    if not t > 0:
        raise PreconditionError("t must be positive")
    cs = band_constants(d, s, q1, q2)
    ci, co = cs.constants["c_inside"], cs.constants["c_outside"]
    if merged:
        if t < 1:
            raise PreconditionError("the merged form needs t >= 1")
        return (ci + co) * t ** (-d.mu / 2)
    return ci * t ** (-d.mu / 2) + co * t ** (-d.mu)


def narrow_cone_constants(d: LineSingularDatum, s: SymbolDescriptor, eta: float, eps: float) -> ConeConstantSet:
    """Bound on the thin cone (f'(p1 - eps), f'(p1 + eps)) around the singular frequency."""
    if not (eta > eps > 0):
        raise PreconditionError(f"need eta > eps > 0, got eta={eta}, eps={eps}")
    mu, p1 = d.mu, d.p1
    right = SingularAmplitude(p1, p1 + eta, mu, d.regular_part, side="left")
    left_raw = SingularAmplitude(p1 - eta, p1, mu, d.regular_part, side="right")
    # the left piece is singular at its right end; mirror it into canonical form
    left, _ = reflect_band(left_raw, ray_phase(s, float(s.f.d1(np.array([p1]))[0])))
    pieces = []
    for amp, lo, hi in ((left, p1 - eta, p1), (right, p1, p1 + eta)):
        S, L = _norms(amp.regular_part, amp.p1, amp.p2)
        pieces.append((S, L, _min_curvature(s, lo, hi)))
    S_line, L_line = d.line_norms()
    gap_right = _gap(s, p1 + eps, p1 + eta)
    gap_left = _gap(s, p1 - eta, p1 - eps)
    if S_line == 0 and L_line == 0:
        c1 = c2 = 0.0
    else:
        c1 = sum((3 / (TWO_PI * mu)) * S + (4 * S + L) / (math.pi * m) for S, L, m in pieces)
        c2 = sum(eta ** (mu - 1) * (4 * S_line + L_line) / (TWO_PI * g) for g in (gap_right, gap_left))
    return ConeConstantSet(
        "narrow_cone",
        {"c1": c1, "c2": c2},
        {"c1": -mu / 2, "c2": -1.0},
        {"c1": "inside", "c2": "inside"},
        cone_of_band(s, p1 - eps, p1 + eps),
        "split at p1 +- eta",
        {"eta": eta, "eps": eps, "gap_left": gap_left, "gap_right": gap_right},
    )


def default_offcone_eta(p1: float, q1: float, q2: float) -> float:
    """Half the distance from p1 to [q1, q2]."""
    return 0.5 * (q1 - p1 if p1 < q1 else p1 - q2)


def offcone_constants(
    d: LineSingularDatum, s: SymbolDescriptor, q1: float, q2: float, eta: Optional[float] = None
) -> ConeConstantSet:
    """Bound on the cone (f'(q1), f'(q2)) of a band that avoids the singular frequency."""
    mu, p1 = d.mu, d.p1
    if not q1 < q2:
        raise PreconditionError("need q1 < q2")
    if q1 <= p1 <= q2:
        raise PreconditionError(f"singular frequency {p1} lies inside [{q1}, {q2}]")
    if eta is None:
        eta = default_offcone_eta(p1, q1, q2)
    dist = q1 - p1 if p1 < q1 else p1 - q2
    if not 0 < eta < dist:
        raise PreconditionError(f"need 0 < eta < {dist}, got {eta}")
    S, L = d.line_norms()
    m1 = _min_curvature(s, q1 - eta, q2 + eta)
    gap_low = _gap(s, q1 - eta, q1)
    gap_high = _gap(s, q2, q2 + eta)
    if p1 < q1:
        near, near_gap, far, far_gap = q1 - eta - p1, gap_low, q2 + eta - p1, gap_high
    else:
        near, near_gap, far, far_gap = p1 - q2 - eta, gap_high, p1 - q1 + eta, gap_low
    if S == 0 and L == 0:
        c1 = c2 = c3 = 0.0
    else:
        c1 = near ** (mu - 1) / math.pi * (S + (4 * S + L) / m1)
        c2 = (S / mu + (4 * S + L) / near_gap) / math.pi
        c3 = far ** (mu - 1) / TWO_PI * (4 * S + L) / far_gap
    return ConeConstantSet(
        "off_cone",
        {"c1": c1, "c2": c2, "c3": c3},
        {"c1": -0.5, "c2": -mu, "c3": -1.0},
        {"c1": "inside", "c2": "inside", "c3": "inside"},
        cone_of_band(s, q1, q2),
        "p1 below band" if p1 < q1 else "p1 above band",
        {"eta": eta, "min_curvature": m1, "gap_low": gap_low, "gap_high": gap_high},
    )


# ---------------------------------------------------------------------------
# whole-line constants for weighted data


def _split_index(s: SymbolDescriptor, d: WeightedDatum) -> int:
    env = s.lower_envelope
    if env is None:
        raise PreconditionError("this estimate needs a lower envelope on f''")
    # the envelope is declared on |p| >= R and therefore also holds on |p| >= r
    return int(math.ceil(max(env.R, d.r))) + 1


def decomposition_weights(s: SymbolDescriptor, N: int) -> tuple[float, float]:
    """(m_-N, m_+N): inverse-curvature plus inverse-gap sums for [-N, 0] and [0, N]."""
    if N < 1:
        raise PreconditionError("N must be a positive integer")
    m_minus = 2 / _min_curvature(s, -N, 0) + 1 / _gap(s, -N - 1, -N) + 1 / _gap(s, 0, 1)
    m_plus = 2 / _min_curvature(s, 0, N) + 1 / _gap(s, N, N + 1) + 1 / _gap(s, -1, 0)
    return m_minus, m_plus


def concentration_gaps(s: SymbolDescriptor, N: int) -> tuple[float, float]:
    """(m_-N, m_+N): distance of f' on [-N, 0] and [0, N] to the asymptotic velocities."""
    if N < 1:
        raise PreconditionError("N must be a positive integer")
    m_minus = min(float(s.lower_gap(np.array([-float(N)]))[0]), float(s.upper_gap(np.array([0.0]))[0]))
    m_plus = min(float(s.lower_gap(np.array([0.0]))[0]), float(s.upper_gap(np.array([float(N)]))[0]))
    return m_minus, m_plus


def series_bound_global(mu: float, alpha: float, beta: float, c: float, M: float, M_prime: float) -> float:
    """Closed-form bound on the sum of the per-cell constants beyond [-N, N)."""
    if not alpha > mu + beta:
        raise PreconditionError(f"series not summable: need alpha > mu + beta, got {alpha} <= {mu + beta}")
    first = 5 * 2 ** (alpha - mu + 1) * M / math.pi * (alpha + 1 - mu) / (alpha - mu)
    second = (
        3 * 2 ** (1 - mu + 2 * beta) * (5 * 2**alpha * M + M_prime) / (math.pi * c)
        * (alpha + 1 - mu - beta) / (alpha - mu - beta)
    )
    return first + second


def series_bound_concentration(mu: float, alpha: float, beta_minus: float, c_minus: float, M: float, M_prime: float) -> float:
    """Closed-form bound on the off-cone per-cell constants beyond [-N, N)."""
    if not beta_minus > 1:
        raise PreconditionError("need beta_- > 1")
    if not alpha > mu + beta_minus - 1:
        raise PreconditionError(
            f"series not summable: need alpha > mu + beta_- - 1, got {alpha} <= {mu + beta_minus - 1}"
        )
    inner = 3 * 2 ** (-mu + alpha + beta_minus) * M + 2 ** (-mu + beta_minus) * (2**alpha * M + M_prime)
    return (beta_minus - 1) / (math.pi * c_minus) * inner * (alpha + 2 - mu - beta_minus) / (alpha + 1 - mu - beta_minus)


def _whole_half_line_norms(d: WeightedDatum, side: int) -> tuple[float, float]:
    """Norms of u and u' over (0, inf) or (-inf, 0), with the weighted tail added."""
    W = NORM_WINDOW
    lo, hi = (0.0, W) if side > 0 else (-W, 0.0)
    S, L = _norms(d.regular_part, lo, hi)
    S = max(S, d.M * (1 + W**2) ** (-d.alpha / 2))
    tail = d.M_prime * (W ** (-d.alpha) + W ** (1 - d.alpha) / (d.alpha - 1)) if d.alpha > 1 else math.inf
    return S, L + tail


def global_linfty_constants(d: WeightedDatum, s: SymbolDescriptor, path: str = "auto") -> ConeConstantSet:
    """sup_x |u(t, x)| <= c1 t^(-mu/2) + c2 t^(-1/2) for t >= 1.

    ``path="band"`` splits the line into [-N, N] and unit cells beyond;
    ``path="uniform"`` needs a global convexity floor and returns a single
    constant at t^(-mu/2) valid for all t > 0. ``auto`` prefers the latter.
    """
    if path not in ("auto", "band", "uniform"):
        raise PreconditionError(f"unknown path {path!r}")
    mu = d.mu
    if path == "uniform" or (path == "auto" and s.convexity_floor is not None):
        if s.convexity_floor is None:
            raise PreconditionError("the uniform path needs a convexity floor")
        m = s.convexity_floor
        total = 0.0
        for side in (-1, 1):
            S, L = _whole_half_line_norms(d, side)
            if S or L:
                total += ((3 / mu) * S + (8 * S + 2 * L) / m) / TWO_PI
        return ConeConstantSet(
            "global_linfty",
            {"c1": total},
            {"c1": -mu / 2},
            {"c1": "global"},
            None,
            "uniform",
            {"convexity_floor": m},
        )
    env = s.lower_envelope
    if env is None:
        raise PreconditionError("the band path needs a lower envelope on f''")
    c2 = series_bound_global(mu, d.alpha, env.beta, env.c, d.M, d.M_prime)
    N = _split_index(s, d)
    m_minus, m_plus = decomposition_weights(s, N)
    S_m, L_m = _norms(d.regular_part, -N, 0)
    S_p, L_p = _norms(d.regular_part, 0, N)
    c_minus = (5 / mu) * S_m / TWO_PI + (4 * S_m + L_m) * m_minus / TWO_PI
    c_plus = (5 / mu) * S_p / TWO_PI + (4 * S_p + L_p) * m_plus / TWO_PI
    c1 = c_minus + c_plus
    if d.M == 0 and d.M_prime == 0:
        c2 = 0.0
    return ConeConstantSet(
        "global_linfty",
        {"c1": c1, "c2": c2},
        {"c1": -mu / 2, "c2": -0.5},
        {"c1": "global", "c2": "global"},
        None,
        "band",
        {"N": N, "m_minus": m_minus, "m_plus": m_plus, "c_minus": c_minus, "c_plus": c_plus},
    )


def concentration_constants(d: WeightedDatum, s: SymbolDescriptor) -> ConeConstantSet:
    """|u(t, x)| <= c1 t^-mu + c2 t^-1 outside the cone of asymptotic velocities."""
    low, up = s.lower_envelope, s.upper_envelope
    if low is None or up is None or s.asymptotic_velocities is None:
        raise PreconditionError("concentration needs both envelopes and the asymptotic velocities")
    mu = d.mu
    c2 = series_bound_concentration(mu, d.alpha, low.beta, low.c, d.M, d.M_prime)
    N = _split_index(s, d)
    m_minus, m_plus = concentration_gaps(s, N)
    S_m, L_m = _norms(d.regular_part, -N, 0)
    S_p, L_p = _norms(d.regular_part, 0, N)
    c_minus = S_m / (TWO_PI * mu) + (4 * S_m + L_m) / (TWO_PI * m_minus)
    c_plus = S_p / (TWO_PI * mu) + (4 * S_p + L_p) / (TWO_PI * m_plus)
    if d.M == 0 and d.M_prime == 0:
        c2 = 0.0
    a, b = s.asymptotic_velocities
    return ConeConstantSet(
        "concentration",
        {"c1": c_minus + c_plus, "c2": c2},
        {"c1": -mu, "c2": -1.0},
        {"c1": "outside", "c2": "outside"},
        SpaceTimeCone(a, b),
        "band",
        {"N": N, "m_minus": m_minus, "m_plus": m_plus},
    )


# ---------------------------------------------------------------------------
# per-cell constants, summed directly


_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


def _cell_indices(N: int, n_max: int) -> np.ndarray:
    return np.concatenate([np.arange(-n_max, -N, dtype=float), np.arange(N, n_max + 1, dtype=float)])


def _cell_norms(d: WeightedDatum, n: np.ndarray, chunk: int = 20000):
    """sup |F| and ||F'||_L1 on [n, n+1] for each cell."""
    sups, l1s = [], []
    nodes = 0.5 + 0.5 * _GL_X
    for i in range(0, n.size, chunk):
        c = n[i:i + chunk, None]
        pts = np.concatenate([c, c + nodes[None, :], c + 1.0], axis=1)
        sups.append(np.max(np.abs(d.density(pts)), axis=1))
        l1s.append(0.5 * (np.abs(d.density_derivative(c + nodes[None, :])) @ _GL_W))
    return np.concatenate(sups), np.concatenate(l1s)


def _cell_min_curvature(s: SymbolDescriptor, n: np.ndarray) -> np.ndarray:
    pts = np.concatenate([n[:, None], n[:, None] + np.linspace(0, 1, 17)[None, 1:]], axis=1)
    return np.min(s.f.d2(pts), axis=1)


def _unit_gaps(s: SymbolDescriptor, lo: np.ndarray) -> np.ndarray:
    """f'(lo + 1) - f'(lo), integrating f'' to avoid cancellation."""
    nodes = 0.5 + 0.5 * _GL_X
    return 0.5 * (s.f.d2(lo[:, None] + nodes[None, :]) @ _GL_W)


def global_cell_constants(d: WeightedDatum, s: SymbolDescriptor, n_max: int = 100_000, N: Optional[int] = None):
    """(n, c_n) for the unit cells in Z minus {-N, ..., N-1} with |n| <= n_max."""
    N = _split_index(s, d) if N is None else N
    n = _cell_indices(N, n_max)
    sup_U, l1_dU = _cell_norms(d, n)
    m_n = 2 / _cell_min_curvature(s, n) + 1 / _unit_gaps(s, n + 1) + 1 / _unit_gaps(s, n - 1)
    c_n = 5 / TWO_PI * sup_U + (4 * sup_U + l1_dU) * m_n / TWO_PI
    return n, c_n


def concentration_cell_constants(d: WeightedDatum, s: SymbolDescriptor, n_max: int = 100_000, N: Optional[int] = None):
    """(n, c_n^c) for the off-cone per-cell constants."""
    if s.asymptotic_velocities is None:
        raise PreconditionError("needs asymptotic velocities")
    N = _split_index(s, d) if N is None else N
    n = _cell_indices(N, n_max)
    sup_U, l1_dU = _cell_norms(d, n)
    m_n = np.minimum(s.lower_gap(n), s.upper_gap(n + 1))
    return n, (3 * sup_U + l1_dU) / (TWO_PI * m_n)


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class RaySample:
    t: float
    velocity: float
    magnitude: float
    quad_err: float
    bound: float
    inside_cone: bool
    converged: bool

    @property
    def violated(self) -> bool:
        return self.magnitude + self.quad_err > self.bound


def equispaced_rays(lo: float, hi: float, n: int) -> np.ndarray:
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise PreconditionError("ray window must be finite and ordered")
    return np.linspace(lo, hi, n)


def cone_rays(lo: float, hi: float, n: int) -> np.ndarray:
    """Equispaced rays merged with Chebyshev rays on [lo, hi]."""
    k = np.arange(n)
    cheb = 0.5 * (lo + hi) - 0.5 * (hi - lo) * np.cos(np.pi * k / (n - 1))
    return np.unique(np.concatenate([equispaced_rays(lo, hi, n), cheb]))


def outside_rays(cone: SpaceTimeCone, n: int, window: Optional[tuple[float, float]] = None) -> np.ndarray:
    """n rays strictly outside the cone, split between the two sides of the clip window."""
    lo_w, hi_w = window if window is not None else cone.clip(DEFAULT_CLIP)
    sides = []
    if math.isfinite(cone.a) and lo_w < cone.a:
        sides.append((lo_w, cone.a, "left"))
    if math.isfinite(cone.b) and hi_w > cone.b:
        sides.append((cone.b, hi_w, "right"))
    if not sides:
        raise PreconditionError("the window leaves no room outside the cone")
    per = [n // len(sides) + (1 if i < n % len(sides) else 0) for i in range(len(sides))]
    rays = []
    for (lo, hi, kind), k in zip(sides, per):
        pts = np.linspace(lo, hi, k + 1)
        rays.append(pts[:-1] if kind == "left" else pts[1:])
    return np.concatenate(rays)


def sample_rays(
    d: Datum,
    s: SymbolDescriptor,
    times: Sequence[float],
    velocities: Sequence[float],
    bound: Callable[[float, float], float],
    cone: Optional[SpaceTimeCone] = None,
    tol: Optional[float] = None,
    workers: int = 1,
) -> list[RaySample]:
    """|u(t, v t)| with its error estimate and the bound at each (t, v)."""
    jobs = [(float(t), float(v)) for t in times for v in velocities]

    def one(job):
        t, v = job
        res = solution_result(d, s, t, v * t, tol)
        inside = bool(cone.contains_velocity(v)) if cone is not None else True
        return RaySample(t, v, abs(res.value), res.total_error, float(bound(t, v)), inside, res.converged)

    if workers <= 1:
        return [one(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, jobs))


@dataclass(frozen=True)
class ConeSup:
    value: float
    velocity: float
    quad_err: float
    flagged: int


def sup_over_cone(
    d: Datum,
    s: SymbolDescriptor,
    t: float,
    cone: SpaceTimeCone,
    n_rays: int = 33,
    window: Optional[tuple[float, float]] = None,
    tol: Optional[float] = None,
) -> ConeSup:
    """max over rays in the cone of |u(t, v t)|; infinite ends are clipped to ``window``."""
    if n_rays < 16:
        raise PreconditionError("need at least 16 rays")
    lo, hi = cone.a, cone.b
    if window is not None:
        lo, hi = max(lo, window[0]), min(hi, window[1])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise PreconditionError("unbounded cone: pass a finite velocity window")
    rows = sample_rays(d, s, [t], cone_rays(lo, hi, n_rays), lambda *_: math.inf, cone, tol)
    best = max(rows, key=lambda r: r.magnitude)
    return ConeSup(best.magnitude, best.velocity, best.quad_err, sum(not r.converged for r in rows))


def empirical_linfty(
    d: Datum, s: SymbolDescriptor, t: float, window: tuple[float, float], n_rays: int = 33, tol: Optional[float] = None
) -> ConeSup:
    return sup_over_cone(d, s, t, SpaceTimeCone(window[0], window[1]), n_rays, None, tol)


def optimality_probe(
    d: BandDatum,
    s: SymbolDescriptor,
    t_grid: Sequence[float],
    tol: Optional[float] = None,
    window: Optional[tuple[float, float]] = None,
) -> DecayFit:
    """Fit the decay of |u(t, f'(p1) t)| along the singular direction.

    For f(p) = p^2 that direction is x = 2 p1 t. The datum's regular part
    must vanish at p2 so the far endpoint does not pollute the rate. The
    fit window defaults to that of :func:`fit_decay`.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 8:
        raise PreconditionError("need at least 8 grid points")
    p1, p2 = d.band
    edge = abs(complex(np.asarray(d.amplitude.regular_part(np.array([p2])))[0]))
    if edge > 1e-12:
        raise PreconditionError("the regular part must vanish at the right end of the band")
    v = float(s.f.d1(np.array([p1]))[0])
    samples = [(t, abs(solution_value(d, s, t, v * t, tol))) for t in t_grid]
    return fit_decay(samples, window)


def discrete_l2_norm(d: Datum, s: SymbolDescriptor, t: float, xs: np.ndarray, tol: Optional[float] = None) -> float:
    """sqrt(sum |u(t, x)|^2 h) on a uniform x-grid of step h."""
    xs = np.asarray(xs, dtype=float)
    h = float(xs[1] - xs[0])
    vals = np.array([solution_value(d, s, t, x, tol) for x in xs])
    return math.sqrt(float(np.sum(np.abs(vals) ** 2)) * h)
