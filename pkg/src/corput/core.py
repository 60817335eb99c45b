"""Domain types and assumption validators.

Everything here is immutable. Functions carried by the handles must be
numpy-vectorised: they receive a float array and return an array of the
same shape (real for phases and symbols, possibly complex for amplitudes).

Assumption checks are done by probing: a uniform grid merged with
Chebyshev nodes on the relevant interval. They catch declaration errors,
they do not prove anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np

DEFAULT_PROBES = 257
FACTORIZATION_RTOL = 1e-8

ArrayFunc = Callable[[np.ndarray], np.ndarray]


class PreconditionError(ValueError):
    """An operation was called outside its documented domain."""


class ValidationError(ValueError):
    """A domain object failed its assumption check."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__(str(report))


class NonFiniteError(ValueError):
    """A handle produced inf/nan at a probe point."""

    def __init__(self, where: float, what: str = "value"):
        self.where = where
        super().__init__(f"non-finite {what} at p={where!r}")


@dataclass(frozen=True)
class RealFunctionHandle:
    """An evaluable function with its analytic derivatives.

    ``domain`` is the open interval on which the function is declared.
    """

    value: ArrayFunc
    derivative: ArrayFunc
    second_derivative: Optional[ArrayFunc] = None
    domain: tuple[float, float] = (-math.inf, math.inf)

    def __call__(self, p):
        return self.value(np.asarray(p, dtype=float))

    def d1(self, p):
        return self.derivative(np.asarray(p, dtype=float))

    def d2(self, p):
        if self.second_derivative is None:
            raise AttributeError("handle carries no second derivative")
        return self.second_derivative(np.asarray(p, dtype=float))


def constant_handle(c: complex = 1.0) -> RealFunctionHandle:
    def value(p):
        return np.full(np.shape(p), c, dtype=complex if isinstance(c, complex) else float)

    def zero(p):
        return np.zeros(np.shape(p))

    return RealFunctionHandle(value, zero, zero)


class _Mirrored:
    """p -> sign * base(s - p); a picklable callable."""

    def __init__(self, base: ArrayFunc, s: float, sign: float):
        self.base = base
        self.s = s
        self.sign = sign

    def __call__(self, p):
        return self.sign * self.base(self.s - np.asarray(p, dtype=float))


def mirror_handle(h: RealFunctionHandle, s: float) -> RealFunctionHandle:
    """The handle of p -> h(s - p)."""
    lo, hi = h.domain
    second = None if h.second_derivative is None else _Mirrored(h.second_derivative, s, 1.0)
    return RealFunctionHandle(
        value=_Mirrored(h.value, s, 1.0),
        derivative=_Mirrored(h.derivative, s, -1.0),
        second_derivative=second,
        domain=(s - hi, s - lo),
    )


@dataclass(frozen=True)
class Violation:
    clause: str
    location: float
    magnitude: float

    def __str__(self) -> str:
        return f"{self.clause} (worst at p={self.location:.6g}, magnitude {self.magnitude:.3g})"


@dataclass(frozen=True)
class ValidationReport:
    subject: str
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def clauses(self) -> list[str]:
        return [v.clause for v in self.violations]

    def raise_if_invalid(self) -> "ValidationReport":
        if self.violations:
            raise ValidationError(self)
        return self

    def __str__(self) -> str:
        if self.ok:
            return f"{self.subject}: ok"
        return f"{self.subject}: " + "; ".join(str(v) for v in self.violations)


def probe_grid(lo: float, hi: float, probes: int = DEFAULT_PROBES) -> np.ndarray:
    """Uniform grid merged with Chebyshev-Lobatto nodes on [lo, hi]."""
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        raise PreconditionError(f"probe interval must be finite and ordered, got [{lo}, {hi}]")
    uniform = np.linspace(lo, hi, probes)
    k = np.arange(probes)
    cheb = 0.5 * (lo + hi) - 0.5 * (hi - lo) * np.cos(np.pi * k / (probes - 1))
    return np.unique(np.concatenate([uniform, cheb]))


def _worst(mask: np.ndarray, grid: np.ndarray, size: np.ndarray) -> tuple[float, float]:
    idx = np.flatnonzero(mask)
    j = idx[np.argmax(size[idx])]
    return float(grid[j]), float(size[j])


def _finiteness(report: list[Violation], grid: np.ndarray, values: np.ndarray, what: str) -> bool:
    bad = ~np.isfinite(values)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        report.append(Violation(f"non-finite {what}", float(grid[j]), math.inf))
        return False
    return True


def _inside(domain: tuple[float, float], lo: float, hi: float) -> bool:
    return domain[0] < lo and hi < domain[1] or (
        domain[0] <= lo and hi <= domain[1] and math.isinf(domain[0]) and math.isinf(domain[1])
    )


# ---------------------------------------------------------------------------
# amplitudes


@dataclass(frozen=True)
class SingularAmplitude:
    """U(p) = (p - p1)^(mu-1) * u(p) on [p1, p2].

    ``side="right"`` stores the mirrored convention
    U(p) = (p2 - p)^(mu-1) * u(p), singular at p2. :func:`reflect_band`
    maps it to the canonical left-singular form.
    """

    p1: float
    p2: float
    mu: float
    regular_part: RealFunctionHandle
    side: Literal["left", "right"] = "left"
    _reflection_of: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.p1 < self.p2:
            raise PreconditionError(f"need p1 < p2, got [{self.p1}, {self.p2}]")
        if not 0.0 < self.mu <= 1.0:
            raise PreconditionError(f"singularity strength mu must lie in (0, 1], got {self.mu}")
        if self.side not in ("left", "right"):
            raise PreconditionError(f"side must be 'left' or 'right', got {self.side!r}")

    @property
    def singular_point(self) -> float:
        return self.p1 if self.side == "left" else self.p2

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        dist = p - self.p1 if self.side == "left" else self.p2 - p
        return dist ** (self.mu - 1.0) * self.regular_part(p)


def validate_amplitude(a: SingularAmplitude, probes: int = DEFAULT_PROBES) -> ValidationReport:
    if probes < 16:
        raise PreconditionError("validate_amplitude needs at least 16 probes")
    grid = probe_grid(a.p1, a.p2, probes)
    found: list[Violation] = []
    u = np.asarray(a.regular_part(grid))
    du = np.asarray(a.regular_part.d1(grid))
    fin_u = _finiteness(found, grid, u, "regular part")
    fin_du = _finiteness(found, grid, du, "regular part derivative")
    if fin_u and a.mu != 1.0:
        edge = a.singular_point
        at_edge = abs(complex(np.asarray(a.regular_part(np.array([edge])))[0]))
        scale = max(1.0, float(np.max(np.abs(u))))
        if at_edge <= 1e-14 * scale:
            found.append(Violation("regular part vanishes at the singularity with mu != 1", edge, at_edge))
    if fin_du:
        # crude trapezoid; only finiteness matters here
        l1 = float(np.trapezoid(np.abs(du), grid))
        if not math.isfinite(l1):
            found.append(Violation("derivative of regular part not integrable", float(grid[0]), math.inf))
    return ValidationReport("amplitude", tuple(found))


@dataclass(frozen=True)
class LineAmplitude:
    """|p - p1|^(mu-1) * u(p) on the whole line, with a power tail.

    The tail envelope |U(p)| <= tail_M * |p - p1|^(mu - 1 - tail_alpha)
    governs where the line integral may be truncated.
    """

    p1: float
    mu: float
    regular_part: RealFunctionHandle
    tail_M: float
    tail_alpha: float

    def __post_init__(self):
        if not 0.0 < self.mu <= 1.0:
            raise PreconditionError(f"mu must lie in (0, 1], got {self.mu}")
        if self.tail_M < 0:
            raise PreconditionError("tail_M must be non-negative")

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        return np.abs(p - self.p1) ** (self.mu - 1.0) * self.regular_part(p)

    def derivative(self, p):
        p = np.asarray(p, dtype=float)
        d = p - self.p1
        r = np.abs(d)
        u = self.regular_part(p)
        du = self.regular_part.d1(p)
        return (self.mu - 1.0) * r ** (self.mu - 2.0) * np.sign(d) * u + r ** (self.mu - 1.0) * du


# ---------------------------------------------------------------------------
# phases


@dataclass(frozen=True)
class PhaseDescriptor:
    """A C^2 phase with psi'(p) = |p - p0|^(rho-1) * nondegenerate_part(p).

    ``p0=None`` declares a phase without stationary point; only the
    non-stationary estimate applies to it and ``rho`` is ignored.
    """

    psi: RealFunctionHandle
    p0: Optional[float]
    rho: float
    nondegenerate_part: ArrayFunc
    _reflection_of: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.p0 is not None and not self.rho > 1.0:
            raise PreconditionError(f"order parameter rho must exceed 1, got {self.rho}")
        if self.psi.second_derivative is None:
            raise PreconditionError("a phase handle must carry its second derivative")

    @property
    def domain(self) -> tuple[float, float]:
        return self.psi.domain

    def nondegenerate(self, p):
        return np.asarray(self.nondegenerate_part(np.asarray(p, dtype=float)), dtype=float)


def _second_derivative_mismatch(h: RealFunctionHandle, grid: np.ndarray) -> Optional[Violation]:
    step = 1e-5 * (1.0 + np.abs(grid))
    lo, hi = h.domain
    inner = (grid - step > lo) & (grid + step < hi)
    if not inner.any():
        return None
    g = grid[inner]
    s = step[inner]
    fd = (np.asarray(h.d1(g + s)) - np.asarray(h.d1(g - s))) / (2 * s)
    exact = np.asarray(h.d2(g))
    scale = 1.0 + float(np.max(np.abs(exact)))
    err = np.abs(fd - exact)
    bad = err > 1e-4 * scale
    if bad.any():
        where, size = _worst(bad, g, err)
        return Violation("second derivative mismatch", where, size)
    return None


def _probe_window(ph: PhaseDescriptor, band: tuple[float, float]) -> tuple[float, float]:
    p1, p2 = band
    width = p2 - p1
    lo = min(p1, ph.p0) if ph.p0 is not None else p1
    hi = max(p2, ph.p0) if ph.p0 is not None else p2
    lo, hi = lo - width, hi + width
    dlo, dhi = ph.domain
    margin = 1e-9 * width
    if math.isfinite(dlo):
        lo = max(lo, dlo + margin)
    if math.isfinite(dhi):
        hi = min(hi, dhi - margin)
    return lo, hi


def validate_phase(
    ph: PhaseDescriptor,
    band: tuple[float, float],
    probes: int = DEFAULT_PROBES,
    rtol: float = FACTORIZATION_RTOL,
) -> ValidationReport:
    """Probe the factorisation, the non-degeneracy and the one-sided monotonicity."""
    p1, p2 = band
    if probes < 16:
        raise PreconditionError("validate_phase needs at least 16 probes")
    dlo, dhi = ph.domain
    if not (dlo < p1 < p2 < dhi):
        raise PreconditionError(f"band [{p1}, {p2}] must lie inside the phase domain {ph.domain}")

    found: list[Violation] = []
    lo, hi = _probe_window(ph, band)
    grid = probe_grid(lo, hi, probes)
    bandgrid = probe_grid(p1, p2, probes)
    if ph.p0 is not None:
        grid = np.unique(np.concatenate([grid, [ph.p0], bandgrid]))
    d1 = np.asarray(ph.psi.d1(grid), dtype=float)
    d2 = np.asarray(ph.psi.d2(grid), dtype=float)
    if not (_finiteness(found, grid, np.asarray(ph.psi(grid)), "phase")
            and _finiteness(found, grid, d1, "phase derivative")
            and _finiteness(found, grid, d2, "phase second derivative")):
        return ValidationReport("phase", tuple(found))

    if ph.p0 is not None:
        nd = ph.nondegenerate(grid)
        model = np.abs(grid - ph.p0) ** (ph.rho - 1.0) * nd
        resid = np.abs(d1 - model)
        bad = resid > rtol * (1.0 + np.abs(d1))
        if bad.any():
            found.append(Violation("factorization mismatch", *_worst(bad, grid, resid)))
        ndband = np.abs(ph.nondegenerate(bandgrid))
        j = int(np.argmin(ndband))
        if not ndband[j] > 0.0:
            found.append(Violation("non-degenerate part vanishes on the band", float(bandgrid[j]), float(ndband[j])))
        sides = [grid < ph.p0, grid > ph.p0]
    else:
        band_d1 = np.asarray(ph.psi.d1(bandgrid), dtype=float)
        scale = float(np.max(np.abs(band_d1)))
        if np.any(np.abs(band_d1) <= 1e-14 * max(scale, 1e-300)) or (band_d1.min() < 0 < band_d1.max()):
            j = int(np.argmin(np.abs(band_d1)))
            found.append(Violation("stationary point inside the band", float(bandgrid[j]), float(abs(band_d1[j]))))
        sides = [(grid >= p1) & (grid <= p2)]

    zero = 1e-12 * max(float(np.max(np.abs(d2))), 1e-300)
    for side in sides:
        if not side.any():
            continue
        vals = d2[side]
        if (vals > zero).any() and (vals < -zero).any():
            neg = vals < -zero
            pos = vals > zero
            minority = neg if neg.sum() <= pos.sum() else pos
            where, size = _worst(minority, grid[side], np.abs(vals))
            found.append(Violation("monotonicity violation", where, size))

    bad2 = _second_derivative_mismatch(ph.psi, grid)
    if bad2 is not None:
        found.append(bad2)
    return ValidationReport("phase", tuple(found))


def reflect_band(a: SingularAmplitude, ph: PhaseDescriptor) -> tuple[SingularAmplitude, PhaseDescriptor]:
    """Mirror through p -> p1 + p2 - p.

    A right-singular amplitude becomes left-singular (and vice versa); the
    oscillatory integral over [p1, p2] is unchanged. Reflecting twice gives
    back the original objects.
    """
    ra, rp = a._reflection_of, ph._reflection_of
    if ra is not None and rp is not None and ra[0] is rp[0] and ra[1] is rp[1]:
        return ra
    s = a.p1 + a.p2
    new_a = SingularAmplitude(
        p1=a.p1,
        p2=a.p2,
        mu=a.mu,
        regular_part=mirror_handle(a.regular_part, s),
        side="left" if a.side == "right" else "right",
        _reflection_of=(a, ph),
    )
    new_ph = PhaseDescriptor(
        psi=mirror_handle(ph.psi, s),
        p0=None if ph.p0 is None else s - ph.p0,
        rho=ph.rho,
        nondegenerate_part=_Mirrored(ph.nondegenerate_part, s, -1.0),
        _reflection_of=(a, ph),
    )
    return new_a, new_ph


# ---------------------------------------------------------------------------
# symbols and cones


@dataclass(frozen=True)
class LowerEnvelope:
    """c * |p|^-beta <= f''(p) for |p| >= R."""

    R: float
    c: float
    beta: float


@dataclass(frozen=True)
class UpperEnvelope:
    """f''(p) <= c_plus * |p|^-beta_plus for |p| >= R (R shared with the lower envelope)."""

    c_plus: float
    beta_plus: float


@dataclass(frozen=True)
class SymbolDescriptor:
    """A dispersive symbol f with f'' > 0.

    ``gap_to_lower`` and ``gap_to_upper`` optionally give f'(p) - a and
    b - f'(p) in a cancellation-free form; otherwise they are computed by
    subtraction.
    """

    f: RealFunctionHandle
    convexity_floor: Optional[float] = None
    lower_envelope: Optional[LowerEnvelope] = None
    upper_envelope: Optional[UpperEnvelope] = None
    asymptotic_velocities: Optional[tuple[float, float]] = None
    gap_to_lower: Optional[ArrayFunc] = None
    gap_to_upper: Optional[ArrayFunc] = None
    name: str = "symbol"

    def __post_init__(self):
        if self.f.second_derivative is None:
            raise PreconditionError("a symbol handle must carry f''")
        if self.upper_envelope is not None:
            if self.lower_envelope is None:
                raise PreconditionError("an upper envelope needs the lower envelope's radius R")
            if not self.lower_envelope.beta >= self.upper_envelope.beta_plus > 1.0:
                raise PreconditionError("need beta >= beta_plus > 1")
            if self.asymptotic_velocities is None:
                raise PreconditionError("bounded f' requires the asymptotic velocities (a, b)")
        if self.asymptotic_velocities is not None:
            a, b = self.asymptotic_velocities
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise PreconditionError("asymptotic velocities must be finite with a < b")

    def velocity(self, p):
        return self.f.d1(p)

    def curvature(self, p):
        return self.f.d2(p)

    def velocity_gap(self, lo: float, hi: float) -> float:
        """f'(hi) - f'(lo), integrating f'' when subtraction would cancel."""
        if hi < lo:
            return -self.velocity_gap(hi, lo)
        fl = float(self.f.d1(np.array([lo]))[0])
        fh = float(self.f.d1(np.array([hi]))[0])
        gap = fh - fl
        if gap > 1e-6 * (abs(fh) + abs(fl)):
            return gap
        return _integrate_gl(self.f.d2, lo, hi)

    def lower_gap(self, p):
        """f'(p) - a."""
        if self.asymptotic_velocities is None:
            raise PreconditionError("symbol has no asymptotic velocities")
        if self.gap_to_lower is not None:
            return self.gap_to_lower(np.asarray(p, dtype=float))
        return self.f.d1(p) - self.asymptotic_velocities[0]

    def upper_gap(self, p):
        """b - f'(p)."""
        if self.asymptotic_velocities is None:
            raise PreconditionError("symbol has no asymptotic velocities")
        if self.gap_to_upper is not None:
            return self.gap_to_upper(np.asarray(p, dtype=float))
        return self.asymptotic_velocities[1] - self.f.d1(p)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _integrate_gl(func: ArrayFunc, lo: float, hi: float, panels: int = 8) -> float:
    edges = np.linspace(lo, hi, panels + 1)
    c = 0.5 * (edges[:-1] + edges[1:])
    h = 0.5 * (edges[1:] - edges[:-1])
    x = c[:, None] + h[:, None] * _GL_X[None, :]
    return float(np.sum(h * (np.asarray(func(x)) @ _GL_W)))


def validate_symbol(
    s: SymbolDescriptor,
    window: float = 50.0,
    probes: int = DEFAULT_PROBES,
) -> ValidationReport:
    found: list[Violation] = []
    grid = probe_grid(-window, window, probes)
    d2 = np.asarray(s.curvature(grid), dtype=float)
    if not _finiteness(found, grid, d2, "f''"):
        return ValidationReport(s.name, tuple(found))
    bad = ~(d2 > 0)
    if bad.any():
        found.append(Violation("f'' not positive", *_worst(bad, grid, -d2)))
    if s.convexity_floor is not None:
        short = d2 < s.convexity_floor
        if short.any():
            found.append(Violation("convexity floor violated", *_worst(short, grid, s.convexity_floor - d2)))
    env = s.lower_envelope
    if env is not None:
        far = np.abs(grid) >= env.R
        if far.any():
            g = grid[far]
            lower = env.c * np.abs(g) ** (-env.beta)
            below = d2[far] < lower * (1 - 1e-12)
            if below.any():
                found.append(Violation("lower envelope violated", *_worst(below, g, lower - d2[far])))
            if s.upper_envelope is not None:
                upper = s.upper_envelope.c_plus * np.abs(g) ** (-s.upper_envelope.beta_plus)
                above = d2[far] > upper * (1 + 1e-12)
                if above.any():
                    found.append(Violation("upper envelope violated", *_worst(above, g, d2[far] - upper)))
    if s.asymptotic_velocities is not None:
        a, b = s.asymptotic_velocities
        fp = np.asarray(s.velocity(grid), dtype=float)
        outside = (fp <= a) | (fp >= b)
        if outside.any():
            found.append(Violation("f' leaves (a, b)", *_worst(outside, grid, np.abs(fp))))
    bad2 = _second_derivative_mismatch(s.f, grid)
    if bad2 is not None:
        found.append(bad2)
    return ValidationReport(s.name, tuple(found))


@dataclass(frozen=True)
class SpaceTimeCone:
    """{(t, x): t > 0 and a <= x/t <= b}; a may be -inf and b may be +inf."""

    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise PreconditionError(f"cone needs a < b, got ({self.a}, {self.b})")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.a) and math.isfinite(self.b)

    def contains_velocity(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        inside = np.ones(v.shape, dtype=bool)
        if not math.isinf(self.a):
            inside &= v >= self.a
        if not math.isinf(self.b):
            inside &= v <= self.b
        return inside

    def contains(self, t, x) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        pos = t > 0
        v = np.divide(x, t, out=np.zeros(np.broadcast(t, x).shape), where=pos)
        return pos & self.contains_velocity(v)

    def complement_contains(self, t, x) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return (t > 0) & ~self.contains(t, x)

    def clip(self, margin: float) -> tuple[float, float]:
        """Finite velocity window [a - margin, b + margin]; infinite ends need a finite partner."""
        if not self.bounded:
            raise PreconditionError("cannot clip an unbounded cone without explicit limits")
        return self.a - margin, self.b + margin


# ---------------------------------------------------------------------------
# technical lemmas


def lemma_concavity_gap(alpha: float, x: float, y: float) -> float:
    """(x - y)^alpha - (x^alpha - y^alpha), non-negative for 0 <= y <= x and alpha in (0, 1]."""
    if not 0.0 < alpha <= 1.0:
        raise PreconditionError(f"alpha must lie in (0, 1], got {alpha}")
    if not 0.0 <= y <= x:
        raise PreconditionError(f"need 0 <= y <= x, got x={x}, y={y}")
    return (x - y) ** alpha - (x**alpha - y**alpha)


def lemma_dyadic_comparability(n: int, p: float) -> bool:
    """Whether |n|/2 <= |p| <= 2|n| for p in [n, n+1]; n in {0, -1} is excluded."""
    if n != int(n):
        raise PreconditionError("n must be an integer")
    n = int(n)
    if n in (0, -1):
        raise PreconditionError("n = 0 and n = -1 are excluded")
    if not n <= p <= n + 1:
        raise PreconditionError(f"p={p} must lie in [{n}, {n + 1}]")
    return abs(n) / 2 <= abs(p) <= 2 * abs(n)


def zeta_tail_bound(sigma: float) -> float:
    """Upper bound sigma / (sigma - 1) for sum_{n >= 1} n^-sigma."""
    if not sigma > 1.0:
        raise PreconditionError(f"sigma must exceed 1, got {sigma}")
    return sigma / (sigma - 1.0)
