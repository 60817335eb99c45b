"""Reference quadrature for oscillatory integrals with an endpoint singularity.

The engine is a vectorised, breadth-first adaptive Gauss-Kronrod (10, 21)
scheme. All active panels of a pass are evaluated in a single call to the
integrand, so integrands must accept 2-d arrays.

Singular amplitudes are handled by the exact substitution
q = (p - p1)^mu, which turns (p - p1)^(mu-1) dp into dq / mu and leaves a
bounded integrand. Panels are pre-split so that each carries at most about
one oscillation of the phase.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .core import (
    DEFAULT_PROBES,
    LineAmplitude,
    NonFiniteError,
    PhaseDescriptor,
    PreconditionError,
    RealFunctionHandle,
    SingularAmplitude,
    probe_grid,
)

COMPACT_TOL = 1e-10
LINE_TOL = 1e-6
MAX_EVALUATIONS = 2_000_000
MIN_PANEL_FRACTION = 1e-13
MARGIN = 1e-12
STATIONARY_FLOOR = 1e-14


class NonConvergenceWarning(RuntimeWarning):
    """Adaptive quadrature stopped before meeting its tolerance."""


# Kronrod nodes on [-1, 1]; the Gauss nodes sit at the odd indices.
# Values from QUADPACK (public domain).
_XK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
    -0.148874338981631210884826001129720,
    -0.294392862701460198131126603103866,
    -0.433395394129247190799265943165784,
    -0.562757134668604683339000099272694,
    -0.679409568299024406234327365114874,
    -0.780817726586416897063717578345042,
    -0.865063366688984510732096688423493,
    -0.930157491355708226001207180059508,
    -0.973906528517171720077964012084452,
    -0.995657163025808080735527280689003,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
    0.295524224714752870173892994651338,
    0.269266719309996355091226921569469,
    0.219086362515982043995534934228163,
    0.149451349150580593145776339657697,
    0.066671344308688137593568809893332,
])
_WK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
    0.147739104901338491374841515972068,
    0.142775938577060080797094273138717,
    0.134709217311473325928054001771707,
    0.123491976262065851077958109831074,
    0.109387158802297641899210590325805,
    0.093125454583697605535065465083366,
    0.075039674810919952767043140916190,
    0.054755896574351996031381300244580,
    0.032558162307964727478818972459390,
    0.011694638867371874278064396062192,
])
_NODES = _XK.size


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    abs_error_estimate: float
    panels_used: int
    truncation_tail_bound: float = 0.0
    converged: bool = True
    evaluations: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.abs_error_estimate) and math.isfinite(self.truncation_tail_bound)):
            raise NonFiniteError(math.nan, "error estimate")
        if self.panels_used < 1:
            raise ValueError("panels_used must be positive")

    @property
    def total_error(self) -> float:
        return self.abs_error_estimate + self.truncation_tail_bound

    def scaled(self, factor: float) -> "QuadratureResult":
        f = abs(factor)
        return QuadratureResult(
            value=self.value * factor,
            abs_error_estimate=self.abs_error_estimate * f,
            panels_used=self.panels_used,
            truncation_tail_bound=self.truncation_tail_bound * f,
            converged=self.converged,
            evaluations=self.evaluations,
        )

    def __add__(self, other: "QuadratureResult") -> "QuadratureResult":
        return QuadratureResult(
            value=self.value + other.value,
            abs_error_estimate=self.abs_error_estimate + other.abs_error_estimate,
            panels_used=self.panels_used + other.panels_used,
            truncation_tail_bound=self.truncation_tail_bound + other.truncation_tail_bound,
            converged=self.converged and other.converged,
            evaluations=self.evaluations + other.evaluations,
        )


def _gk21(func, lo: np.ndarray, hi: np.ndarray):
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    x = c[:, None] + h[:, None] * _XK[None, :]
    fx = np.asarray(func(x))
    if fx.shape != x.shape:
        fx = np.broadcast_to(fx, x.shape)
    if not np.all(np.isfinite(fx)):
        i, j = np.argwhere(~np.isfinite(fx))[0]
        raise NonFiniteError(float(x[i, j]), "integrand")
    k = h * (fx @ _WK)
    g = h * (fx[:, 1::2] @ _WG)
    roundoff = 64 * np.finfo(float).eps * h * (np.abs(fx) @ _WK)
    return k, np.abs(k - g), roundoff


def _oscillation_partition(edges: np.ndarray, rate: Optional[Callable], max_passes: int = 64) -> np.ndarray:
    """Split [edges[i], edges[i+1]] until width * (rate(centre) + 1) <= 2 pi."""
    lo, hi = edges[:-1], edges[1:]
    if rate is None:
        return np.stack([lo, hi], axis=1)
    done_lo, done_hi = [], []
    for _ in range(max_passes):
        mid = 0.5 * (lo + hi)
        r = np.abs(np.asarray(rate(mid), dtype=float))
        r = np.where(np.isfinite(r), r, 0.0)
        # sample the panel ends too, so a panel is not judged by a slow centre alone
        r = np.maximum(r, np.abs(np.asarray(rate(0.75 * lo + 0.25 * hi), dtype=float)))
        r = np.maximum(r, np.abs(np.asarray(rate(0.25 * lo + 0.75 * hi), dtype=float)))
        ok = (hi - lo) * (r + 1.0) <= 2 * np.pi
        done_lo.append(lo[ok])
        done_hi.append(hi[ok])
        lo, hi = lo[~ok], hi[~ok]
        if lo.size == 0:
            break
        # split straight into as many pieces as the estimate asks for
        pieces = np.minimum(np.ceil((hi - lo) * (r[~ok] + 1.0) / (2 * np.pi)), 1024).astype(int)
        pieces = np.maximum(pieces, 2)
        new_lo, new_hi = [], []
        for a, b, k in zip(lo, hi, pieces):
            e = np.linspace(a, b, k + 1)
            new_lo.append(e[:-1])
            new_hi.append(e[1:])
        lo, hi = np.concatenate(new_lo), np.concatenate(new_hi)
    done_lo.append(lo)
    done_hi.append(hi)
    out = np.stack([np.concatenate(done_lo), np.concatenate(done_hi)], axis=1)
    return out[np.argsort(out[:, 0])]


def adaptive_quad(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = COMPACT_TOL,
    breakpoints: Sequence[float] = (),
    rate: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    max_evaluations: int = MAX_EVALUATIONS,
) -> QuadratureResult:
    """Integrate ``func`` over [a, b] to absolute tolerance ``tol``.

    ``rate`` optionally gives the local angular frequency of the integrand,
    used to pre-split the interval into single-oscillation panels.
    """
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    if not (math.isfinite(a) and math.isfinite(b)):
        raise PreconditionError("integration limits must be finite")
    if a == b:
        return QuadratureResult(0j, 0.0, 1)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    total = b - a
    inner = sorted(x for x in breakpoints if a < x < b)
    edges = np.array([a, *inner, b], dtype=float)
    panels = _oscillation_partition(edges, rate)
    lo, hi = panels[:, 0], panels[:, 1]

    value = 0j
    err = 0.0
    used = 0
    evals = 0
    converged = True
    while lo.size:
        if evals + _NODES * lo.size > max_evaluations and evals > 0:
            converged = False
            k, e, _ = _gk21(func, lo, hi)
            evals += _NODES * lo.size
            value += complex(np.sum(k))
            err += float(np.sum(e))
            used += lo.size
            break
        k, e, roundoff = _gk21(func, lo, hi)
        evals += _NODES * lo.size
        width = hi - lo
        accept = (e <= tol * width / total) | (e <= roundoff) | (width <= MIN_PANEL_FRACTION * total)
        value += complex(np.sum(k[accept]))
        err += float(np.sum(e[accept]))
        used += int(np.count_nonzero(accept))
        lo, hi = lo[~accept], hi[~accept]
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    if not converged:
        warnings.warn(
            f"quadrature budget of {max_evaluations} evaluations exhausted; error estimate {err:.3g}",
            NonConvergenceWarning,
            stacklevel=2,
        )
    return QuadratureResult(sign * value, err, max(used, 1), 0.0, converged, evals)


# ---------------------------------------------------------------------------
# oscillatory integrals


class _SubstitutedIntegrand:
    """(1/mu) u(p(q)) exp(i omega psi(p(q))) with p(q) = s + side * q^(1/mu)."""

    def __init__(self, a: SingularAmplitude, ph: PhaseDescriptor, omega: float):
        self.start = a.singular_point
        self.orient = 1.0 if a.side == "left" else -1.0
        self.inv_mu = 1.0 / a.mu
        self.u = a.regular_part
        self.psi = ph.psi
        self.omega = omega

    def point(self, q):
        return self.start + self.orient * np.power(q, self.inv_mu)

    def __call__(self, q):
        p = self.point(q)
        return self.inv_mu * self.u(p) * np.exp(1j * self.omega * self.psi(p))

    def rate(self, q):
        p = self.point(q)
        dp = self.inv_mu * np.power(np.maximum(q, 0.0), self.inv_mu - 1.0) if self.inv_mu != 1.0 else 1.0
        return self.omega * np.abs(self.psi.d1(p)) * dp


class _PlainIntegrand:
    def __init__(self, a: SingularAmplitude, ph: PhaseDescriptor, omega: float):
        self.a = a
        self.psi = ph.psi
        self.omega = omega

    def __call__(self, p):
        return self.a(p) * np.exp(1j * self.omega * self.psi(p))

    def rate(self, p):
        return self.omega * np.abs(self.psi.d1(p))


def _is_zero_handle(h: RealFunctionHandle, lo: float, hi: float) -> bool:
    grid = probe_grid(lo, hi, 33)
    return bool(np.all(np.asarray(h(grid)) == 0)) and bool(np.all(np.asarray(h.d1(grid)) == 0))


def oscillatory_integral(
    a: SingularAmplitude,
    ph: PhaseDescriptor,
    omega: float,
    tol: float = COMPACT_TOL,
    substitute: bool = True,
    max_evaluations: int = MAX_EVALUATIONS,
) -> QuadratureResult:
    """The integral of U(p) exp(i omega psi(p)) over [p1, p2].

    ``substitute=False`` integrates in the original variable; it is only
    accurate when mu = 1 and is kept as an independent cross-check.
    """
    if not omega > 0:
        raise PreconditionError(f"omega must be positive, got {omega}")
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    if _is_zero_handle(a.regular_part, a.p1, a.p2):
        return QuadratureResult(0j, 0.0, 1)
    if not substitute:
        g = _PlainIntegrand(a, ph, omega)
        stops = [] if ph.p0 is None else [ph.p0]
        return adaptive_quad(g, a.p1, a.p2, tol, stops, g.rate, max_evaluations)
    g = _SubstitutedIntegrand(a, ph, omega)
    upper = (a.p2 - a.p1) ** a.mu
    stops = []
    if ph.p0 is not None and a.p1 < ph.p0 < a.p2:
        stops.append(abs(ph.p0 - a.singular_point) ** a.mu)
    return adaptive_quad(g, 0.0, upper, tol, stops, g.rate, max_evaluations)


def line_cutoff(M: float, mu: float, alpha: float, tol: float) -> float:
    """Smallest P >= 1 with 2 M P^(mu - alpha) / (alpha - mu) <= tol / 2."""
    if not alpha > mu:
        raise PreconditionError(f"non-integrable datum: need alpha > mu, got alpha={alpha}, mu={mu}")
    if M == 0:
        return 1.0
    return max((4.0 * M / ((alpha - mu) * tol)) ** (1.0 / (alpha - mu)), 1.0)


def line_tail_bound(M: float, mu: float, alpha: float, P: float) -> float:
    return 2.0 * M * P ** (mu - alpha) / (alpha - mu)


def oscillatory_integral_line(
    amp: LineAmplitude,
    ph: PhaseDescriptor,
    omega: float,
    tol: float = LINE_TOL,
    cutoff: Optional[float] = None,
    max_evaluations: int = MAX_EVALUATIONS,
) -> QuadratureResult:
    """The integral over the whole line, truncated to [p1 - P, p1 + P]."""
    if not omega > 0:
        raise PreconditionError(f"omega must be positive, got {omega}")
    P = line_cutoff(amp.tail_M, amp.mu, amp.tail_alpha, tol) if cutoff is None else float(cutoff)
    if not P > 0:
        raise PreconditionError("cutoff must be positive")
    if _is_zero_handle(amp.regular_part, amp.p1 - P, amp.p1 + P):
        return QuadratureResult(0j, 0.0, 1)
    tail = line_tail_bound(amp.tail_M, amp.mu, amp.tail_alpha, P)
    right = SingularAmplitude(amp.p1, amp.p1 + P, amp.mu, amp.regular_part, side="left")
    left = SingularAmplitude(amp.p1 - P, amp.p1, amp.mu, amp.regular_part, side="right")
    budget = max_evaluations // 2
    total = oscillatory_integral(right, ph, omega, tol / 4, max_evaluations=budget)
    total = total + oscillatory_integral(left, ph, omega, tol / 4, max_evaluations=budget)
    return QuadratureResult(
        total.value, total.abs_error_estimate, total.panels_used, tail, total.converged, total.evaluations
    )


# ---------------------------------------------------------------------------
# norms


def _check_finite(grid, vals, what):
    bad = ~np.isfinite(vals)
    if bad.any():
        raise NonFiniteError(float(grid[np.flatnonzero(bad)[0]]), what)


def _polish(func, grid: np.ndarray, vals: np.ndarray, j: int, maximise: bool) -> float:
    """Bounded scalar refinement of a grid extremum over its neighbouring cells."""
    lo = grid[max(j - 1, 0)]
    hi = grid[min(j + 1, grid.size - 1)]
    best = float(vals[j])
    if hi <= lo:
        return best
    sgn = -1.0 if maximise else 1.0

    def obj(x):
        return sgn * float(np.asarray(func(np.array([x])))[0])

    res = minimize_scalar(obj, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * max(1.0, abs(hi - lo))})
    if res.success and math.isfinite(res.fun):
        refined = sgn * float(res.fun)
        best = max(best, refined) if maximise else min(best, refined)
    return best


def sup_norm(h, interval: tuple[float, float], probes: int = DEFAULT_PROBES) -> float:
    """max |h| over the closed interval; never below the grid maximum."""
    if probes < 64:
        raise PreconditionError("sup_norm needs at least 64 probes")
    lo, hi = interval
    grid = probe_grid(lo, hi, probes)
    vals = np.abs(np.asarray(h(grid)))
    _check_finite(grid, vals, "value")
    j = int(np.argmax(vals))
    if vals[j] == 0:
        return 0.0
    return _polish(lambda x: np.abs(np.asarray(h(x))), grid, vals, j, maximise=True)


def refined_minimum(func, interval: tuple[float, float], probes: int = DEFAULT_PROBES) -> float:
    """Grid-plus-refinement minimum of a real function, lowered by a safety margin."""
    lo, hi = interval
    grid = probe_grid(lo, hi, probes)
    vals = np.asarray(func(grid), dtype=float)
    _check_finite(grid, vals, "value")
    j = int(np.argmin(vals))
    best = _polish(func, grid, vals, j, maximise=False)
    scale = float(np.max(np.abs(vals)))
    return best - MARGIN * scale


def l1_norm_derivative(h: RealFunctionHandle, interval: tuple[float, float], tol: float = COMPACT_TOL) -> float:
    """Integral of |h'| over the interval."""
    lo, hi = interval

    def integrand(x):
        return np.abs(np.asarray(h.d1(x)))

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonConvergenceWarning)
        res = adaptive_quad(integrand, lo, hi, tol)
    if not res.converged or caught:
        warnings.warn(
            f"L1 norm of the derivative did not converge on [{lo}, {hi}]", NonConvergenceWarning, stacklevel=2
        )
    return float(res.value.real)


def min_abs_derivative(ph: PhaseDescriptor, interval: tuple[float, float], probes: int = DEFAULT_PROBES) -> float:
    """Refined minimum of |psi'| over an interval free of stationary points."""
    lo, hi = interval
    grid = probe_grid(lo, hi, probes)
    d1 = np.asarray(ph.psi.d1(grid), dtype=float)
    _check_finite(grid, d1, "phase derivative")
    scale = float(np.max(np.abs(d1)))
    if scale == 0 or np.any(np.abs(d1) < STATIONARY_FLOOR * scale) or (d1.min() < 0 < d1.max()):
        raise PreconditionError(f"stationary point inside interval [{lo}, {hi}]")
    vals = np.abs(d1)
    j = int(np.argmin(vals))
    best = _polish(lambda x: np.abs(np.asarray(ph.psi.d1(x))), grid, vals, j, maximise=False)
    return best - MARGIN * scale


def min_abs_nondegenerate(ph: PhaseDescriptor, interval: tuple[float, float], probes: int = DEFAULT_PROBES) -> float:
    """Refined minimum of |psi-tilde| over the interval."""
    lo, hi = interval
    grid = probe_grid(lo, hi, probes)
    if ph.p0 is not None and lo < ph.p0 < hi:
        grid = np.unique(np.concatenate([grid, [ph.p0]]))
    vals = np.abs(ph.nondegenerate(grid))
    _check_finite(grid, vals, "non-degenerate part")
    j = int(np.argmin(vals))
    scale = float(np.max(vals))
    if scale == 0:
        raise PreconditionError("non-degenerate part vanishes identically")
    best = _polish(lambda x: np.abs(ph.nondegenerate(x)), grid, vals, j, maximise=False)
    out = best - MARGIN * scale
    if not out > 0:
        raise PreconditionError(f"non-degenerate part vanishes near p={grid[j]:.6g}")
    return out
