import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corput.catalog import instantiate
from corput.core import (
    NonFiniteError,
    PhaseDescriptor,
    PreconditionError,
    RealFunctionHandle,
    SingularAmplitude,
    SpaceTimeCone,
    ValidationError,
    constant_handle,
    lemma_concavity_gap,
    lemma_dyadic_comparability,
    probe_grid,
    reflect_band,
    validate_amplitude,
    validate_phase,
    validate_symbol,
    zeta_tail_bound,
)
from corput.quadrature import oscillatory_integral


def poly(c0, c1=0.0):
    return RealFunctionHandle(lambda p: c0 + c1 * np.asarray(p), lambda p: c1 + 0 * np.asarray(p))


class TestAmplitudeValidation:
    def test_constant_regular_part_is_clean(self):
        assert validate_amplitude(SingularAmplitude(0, 1, 0.5, constant_handle(1.0))).ok

    def test_vanishing_regular_part_with_singularity(self):
        rep = validate_amplitude(SingularAmplitude(0, 1, 0.5, poly(0.0, 1.0)))
        assert rep.clauses() == ["regular part vanishes at the singularity with mu != 1"]
        assert rep.violations[0].location == 0.0
        with pytest.raises(ValidationError):
            rep.raise_if_invalid()

    def test_regular_amplitude_may_vanish(self):
        assert validate_amplitude(SingularAmplitude(0, 1, 1.0, poly(0.0, 1.0))).ok

    def test_right_singular_checks_right_edge(self):
        rep = validate_amplitude(SingularAmplitude(0, 1, 0.5, poly(1.0, -1.0), side="right"))
        assert not rep.ok
        assert rep.violations[0].location == 1.0

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_probe_is_reported(self):
        h = RealFunctionHandle(lambda p: 1 / (np.asarray(p) - 0.5), lambda p: -1 / (np.asarray(p) - 0.5) ** 2)
        grid = probe_grid(0, 1, 257)
        assert 0.5 in grid
        rep = validate_amplitude(SingularAmplitude(0, 1, 1.0, h))
        assert any(v.location == 0.5 for v in rep.violations)

    def test_too_few_probes(self):
        with pytest.raises(PreconditionError):
            validate_amplitude(SingularAmplitude(0, 1, 0.5, constant_handle(1.0)), probes=8)

    @pytest.mark.parametrize("mu", [0.0, -0.5, 1.5])
    def test_mu_range(self, mu):
        with pytest.raises(PreconditionError):
            SingularAmplitude(0, 1, mu, constant_handle(1.0))

    def test_band_order(self):
        with pytest.raises(PreconditionError):
            SingularAmplitude(1, 1, 0.5, constant_handle(1.0))


class TestPhaseValidation:
    def test_quadratic_phase_with_sign_factor(self):
        assert validate_phase(instantiate("quadratic_phase", {"p0": 0, "curvature": -1}), (-1, 1)).ok

    def test_power_phase(self):
        ph = instantiate("power_phase", {"alpha": 1.5})
        assert ph.rho == 2.5
        assert validate_phase(ph, (-1, 1)).ok

    def test_wrong_order_is_a_factorization_mismatch(self):
        good = instantiate("quadratic_phase", {"p0": 0, "curvature": -1})
        bad = PhaseDescriptor(good.psi, 0.0, 3.0, good.nondegenerate_part)
        assert "factorization mismatch" in validate_phase(bad, (-1, 1)).clauses()

    def test_wrong_stationary_point(self):
        good = instantiate("quadratic_phase", {"p0": 0.5, "curvature": -1})
        bad = PhaseDescriptor(good.psi, 0.2, 2.0, good.nondegenerate_part)
        assert "factorization mismatch" in validate_phase(bad, (0, 1)).clauses()

    def test_non_monotone_derivative(self):
        # psi' = p^3 - p changes monotonicity on both sides of 0 and is not of the declared form
        psi = RealFunctionHandle(
            lambda p: np.asarray(p) ** 4 / 4 - np.asarray(p) ** 2 / 2,
            lambda p: np.asarray(p) ** 3 - np.asarray(p),
            lambda p: 3 * np.asarray(p) ** 2 - 1,
        )
        ph = PhaseDescriptor(psi, None, 2.0, lambda p: np.ones_like(p))
        clauses = validate_phase(ph, (0.5, 2.0)).clauses()
        assert "stationary point inside the band" in clauses
        assert "monotonicity violation" in clauses

    def test_vanishing_non_degenerate_part(self):
        psi = RealFunctionHandle(lambda p: -np.asarray(p) ** 2, lambda p: -2 * np.asarray(p), lambda p: -2 + 0 * p)
        ph = PhaseDescriptor(psi, 0.0, 2.0, lambda p: -2 * np.sign(p))
        assert "non-degenerate part vanishes on the band" in validate_phase(ph, (-1, 1)).clauses()

    def test_wrong_second_derivative(self):
        psi = RealFunctionHandle(lambda p: np.asarray(p), lambda p: 1 + 0 * p, lambda p: 5 + 0 * p)
        ph = PhaseDescriptor(psi, None, 2.0, lambda p: np.ones_like(p))
        assert "second derivative mismatch" in validate_phase(ph, (0, 1)).clauses()

    def test_linear_phase_without_stationary_point(self):
        assert validate_phase(instantiate("linear_phase"), (0, 1)).ok

    def test_band_outside_domain(self):
        psi = RealFunctionHandle(lambda p: p, lambda p: 1 + 0 * p, lambda p: 0 * p, domain=(0.0, 2.0))
        with pytest.raises(PreconditionError):
            validate_phase(PhaseDescriptor(psi, None, 2.0, np.ones_like), (-1, 1))

    def test_rho_must_exceed_one(self):
        ph = instantiate("quadratic_phase")
        with pytest.raises(PreconditionError):
            PhaseDescriptor(ph.psi, 0.0, 1.0, ph.nondegenerate_part)

    @pytest.mark.parametrize(
        "name,params,band",
        [
            ("quadratic_phase", {"p0": 0.5, "curvature": -1}, (0, 1)),
            ("quadratic_phase", {"p0": 2.0, "curvature": 1}, (0, 1)),
            ("power_phase", {"alpha": 1.5, "p0": 0.5}, (0, 1)),
            ("cubic_phase", {"p0": 0.5}, (0, 1)),
        ],
    )
    def test_catalog_phases_accept_and_reject(self, name, params, band):
        ph = instantiate(name, params)
        assert validate_phase(ph, band).ok
        wrong_rho = PhaseDescriptor(ph.psi, ph.p0, ph.rho + 0.5, ph.nondegenerate_part)
        assert not validate_phase(wrong_rho, band).ok
        wrong_p0 = PhaseDescriptor(ph.psi, ph.p0 + 0.3, ph.rho, ph.nondegenerate_part)
        assert not validate_phase(wrong_p0, band).ok


class TestReflection:
    def test_right_singular_becomes_left_singular(self):
        a = SingularAmplitude(0, 1, 0.5, constant_handle(1.0), side="right")
        ph = instantiate("linear_phase")
        ra, rph = reflect_band(a, ph)
        assert ra.side == "left"
        p = np.array([0.1, 0.4, 0.9])
        np.testing.assert_allclose(ra(p), p**-0.5)
        np.testing.assert_allclose(rph.psi(p), 1 - p)
        np.testing.assert_allclose(rph.psi.d1(p), -1.0)

    def test_double_reflection_returns_the_original(self):
        a = SingularAmplitude(0, 1, 0.5, constant_handle(1.0), side="right")
        ph = instantiate("quadratic_phase", {"p0": 0.3, "curvature": -1})
        ra, rph = reflect_band(*reflect_band(a, ph))
        assert ra is a and rph is ph

    def test_reflected_phase_is_valid_with_mirrored_stationary_point(self):
        a = instantiate("power_singular_amplitude")
        ph = instantiate("power_phase", {"alpha": 1.5, "p0": 0.3})
        _, rph = reflect_band(a, ph)
        assert rph.p0 == pytest.approx(0.7)
        assert validate_phase(rph, (0, 1)).ok

    @pytest.mark.parametrize("mu", [1.0, 0.5, 0.75])
    @pytest.mark.parametrize("omega", [3.0, 250.0])
    def test_integral_is_unchanged(self, mu, omega):
        a = instantiate("power_singular_amplitude", {"mu": mu, "c1": 1.0})
        ph = instantiate("quadratic_phase", {"p0": 0.4, "curvature": -1})
        ra, rph = reflect_band(a, ph)
        tol = 1e-10
        assert abs(oscillatory_integral(a, ph, omega, tol).value - oscillatory_integral(ra, rph, omega, tol).value) <= 2 * tol


class TestSymbols:
    def test_catalog_symbols_validate(self):
        for name in ("schrodinger_symbol", "half_klein_gordon_symbol"):
            assert validate_symbol(instantiate(name)).ok

    def test_bad_floor_is_caught(self):
        s = instantiate("schrodinger_symbol")
        from dataclasses import replace

        assert "convexity floor violated" in validate_symbol(replace(s, convexity_floor=3.0)).clauses()

    def test_klein_gordon_envelopes_on_64_probes(self):
        p = np.concatenate([np.geomspace(1, 50, 32), -np.geomspace(1, 50, 32)])
        f2 = instantiate("half_klein_gordon_symbol").curvature(p)
        ap = np.abs(p)
        assert np.all(2**-1.5 * ap**-3 <= f2)
        assert np.all(f2 <= ap**-3)

    def test_stable_gaps_at_large_frequency(self):
        s = instantiate("half_klein_gordon_symbol")
        p = 1e6
        assert s.upper_gap(np.array([p]))[0] == pytest.approx(1 / (2 * p**2), rel=1e-6)
        assert s.velocity_gap(1e4, 1e4 + 1) > 0


class TestCones:
    def test_membership(self):
        c = SpaceTimeCone(-1.0, 2.0)
        assert c.contains(1.0, 2.0)
        assert c.contains(2.0, -2.0)
        assert not c.contains(1.0, 2.5)
        assert not c.contains(0.0, 0.0)
        assert c.complement_contains(1.0, 3.0)
        assert not c.complement_contains(0.0, 3.0)

    def test_half_infinite(self):
        c = SpaceTimeCone(-math.inf, 0.0)
        assert c.contains(1.0, -1e300)
        assert not c.bounded
        with pytest.raises(PreconditionError):
            c.clip(5)

    def test_order(self):
        with pytest.raises(PreconditionError):
            SpaceTimeCone(1.0, 1.0)

    @given(st.floats(0.01, 100), st.floats(-1e3, 1e3))
    def test_complement_is_exclusive(self, t, x):
        c = SpaceTimeCone(-0.5, 1.5)
        assert bool(c.contains(t, x)) != bool(c.complement_contains(t, x))


class TestLemmas:
    @pytest.mark.parametrize("alpha,x,y,expected", [(1, 3, 1, 0.0), (0.5, 4, 0, 0.0), (0.5, 4, 1, math.sqrt(3) - 1)])
    def test_concavity_examples(self, alpha, x, y, expected):
        assert lemma_concavity_gap(alpha, x, y) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("args", [(0.0, 1, 0), (1.5, 1, 0), (0.5, 1, 2), (0.5, 1, -0.1)])
    def test_concavity_domain(self, args):
        with pytest.raises(PreconditionError):
            lemma_concavity_gap(*args)

    @settings(max_examples=300)
    @given(st.floats(1e-6, 1.0), st.floats(0, 1e3), st.floats(0, 1))
    def test_concavity_gap_nonnegative(self, alpha, x, frac):
        y = x * frac
        assert lemma_concavity_gap(alpha, x, y) >= -1e-12 * max(1.0, x**alpha)

    @pytest.mark.parametrize("n,p", [(1, 2.0), (-2, -1.5), (5, 5.5)])
    def test_dyadic_examples(self, n, p):
        assert lemma_dyadic_comparability(n, p)

    @pytest.mark.parametrize("n", [0, -1])
    def test_dyadic_excluded_cells(self, n):
        with pytest.raises(PreconditionError):
            lemma_dyadic_comparability(n, n + 0.5)

    @given(st.one_of(st.integers(-10_000, -2), st.integers(1, 10_000)), st.floats(0, 1))
    def test_dyadic_always_true(self, n, frac):
        assert lemma_dyadic_comparability(n, n + frac)

    @pytest.mark.parametrize("sigma,expected", [(2, 2.0), (1.5, 3.0), (11, 1.1)])
    def test_zeta_examples(self, sigma, expected):
        assert zeta_tail_bound(sigma) == pytest.approx(expected, rel=1e-15)

    def test_zeta_partial_sum_at_two(self):
        n = np.arange(1, 10**6 + 1, dtype=float)
        partial = float(np.sum(n**-2.0))
        assert partial == pytest.approx(1.6449331, abs=1e-7)
        assert partial <= zeta_tail_bound(2)

    @pytest.mark.parametrize("sigma", [1.0, 0.5])
    def test_zeta_domain(self, sigma):
        with pytest.raises(PreconditionError):
            zeta_tail_bound(sigma)


def test_non_finite_error_names_point():
    err = NonFiniteError(0.25, "phase")
    assert "0.25" in str(err)
