import numpy as np
import pytest

from corput import dispersive as disp
from corput.catalog import CATALOG, KINDS, CatalogError, instantiate, list_catalog
from corput.core import (
    PhaseDescriptor,
    PreconditionError,
    SingularAmplitude,
    SymbolDescriptor,
    validate_amplitude,
    validate_phase,
    validate_symbol,
)


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_default_instance_validates(name):
    obj = instantiate(name)
    if isinstance(obj, SingularAmplitude):
        assert validate_amplitude(obj).ok
    elif isinstance(obj, PhaseDescriptor):
        assert validate_phase(obj, (-1.0, 1.0) if obj.p0 is not None else (0.0, 1.0)).ok
    elif isinstance(obj, SymbolDescriptor):
        assert validate_symbol(obj).ok
    elif isinstance(obj, disp.WeightedDatum):
        assert disp.validate_weighted(obj).ok
    else:
        assert isinstance(obj, (disp.BandDatum, disp.LineSingularDatum))


def test_every_kind_is_populated():
    assert {e.kind for e in list_catalog()} == set(KINDS)
    for kind in KINDS:
        assert all(e.kind == kind for e in list_catalog(kind))


def test_schrodinger_symbol():
    s = instantiate("schrodinger_symbol")
    assert s.convexity_floor == 2
    np.testing.assert_array_equal(s.curvature(np.array([-3.0, 0.0, 7.0])), 2.0)


def test_half_klein_gordon_symbol():
    s = instantiate("half_klein_gordon_symbol")
    env = s.lower_envelope
    assert (env.R, env.c, env.beta) == (1.0, 2**-1.5, 3.0)
    assert (s.upper_envelope.c_plus, s.upper_envelope.beta_plus) == (1.0, 3.0)
    assert s.asymptotic_velocities == (-1.0, 1.0)


def test_power_phase():
    ph = instantiate("power_phase", {"alpha": 1.5})
    assert ph.rho == 2.5
    np.testing.assert_array_equal(ph.nondegenerate(np.linspace(-1, 1, 5)), 1.0)
    p = np.array([0.5, 2.0, -2.0])
    np.testing.assert_allclose(ph.psi.d1(p), np.abs(p) ** 1.5)


def test_power_phase_needs_c2():
    with pytest.raises(PreconditionError):
        instantiate("power_phase", {"alpha": 0.5})


def test_weighted_datum_remark_constants():
    d = instantiate("weighted_datum", {"mu": 0.5, "alpha": 4})
    assert d.M == 1.0 and d.M_prime == 2.0**4 and d.r == 2.0


def test_cubic_phase_order():
    ph = instantiate("cubic_phase", {"p0": 0.5})
    assert ph.rho == 3.0


def test_vanishing_edge():
    a = instantiate("vanishing_edge_amplitude", {"p1": 0.0, "p2": 2.0, "scale": 3.0})
    assert abs(a.regular_part(np.array([2.0]))[0]) == 0.0
    assert a.regular_part(np.array([0.0]))[0] == 3.0


def test_quadratic_phase_is_shifted_schrodinger_phase():
    ph = instantiate("quadratic_phase", {"p0": 0.75, "curvature": -1.0})
    p = np.linspace(-2, 2, 9)
    # v p - p^2 with v = 2 p0
    np.testing.assert_allclose(ph.psi(p), 1.5 * p - p**2)


def test_unknown_name():
    with pytest.raises(CatalogError, match="unknown catalog name"):
        instantiate("nope")


def test_unknown_parameter():
    with pytest.raises(CatalogError):
        instantiate("power_phase", {"beta": 1.0})


def test_unknown_kind():
    with pytest.raises(CatalogError):
        list_catalog("widget")


def test_out_of_range_parameter():
    with pytest.raises(PreconditionError):
        instantiate("power_singular_amplitude", {"mu": 1.5})
    with pytest.raises(PreconditionError):
        instantiate("power_singular_amplitude", {"mu": 0.5, "c0": 0.0})
