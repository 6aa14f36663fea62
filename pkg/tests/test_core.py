import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ribotide.core import (
    DensityProfile,
    DomainError,
    Engine,
    FlowCurve,
    GeometryError,
    ModelParams,
    UorfGeometry,
    elongating_flow,
    scanning_flow,
    validate_geometry,
    validate_params,
)


def test_geometry_accepts_standard_and_minimal():
    g = validate_geometry(UorfGeometry(100, 200, 100, 400))
    assert (g.start, g.stop, g.downstream) == (100, 300, 300)
    assert UorfGeometry(1, 2, 0, 3).n_star == 3
    assert UorfGeometry(5, 7, 2).n_star == 14


def test_geometry_n_star_mismatch():
    with pytest.raises(GeometryError, match="n_star mismatch"):
        UorfGeometry(100, 200, 100, 399)


@pytest.mark.parametrize("args", [(0, 2, 0), (1, 1, 0), (1, 2, -1), (1.5, 2, 0), (True, 2, 0)])
def test_geometry_rejects(args):
    with pytest.raises(GeometryError):
        UorfGeometry(*args)


@pytest.mark.parametrize("kw", [dict(rho0=0, c=0.1), dict(rho0=1, c=0.1), dict(rho0=0.3, c=0),
                                dict(rho0=0.3, c=1), dict(rho0=0.3, c=0.1, v=0)])
def test_params_ranges(kw):
    with pytest.raises(DomainError):
        ModelParams(**kw)


def test_params_c0_consistency():
    g = UorfGeometry(10, 200, 10)
    p = ModelParams.scaled(0.3, 20, g)
    assert p.c == pytest.approx(0.1)
    validate_params(p, g)
    with pytest.raises(DomainError):
        validate_params(p, UorfGeometry(10, 100, 10))
    assert p.replace(rho0=0.2).rho0 == 0.2


def test_flow_examples():
    assert scanning_flow(0.3, 0.0) == 0.3
    assert scanning_flow(0.5, 1.0) == 0.0
    assert scanning_flow(0.4, 0.25) == pytest.approx(0.3, abs=1e-15)
    assert elongating_flow(0.2, 0.0) == 0.2
    assert elongating_flow(0.2, 1.0) == 0.0
    assert elongating_flow(0.5, 0.5) == 0.25


unit = st.floats(0.0, 1.0)


@given(unit, unit)
def test_flows_map_unit_square_into_unit_interval(a, b):
    assert 0.0 <= scanning_flow(a, b) <= 1.0
    assert 0.0 <= elongating_flow(a, b) <= 1.0


def _profile_arrays(g, data):
    s = np.array(data.draw(st.lists(st.floats(0, 1), min_size=g.n_star + 1, max_size=g.n_star + 1)))
    e = np.zeros(g.n_star + 1)
    for n in range(g.n1, g.stop):
        e[n] = data.draw(st.floats(0, 1)) * (1 - s[n])
    s[g.n_star] = 0.0
    return s, e


@given(st.data())
def test_valid_random_profiles_construct(data):
    g = UorfGeometry(2, 3, 2)
    s, e = _profile_arrays(g, data)
    prof = DensityProfile(g, s, e)
    assert prof.violations() == []
    assert prof.scanning_flows().shape == (g.n_star,)


@given(st.data(), st.sampled_from(["negative", "overfull", "e_outside", "ghost"]))
def test_invalid_random_profiles_rejected(data, kind):
    g = UorfGeometry(2, 3, 2)
    s, e = _profile_arrays(g, data)
    n = data.draw(st.integers(0, g.n_star - 1))
    if kind == "negative":
        s[n] = -data.draw(st.floats(1e-6, 1))
    elif kind == "overfull":
        m = data.draw(st.integers(g.n1, g.stop - 1))
        s[m], e[m] = 0.6, 0.6
    elif kind == "e_outside":
        m = data.draw(st.sampled_from([0, 1, g.stop, g.stop + 1]))
        e[m] = data.draw(st.floats(1e-6, 1))
        s[m] = 0.0
    else:
        s[g.n_star] = data.draw(st.floats(1e-6, 1))
    with pytest.raises(DomainError):
        DensityProfile(g, s, e)


def test_profile_is_immutable():
    prof = DensityProfile.empty(UorfGeometry(1, 2, 0))
    with pytest.raises(ValueError):
        prof.rho_s[0] = 1.0


def test_flow_curve_ordering():
    c = FlowCurve(((0.1, 0.05), (0.2, 0.06)), "tasep", errors=(0.01, 0.01))
    assert c.engine_tag is Engine.TASEP
    np.testing.assert_array_equal(c.rho0, [0.1, 0.2])
    with pytest.raises(DomainError):
        FlowCurve(((0.2, 0.05), (0.1, 0.06)), Engine.LIMIT)
    with pytest.raises(DomainError):
        FlowCurve(((0.1, 0.05),), Engine.LIMIT, errors=(0.1, 0.2))
