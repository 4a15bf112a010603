import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from verdict_fixtures import FIXTURES

from corner_cgo.corner import IncidentFieldModel, MediumModel
from corner_cgo.errors import ConfigurationError, PreconditionError
from corner_cgo.verdict import (
    ITEM_TAGS,
    CornerSpec,
    IncidentDescriptor,
    ScatterVerdict,
    classify,
    matches_excluded_expansion,
    rectangle_witness,
    witness_cross_check,
)


@pytest.mark.parametrize("name,build,outcome,tag", FIXTURES, ids=[f[0] for f in FIXTURES])
def test_decision_table_fixture(name, build, outcome, tag):
    v = classify(build())
    assert (v.outcome, v.item_tag) == (outcome, tag)


def test_no_jump_reason():
    v = classify(CornerSpec(1.0, MediumModel(0.0, 0.0), IncidentDescriptor(True, True)))
    assert v.reason == "no jump at corner"


def test_excluded_reference_and_csv_row():
    name, build, *_ = next(f for f in FIXTURES if f[2] == "ExcludedClass")
    v = classify(build())
    assert v.reference and v.csv_row() == ["ExcludedClass", "", v.reference]
    v = ScatterVerdict.scatters("I-a", "x")
    assert v.csv_row() == ["AlwaysScatters", "I-a", "x"]


def test_verdict_tag_invariant():
    with pytest.raises(ConfigurationError):
        ScatterVerdict("AlwaysScatters")
    with pytest.raises(ConfigurationError):
        ScatterVerdict("Inconclusive", "I-a")
    with pytest.raises(ConfigurationError):
        ScatterVerdict("Maybe")


def test_descriptor_validation():
    with pytest.raises(ConfigurationError):
        IncidentDescriptor(True, True, N0=1)
    with pytest.raises(ConfigurationError):
        IncidentDescriptor(False, True, N0=0)
    with pytest.raises(ConfigurationError):
        IncidentDescriptor(False, True, N0=2)
    with pytest.raises(ConfigurationError):
        IncidentDescriptor(False, False, N0=1)
    IncidentDescriptor(False, True, N0=1)


@pytest.mark.parametrize("theta0", [0.0, math.pi / 2, math.pi, -0.3])
def test_corner_spec_rejects_bad_angles(theta0):
    with pytest.raises(ConfigurationError):
        CornerSpec(theta0, MediumModel(1.0, 0.0), IncidentDescriptor(True, True))


def test_concrete_field_descriptors():
    d = CornerSpec(math.pi / 3, MediumModel(1.0, 0.0), IncidentFieldModel(1.0, ((3, 1.0, 0),))).descriptor()
    assert (d.value_nonzero, d.gradient_nonzero, d.N0) == (False, False, 3)


def test_excluded_expansion_requires_even_orders():
    v = IncidentFieldModel(1.0, ((0, 1.0, 0), (2, -2.0, -2.0), (3, 0.1, 0)))
    assert not matches_excluded_expansion(v, 1.0, 0.0, math.pi / 3)
    v = IncidentFieldModel(1.0, ((0, 1.0, 0), (2, -2.0, -2.0), (4, 0.1, 0)))
    assert matches_excluded_expansion(v, 1.0, 0.0, math.pi / 3)
    v = IncidentFieldModel(1.0, ((0, 1.0, 0), (2, -2.0 * (1 + 1e-8), -2.0)))
    assert not matches_excluded_expansion(v, 1.0, 0.0, math.pi / 3)


# -- properties

jumps = st.sampled_from([0.0, 0.5, -0.4, 1.0, 2.0])
angles = st.floats(0.01, math.pi - 0.01).filter(lambda t: abs(t - math.pi / 2) > 1e-6) | st.sampled_from(
    [math.pi / 4, 3 * math.pi / 4, math.pi / 3, math.pi / 6]
)
descriptors = st.one_of(
    st.just(IncidentDescriptor(True, True)),
    st.just(IncidentDescriptor(True, False)),
    st.builds(lambda n: IncidentDescriptor(False, n == 1, n), st.integers(1, 8)),
)
media = st.one_of(
    st.builds(MediumModel, jumps, jumps),
    st.builds(
        lambda c1, c2, b: MediumModel(c1, c2, beta1=b, C1=0.1, profile="power-perturbed"),
        jumps,
        jumps,
        st.floats(0.1, 4),
    ),
)


@given(th=angles, m=media, d=descriptors)
def test_classify_is_total(th, m, d):
    v = classify(CornerSpec(th, m, d))
    assert v.outcome in ("AlwaysScatters", "Inconclusive", "ExcludedClass")
    assert (v.item_tag is not None) == v.always_scatters
    assert v.item_tag is None or v.item_tag in ITEM_TAGS
    if v.outcome != "ExcludedClass":
        assert v.reason


@given(c2=st.floats(0.1, 3), b1=st.floats(1.01, 5), th=angles)
def test_monotone_I_b_to_I_c(c2, b1, th):
    m = MediumModel(0.0, c2, beta1=b1, C1=0.1, profile="power-perturbed")
    weak = classify(CornerSpec(th, m, IncidentDescriptor(True, True)))
    strong = classify(CornerSpec(th, m, IncidentDescriptor(True, False)))
    assert weak.always_scatters
    assert strong.always_scatters


witness_params = st.tuples(
    st.integers(1, 12),
    st.integers(1, 12),
    st.floats(0.05, 20).filter(lambda a: abs(a - 1) > 1e-3),
    st.floats(-10, 10),
    st.floats(-10, 10),
).filter(lambda t: t[3] != 0 or t[4] != 0)


@given(p=witness_params)
def test_witness_never_always_scatters(p):
    rep = witness_cross_check(rectangle_witness(*p), n_samples=200)
    assert rep.classify_consistent and not rep.verdict.always_scatters
    assert rep.identities_hold, rep.residuals


def test_default_witness():
    w = rectangle_witness()
    assert w.k == pytest.approx(math.sqrt(2))
    rep = witness_cross_check(w)
    assert rep.passed and rep.n_samples == 1000
    assert max(rep.residuals.values()) <= 1e-12
    assert rep.verdict.outcome == "Inconclusive"
    spec = w.corner_spec()
    assert spec.media.c1 == pytest.approx(1 / math.sqrt(2)) and spec.media.c1 == spec.media.c2


def test_degenerate_witness_branches():
    w = rectangle_witness(a1=0.0, a2=1.0)
    x = np.linspace(0, math.pi, 7)
    assert np.all(w.wD(x, x[::-1]) == 0)
    assert witness_cross_check(w).passed
    w = rectangle_witness(a1=1.0, a2=0.0)
    assert np.all(w.wN(x, x[::-1]) == 0)
    rep = witness_cross_check(w)
    assert rep.passed
    assert w.corner_spec().descriptor().N0 == 2


def test_witness_coefficients_and_expression():
    w = rectangle_witness(2, 3, 4.0, 1.5, -0.5)
    assert w.coefficients["u_total"] == (1.5 / 4.0, -0.5)
    assert w.coefficients["wD"] == (1.5 * (1 / 4.0 - 1), 0.0)
    assert w.coefficients["wN"] == (0.0, -0.5 * 3.0)
    assert "sin(2*x1)" in w.expression("u_in")
    x1, x2 = 0.3, 1.1
    assert w.wD(x1, x2) == pytest.approx(w.u_total(x1, x2) - w.u_in(x1, x2))
    assert w.wN(x1, x2) == pytest.approx(4.0 * w.u_total(x1, x2) - w.u_in(x1, x2))


@pytest.mark.parametrize("kw", [dict(a0=1.0), dict(a0=-1.0), dict(k1=0), dict(k2=1.5), dict(a1=0.0, a2=0.0)])
def test_witness_preconditions(kw):
    with pytest.raises(PreconditionError):
        rectangle_witness(**kw)
