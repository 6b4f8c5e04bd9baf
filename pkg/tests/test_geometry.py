import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import gamma

from latstretch.errors import InvalidBodyError, InvalidInputError
from latstretch.geometry import (
    ConvexBody,
    DiagonalStretch,
    axis_extent,
    balanced_representative,
    body_constants,
    body_from_spec,
    contains,
    cross_section_measure,
    gauge,
    is_balanced,
    load_body,
    volume,
)
from latstretch.geometry import _max_gauge_on_sphere

from conftest import euclidean_gauge

exponents = st.sampled_from([1.5, 2.0, 3.0, 4.0])
axis_lists = st.lists(st.floats(0.2, 5.0), min_size=2, max_size=4)


def body_strategy():
    return st.builds(lambda p, axes: ConvexBody.p_ellipsoid(p, axes), exponents, axis_lists)


# --- gauge -----------------------------------------------------------------

def test_gauge_euclidean_norm(disk):
    assert gauge(disk, (3.0, 4.0)) == pytest.approx(5.0, abs=1e-15)


def test_gauge_axis_boundary_point():
    assert gauge(ConvexBody.p_ellipsoid(2.0, (2.0, 1.0)), (2.0, 0.0)) == 1.0


def test_gauge_at_origin_is_zero(ball3):
    assert gauge(ball3, (0.0, 0.0, 0.0)) == 0.0


def test_gauge_rejects_non_finite(disk):
    with pytest.raises(InvalidInputError):
        gauge(disk, (math.nan, 0.0))
    with pytest.raises(InvalidInputError):
        gauge(disk, (1.0, 2.0, 3.0))


@given(body_strategy(), st.data())
def test_gauge_is_homogeneous(body, data):
    x = np.array(data.draw(st.lists(st.floats(-10, 10), min_size=body.dimension, max_size=body.dimension)))
    t = data.draw(st.floats(0.0, 10.0))
    gx = gauge(body, x)
    assert abs(gauge(body, t * x) - t * gx) <= 1e-12 * (1 + t * gx)


def test_gauge_homogeneity_bulk():
    rng = np.random.default_rng(0)
    for _ in range(300):
        d = int(rng.integers(2, 5))
        body = ConvexBody.p_ellipsoid(float(rng.choice([1.5, 2.0, 3.0])), rng.uniform(0.2, 3.0, d))
        x = rng.normal(size=d) * 5
        t = rng.uniform(0.0, 10.0)
        gx = gauge(body, x)
        assert abs(gauge(body, t * x) - t * gx) <= 1e-12 * (1 + t * gx)


@given(body_strategy(), st.data())
def test_gauge_is_unconditional(body, data):
    x = np.array(data.draw(st.lists(st.floats(-10, 10), min_size=body.dimension, max_size=body.dimension)))
    g = gauge(body, x)
    for mask in range(2 ** body.dimension):
        signs = np.array([-1.0 if mask >> j & 1 else 1.0 for j in range(body.dimension)])
        assert gauge(body, signs * x) == g


@given(body_strategy(), st.data())
def test_gauge_orthant_monotone(body, data):
    d = body.dimension
    x = np.array(data.draw(st.lists(st.floats(-10, 10), min_size=d, max_size=d)))
    shrink = np.array(data.draw(st.lists(st.floats(0.0, 1.0), min_size=d, max_size=d)))
    assert gauge(body, shrink * x) <= gauge(body, x) * (1 + 1e-15)


def test_orthant_monotone_bulk():
    rng = np.random.default_rng(1)
    for _ in range(300):
        d = int(rng.integers(2, 5))
        body = ConvexBody.p_ellipsoid(float(rng.choice([1.5, 2.0, 3.0])), rng.uniform(0.2, 3.0, d))
        x = rng.normal(size=d)
        y = x * rng.uniform(0, 1, d) * rng.choice([-1, 1], d)
        assert gauge(body, y) <= gauge(body, x) * (1 + 1e-15)


# --- contains --------------------------------------------------------------

def test_contains_boundary_point(disk):
    assert contains(disk, DiagonalStretch.identity(2), 5.0, (3.0, 4.0))


def test_contains_stretched(disk):
    A = DiagonalStretch((2.0, 0.5))
    assert contains(disk, A, 4.0, (8.0, 0.0))
    assert not contains(disk, A, 4.0, (0.0, 3.0))


def test_contains_outside(disk):
    assert not contains(disk, DiagonalStretch.identity(2), 1.0, (1.0, 1.0))


def test_contains_rejects_bad_radius(disk):
    with pytest.raises(InvalidInputError):
        contains(disk, DiagonalStretch.identity(2), 0.0, (0.0, 0.0))


# --- measures --------------------------------------------------------------

def test_volume_disk(disk):
    assert volume(disk) == pytest.approx(math.pi, rel=1e-14)


def test_volume_ellipse():
    assert volume(ConvexBody.p_ellipsoid(2.0, (2.0, 3.0))) == pytest.approx(6 * math.pi, rel=1e-14)


def test_volume_p4_against_monte_carlo(oracles):
    exact = 4 * gamma(1.25) ** 2 / gamma(1.5)
    body = ConvexBody.p_ellipsoid(4.0, (1.0, 1.0))
    assert volume(body) == pytest.approx(exact, rel=1e-13)
    mc = oracles["p4_area_monte_carlo"]
    assert abs(volume(body) - mc["estimate"]) <= 3 * mc["stderr"]


def test_volume_scales_with_determinant():
    rng = np.random.default_rng(2)
    for _ in range(20):
        d = int(rng.integers(2, 5))
        body = ConvexBody.p_ellipsoid(float(rng.choice([1.5, 2.0, 3.0])), rng.uniform(0.3, 2.0, d))
        B = DiagonalStretch(tuple(rng.uniform(0.2, 5.0, d)))
        assert body.stretched(B).volume == pytest.approx(B.det * body.volume, rel=1e-8)


def test_generic_gauge_volume_matches_closed_form():
    body = ConvexBody.from_gauge(2, lambda X: euclidean_gauge(X) / 1.5)
    assert body.volume == pytest.approx(math.pi * 2.25, rel=1e-8)
    quartic = ConvexBody.from_gauge(2, lambda X: np.sum(np.asarray(X) ** 4, axis=-1) ** 0.25)
    assert quartic.volume == pytest.approx(ConvexBody.p_ellipsoid(4.0, (1, 1)).volume, rel=1e-8)


@pytest.fixture(scope="module")
def generic_ellipsoid3():
    # nested quadrature in 3-D costs seconds, so build it once
    return ConvexBody.from_gauge(3, lambda X: euclidean_gauge(np.asarray(X) / np.array([1.0, 2.0, 3.0])))


def test_generic_3d_volume(generic_ellipsoid3):
    assert generic_ellipsoid3.volume == pytest.approx(4 / 3 * math.pi * 6, rel=1e-8)


def test_generic_volume_scales_with_determinant():
    body = ConvexBody.from_gauge(2, lambda X: np.sum(np.abs(np.asarray(X)) ** 3, axis=-1) ** (1 / 3))
    B = DiagonalStretch((2.5, 0.7))
    assert body.stretched(B).volume == pytest.approx(B.det * body.volume, rel=1e-8)


def test_cross_sections(half_disk, ball3):
    assert cross_section_measure(half_disk, 0) == pytest.approx(1.0)
    assert cross_section_measure(half_disk, 1) == pytest.approx(1.0)
    for j in range(3):
        assert cross_section_measure(ball3, j) == pytest.approx(math.pi)
    ell = ConvexBody.p_ellipsoid(2.0, (1.0, 2.0, 3.0))
    assert cross_section_measure(ell, 0) == pytest.approx(6 * math.pi)


def test_cross_section_rejects_bad_axis(disk):
    with pytest.raises(InvalidInputError):
        cross_section_measure(disk, 2)


def test_generic_cross_sections(generic_ellipsoid3):
    body = generic_ellipsoid3
    assert body.cross_sections[0] == pytest.approx(6 * math.pi, rel=1e-8)
    assert body.cross_sections[2] == pytest.approx(2 * math.pi, rel=1e-8)


# --- balancing -------------------------------------------------------------

def test_balanced_body_is_fixed(half_disk):
    B, _ = balanced_representative(half_disk)
    assert np.allclose(B.array, 1.0, atol=1e-12)


def test_balance_unit_disk(disk):
    B, balanced = balanced_representative(disk)
    assert np.allclose(B.array, 0.5, atol=1e-14)
    assert np.allclose(balanced.semi_axes, 0.5, atol=1e-14)
    assert is_balanced(balanced)


def test_balance_sections_two_and_eight():
    body = ConvexBody.p_ellipsoid(2.0, (4.0, 1.0))
    assert body.cross_sections == pytest.approx((2.0, 8.0))
    B, balanced = balanced_representative(body)
    assert B.entries == pytest.approx((0.125, 0.5), abs=1e-14)
    assert B.entries[1] * body.cross_sections[0] == pytest.approx(1.0)
    assert B.entries[0] * body.cross_sections[1] == pytest.approx(1.0)


def test_balance_idempotent_and_exact():
    rng = np.random.default_rng(3)
    for _ in range(50):
        d = int(rng.integers(2, 5))
        body = ConvexBody.p_ellipsoid(float(rng.choice([1.5, 2.0, 3.0])), np.exp(rng.uniform(-3, 3, d)))
        _, balanced = balanced_representative(body)
        assert all(abs(s - 1.0) <= 1e-9 for s in balanced.cross_sections)
        B2, _ = balanced_representative(balanced)
        assert np.allclose(B2.array, 1.0, atol=1e-9)


def test_balance_generic_gauge():
    body = ConvexBody.from_gauge(2, lambda X: euclidean_gauge(np.asarray(X) / np.array([3.0, 1.0])))
    _, balanced = balanced_representative(body)
    assert balanced.cross_sections == pytest.approx((1.0, 1.0), abs=1e-8)


# --- extents and constants -------------------------------------------------

def test_axis_extent_pythagoras(disk):
    assert axis_extent(disk, [0.6], 1) == pytest.approx(0.8, abs=1e-12)


def test_axis_extent_outside_prefix(disk):
    assert axis_extent(disk, [1.5], 1) == 0.0


def test_axis_extent_p4_closed_form():
    body = ConvexBody.p_ellipsoid(4.0, (1.0, 1.0))
    assert abs(axis_extent(body, [0.5], 1) - (1 - 0.5 ** 4) ** 0.25) <= 1e-10


def test_axis_extent_vectorised_matches_closed_form():
    body = ConvexBody.p_ellipsoid(3.0, (1.0, 1.0, 1.0))
    prefixes = np.array([[0.1, 0.2], [0.5, 0.5], [0.9, 0.1]])
    got = axis_extent(body, prefixes, 2)
    want = (1 - np.sum(prefixes ** 3, axis=1)) ** (1 / 3)
    assert np.max(np.abs(got - want)) <= 1e-10


def test_axis_extent_first_axis(ball3):
    assert axis_extent(ball3, [], 0) == pytest.approx(1.0, abs=1e-12)


def test_constants_balanced_disk(half_disk):
    inradius, C = body_constants(half_disk)
    assert inradius == pytest.approx(0.5)
    assert C == pytest.approx(0.5)
    assert half_disk.sandwich_constant == pytest.approx(2.0)


def test_constants_ellipse():
    inradius, C = body_constants(ConvexBody.p_ellipsoid(2.0, (2.0, 0.5)))
    assert inradius == pytest.approx(0.5)
    assert C == pytest.approx(2.0)


def test_inradius_off_axis_for_small_p(oracles):
    body = ConvexBody.p_ellipsoid(1.5, (1.0, 1.0))
    dense = oracles["p15_inradius_dense"]
    assert body.inradius == pytest.approx(dense, abs=1e-8)
    assert body.inradius == pytest.approx(2 ** (0.5 - 1 / 1.5), rel=1e-9)


def test_inradius_generic_2d():
    body = ConvexBody.from_gauge(2, lambda X: np.sum(np.abs(np.asarray(X)) ** 1.5, axis=-1) ** (1 / 1.5))
    assert body.inradius == pytest.approx(2 ** (0.5 - 1 / 1.5), rel=1e-9)


def test_sphere_search_finds_off_axis_maximum_in_3d():
    # the search only needs gauge values, so a closed-form body exercises it cheaply
    body = ConvexBody.p_ellipsoid(1.5, (1.0, 1.0, 1.0))
    assert _max_gauge_on_sphere(body) == pytest.approx(3 ** (1 / 1.5 - 0.5), rel=1e-6)


def test_inradius_below_bounding_constant():
    rng = np.random.default_rng(4)
    for _ in range(20):
        d = int(rng.integers(2, 4))
        body = ConvexBody.p_ellipsoid(float(rng.choice([1.5, 2.0, 3.0])), rng.uniform(0.2, 3.0, d))
        assert 0 < body.inradius <= body.bounding_constant < math.inf


# --- stretches -------------------------------------------------------------

def test_stretch_accessors():
    A = DiagonalStretch((0.5, 2.0))
    assert A.det == 1.0
    assert A.tr_inverse == 2.5
    assert A.sup_inverse == 2.0
    assert A.deviation() == 1.0
    assert A.is_unimodular()
    assert not DiagonalStretch((1.0, 2.0)).is_unimodular()


@pytest.mark.parametrize("entries", [(0.0, 1.0), (-1.0, -1.0), (math.inf, 0.0), ()])
def test_stretch_rejects_bad_entries(entries):
    with pytest.raises(InvalidInputError):
        DiagonalStretch(entries)


# --- body construction and files -------------------------------------------

@pytest.mark.parametrize("p, axes", [(1.0, (1, 1)), (2.0, (1, 0)), (2.0, (1,)), (math.nan, (1, 1))])
def test_invalid_bodies(p, axes):
    with pytest.raises(InvalidBodyError):
        ConvexBody(dimension=2, kind="p-ellipsoid", p=p, semi_axes=axes)


def test_generic_needs_callable():
    with pytest.raises(InvalidBodyError):
        ConvexBody(dimension=2, kind="generic-gauge")


def test_spec_round_trip():
    body = ConvexBody.p_ellipsoid(3.0, (1.0, 2.0))
    again = body_from_spec(body.to_spec())
    assert again.p == body.p and again.semi_axes == body.semi_axes


@pytest.mark.parametrize("spec, key", [
    ({"dimension": 2, "kind": "p-ellipsoid", "p": 2.0, "semi_axes": [1, 1], "colour": "red"}, "colour"),
    ({"dimension": 2, "kind": "p-ellipsoid", "semi_axes": [1, 1]}, "p"),
    ({"dimension": 2, "kind": "p-ellipsoid", "p": 0.5, "semi_axes": [1, 1]}, "p"),
    ({"dimension": 3, "kind": "p-ellipsoid", "p": 2.0, "semi_axes": [1, 1]}, "semi_axes"),
    ({"dimension": 2, "kind": "cube", "p": 2.0, "semi_axes": [1, 1]}, "kind"),
])
def test_spec_errors_name_the_key(spec, key):
    with pytest.raises(InvalidBodyError, match=key):
        body_from_spec(spec)


def test_load_json_and_toml(tmp_path):
    (tmp_path / "b.json").write_text('{"dimension": 2, "kind": "p-ellipsoid", "p": 2.0, "semi_axes": [1, 3]}')
    (tmp_path / "b.toml").write_text('dimension = 2\nkind = "p-ellipsoid"\np = 2.0\nsemi_axes = [1.0, 3.0]\n')
    a, b = load_body(tmp_path / "b.json"), load_body(tmp_path / "b.toml")
    assert a.semi_axes == b.semi_axes == (1.0, 3.0)
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(InvalidBodyError):
        load_body(tmp_path / "bad.json")


def test_generic_section_is_a_body(generic_ellipsoid3):
    sec = generic_ellipsoid3.section((0, 2))
    assert sec.dimension == 2
    assert sec.volume == pytest.approx(3 * math.pi, rel=1e-8)
