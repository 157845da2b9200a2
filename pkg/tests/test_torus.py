import itertools
import math
from decimal import Decimal, localcontext

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pinched_sna.torus import (
    DiophantineEstimate,
    ResonanceError,
    RotationVector,
    TorusPoint,
    ball_contains,
    estimate_diophantine,
    lebesgue_points,
    product_grid,
    rotate,
    screen_totally_irrational,
    to_float,
    to_raw,
    torus_distance,
)

coord = st.floats(min_value=0.0, max_value=1.0, exclude_max=True, allow_nan=False)


def points(D):
    return st.lists(coord, min_size=D, max_size=D).map(TorusPoint.from_coords)


def brute_distance(p, q):
    """Minimise over both lifts of every coordinate difference."""
    best = math.inf
    for shifts in itertools.product((-1, 0, 1), repeat=len(p)):
        best = min(best, math.sqrt(sum((a - b + s) ** 2 for a, b, s in zip(p, q, shifts))))
    return best


def golden_decimal():
    with localcontext() as ctx:
        ctx.prec = 50
        return (Decimal(5).sqrt() - 1) / 2


# distance ------------------------------------------------------------------

def test_distance_to_itself_is_zero():
    assert torus_distance(TorusPoint.from_coords([0.0]), TorusPoint.from_coords([0.0])) == 0.0


def test_distance_wraps_around():
    assert torus_distance(TorusPoint.from_coords([0.9]), TorusPoint.from_coords([0.1])) == pytest.approx(0.2, abs=1e-15)


def test_two_dimensional_distance_matches_brute_force_lifts():
    p, q = [0.25, 0.0], [0.75, 0.5]
    d = torus_distance(TorusPoint.from_coords(p), TorusPoint.from_coords(q))
    assert d == pytest.approx(brute_distance(p, q), abs=1e-15)
    assert d == pytest.approx(math.sqrt(0.5), abs=1e-15)


def test_distance_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        torus_distance(TorusPoint.from_coords([0.1]), TorusPoint.from_coords([0.1, 0.2]))


@given(st.integers(1, 4).flatmap(lambda D: st.tuples(points(D), points(D), points(D))))
def test_distance_is_a_bounded_symmetric_metric(pqr):
    p, q, r = pqr
    dpq = torus_distance(p, q)
    assert dpq == torus_distance(q, p)
    assert 0.0 <= dpq <= math.sqrt(p.D) / 2 + 1e-15
    assert dpq <= torus_distance(p, r) + torus_distance(r, q) + 1e-15
    assert dpq == pytest.approx(brute_distance(p.coords, q.coords), abs=1e-15)


# points and rotation -------------------------------------------------------

@given(st.integers(1, 3).flatmap(lambda D: st.tuples(points(D), points(D))))
def test_addition_commutes_and_stays_in_unit_cube(pq):
    p, q = pq
    s = p + q
    assert s == q + p
    assert np.all((s.coords >= 0) & (s.coords < 1))


def test_coordinates_reduce_mod_one():
    p = TorusPoint.from_coords([1.25, -0.25, 3.0])
    assert p.coords.tolist() == [0.25, 0.75, 0.0]


def test_tiny_negative_coordinate_does_not_round_to_one():
    assert to_float(to_raw([-1e-20]))[0] < 1.0


def test_rotate_by_zero_steps_is_identity():
    p = TorusPoint.from_coords([0.3])
    assert rotate(p, RotationVector.golden(), 0) == p


def test_rotate_by_rational_vector_is_exact():
    v = RotationVector.from_coords([0.25], screen=False)
    assert rotate(TorusPoint.from_coords([0.0]), v, 2).coords[0] == 0.5


def test_golden_rotation_of_origin():
    gold = golden_decimal()
    p = rotate(TorusPoint.zero(1), RotationVector.golden(), 1)
    assert p.coords[0] == pytest.approx(0.6180339887498949, abs=1e-16)
    assert abs(Decimal(int(p.raw[0])) / Decimal(2**64) - gold) < Decimal(2) ** -64


@given(st.integers(1, 3).flatmap(lambda D: points(D)), st.integers(-10**12, 10**12), st.integers(-10**12, 10**12))
def test_rotation_is_an_exact_group_action(p, a, b):
    v = RotationVector.golden(p.D)
    assert rotate(rotate(p, v, a), v, b) == rotate(p, v, a + b)
    assert rotate(rotate(p, v, a), v, -a) == p


def test_golden_vector_in_higher_dimension_solves_its_polynomial():
    for D in (2, 3):
        v = RotationVector.golden(D)
        x = 1.0 / v.coords[0]
        assert x ** (D + 1) == pytest.approx(x + 1, rel=1e-12)
        assert v.totally_irrational_checked


def test_rationality_screen():
    assert screen_totally_irrational(RotationVector.golden().raw)
    assert not screen_totally_irrational(to_raw([0.5]))
    assert not screen_totally_irrational(to_raw([1 / 3]))
    assert not screen_totally_irrational(to_raw([0.2, 0.4]))  # 2 v_1 - v_2 = 0
    assert not RotationVector.from_coords([0.5]).totally_irrational_checked


# balls ---------------------------------------------------------------------

@pytest.mark.parametrize("p, inside", [(0.05, True), (0.95, True), (0.1, False)])
def test_open_ball_membership(p, inside):
    assert ball_contains(TorusPoint.from_coords([0.0]), 0.1, TorusPoint.from_coords([p])) is inside


@given(points(2))
def test_zero_radius_ball_is_empty(p):
    assert not ball_contains(p, 0.0, p)


# Diophantine estimate ------------------------------------------------------

def test_resonant_rotation_is_rejected():
    with pytest.raises(ResonanceError):
        estimate_diophantine(RotationVector.from_coords([0.5], screen=False), TorusPoint.zero(1), 1.5, 10)


def test_golden_mean_diophantine_constant_matches_decimal_oracle():
    est = estimate_diophantine(RotationVector.golden(), TorusPoint.zero(1), 1.01, 10**5)
    gold = golden_decimal()
    # independent oracle on a coarser horizon: exact decimal fractional parts
    best = min(
        float(min(n * gold % 1, 1 - n * gold % 1)) * n**1.01 for n in range(1, 5001)
    )
    assert est.c == pytest.approx(best, rel=1e-9)
    assert est.c == pytest.approx(0.381966, abs=1e-6)
    assert est.argmin_n == 1 and est.c <= est.min_product


def test_larger_exponent_does_not_shrink_the_constant():
    v, star = RotationVector.golden(), TorusPoint.zero(1)
    c_small = estimate_diophantine(v, star, 1.01, 10**4).c
    c_big = estimate_diophantine(v, star, 2.0, 10**4).c
    # both minima sit at n = 1, where n**d = 1, so the constants coincide
    assert c_big >= c_small


def test_diophantine_constant_is_stable_under_doubling_the_horizon():
    v, star = RotationVector.golden(), TorusPoint.zero(1)
    c1 = estimate_diophantine(v, star, 1.01, 10**4).c
    c2 = estimate_diophantine(v, star, 1.01, 2 * 10**4).c
    assert c2 > 0 and abs(c2 - c1) / c1 < 0.5


def test_diophantine_estimate_validates_fields():
    with pytest.raises(ValueError):
        DiophantineEstimate(c=0.1, d=1.0, n_max=10, min_product=0.2, argmin_n=1)
    with pytest.raises(ValueError):
        DiophantineEstimate(c=0.3, d=1.5, n_max=10, min_product=0.2, argmin_n=1)


# sampling ------------------------------------------------------------------

def test_grid_sampling_anchors_at_origin_and_is_regular():
    pts = to_float(lebesgue_points(8, 1, "grid"))[:, 0]
    assert pts.tolist() == [i / 8 for i in range(8)]


def test_product_grid_needs_a_perfect_power():
    assert product_grid(4, 2).shape == (16, 2)
    with pytest.raises(ValueError):
        lebesgue_points(10, 2, "grid")


def test_pseudorandom_sampling_is_seeded_and_on_the_float_lattice():
    a = lebesgue_points(1000, 2, "pseudorandom", 7)
    assert np.array_equal(a, lebesgue_points(1000, 2, "pseudorandom", 7))
    assert not np.array_equal(a, lebesgue_points(1000, 2, "pseudorandom", 8))
    assert np.array_equal(to_raw(to_float(a)), a)


def test_midpoint_sampling_avoids_the_origin():
    pts = to_float(lebesgue_points(4, 1, "midpoint"))[:, 0]
    assert pts.tolist() == [0.125, 0.375, 0.625, 0.875]


@pytest.mark.parametrize("sampler", ["grid", "midpoint"])
def test_large_grids_are_exact_lattice_fractions(sampler):
    n = 10**6
    raw = lebesgue_points(n, 1, sampler)[:, 0] >> np.uint64(11)
    for i in (0, 1, 4095, 4096, n // 3, n - 1):
        num, den = (i, n) if sampler == "grid" else (2 * i + 1, 2 * n)
        assert int(raw[i]) == num * 2**53 // den
    assert np.all(np.diff(raw.astype(np.int64)) > 0)
