import math

import numpy as np
import pytest

from pinched_sna.certify import (
    FAIL,
    PASS,
    UNCHECKED,
    ConstantSearchError,
    GridSpec,
    certify,
    search_constants,
    sweep_kappa,
    theta_grid,
    x_grid,
)
from pinched_sna.system import PinchedSystem, TanhFamily, tanh_system
from pinched_sna.torus import RotationVector, to_float

CONDITIONS = ["F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8", "F9", "F10", "F11"]


def test_search_certifies_every_condition(certified):
    sys, c, report = certified
    assert report.passed
    for name in CONDITIONS:
        v = report[name]
        assert v.status == PASS and v.margin >= 0
    assert "not a proof" in report.caveat


def test_certified_constants_satisfy_the_arithmetic_invariants(certified):
    _, c, _ = certified
    assert c.m > 22 * (1 + 1 / c.gamma)
    assert c.a >= (c.m + 1) ** c.d
    assert c.b <= c.c
    assert c.eta > 0 and c.alpha > 2 and 0 < c.delta < 1
    assert math.log(1 - c.delta) > -math.log(c.a) / 4
    assert c.x_delta <= c.beta * c.b / 2


def test_report_text_has_one_line_per_condition(certified):
    _, _, report = certified
    lines = [l for l in report.to_text().splitlines() if not l.startswith("#")]
    names = [l.split("\t")[0] for l in lines]
    assert set(CONDITIONS) <= set(names)
    assert all("margin=" in l and "witness=(" in l for l in lines)


def test_certification_is_deterministic(certified):
    sys, c, report = certified
    assert certify(sys, c).to_text() == report.to_text()


def test_too_small_L0_fails_contraction_with_witness_near_L0(certified):
    sys, c, _ = certified
    bad = c.replace(L0=1e-5)
    report = certify(sys, bad)
    v = report["F2"]
    assert v.status == FAIL and v.margin < 0
    theta, x = v.witness
    assert x == pytest.approx(bad.L0, rel=0.05)


def test_arithmetic_failure_skips_grid_work(certified):
    sys, c, _ = certified
    report = certify(sys, c.replace(m=5))
    assert report["F5"].status == FAIL
    assert all(report[name].status == UNCHECKED for name in ("F1", "F2", "F3", "F9", "F10", "F11"))


def test_every_failure_names_a_witness(certified):
    sys, c, _ = certified
    for bad in (c.replace(L0=1e-5), c.replace(b=0.3), c.replace(x_delta=10 * c.x_delta), c.replace(beta=1.0)):
        for v in certify(sys, bad).verdicts:
            if v.status == FAIL:
                assert v.witness


def test_closed_form_x_delta_passes_and_larger_fails(certified):
    sys, c, _ = certified
    closed = math.acosh(1 / math.sqrt(1 - c.delta)) / sys.family.kappa
    assert c.x_delta <= closed
    assert certify(sys, c.replace(x_delta=closed * (1 - 1e-9)))["F11"].status == PASS
    assert certify(sys, c.replace(x_delta=closed * 1.01))["F11"].status == FAIL


def test_contraction_near_zero_bounds_the_derivative_condition(certified):
    sys, c, _ = certified
    th = to_float(theta_grid(sys, GridSpec()))
    d = np.minimum(th[:, 0], 1 - th[:, 0])
    floor = c.a * np.minimum(1.0, 2 * d / c.b)
    # F9 at x -> 0 reads F(x)/x >= a min(1, 2d/b), which is F10
    x = 1e-12
    slope = sys.family.fibre_map(th, x) / x
    assert np.all(slope >= floor * (1 - 1e-9))
    assert np.all(sys.family.fibre_derivative(th, 0.0) >= floor * (1 - 1e-9))


def test_small_kappa_search_fails_informatively(sys3):
    with pytest.raises(ConstantSearchError) as err:
        search_constants(sys3)
    assert err.value.blocking in CONDITIONS


def test_rational_rotation_blocks_at_diophantine_condition():
    sys = PinchedSystem(TanhFamily(1200.0), RotationVector.from_coords([0.5], screen=False))
    with pytest.raises(ConstantSearchError) as err:
        search_constants(sys)
    assert err.value.blocking == "F4"


def test_kappa_sweep_reports_first_certified_value():
    result = sweep_kappa([3.0, 300.0, 1200.0, 1500.0])
    assert result.kappa == 1200.0 and result.report.passed
    assert [k for k, _ in result.tried] == [3.0, 300.0]


def test_grids_reach_towards_pinch_and_zero_line():
    sys = tanh_system(3.0)
    grid = GridSpec()
    th = to_float(theta_grid(sys, grid))[:, 0]
    d = np.minimum(th, 1 - th)
    assert d[d > 0].min() <= grid.theta_log_min * 1.01
    xs = x_grid(grid)
    assert xs.min() == 0.0 and xs.max() == 1.0 and xs[xs > 0].min() <= grid.x_log_min * 1.01
