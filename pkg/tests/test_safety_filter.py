import numpy as np
import pytest

from safechain import (
    InfeasibleConstraint,
    dorcbf_margin,
    qp_filter,
    smooth_bound,
    worst_case_margin,
)
from helpers import qp_oracle


class TestQpFilter:
    def test_inactive_returns_nominal(self):
        v_no = np.array([0.4, -1.2])
        res = qp_filter(v_no, drift=1.0, Lg=np.array([1.0, 0.0]), lambda_n=0.0, alpha_h=0.0)
        assert not res.active
        assert res.zeta == pytest.approx(1.4)
        assert np.all(res.v == v_no)
        assert res.correction_norm == 0.0

    def test_projection_example(self):
        res = qp_filter(np.zeros(2), 0.0, np.array([1.0, 0.0]), 0.0, -2.0)
        assert res.active and res.zeta == pytest.approx(-2.0)
        assert res.v == pytest.approx([2.0, 0.0])

    def test_projection_example_two(self):
        res = qp_filter(np.array([1.0, 1.0]), -3.0, np.array([0.0, 2.0]), 1.0, 0.0)
        assert res.zeta == pytest.approx(-2.0)
        assert res.v == pytest.approx([1.0, 2.0])

    def test_zero_slack_counts_inactive(self):
        res = qp_filter(np.array([1.0]), -1.0, np.array([1.0]), 0.0, 0.0)
        assert res.zeta == pytest.approx(0.0)
        assert not res.active

    def test_degenerate_direction_raises(self):
        with pytest.raises(InfeasibleConstraint):
            qp_filter(np.zeros(2), -1.0, np.zeros(2), 0.0, 0.0)

    def test_active_constraint_tight(self):
        rng = np.random.default_rng(17)
        for _ in range(2000):
            v_no = rng.normal(size=2)
            lg = rng.normal(size=2)
            if np.linalg.norm(lg) < 1e-8:
                continue
            drift, lam, alpha = rng.normal(size=3)
            res = qp_filter(v_no, drift, lg, abs(lam), alpha)
            slack_at_v = drift + lg @ res.v - abs(lam) + alpha
            if res.active:
                assert abs(slack_at_v) <= 1e-9
                assert res.correction_norm == pytest.approx(
                    abs(res.zeta) / np.linalg.norm(lg), rel=1e-12)
            else:
                assert slack_at_v >= 0.0

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(23)
        for _ in range(300):
            v_no = rng.normal(size=2) * 2.0
            lg = rng.normal(size=2)
            if np.linalg.norm(lg) < 1e-3:
                continue
            drift, lam, alpha = rng.normal(size=3) * 3.0
            res = qp_filter(v_no, drift, lg, abs(lam), alpha)
            ora = qp_oracle(v_no, drift, lg, abs(lam), alpha)
            assert res.v == pytest.approx(ora, abs=1e-6)

    def test_minimal_deviation(self):
        rng = np.random.default_rng(29)
        for _ in range(300):
            v_no = rng.normal(size=2)
            lg = rng.normal(size=2) + np.array([1.5, 0.0])
            drift, alpha = rng.normal(size=2)
            res = qp_filter(v_no, drift, lg, 0.0, alpha)
            if not res.active:
                continue
            for _ in range(20):
                v_feas = res.v + rng.normal(size=2)
                if drift + lg @ v_feas + alpha >= 0.0:
                    assert np.linalg.norm(v_feas - v_no) >= res.correction_norm - 1e-9

    def test_continuity_across_activation(self):
        lg = np.array([1.0, 1.0])
        drift, lam = -2.0, 0.0
        for eps in (1e-3, 1e-6, 1e-9):
            # alpha chosen so zeta = -eps
            v_no = np.array([1.0, 1.0 - eps])
            res = qp_filter(v_no, drift, lg, lam, 0.0)
            assert res.active
            assert res.correction_norm <= eps


class TestMargins:
    def test_worst_case_values(self):
        assert worst_case_margin(np.array([3.0, 4.0]), 2.0) == pytest.approx(10.0)
        assert worst_case_margin(np.array([3.0, 4.0]), 0.0) == 0.0
        assert worst_case_margin(np.zeros(2), 5.0) == 0.0
        with pytest.raises(ValueError):
            worst_case_margin(np.ones(2), -1.0)

    def test_dorcbf_margin_values(self):
        grad = 2.0 * np.array([-3.0, 3.0])
        assert dorcbf_margin(grad, 1.0) == pytest.approx(6.0 * np.sqrt(2.0))
        assert dorcbf_margin(grad, 0.0) == 0.0

    def test_smooth_bound_dominates_margin(self):
        rng = np.random.default_rng(31)
        for _ in range(1000):
            g = rng.normal(size=4)
            w = rng.normal(size=2)
            mu = 10.0 ** rng.uniform(-2.0, 2.0)
            assert smooth_bound(g, w, mu) >= dorcbf_margin(g, np.linalg.norm(w)) - 1e-12
