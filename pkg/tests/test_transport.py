"""Tests for exact Wasserstein distances and the Kantorovich-Rubinstein check."""

import math

import numpy as np
import pytest

from perfbounds import (
    DomainBox,
    SupportCapError,
    empirical_from_points,
    kr_gap_check,
    shift_diameter_bound,
    wp_exact,
)
from perfbounds.logistic import loss_lipschitz_in_z
from perfbounds.transport import TransportConfig, brute_force_wp, within_cap

from conftest import make_profile

SQUARE = DomainBox(lower=(0.0, 0.0), upper=(1.0, 1.0), dim_y=0, dim_x=2)


class TestWpExact:
    """Tests for wp_exact."""

    def test_identity_is_zero(self, random_dist):
        dist = random_dist(8, dim_x=2, seed=1)
        distance, plan = wp_exact(dist, dist, 2.0)
        assert distance == 0.0
        assert plan.cost == 0.0

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
    def test_two_diracs(self, p):
        """Unit masses at distance c are c apart for every p."""
        a = empirical_from_points([[0.1, 0.2]], SQUARE)
        b = empirical_from_points([[0.4, 0.6]], SQUARE)
        assert wp_exact(a, b, p)[0] == pytest.approx(0.5)

    @pytest.mark.parametrize("p", [1.0, 2.0])
    def test_matches_permutation_oracle(self, p):
        """Four uniform points in the unit square against all 4! assignments."""
        rng = np.random.default_rng(4)
        for _ in range(10):
            a = empirical_from_points(rng.random((4, 2)), SQUARE)
            b = empirical_from_points(rng.random((4, 2)), SQUARE)
            assert wp_exact(a, b, p)[0] == pytest.approx(brute_force_wp(a, b, p), abs=1e-12)


    @pytest.mark.parametrize("a_points, b_points, expected", [
        ([[0.5, 0.5]] * 3, [[0.0, 0.0], [1.0, 1.0], [0.2, 0.9]], [0, 1, 2]),
        ([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]], [[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]], [1, 2, 0]),
        ([[0.0, 0.0], [1.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]], [0, 1]),
        ([[1.0, 1.0], [0.0, 0.0]], [[0.0, 1.0], [1.0, 0.0]], [0, 1]),
    ])
    def test_ties_resolve_lexicographically(self, a_points, b_points, expected):
        """Among equal-cost assignments the lowest (row, col) sequence wins."""
        a = empirical_from_points(a_points, SQUARE)
        b = empirical_from_points(b_points, SQUARE)
        distance, plan = wp_exact(a, b, 2.0)
        assert plan.rows.tolist() == list(range(len(expected)))
        assert plan.cols.tolist() == expected
        assert distance == pytest.approx(brute_force_wp(a, b, 2.0), abs=1e-12)
    def test_general_weights_use_network_simplex(self):
        """Unequal weights: moving 1/4 of the mass by 1 costs 1/4 under W_1."""
        a = empirical_from_points([[0.0, 0.0], [1.0, 0.0]], SQUARE, weights=[0.75, 0.25])
        b = empirical_from_points([[0.0, 0.0]], SQUARE)
        distance, plan = wp_exact(a, b, 1.0)
        assert distance == pytest.approx(0.25)
        rows, cols = plan.marginals(2, 1)
        np.testing.assert_allclose(rows, [0.75, 0.25])
        np.testing.assert_allclose(cols, [1.0])

    def test_plan_exports_frame(self, tmp_path):
        a = empirical_from_points([[0.0, 0.0], [1.0, 1.0]], SQUARE)
        b = empirical_from_points([[1.0, 1.0], [0.0, 0.0]], SQUARE)
        _, plan = wp_exact(a, b, 2.0)
        frame = plan.to_frame()
        assert list(frame.columns) == ["src", "dst", "mass", "cost"]
        assert frame["cost"].sum() == 0.0
        plan.to_csv(tmp_path / "plan.csv")
        assert (tmp_path / "plan.csv").read_text().startswith("src,dst,mass,cost")

    def test_support_cap(self, random_dist):
        """Oversized supports raise with the cap attached."""
        dist = random_dist(6, seed=2)
        cfg = TransportConfig(assignment_cap=10)
        with pytest.raises(SupportCapError) as excinfo:
            wp_exact(dist, dist, 1.0, cfg)
        assert excinfo.value.cap == 10
        assert "subsample" in str(excinfo.value)
        assert not within_cap(dist, dist, cfg)

    def test_order_outside_range(self, random_dist):
        dist = random_dist(3)
        with pytest.raises(ValueError, match="outside"):
            wp_exact(dist, dist, 3.0)


class TestMetricAxioms:
    """W_p behaves as a metric on small supports."""

    @pytest.mark.parametrize("p", [1.0, 2.0])
    def test_triangle_inequality(self, random_dist, p):
        for seed in range(20):
            sizes = (5, 5, 7) if seed % 2 else (6, 6, 6)
            a, b, c = (random_dist(size, dim_x=2, seed=100 * seed + k)
                       for k, size in enumerate(sizes))
            ab, bc, ac = wp_exact(a, b, p)[0], wp_exact(b, c, p)[0], wp_exact(a, c, p)[0]
            assert ac <= ab + bc + 1e-7

    def test_symmetric(self, random_dist):
        a = random_dist(6, dim_x=2, seed=11)
        b = random_dist(9, dim_x=2, seed=12)
        assert wp_exact(a, b, 2.0)[0] == pytest.approx(wp_exact(b, a, 2.0)[0], abs=1e-9)

    def test_w1_at_most_wp(self, random_dist):
        """Jensen: W_1 <= W_1.5 <= W_2 for probability measures."""
        for seed in range(10):
            a = random_dist(6, dim_x=2, seed=seed)
            b = random_dist(6 + seed % 3, dim_x=2, seed=50 + seed)
            w1, w15, w2 = (wp_exact(a, b, p)[0] for p in (1.0, 1.5, 2.0))
            assert w1 <= w15 + 1e-9
            assert w15 <= w2 + 1e-9


class TestShiftDiameterBound:
    """Tests for shift_diameter_bound."""

    def test_no_shift(self):
        assert shift_diameter_bound(0, 10, 2.0, 3.0) == 0.0

    def test_full_shift(self):
        assert shift_diameter_bound(10, 10, 2.0, 3.0) == pytest.approx(3.0)

    def test_historical_example(self):
        """m=1816, n=60147, p=2, D_Z=sqrt(5)."""
        value = shift_diameter_bound(1816, 60147, 2.0, math.sqrt(5))
        assert value == pytest.approx(0.38854018, abs=1e-7)

    def test_m_above_n(self):
        with pytest.raises(ValueError, match="m=11"):
            shift_diameter_bound(11, 10, 2.0, 1.0)

    def test_bounds_actual_shift(self, random_dist):
        """Moving m points anywhere stays within (m/n)^(1/p) D_Z."""
        dist = random_dist(10, dim_x=2, seed=8)
        points = np.array(dist.points, copy=True)
        points[:3] = [1.0, 1.0, 1.0]
        moved = dist.with_points(points)
        bound = shift_diameter_bound(3, 10, 2.0, dist.box.diameter)
        assert wp_exact(dist, moved, 2.0)[0] <= bound + 1e-12


class TestKrGapCheck:
    """Tests for kr_gap_check."""

    def test_identical(self, random_dist):
        dist = random_dist(5, dim_x=2)
        check = kr_gap_check(dist, dist, np.array([1.0, -1.0, 0.5]), make_profile())
        assert check.risk_gap == 0.0
        assert check.bound == 0.0
        assert check.ok

    def test_translation(self):
        """Translating features by v changes the risk by at most L ||v||."""
        box = DomainBox.unit(dim_x=2)
        rng = np.random.default_rng(6)
        features = rng.random((20, 2)) * 0.5
        labels = rng.integers(0, 2, size=20).astype(float)
        d = empirical_from_points(np.column_stack([labels, features]), box)
        d_prime = empirical_from_points(np.column_stack([labels, features + [0.3, 0.2]]), box)
        theta = np.array([0.2, -0.1, 0.05])
        profile = make_profile(L_ell=loss_lipschitz_in_z(theta, box))
        check = kr_gap_check(d, d_prime, theta, profile)
        assert abs(check.risk_gap) <= profile.L_ell * math.hypot(0.3, 0.2) + 1e-12
        assert check.ok

    @pytest.mark.parametrize("seed", range(5))
    def test_random_pairs(self, random_dist, seed):
        d = random_dist(50, dim_x=2, seed=seed)
        d_prime = random_dist(50, dim_x=2, seed=100 + seed)
        theta = np.random.default_rng(seed).normal(size=3)
        profile = make_profile(L_ell=loss_lipschitz_in_z(theta, d.box))
        assert kr_gap_check(d, d_prime, theta, profile).ok

    def test_different_boxes(self, random_dist):
        with pytest.raises(ValueError, match="same box"):
            kr_gap_check(random_dist(3, dim_x=1), random_dist(3, dim_x=2), np.zeros(2),
                         make_profile())
