"""Tests for transition maps, shift records and sensitivity estimates."""

import numpy as np
import pytest

from perfbounds import (
    BoundedFeatureShift,
    CompositeMap,
    DomainBox,
    ShiftRecord,
    TopXiLabelFlip,
    apply_transition,
    certify_sensitivity,
    empirical_from_points,
    estimate_sensitivity,
    top_xi_selection,
    wp_exact,
)
from perfbounds.transition import ConstantMap, IdentityMap, map_from_dict, with_certified_eps


def scored_dist(scores_x, labels=None):
    """1-feature distribution; with theta=(1, 0) the score order follows x."""
    labels = [1.0] * len(scores_x) if labels is None else labels
    return empirical_from_points(np.column_stack([labels, scores_x]), DomainBox.unit(dim_x=1))


THETA = np.array([1.0, 0.0])


class TestTopXiSelection:
    """Tests for top_xi_selection."""

    def test_all(self):
        dist = scored_dist([0.1, 0.5, 0.3])
        assert sorted(top_xi_selection(dist, THETA, 1.0)) == [0, 1, 2]

    def test_none(self):
        assert top_xi_selection(scored_dist([0.1, 0.5]), THETA, 0.0) == []

    def test_ties_prefer_lower_index(self):
        """Scores (.9, .1, .8, .8, .2) with xi=0.4 select {0, 2}."""
        dist = scored_dist([0.9, 0.1, 0.8, 0.8, 0.2])
        assert top_xi_selection(dist, THETA, 0.4) == [0, 2]

    def test_count_rounds_up(self):
        """ceil(0.25 * 5) = 2 units."""
        assert len(top_xi_selection(scored_dist([0.1, 0.2, 0.3, 0.4, 0.5]), THETA, 0.25)) == 2

    def test_xi_outside_range(self):
        with pytest.raises(ValueError, match="xi"):
            top_xi_selection(scored_dist([0.1]), THETA, 1.5)


class TestApplyTransition:
    """Tests for apply_transition and the built-in maps."""

    def test_xi_zero_is_identity(self, random_dist):
        dist = random_dist(20, seed=3)
        shifted, record = apply_transition(TopXiLabelFlip(xi=0.0), dist, THETA)
        assert shifted.same_as(dist)
        assert record.m_changed == 0

    def test_flip_ten_of_hundred(self):
        """xi=0.1 on 100 positives flips exactly 10 labels to 0."""
        x = np.linspace(0.0, 1.0, 100)
        dist = scored_dist(x)
        shifted, record = apply_transition(TopXiLabelFlip(xi=0.1), dist, THETA)
        assert record.m_changed == 10
        assert sorted(record.indices) == list(range(90, 100))
        assert shifted.labels.sum() == 90
        assert all(d == 1.0 for d in record.per_point_displacement)
        np.testing.assert_array_equal(shifted.weights, dist.weights)

    def test_full_flip_idempotent(self):
        """A second full flip with the same theta changes nothing."""
        dist = scored_dist(np.linspace(0.0, 1.0, 30))
        flip = TopXiLabelFlip(xi=0.2)
        once, _ = apply_transition(flip, dist, THETA)
        twice, record = apply_transition(flip, once, THETA)
        assert record.m_changed == 0
        assert twice.same_as(once)

    def test_only_source_label_flipped(self):
        """Selected units already at the target label stay put."""
        dist = scored_dist([0.9, 0.8, 0.1], labels=[0.0, 1.0, 1.0])
        _, record = apply_transition(TopXiLabelFlip(xi=0.6), dist, THETA)
        assert record.indices == (1,)

    def test_partial_effectiveness(self):
        """effectiveness 0.5 keeps floor(0.5 * k) of the eligible units, reproducibly."""
        dist = scored_dist(np.linspace(0.0, 1.0, 40))
        flip = TopXiLabelFlip(xi=0.25, effectiveness=0.5, seed=3)
        _, first = apply_transition(flip, dist, THETA)
        _, second = apply_transition(flip, dist, THETA)
        assert first.m_changed == 5
        assert first == second
        assert set(first.indices) <= set(range(30, 40))

    def test_bounded_feature_shift_clips(self):
        dist = scored_dist([0.2, 0.9])
        shift = BoundedFeatureShift(xi=0.5, shift_vector=(0.3,))
        shifted, record = apply_transition(shift, dist, THETA)
        assert shifted.features[1, 0] == 1.0
        assert record.indices == (1,)
        assert record.per_point_displacement[0] == pytest.approx(0.1)

    def test_constant_target_outside_box(self):
        dist = scored_dist([0.2, 0.9])
        constant = ConstantMap(target=np.array([[0.0, 7.0], [1.0, -3.0]]))
        with pytest.raises(ValueError, match=r"constant map target: .*indices \[0, 1\]"):
            apply_transition(constant, dist, THETA)

    def test_flip_to_label_outside_box(self):
        dist = scored_dist([0.2, 0.9])
        with pytest.raises(ValueError, match=r"outside the box at indices \[1\]"):
            apply_transition(TopXiLabelFlip(xi=0.5, target_label=5.0), dist, THETA)

    def test_shift_vector_dimension(self):
        with pytest.raises(ValueError, match="shift_vector"):
            apply_transition(BoundedFeatureShift(xi=1.0, shift_vector=(0.1, 0.1)),
                             scored_dist([0.2]), THETA)

    def test_composite_applies_in_order(self):
        dist = scored_dist([0.2, 0.9])
        composite = CompositeMap(maps=(
            TopXiLabelFlip(xi=0.5),
            BoundedFeatureShift(xi=0.5, shift_vector=(-0.4,)),
        ))
        shifted, record = apply_transition(composite, dist, THETA)
        assert shifted.labels.tolist() == [1.0, 0.0]
        assert shifted.features[1, 0] == pytest.approx(0.5)
        assert record.m_changed == 1

    def test_invalid_parameters(self):
        with pytest.raises(ValueError, match="effectiveness"):
            TopXiLabelFlip(xi=0.1, effectiveness=1.5)
        with pytest.raises(ValueError, match="at least one"):
            CompositeMap(maps=())


class TestMapSerialization:
    """Tests for map_from_dict."""

    def test_flip_roundtrip(self):
        flip = TopXiLabelFlip(xi=0.3, effectiveness=0.8, seed=4)
        assert map_from_dict(flip.to_dict()) == flip

    def test_composite_roundtrip(self):
        composite = CompositeMap(maps=(
            TopXiLabelFlip(xi=0.1),
            BoundedFeatureShift(xi=0.2, shift_vector=(0.1, -0.1)),
        ))
        assert map_from_dict(composite.to_dict()) == composite

    def test_certified_eps_kept(self):
        flip = with_certified_eps(TopXiLabelFlip(xi=0.1), 1.25)
        assert map_from_dict(flip.to_dict()).certified_eps == 1.25

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="Unknown transition kind"):
            map_from_dict({"kind": "teleport"})

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="gamma"):
            map_from_dict({"kind": "top_xi_label_flip", "xi": 0.1, "gamma": 2})


class TestShiftRecord:
    def test_dict_roundtrip(self):
        record = ShiftRecord(indices=(1, 4), per_point_displacement=(1.0, 0.5))
        assert ShiftRecord.from_dict(record.to_dict()) == record

    def test_inconsistent_count(self):
        with pytest.raises(ValueError, match="disagrees"):
            ShiftRecord.from_dict({"m_changed": 3, "indices": [1]})


class TestSensitivity:
    """Tests for estimate_sensitivity and certify_sensitivity."""

    def _pairs(self, random_dist):
        d = random_dist(12, seed=1)
        d_prime = random_dist(12, seed=2)
        return [(d, np.array([1.0, 0.0]), d_prime, np.array([0.5, 0.2]))]

    def test_identity_at_most_one(self, random_dist):
        assert estimate_sensitivity(IdentityMap(), self._pairs(random_dist), 2.0) <= 1.0

    def test_constant_map_zero(self, random_dist):
        target = random_dist(12, seed=9).points
        constant = ConstantMap(target=target)
        assert estimate_sensitivity(constant, self._pairs(random_dist), 2.0) == 0.0

    def test_flip_matches_hand_quotient(self, random_dist):
        """The estimate is the W_p quotient computed from the four distributions."""
        (d, theta, d_prime, theta_prime), = self._pairs(random_dist)
        flip = TopXiLabelFlip(xi=0.25)
        out, _ = apply_transition(flip, d, theta)
        out_prime, _ = apply_transition(flip, d_prime, theta_prime)
        expected = wp_exact(out, out_prime, 2.0)[0] / (
            wp_exact(d, d_prime, 2.0)[0] + float(np.linalg.norm(theta - theta_prime))
        )
        estimate = estimate_sensitivity(flip, self._pairs(random_dist), 2.0)
        assert estimate == pytest.approx(expected, rel=1e-12)

    def test_zero_denominators(self, random_dist):
        d = random_dist(4)
        with pytest.raises(ValueError, match="zero input distance"):
            estimate_sensitivity(IdentityMap(), [(d, THETA, d, THETA)], 2.0)

    def test_certify_floor(self, random_dist):
        """The certificate never drops below the floor."""
        certified = certify_sensitivity(IdentityMap(), self._pairs(random_dist), 2.0)
        assert certified.certified_eps == 1.0

    @pytest.mark.parametrize("tmap", [
        IdentityMap(),
        TopXiLabelFlip(xi=0.25),
        TopXiLabelFlip(xi=1.0),
        BoundedFeatureShift(xi=0.5, shift_vector=(-0.3,)),
    ])
    @pytest.mark.parametrize("floor", [0.0, 1.0])
    def test_certificate_covers_estimate(self, random_dist, tmap, floor):
        """Re-estimating on the audited pairs never exceeds the attached certificate."""
        pairs = [
            (random_dist(10, seed=s), np.array([1.0, -0.5]),
             random_dist(10, seed=s + 10), np.array([0.4, 0.1]))
            for s in range(3)
        ]
        certified = certify_sensitivity(tmap, pairs, 2.0, floor=floor)
        estimate = estimate_sensitivity(certified, pairs, 2.0)
        assert certified.certified_eps is not None
        assert estimate <= certified.certified_eps
        assert certified.certified_eps == max(floor, estimate)
