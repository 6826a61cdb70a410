"""Tests for dataset CSVs, profile files and run configs."""

import json

import numpy as np
import pytest

from perfbounds import DomainBox, TopXiLabelFlip, empirical_from_points
from perfbounds.datasets import (
    box_sidecar,
    load_config,
    load_map,
    load_profile,
    read_dataset,
    save_config,
    save_profile,
    write_dataset,
)

from conftest import CONFIGS_DIR, make_profile


@pytest.fixture
def wide_box():
    return DomainBox(lower=(0.0, -1.0, 0.0), upper=(1.0, 2.0, 5.0), dim_y=1, dim_x=2)


class TestDatasetFiles:
    def test_round_trip_with_sidecar(self, tmp_path, wide_box):
        points = [[1.0, -0.5, 4.25], [0.0, 1.0 / 3.0, 0.1], [1.0, 2.0, 5.0]]
        dist = empirical_from_points(points, wide_box)
        path = write_dataset(dist, tmp_path / "sample.csv")
        assert box_sidecar(path).name == "sample.box.json"
        assert path.read_text(encoding="utf-8").splitlines()[0] == "y,x1,x2"
        loaded = read_dataset(path)
        assert loaded.same_as(dist)

    def test_weights_column(self, tmp_path, unit_box_1d):
        dist = empirical_from_points([[0.0, 0.2], [1.0, 0.7]], unit_box_1d, [1.0, 3.0])
        path = write_dataset(dist, tmp_path / "weighted.csv")
        assert path.read_text(encoding="utf-8").splitlines()[0] == "y,x1,w"
        loaded = read_dataset(path)
        np.testing.assert_allclose(loaded.weights, [0.25, 0.75])

    def test_missing_sidecar_assumes_unit_box(self, tmp_path, caplog):
        path = tmp_path / "bare.csv"
        path.write_text("y,x1,x2\n1,0.5,0.25\n0,0,1\n", encoding="utf-8")
        dist = read_dataset(path)
        assert dist.box == DomainBox.unit(dim_x=2)
        assert "has no box sidecar" in caplog.text

    def test_explicit_box_wins(self, tmp_path, wide_box):
        dist = empirical_from_points([[1.0, 0.5, 4.0]], wide_box)
        path = write_dataset(dist, tmp_path / "sample.csv")
        with pytest.raises(ValueError, match="outside the box"):
            read_dataset(path, box=DomainBox.unit(dim_x=2))

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,x1\n1,0.5\n", encoding="utf-8")
        with pytest.raises(ValueError, match="header must be y,x1"):
            read_dataset(path)

    def test_multi_label_box_rejected(self, tmp_path):
        box = DomainBox.unit(dim_x=1, dim_y=2)
        dist = empirical_from_points([[0.0, 1.0, 0.5]], box)
        with pytest.raises(ValueError, match="single label column"):
            write_dataset(dist, tmp_path / "multi.csv")


class TestProfileFiles:
    def test_bare_and_wrapped(self, tmp_path):
        profile = make_profile(c_inf=2.0)
        bare = tmp_path / "bare.json"
        save_profile(profile, bare)
        wrapped = tmp_path / "wrapped.json"
        wrapped.write_text(json.dumps({"profile": profile.to_dict()}), encoding="utf-8")
        assert load_profile(bare) == profile
        assert load_profile(wrapped) == profile

    def test_config_file_profile(self):
        profile = load_profile(CONFIGS_DIR / "appA2.json")
        assert profile.nu == 4
        assert profile.sampling_lipschitz == 2.0

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ValueError, match="invalid JSON"):
            load_profile(path)

    def test_unknown_constant(self, tmp_path):
        path = tmp_path / "extra.json"
        path.write_text(json.dumps({**make_profile().to_dict(), "L_g": 1.0}), encoding="utf-8")
        with pytest.raises(ValueError, match="Unknown profile keys: L_g"):
            load_profile(path)


class TestMapFiles:
    def test_from_dict(self):
        tmap = load_map({"kind": "top_xi_label_flip", "xi": 0.1, "effectiveness": 0.5})
        assert isinstance(tmap, TopXiLabelFlip)
        assert tmap.xi == 0.1 and tmap.effectiveness == 0.5

    def test_from_file(self, tmp_path):
        path = tmp_path / "map.json"
        path.write_text(json.dumps({"kind": "top_xi_label_flip", "xi": 0.3}), encoding="utf-8")
        assert load_map(path).xi == 0.3

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="Unknown transition kind"):
            load_map({"kind": "teleport"})


class TestConfigFiles:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "run.json"
        save_config({"bound": {"n": 10}, "sweep": {"workers": 2}}, path)
        assert load_config(path) == {"bound": {"n": 10}, "sweep": {"workers": 2}}

    def test_shipped_configs_load(self):
        for name in ("appA2.json", "appA3.json"):
            assert "profile" in load_config(CONFIGS_DIR / name)

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"schema": 1, "plot": {}}), encoding="utf-8")
        with pytest.raises(ValueError, match="unknown config sections: plot"):
            load_config(path)

    def test_section_must_be_object(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"bound": [1, 2]}), encoding="utf-8")
        with pytest.raises(ValueError, match="must be objects: bound"):
            load_config(path)

    def test_schema_version(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"schema": 2}), encoding="utf-8")
        with pytest.raises(ValueError, match="Unsupported config schema version: 2"):
            load_config(path)
