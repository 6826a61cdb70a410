"""
File formats: dataset CSVs with a box sidecar, profile JSON, run configs.

A dataset ``sample.csv`` has header ``y,x1,...,xk`` plus an optional ``w``
weight column; its box lives in ``sample.box.json``. Profiles are stored bare
or wrapped as ``{"profile": {...}}``. Run configs are JSON objects with
``"schema": 1`` and one optional section per CLI subcommand.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd

from .domain import (
    SCHEMA_VERSION,
    ConstantsProfile,
    DomainBox,
    EmpiricalDistribution,
    check_schema,
    empirical_from_points,
)
from .transition import TransitionMap, map_from_dict

logger = logging.getLogger(__name__)

CONFIG_SECTIONS = ("profile", "gen-data", "fit", "rerm", "bound", "sweep", "validate")
BUNDLED_CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def box_sidecar(path: str | Path) -> Path:
    return Path(path).with_suffix(".box.json")


def resolve_config_path(path: str | Path) -> Path:
    """``path`` itself, or a bare file name missing here but shipped in ``configs/``."""
    path = Path(path)
    if path.exists() or path.parent != Path("."):
        return path
    bundled = BUNDLED_CONFIGS / path.name
    if bundled.exists():
        logger.info("Using bundled config %s", bundled)
        return bundled
    return path


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(resolve_config_path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from exc


def write_dataset(dist: EmpiricalDistribution, path: str | Path) -> Path:
    """Write ``dist`` as CSV plus its box sidecar; returns the CSV path."""
    if dist.box.dim_y != 1:
        raise ValueError("dataset CSVs hold a single label column")
    path = Path(path)
    columns = {"y": dist.labels}
    for j in range(dist.box.dim_x):
        columns[f"x{j + 1}"] = dist.features[:, j]
    if not dist.is_uniform:
        columns["w"] = dist.weights
    pd.DataFrame(columns).to_csv(path, index=False, float_format="%.17g")
    box_sidecar(path).write_text(json.dumps(dist.box.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def read_dataset(path: str | Path, box: Optional[DomainBox] = None) -> EmpiricalDistribution:
    """
    Load a dataset CSV.

    The box comes from ``box`` or else the sidecar; without either the unit box
    over the CSV's feature columns is assumed.

    Raises:
        ValueError: On a malformed header or points outside the box.
    """
    path = Path(path)
    frame = pd.read_csv(path, dtype=np.float64)
    columns = list(frame.columns)
    weights = None
    if columns and columns[-1] == "w":
        weights = frame.pop("w").to_numpy()
        columns = columns[:-1]
    expected = ["y"] + [f"x{j}" for j in range(1, len(columns))]
    if columns != expected:
        header = ",".join(columns)
        raise ValueError(f"{path}: header must be {','.join(expected)}[,w], got {header}")

    if box is None:
        sidecar = box_sidecar(path)
        if sidecar.exists():
            box = DomainBox.from_dict(read_json(sidecar))
        else:
            logger.warning("%s has no box sidecar; assuming the unit box", path)
            box = DomainBox.unit(dim_x=len(columns) - 1)
    return empirical_from_points(frame.to_numpy(), box, weights)


def load_profile(path: str | Path) -> ConstantsProfile:
    data = read_json(path)
    if isinstance(data, dict) and "profile" in data:
        data = data["profile"]
    return ConstantsProfile.from_dict(data)


def save_profile(profile: ConstantsProfile, path: str | Path) -> None:
    Path(path).write_text(json.dumps(profile.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_map(source: str | Path | dict[str, Any]) -> TransitionMap:
    """Transition map from a JSON file or an already parsed dict."""
    data = source if isinstance(source, dict) else read_json(source)
    return map_from_dict(data)


def load_config(path: str | Path) -> dict[str, Any]:
    """
    Read a run config and validate its schema and section names.

    Returns:
        Dict of sections (without the schema key)
    """
    data = check_schema(read_json(path), "config")
    unknown = sorted(set(data) - set(CONFIG_SECTIONS))
    if unknown:
        raise ValueError(f"{path}: unknown config sections: {', '.join(unknown)}")
    bad = [name for name, section in data.items() if not isinstance(section, dict)]
    if bad:
        raise ValueError(f"{path}: config sections must be objects: {', '.join(bad)}")
    return data


def save_config(sections: dict[str, Any], path: str | Path) -> None:
    payload = {"schema": SCHEMA_VERSION, **sections}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
