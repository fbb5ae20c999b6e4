import json
from functools import lru_cache
from pathlib import Path
from typing import List

import numpy as np

from eegid.core.models import Montage


MONTAGE_ASSET = Path(__file__).parent / "data" / "montage_1020.json"


@lru_cache(maxsize=1)
def _load_asset() -> dict:
    with open(MONTAGE_ASSET, "r", encoding="utf-8") as f:
        return json.load(f)


def canonical_channel_names() -> List[str]:
    """The 30 electrode labels in storage order"""
    return [row["name"] for row in _load_asset()["channels"]]


def spherical_to_unit(theta_deg: float, phi_deg: float) -> np.ndarray:
    theta = np.deg2rad(theta_deg)
    phi = np.deg2rad(phi_deg)
    xyz = np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])
    return xyz / np.linalg.norm(xyz)


def builtin_montage() -> Montage:
    """Idealized 10-20 positions on the unit sphere for the canonical channel list"""
    positions = {}
    for row in _load_asset()["channels"]:
        xyz = spherical_to_unit(row["theta"], row["phi"])
        positions[row["name"]] = (float(xyz[0]), float(xyz[1]), float(xyz[2]))
    return Montage(positions=positions)
