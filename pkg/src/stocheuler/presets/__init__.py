"""Shipped experiment presets and the pilot record that fixed their acceptance bars."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path


def preset_path(name: str = "standard_ensemble") -> Path:
    path = Path(str(resources.files(__name__).joinpath(f"{name}.yaml")))
    if not path.is_file():
        raise FileNotFoundError(f"no preset named {name!r}")
    return path


def pilot_record() -> dict:
    return json.loads(resources.files(__name__).joinpath("pilot.json").read_text())
