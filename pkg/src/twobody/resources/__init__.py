"""Shipped skeletons, split protocols, the synthetic dataset and run configs."""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def shipped(name: str) -> Path | None:
    """Path of the shipped file called ``name`` (suffix optional), else None."""
    if "/" in name or "\\" in name:
        return None
    root = resources.files("twobody.resources")
    for candidate in (name, f"{name}.json", f"{name}.csv", f"configs/{name}.json"):
        p = root.joinpath(candidate)
        if p.is_file():
            return Path(str(p))
    return None
