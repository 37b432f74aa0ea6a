"""Bundled example inputs: two small studies and two container recipes.

hyperparam     plays back a recorded training-error table for two
               optimizer step sizes; fast stand-in for a real sweep
fd_derivative  central finite differences on a cubic with a known
               derivative, the smallest honest end-to-end pipeline
recipes/       one clean and one deliberately sloppy container recipe
               for the linter

export() copies a demo study to a writable location, since installed
package data should be treated as read-only.
"""

from __future__ import annotations

import shutil
from pathlib import Path

from ..errors import LabrunError

DEMO_ROOT = Path(__file__).parent

STUDIES = ("hyperparam", "fd_derivative")
RECIPES = ("clean.def", "dirty.def")


def demo_dir(name: str) -> Path:
    if name not in STUDIES:
        raise LabrunError(f"no demo study named {name!r} (available: {', '.join(STUDIES)})")
    return DEMO_ROOT / name


def recipe_path(name: str) -> Path:
    if name not in RECIPES:
        raise LabrunError(f"no demo recipe named {name!r} (available: {', '.join(RECIPES)})")
    return DEMO_ROOT / "recipes" / name


def export(name: str, dest: Path) -> Path:
    """Copy a demo study directory into dest/<name> and return that path."""
    src = demo_dir(name)
    target = Path(dest) / name
    if target.exists():
        raise LabrunError(f"destination {target} already exists")
    shutil.copytree(src, target, ignore=shutil.ignore_patterns("__pycache__"))
    return target
