"""Versioned default tolerances and budgets, loaded from ``defaults.json``."""

from __future__ import annotations

import json
import os
from importlib import resources

DEFAULTS: dict = json.loads(resources.files("merwlab").joinpath("defaults.json").read_text())

BUDGET_ENV = "MERWLAB_STEP_BUDGET"


def step_budget() -> int:
    """Global step budget, overridable through the environment."""
    raw = os.environ.get(BUDGET_ENV)
    if raw is None:
        return int(DEFAULTS["step_budget"])
    return int(float(raw))
