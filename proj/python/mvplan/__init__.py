"""Python access to the mvplan simulator, decision search and geometry helpers."""

import csv
import io
import json
import os

from . import _mvplan
from ._mvplan import MvplanError, ReferencePath, fit_quintic, flow_reward

__all__ = [
    "MvplanError",
    "ReferencePath",
    "decide",
    "default_weights",
    "fit_quintic",
    "flow_reward",
    "load_scenario",
    "simulate",
]


def _source(scenario):
    if isinstance(scenario, dict):
        return json.dumps(scenario)
    return os.fspath(scenario)


def load_scenario(scenario):
    """Validated scenario (path, JSON text or dict) with every default filled in."""
    return json.loads(_mvplan.normalize_scenario(_source(scenario)))


def default_weights():
    return json.loads(_mvplan.default_weights())


def simulate(scenario, seed=0, mode="full", weights=None, max_duration=30.0):
    """One closed-loop run. Returns metrics, per-tick rows and events."""
    raw = _mvplan.simulate(_source(scenario), seed, mode, os.fspath(weights) if weights else "", max_duration)
    return {
        "metrics": json.loads(raw["metrics"]),
        "rows": list(csv.DictReader(io.StringIO(raw["log_csv"]))),
        "events": list(csv.DictReader(io.StringIO(raw["events_csv"]))),
        "log_csv": raw["log_csv"],
    }


def decide(scenario, seed=0, iterations=3000, pruning=True):
    """Tree search from the scenario's initial state."""
    return json.loads(_mvplan.decide(_source(scenario), seed, iterations, pruning))
