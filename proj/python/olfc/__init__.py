"""Python access to the frequency control simulation core."""

import json

from ._olfc import (
    LoadedScenario,
    ValidationError,
    brute_force_dispatch,
    droop_certificate,
    load_scenario,
    optimal_dispatch,
    simulate,
    synchronous_frequency,
)
from . import _olfc


def certify(scenario):
    """Droop certificates under both K readings plus the optimal dispatch."""
    return json.loads(_olfc.certify_json(scenario))


def run(scenario, out_dir="out", certify_only=False, write_files=True):
    """Simulate and analyse; returns the report as a dict."""
    return json.loads(_olfc.run_json(scenario, out_dir, certify_only, write_files))


__all__ = [
    "LoadedScenario",
    "ValidationError",
    "brute_force_dispatch",
    "certify",
    "droop_certificate",
    "load_scenario",
    "optimal_dispatch",
    "run",
    "simulate",
    "synchronous_frequency",
]
