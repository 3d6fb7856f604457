"""Closed-loop traffic agent simulation.

Thin python facade over the C++ core: map loading and generation, routing,
scenario execution, catalog evaluation and the scalability benchmark. Heavy
lifting happens in the extension module; this layer only decodes JSON payloads
into plain dictionaries where that is more convenient than raw text.
"""

import json as _json

from ._core import (  # noqa: F401
    DecodeError,
    HostError,
    NoRouteError,
    OffRoadError,
    ParseError,
    bench,
    equilibrium_headway,
    run_catalog,
    run_scenario,
    shortest_route,
)
from . import _core as _c

__all__ = [
    "DecodeError",
    "HostError",
    "NoRouteError",
    "OffRoadError",
    "ParseError",
    "bench",
    "bench_report",
    "equilibrium_headway",
    "generate_intersection",
    "generate_test_road",
    "load_map",
    "run_catalog",
    "run_scenario",
    "shortest_route",
]

__version__ = "1.0.0"


def load_map(path):
    """Load and validate a lane map file; returns it as a dictionary."""
    return _json.loads(_c.load_map_json(str(path)))


def generate_test_road(radius=100.0, spiral=60.0, line=150.0):
    """Line-spiral-arc test road as a map dictionary."""
    return _json.loads(_c.generate_test_road(radius, spiral, line))


def generate_intersection(arm=150.0, turn_radius=12.0):
    """Four-arm right-turn intersection as a map dictionary."""
    return _json.loads(_c.generate_intersection(arm, turn_radius))


def bench_report(counts, duration=20.0, replicates=3):
    """Scalability sweep; returns the fitted report as a dictionary."""
    return _json.loads(_c.bench(list(counts), duration, replicates))
