"""
Embedded benchmark: a six-agent semi-autonomous network led by agent 1.

Two coding gains are compared (K1 = 6 and K2 = 2, both giving the same
tampering bound 0.5 on their intended attack sets) under the single-edge
and the three-edge attack, in continuous and discrete time.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import NamedTuple

from sbdc.graph_core import Graph, build_graph
from sbdc.scenario import Scenario, parse_scenario
from utils.config import (
    BENCHMARK_DT,
    BENCHMARK_EPSILON,
    BENCHMARK_GAINS,
    BENCHMARK_HORIZON,
    BENCHMARK_INPUT,
    BENCHMARK_RHO,
    BENCHMARK_STEPS,
    BENCHMARK_TOL,
    BENCHMARK_X0,
)
from utils.files import atomic_write_text

BENCHMARK_N = 6
BENCHMARK_EDGES = [
    [1, 2, 3.0],
    [3, 5, 1.0],
    [4, 6, 1.0],
    [2, 4, 2.0],
    [2, 3, 2.0],
]


class BenchmarkCell(NamedTuple):
    gain: str
    variant: int
    mode: str
    expected: str

    @property
    def name(self) -> str:
        return f"{self.gain.lower()}_e{self.variant}_{self.mode}"


# Gain K1 only withstands the single-edge attack it was tuned for
BENCHMARK_CELLS = (
    BenchmarkCell("K1", 1, "ct", "Converged"),
    BenchmarkCell("K1", 1, "dt", "Converged"),
    BenchmarkCell("K1", 2, "ct", "Diverged"),
    BenchmarkCell("K1", 2, "dt", "Diverged"),
    BenchmarkCell("K2", 2, "ct", "Converged"),
    BenchmarkCell("K2", 2, "dt", "Converged"),
)


def benchmark_graph() -> Graph:
    return build_graph(BENCHMARK_N, [tuple(e) for e in BENCHMARK_EDGES])


def benchmark_scenario_dict(cell: BenchmarkCell, epsilon: float | None = None) -> dict:
    """Scenario document for one cell; ``epsilon`` overrides the dt step size.

    Discrete-time runs keep the same physical horizon as the continuous ones.
    """
    if cell.mode == "ct":
        simulation = {"mode": "ct", "horizon": BENCHMARK_HORIZON, "dt": BENCHMARK_DT}
    else:
        eps = BENCHMARK_EPSILON if epsilon is None else float(epsilon)
        steps = BENCHMARK_STEPS if epsilon is None else max(1, int(round(BENCHMARK_HORIZON / eps)))
        simulation = {"mode": "dt", "epsilon": eps, "steps": steps}
    simulation.update(x0=list(BENCHMARK_X0), convergence_tol=BENCHMARK_TOL)

    return {
        "name": cell.name,
        "graph": {"n": BENCHMARK_N, "edges": copy.deepcopy(BENCHMARK_EDGES)},
        "coding": {"uniform": {"family": "concave", "gain": BENCHMARK_GAINS[cell.gain]}},
        "attack": {"variant": cell.variant, "rho": BENCHMARK_RHO},
        "san": {"leaders": [1], "gains": [1.0], "inputs": [BENCHMARK_INPUT]},
        "simulation": simulation,
        "expected": cell.expected,
    }


def benchmark_scenarios(epsilon: float | None = None) -> list[tuple[BenchmarkCell, Scenario]]:
    return [(cell, parse_scenario(benchmark_scenario_dict(cell, epsilon))) for cell in BENCHMARK_CELLS]


def emit_scenarios(directory, epsilon: float | None = None) -> list[Path]:
    """Write every benchmark scenario as ``<name>.json`` for editing."""
    directory = Path(directory)
    paths = []
    for cell in BENCHMARK_CELLS:
        path = directory / f"{cell.name}.json"
        atomic_write_text(path, json.dumps(benchmark_scenario_dict(cell, epsilon), indent=2) + "\n")
        paths.append(path)
    return paths
