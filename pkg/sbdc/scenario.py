"""
Declarative scenario files.

A scenario is a single JSON document naming a graph, a coding assignment, an
attack, an optional semi-autonomous network and simulation parameters.
``parse_scenario`` turns it into checked domain objects; every validation
failure names the offending field with a dotted path.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from sbdc.attack_model import BENCHMARK_SUPPORTS, AttackSpec, benchmark_attack, random_attack
from sbdc.dynamics_sim import SanConfig, SimulationSettings
from sbdc.errors import ParseError, SbdcError, ValidationError
from sbdc.graph_core import Edge, Graph, canonical_edge, edge_key, graph_from_dict, parse_edge_key
from sbdc.objective_coding import CodingAssignment, Codeword, decoder_from_dict, synthesize_codeword
from utils.config import DEFAULT_DT

MODES = ("ct", "dt")
CT_CERTIFICATES = ("ct_codeword", "weight_perturbation")
DT_CERTIFICATES = ("dt_phi", "dt_codeword")
CERTIFICATES = CT_CERTIFICATES + DT_CERTIFICATES


@dataclass(frozen=True)
class AttackConfig:
    """How the attack is obtained: none, a benchmark variant, explicit or random."""
    kind: str = "none"
    variant: int | None = None
    rho: float | None = None
    explicit: AttackSpec | None = None
    support: tuple[Edge, ...] = ()
    budget: float | None = None
    seed: int | None = None

    def build(self, g: Graph, seed=None) -> AttackSpec | None:
        if self.kind == "variant":
            return benchmark_attack(self.variant, self.rho)
        if self.kind == "explicit":
            return self.explicit
        if self.kind == "random":
            return random_attack(g, self.support, self.budget, seed=self.seed if seed is None else seed)
        return None

    @property
    def edges(self) -> tuple[Edge, ...]:
        if self.kind == "variant":
            return BENCHMARK_SUPPORTS[self.variant]
        if self.kind == "explicit":
            return self.explicit.support
        return self.support

    def to_dict(self) -> dict | None:
        if self.kind == "variant":
            return {"variant": self.variant, "rho": self.rho}
        if self.kind == "explicit":
            return self.explicit.to_dict()
        if self.kind == "random":
            return {"random": {"support": [list(e) for e in self.support], "budget": self.budget, "seed": self.seed}}
        return None


@dataclass(frozen=True)
class SimulationSpec:
    mode: str
    x0: tuple | None = None
    horizon: float | None = None
    dt: float = DEFAULT_DT
    steps: int | None = None
    epsilon: float | None = None
    seed: int | None = None
    settings: SimulationSettings = field(default_factory=SimulationSettings)

    def initial_state(self, n: int, seed=None) -> np.ndarray:
        """Declared x0, or a seeded uniform draw on [-1, 1] when none is given."""
        if self.x0 is not None:
            return np.array(self.x0, dtype=float)
        rng = np.random.default_rng(self.seed if seed is None else seed)
        return rng.uniform(-1.0, 1.0, n)

    def to_dict(self) -> dict:
        data: dict[str, Any] = {"mode": self.mode}
        if self.x0 is not None:
            data["x0"] = [list(v) if isinstance(v, tuple) else v for v in self.x0]
        if self.mode == "ct":
            data.update(horizon=self.horizon, dt=self.dt)
        else:
            data.update(steps=self.steps, epsilon=self.epsilon)
        if self.seed is not None:
            data["seed"] = self.seed
        data.update(
            convergence_tol=self.settings.convergence_tol,
            escape_threshold=self.settings.escape_threshold,
            max_samples=self.settings.max_samples,
        )
        return data


@dataclass(frozen=True)
class Scenario:
    name: str
    graph: Graph
    coding: CodingAssignment
    attack: AttackConfig = field(default_factory=AttackConfig)
    san: SanConfig | None = None
    simulation: SimulationSpec | None = None
    certificates: tuple[str, ...] = CT_CERTIFICATES
    expected: str | None = None
    output_dir: str | None = None

    @property
    def epsilon(self) -> float | None:
        """Step size used by the discrete-time certificates (dt mode only)."""
        if self.simulation is not None and self.simulation.mode == "dt":
            return self.simulation.epsilon
        return None

    def codeword(self) -> Codeword:
        return synthesize_codeword(self.graph, self.coding)

    def content_hash(self) -> str:
        return scenario_hash(self)


@dataclass
class RunRecord:
    """What one pipeline run produced, for the audit trail."""
    scenario_hash: str
    version: str
    report: dict | None = None
    verdicts: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    def to_dict(self) -> dict:
        return {
            "scenario_hash": self.scenario_hash,
            "version": self.version,
            "report": self.report,
            "verdicts": self.verdicts,
            "wall_clock": self.wall_clock,
        }


def _require(data: Mapping, key: str, path: str):
    if not isinstance(data, Mapping):
        raise ValidationError(path, "must be an object")
    if key not in data or data[key] is None:
        raise ValidationError(f"{path}.{key}" if path else key, "required")
    return data[key]


def _number(value, path: str, positive=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(path, f"expected a number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise ValidationError(path, "must be finite")
    if positive and value <= 0.0:
        raise ValidationError(path, f"must be > 0, got {value}")
    return value


def _list(value, path: str) -> list:
    if not isinstance(value, list):
        raise ValidationError(path, f"expected a list, got {value!r}")
    return value


def _seed(value, path: str) -> int | None:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ValidationError(path, f"expected a non-negative integer, got {value!r}")
    return value


def _decoder(spec, path: str):
    if not isinstance(spec, Mapping):
        raise ValidationError(path, "must be an object")
    try:
        return decoder_from_dict(spec)
    except (SbdcError, TypeError, ValueError) as exc:
        raise ValidationError(path, str(exc)) from exc


def _edge(item, path: str, g: Graph) -> Edge:
    if isinstance(item, str):
        try:
            edge = parse_edge_key(item)
        except ValueError:
            raise ValidationError(path, f"malformed edge key {item!r}") from None
    elif isinstance(item, (list, tuple)) and len(item) == 2:
        edge = canonical_edge(*item)
    else:
        raise ValidationError(path, f"expected an edge [i, j], got {item!r}")
    if edge not in g.edges:
        raise ValidationError(path, f"edge {edge_key(edge)} is not in the graph")
    return edge


def _parse_graph(data) -> Graph:
    _require(data, "n", "graph")
    _require(data, "edges", "graph")
    try:
        return graph_from_dict(data)
    except (SbdcError, TypeError, ValueError) as exc:
        raise ValidationError("graph.edges", str(exc)) from exc


def _parse_coding(data, g: Graph) -> CodingAssignment:
    if not isinstance(data, Mapping):
        raise ValidationError("coding", "must be an object")
    if "uniform" in data:
        return CodingAssignment.uniform(g, _decoder(data["uniform"], "coding.uniform"))

    edges = _require(data, "edges", "coding")
    if not isinstance(edges, Mapping):
        raise ValidationError("coding.edges", "must be an object keyed by edge")
    decoders = {}
    for key, spec in edges.items():
        path = f"coding.edges.{key}"
        decoders[_edge(key, path, g)] = _decoder(spec, path)
    coding = CodingAssignment(decoders)
    if not coding.covers(g):
        missing = [edge_key(e) for e in g.edges if e not in decoders]
        raise ValidationError("coding.edges", f"no decoder for edges {missing}")
    return coding


def _parse_attack(data, g: Graph) -> AttackConfig:
    if data is None:
        return AttackConfig()
    if not isinstance(data, Mapping):
        raise ValidationError("attack", "must be an object or null")

    if "variant" in data:
        variant = data["variant"]
        if variant not in BENCHMARK_SUPPORTS:
            raise ValidationError("attack.variant", f"unknown variant {variant!r}; expected 1 or 2")
        rho = _number(data.get("rho", 0.5), "attack.rho")
        if rho < 0.0:
            raise ValidationError("attack.rho", f"must be >= 0, got {rho}")
        for k, edge in enumerate(BENCHMARK_SUPPORTS[variant]):
            _edge(list(edge), f"attack.variant.support.{k}", g)
        return AttackConfig(kind="variant", variant=variant, rho=rho)

    if "random" in data:
        spec = data["random"]
        items = _list(_require(spec, "support", "attack.random"), "attack.random.support")
        support = tuple(_edge(e, f"attack.random.support.{k}", g) for k, e in enumerate(items))
        if not support:
            raise ValidationError("attack.random.support", "must not be empty")
        budget = _number(_require(spec, "budget", "attack.random"), "attack.random.budget")
        if budget < 0.0:
            raise ValidationError("attack.random.budget", f"must be >= 0, got {budget}")
        seed = _seed(spec.get("seed"), "attack.random.seed")
        return AttackConfig(kind="random", support=support, budget=budget, seed=seed)

    deviations = _require(data, "deviations", "attack")
    if not isinstance(deviations, Mapping) or not deviations:
        raise ValidationError("attack.deviations", "must be a nonempty object")
    parsed = {}
    for key, value in deviations.items():
        path = f"attack.deviations.{key}"
        parsed[_edge(key, path, g)] = _number(value, path)
    items = _list(data.get("support", list(parsed)), "attack.support")
    support = tuple(_edge(e, f"attack.support.{k}", g) for k, e in enumerate(items))
    budget = _number(data.get("budget", max(abs(v) for v in parsed.values())), "attack.budget")
    try:
        spec = AttackSpec(support, parsed, budget)
    except (SbdcError, ValueError) as exc:
        raise ValidationError("attack", str(exc)) from exc
    return AttackConfig(kind="explicit", explicit=spec)


def _parse_san(data, g: Graph) -> SanConfig | None:
    if data is None:
        return None
    leaders = _list(_require(data, "leaders", "san"), "san.leaders")
    inputs = _list(_require(data, "inputs", "san"), "san.inputs")
    for k, leader in enumerate(leaders):
        if isinstance(leader, bool) or not isinstance(leader, int) or not 1 <= leader <= g.n:
            raise ValidationError(f"san.leaders.{k}", f"{leader!r} is not a vertex of the graph")
    try:
        return SanConfig.from_dict({"leaders": leaders, "gains": data.get("gains", [1.0] * len(leaders)), "inputs": inputs})
    except (SbdcError, ValueError, TypeError) as exc:
        raise ValidationError("san", str(exc)) from exc


def _initial_states(x0: list) -> tuple:
    """Scalars per agent, or equal-length vectors per agent."""
    if all(not isinstance(v, list) for v in x0):
        return tuple(_number(v, f"simulation.x0.{i}") for i, v in enumerate(x0))
    if not all(isinstance(v, list) and v for v in x0):
        raise ValidationError("simulation.x0", "mixes scalars and vectors")
    dims = {len(v) for v in x0}
    if len(dims) != 1:
        raise ValidationError("simulation.x0", f"agent states have different dimensions {sorted(dims)}")
    return tuple(
        tuple(_number(c, f"simulation.x0.{i}.{d}") for d, c in enumerate(v)) for i, v in enumerate(x0)
    )


def _state_dim(x0: tuple) -> int:
    return len(x0[0]) if isinstance(x0[0], tuple) else 1


def _parse_simulation(data, g: Graph) -> SimulationSpec | None:
    if data is None:
        return None
    mode = _require(data, "mode", "simulation")
    if mode not in MODES:
        raise ValidationError("simulation.mode", f"expected one of {list(MODES)}, got {mode!r}")

    x0 = data.get("x0")
    if x0 is not None:
        if not isinstance(x0, list) or len(x0) != g.n:
            raise ValidationError("simulation.x0", f"expected {g.n} entries")
        x0 = _initial_states(x0)

    try:
        settings = SimulationSettings.from_dict(data)
    except (ValueError, TypeError) as exc:
        raise ValidationError("simulation", str(exc)) from exc

    seed = _seed(data.get("seed"), "simulation.seed")
    if mode == "ct":
        if data.get("epsilon") is not None:
            raise ValidationError("simulation.epsilon", "only allowed in dt mode")
        horizon = _number(_require(data, "horizon", "simulation"), "simulation.horizon", positive=True)
        dt = _number(data.get("dt", DEFAULT_DT), "simulation.dt", positive=True)
        if horizon < dt:
            raise ValidationError("simulation.horizon", f"must be >= dt ({dt})")
        return SimulationSpec(mode=mode, x0=x0, horizon=horizon, dt=dt, seed=seed, settings=settings)

    epsilon = _number(_require(data, "epsilon", "simulation"), "simulation.epsilon", positive=True)
    steps = _require(data, "steps", "simulation")
    if isinstance(steps, bool) or not isinstance(steps, int) or steps < 1:
        raise ValidationError("simulation.steps", f"expected a positive integer, got {steps!r}")
    return SimulationSpec(mode=mode, x0=x0, steps=steps, epsilon=epsilon, seed=seed, settings=settings)


def parse_scenario(data: Mapping) -> Scenario:
    """Validate a decoded scenario document and build its domain objects.

    Raises:
        ValidationError: naming the offending field.
    """
    if not isinstance(data, Mapping):
        raise ValidationError("scenario", "top level must be an object")
    g = _parse_graph(_require(data, "graph", ""))
    coding = _parse_coding(_require(data, "coding", ""), g)
    attack = _parse_attack(data.get("attack"), g)
    san = _parse_san(data.get("san"), g)
    simulation = _parse_simulation(data.get("simulation"), g)

    dt_mode = simulation is not None and simulation.mode == "dt"
    if "certificates" in data:
        certificates = data["certificates"]
        if not isinstance(certificates, list) or not all(isinstance(c, str) for c in certificates):
            raise ValidationError("certificates", "expected a list of certificate names")
        certificates = tuple(certificates)
    else:
        certificates = CERTIFICATES if dt_mode else CT_CERTIFICATES
    unknown = [c for c in certificates if c not in CERTIFICATES]
    if unknown:
        raise ValidationError("certificates", f"unknown certificates {unknown}")
    if attack.kind == "none" and data.get("certificates"):
        raise ValidationError("certificates", "certificates need an attack")
    needs_step = [c for c in certificates if c in DT_CERTIFICATES]
    if needs_step and not dt_mode:
        raise ValidationError("certificates", f"{needs_step} need a dt simulation with epsilon")

    expected = data.get("expected")
    if expected is not None and expected not in ("Converged", "Diverged", "Undecided"):
        raise ValidationError("expected", f"unknown verdict {expected!r}")

    if san is not None and simulation is not None and simulation.x0 is not None:
        dim = _state_dim(simulation.x0)
        if dim not in (1, san.dim):
            raise ValidationError("simulation.x0", f"state dimension {dim} does not match input dimension {san.dim}")

    output = data.get("output") or {}
    if not isinstance(output, Mapping):
        raise ValidationError("output", "must be an object")
    if output.get("dir") is not None and not isinstance(output["dir"], str):
        raise ValidationError("output.dir", f"expected a path string, got {output['dir']!r}")
    return Scenario(
        name=str(data.get("name", "scenario")),
        graph=g,
        coding=coding,
        attack=attack,
        san=san,
        simulation=simulation,
        certificates=certificates,
        expected=expected,
        output_dir=output.get("dir"),
    )


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file.

    Raises:
        ParseError: malformed JSON, with line and column.
        ValidationError: semantically invalid content.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    return parse_scenario(data)


def scenario_to_dict(scenario: Scenario) -> dict:
    data: dict[str, Any] = {
        "name": scenario.name,
        "graph": scenario.graph.to_dict(),
        "coding": scenario.coding.to_dict(),
        "attack": scenario.attack.to_dict(),
    }
    if scenario.attack.kind != "none":
        data["certificates"] = list(scenario.certificates)
    if scenario.san is not None:
        data["san"] = scenario.san.to_dict()
    if scenario.simulation is not None:
        data["simulation"] = scenario.simulation.to_dict()
    if scenario.expected is not None:
        data["expected"] = scenario.expected
    if scenario.output_dir is not None:
        data["output"] = {"dir": scenario.output_dir}
    return data


def scenario_hash(scenario: Scenario) -> str:
    """sha256 over the canonical serialization; key and edge order do not matter."""
    canonical = json.dumps(scenario_to_dict(scenario), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
