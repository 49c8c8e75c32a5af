"""
Consensus dynamics under tampered codewords.

Three flavours share one fixed-step engine:

- nominal / perturbed consensus, continuous time (RK4) or discrete time;
- semi-autonomous networks (SAN) where leader agents are pulled towards
  constant external inputs through the augmented Laplacian
  ``L_B = L + diag(B 1)``.

States are stored as ``(n, D)`` arrays; the weighted Laplacian acts on every
coordinate independently, which is the Kronecker form ``L (x) I_D``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Mapping, Sequence

import numpy as np

from sbdc.attack_model import AttackSpec
from sbdc.errors import NonFiniteState
from sbdc.graph_core import Graph, laplacian
from sbdc.objective_coding import CodingAssignment, Codeword, decode_weights
from utils.config import (
    CONVERGED_FRACTION,
    CONVERGENCE_TOL,
    DEFAULT_DT,
    ESCAPE_THRESHOLD,
    GROWTH_FRACTION,
    MAX_STORED_SAMPLES,
    STEP_SLACK,
)
from utils.files import atomic_write_json, atomic_write_text, fmt_number

log = logging.getLogger(__name__)


class Verdict(Enum):
    CONVERGED = "Converged"
    DIVERGED = "Diverged"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class SimulationSettings:
    """Verdict thresholds; every field can be overridden per scenario."""
    convergence_tol: float = CONVERGENCE_TOL
    escape_threshold: float = ESCAPE_THRESHOLD
    max_samples: int = MAX_STORED_SAMPLES
    converged_fraction: float = CONVERGED_FRACTION
    growth_fraction: float = GROWTH_FRACTION

    def __post_init__(self):
        if not self.convergence_tol > 0.0:
            raise ValueError(f"convergence_tol must be > 0, got {self.convergence_tol}")
        if not self.escape_threshold > 0.0:
            raise ValueError(f"escape_threshold must be > 0, got {self.escape_threshold}")
        if int(self.max_samples) < 3:
            raise ValueError(f"max_samples must be at least 3, got {self.max_samples}")

    @classmethod
    def from_dict(cls, data: Mapping | None) -> "SimulationSettings":
        data = data or {}
        known = {k: data[k] for k in ("convergence_tol", "escape_threshold", "max_samples") if k in data}
        return cls(**known)


@dataclass(frozen=True)
class StateVector:
    """Per-agent states at one time stamp, shape ``(n, D)``."""
    t: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError(f"state must be (n,) or (n, D), got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteState(f"state at t={self.t} has non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def disagreement(states: np.ndarray) -> np.ndarray:
    """max_i ||x_i - mean(x)|| for every sample of an ``(S, n, D)`` array."""
    centered = states - states.mean(axis=1, keepdims=True)
    return np.linalg.norm(centered, axis=2).max(axis=1)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    mode: str
    settings: SimulationSettings = field(default_factory=SimulationSettings)
    escape_time: float | None = None
    verdict: Verdict = Verdict.UNDECIDED
    limit: np.ndarray | None = None

    def __post_init__(self):
        self.disagreement = disagreement(self.states)

    def __len__(self):
        return len(self.times)

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    @property
    def final(self) -> StateVector:
        return self.sample(-1)

    def sample(self, index: int) -> StateVector:
        return StateVector(float(self.times[index]), self.states[index])

    def columns(self) -> list[str]:
        if self.dim == 1:
            agents = [f"x_{i}" for i in range(1, self.n + 1)]
        else:
            agents = [f"x_{i}_{d}" for i in range(1, self.n + 1) for d in range(1, self.dim + 1)]
        return ["t"] + agents

    def to_csv(self, path=None) -> str:
        """CSV text (12 significant digits); written atomically when ``path`` is given."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns())
        flat = self.states.reshape(len(self), -1)
        for t, row in zip(self.times, flat):
            writer.writerow([fmt_number(t)] + [fmt_number(v) for v in row])
        text = buffer.getvalue()
        if path is not None:
            atomic_write_text(path, text)
        return text

    def sidecar(self) -> dict:
        limit = None
        if self.limit is not None:
            limit = float(self.limit[0]) if self.dim == 1 else [float(v) for v in self.limit]
        return {
            "verdict": self.verdict.value,
            "limit": limit,
            "escape_time": self.escape_time,
            "disagreement_final": float(self.disagreement[-1]),
            "mode": self.mode,
            "samples": len(self),
        }

    def write(self, csv_path, json_path) -> None:
        self.to_csv(csv_path)
        atomic_write_json(json_path, self.sidecar())


@dataclass(frozen=True)
class SanConfig:
    """Leader set, positive input gains (diagonal of B on leader rows) and constant inputs."""
    leaders: tuple[int, ...]
    gains: tuple[float, ...]
    inputs: tuple

    def __post_init__(self):
        leaders = tuple(int(v) for v in self.leaders)
        gains = tuple(float(b) for b in self.gains)
        inputs = np.array(self.inputs, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs[:, None]
        if not leaders:
            raise ValueError("a semi-autonomous network needs at least one leader")
        if len(set(leaders)) != len(leaders):
            raise ValueError(f"duplicate leaders in {list(leaders)}")
        if len(gains) != len(leaders) or inputs.shape[0] != len(leaders):
            raise ValueError("leaders, gains and inputs must have the same length")
        if any(not b > 0.0 for b in gains):
            raise ValueError(f"input gains must be > 0, got {list(gains)}")
        if not np.all(np.isfinite(inputs)):
            raise NonFiniteState("external inputs must be finite")
        object.__setattr__(self, "leaders", leaders)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "inputs", tuple(map(tuple, inputs.tolist())))

    @property
    def dim(self) -> int:
        return len(self.inputs[0])

    def check(self, n: int) -> None:
        outside = [v for v in self.leaders if not 1 <= v <= n]
        if outside:
            raise ValueError(f"leaders {outside} are not vertices of a {n}-vertex graph")

    def input_matrix(self, n: int) -> np.ndarray:
        """n x |leaders| gain matrix B; row i is nonzero iff i is a leader."""
        self.check(n)
        B = np.zeros((n, len(self.leaders)))
        for col, (leader, gain) in enumerate(zip(self.leaders, self.gains)):
            B[leader - 1, col] = gain
        return B

    def drive(self, n: int) -> np.ndarray:
        """B u, shape (n, D)."""
        return self.input_matrix(n) @ np.asarray(self.inputs)

    def to_dict(self) -> dict:
        inputs = [u[0] for u in self.inputs] if self.dim == 1 else [list(u) for u in self.inputs]
        return {"leaders": list(self.leaders), "gains": list(self.gains), "inputs": inputs}

    @classmethod
    def from_dict(cls, data: Mapping) -> "SanConfig":
        leaders = data["leaders"]
        gains = data.get("gains", [1.0] * len(leaders))
        return cls(leaders=tuple(leaders), gains=tuple(gains), inputs=tuple(data["inputs"]))


def augmented_laplacian(g: Graph, weights: Sequence[float], san: SanConfig) -> np.ndarray:
    """L_B = L(weights) + diag(B 1)."""
    B = san.input_matrix(g.n)
    return laplacian(g, weights) + np.diag(B.sum(axis=1))


def rk4_step(fun: Callable, t: float, x: np.ndarray, h: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    k1 = fun(t, x)
    k2 = fun(t + h / 2, x + 0.5 * h * k1)
    k3 = fun(t + h / 2, x + 0.5 * h * k2)
    k4 = fun(t + h, x + h * k3)
    return x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _initial_state(x0, n: int, dim: int | None = None) -> np.ndarray:
    x = np.array(x0, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != n:
        raise ValueError(f"x0 must have {n} rows, got shape {np.shape(x0)}")
    if dim is not None and x.shape[1] != dim:
        if x.shape[1] != 1:
            raise ValueError(f"x0 has dimension {x.shape[1]}, inputs have {dim}")
        x = np.repeat(x, dim, axis=1)
    if not np.all(np.isfinite(x)):
        raise NonFiniteState("initial state has non-finite entries")
    return x


def _stride(steps: int, max_samples: int) -> int:
    return max(1, math.ceil(steps / max(1, max_samples - 2)))


def _integrate(advance: Callable[[int, np.ndarray], np.ndarray], x0: np.ndarray, steps: int,
               clock: Callable[[int], float], mode: str, settings: SimulationSettings) -> Trajectory:
    """Run ``steps`` steps, keeping every stride-th sample and the last one.

    ``clock(k)`` is the time stamp after k steps.

    The run stops at the first sample whose magnitude passes the escape
    threshold; the escape time is recorded and non-finite values are never stored.
    """
    stride = _stride(steps, settings.max_samples)
    times, states = [0.0], [x0.copy()]
    escape_time = None
    x = x0
    for k in range(1, steps + 1):
        x = advance(k - 1, x)
        t = clock(k)
        finite = np.all(np.isfinite(x))
        if not finite or np.abs(x).max() > settings.escape_threshold:
            escape_time = t
            if finite:
                times.append(t)
                states.append(x.copy())
            break
        if k % stride == 0 or k == steps:
            times.append(t)
            states.append(x.copy())

    traj = Trajectory(
        times=np.asarray(times),
        states=np.asarray(states),
        mode=mode,
        settings=settings,
        escape_time=escape_time,
    )
    return _finish(traj)


def _finish(traj: Trajectory) -> Trajectory:
    verdict = classify(traj)
    limit = traj.final.values.mean(axis=0) if verdict is Verdict.CONVERGED else None
    traj = replace(traj, verdict=verdict, limit=limit)
    log.debug("%s run: %s after %d samples", traj.mode, verdict.value, len(traj))
    return traj


def _run_ct(A: np.ndarray, b: np.ndarray, x0: np.ndarray, horizon: float, dt: float,
            mode: str, settings: SimulationSettings) -> Trajectory:
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if not horizon >= dt:
        raise ValueError(f"horizon must be >= dt, got horizon={horizon}, dt={dt}")
    # The last step is clipped so the run ends exactly at the horizon
    steps = max(1, math.ceil(horizon / dt - STEP_SLACK))

    def drift(_t, x):
        return -A @ x + b

    def clock(k):
        return horizon if k >= steps else k * dt

    def advance(k, x):
        t = k * dt
        return rk4_step(drift, t, x, clock(k + 1) - t)

    return _integrate(advance, x0, steps, clock, mode, settings)


def _run_dt(A: np.ndarray, b: np.ndarray, x0: np.ndarray, steps: int, epsilon: float,
            mode: str, settings: SimulationSettings) -> Trajectory:
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if int(steps) < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    # Time stamps are step indices
    return _integrate(lambda k, x: x - epsilon * (A @ x) + epsilon * b, x0, int(steps), float, mode, settings)


def simulate_ct(g: Graph, coding: CodingAssignment, theta: Codeword, attack: AttackSpec | None,
                x0, horizon: float, dt: float = DEFAULT_DT,
                settings: SimulationSettings | None = None) -> Trajectory:
    """Integrate x_i' = -sum_j p_ij(theta_ij + delta_ij)(x_i - x_j) with RK4."""
    weights = decode_weights(g, coding, theta, attack)
    x = _initial_state(x0, g.n)
    return _run_ct(laplacian(g, weights), np.zeros_like(x), x, horizon, dt, "ct", settings or SimulationSettings())


def simulate_dt(g: Graph, coding: CodingAssignment, theta: Codeword, attack: AttackSpec | None,
                x0, steps: int, epsilon: float,
                settings: SimulationSettings | None = None) -> Trajectory:
    """Iterate x(t+1) = x(t) - epsilon * L(perturbed) x(t)."""
    weights = decode_weights(g, coding, theta, attack)
    x = _initial_state(x0, g.n)
    return _run_dt(laplacian(g, weights), np.zeros_like(x), x, steps, epsilon, "dt", settings or SimulationSettings())


def simulate_san(g: Graph, coding: CodingAssignment, theta: Codeword, attack: AttackSpec | None,
                 san: SanConfig, x0, mode: str = "ct", *, horizon: float | None = None,
                 dt: float = DEFAULT_DT, steps: int | None = None, epsilon: float | None = None,
                 settings: SimulationSettings | None = None) -> Trajectory:
    """Leader-follower dynamics.

    ct: x' = -L_B x + B u
    dt: x+ = (I - epsilon L_B) x + epsilon B u

    With positive perturbed weights the unique equilibrium is the consensus
    at the leader input.
    """
    weights = decode_weights(g, coding, theta, attack)
    L_B = augmented_laplacian(g, weights, san)
    x = _initial_state(x0, g.n, san.dim)
    b = san.drive(g.n)
    settings = settings or SimulationSettings()
    if mode == "ct":
        if horizon is None:
            raise ValueError("continuous-time SAN runs need a horizon")
        return _run_ct(L_B, b, x, horizon, dt, "san-ct", settings)
    if mode == "dt":
        if steps is None or epsilon is None:
            raise ValueError("discrete-time SAN runs need steps and epsilon")
        return _run_dt(L_B, b, x, steps, epsilon, "san-dt", settings)
    raise ValueError(f"unknown time mode {mode!r}; expected 'ct' or 'dt'")


def san_fixed_point_residual(g: Graph, weights: Sequence[float], san: SanConfig) -> float:
    """max |-L_B (u 1) + B u| for a single-leader-input network."""
    L_B = augmented_laplacian(g, weights, san)
    u = np.asarray(san.inputs)
    consensus = np.tile(u[0], (g.n, 1))
    return float(np.abs(-L_B @ consensus + san.drive(g.n)).max())


@dataclass(frozen=True)
class DriftComparison:
    sbdc: np.ndarray
    laplacian: np.ndarray
    difference: float


def sbdc_drift_oracle(g: Graph, coding: CodingAssignment, theta: Codeword, x) -> DriftComparison:
    """Compare the agent-by-agent codeword drift -H(x) p(theta) with -L x.

    Each agent only uses its relative states h_ij(x) = x_i - x_j and the
    decoded weights of its incident edges.
    """
    x = _initial_state(x, g.n)
    p = decode_weights(g, coding, theta)
    sbdc = np.zeros_like(x)
    for i in range(1, g.n + 1):
        for j, k in g.neighbors(i):
            sbdc[i - 1] -= p[k] * (x[i - 1] - x[j - 1])
    nominal = -laplacian(g) @ x
    return DriftComparison(sbdc=sbdc, laplacian=nominal, difference=float(np.abs(sbdc - nominal).max()))


def classify(traj: Trajectory) -> Verdict:
    """Verdict from the recorded series.

    Converged: disagreement below tolerance over the final fraction of samples.
    Diverged: escape threshold reached, or disagreement strictly growing over
    the final growth window.
    """
    settings = traj.settings
    if traj.escape_time is not None or np.abs(traj.states).max() > settings.escape_threshold:
        return Verdict.DIVERGED
    if len(traj) < 2:
        raise ValueError("classification needs at least two samples")

    d = traj.disagreement
    tail = max(1, math.ceil(settings.converged_fraction * len(d)))
    if np.all(d[-tail:] < settings.convergence_tol):
        return Verdict.CONVERGED

    window = max(2, math.ceil(settings.growth_fraction * len(d)))
    if np.all(np.diff(d[-window:]) > 0.0):
        return Verdict.DIVERGED
    return Verdict.UNDECIDED
