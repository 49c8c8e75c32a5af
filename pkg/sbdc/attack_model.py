"""
Structured codeword-tampering attacks.

An attack adds a deviation to the codeword fragment of every edge in its
support; the same scalar is applied to both directions of the edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from sbdc.errors import BudgetExceeded, EmptySupport, UnknownVariant
from sbdc.graph_core import Edge, Graph, canonical_edge, edge_key, parse_edge_key
from sbdc.objective_coding import CodingAssignment, Codeword, decode_weights
from utils.logger import logger

# Attacked edge sets of the benchmark network
BENCHMARK_SUPPORTS = {
    1: ((1, 2),),
    2: ((1, 2), (3, 5), (4, 6)),
}


@dataclass(frozen=True)
class AttackSpec:
    """Deviations on a fixed edge subset, bounded in infinity norm by ``budget``."""
    support: tuple[Edge, ...]
    deviations: Mapping[Edge, float]
    budget: float

    def __post_init__(self):
        support = tuple(sorted({canonical_edge(*e) for e in self.support}))
        deviations = {canonical_edge(*e): float(v) for e, v in self.deviations.items()}
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "deviations", deviations)
        object.__setattr__(self, "budget", float(self.budget))

        if not support:
            raise EmptySupport("an attack needs at least one edge")
        if set(deviations) != set(support):
            raise ValueError(
                f"deviation keys {sorted(deviations)} do not match the support {list(support)}"
            )
        if not np.isfinite(self.budget) or self.budget < 0.0:
            raise BudgetExceeded(f"budget must be a finite value >= 0, got {self.budget}")
        if self.norm > self.budget:
            raise BudgetExceeded(
                f"max |delta| = {self.norm:.12g} exceeds the declared budget {self.budget:.12g}"
            )

    @property
    def norm(self) -> float:
        """Infinity norm of the deviation vector."""
        return max(abs(v) for v in self.deviations.values())

    def vector(self, g: Graph) -> np.ndarray:
        """Deviation per edge of ``g`` (zero off the support)."""
        return np.array([self.deviations.get(e, 0.0) for e in g.edges])

    def with_norm(self, target: float) -> "AttackSpec":
        """Same attack direction rescaled so that the infinity norm equals ``target``."""
        current = self.norm
        if current == 0.0:
            raise ValueError("cannot rescale a zero attack")
        scale = target / current
        deviations = {e: float(np.clip(v * scale, -target, target)) for e, v in self.deviations.items()}
        # Pin the largest entry so the norm is exactly the target
        top = max(deviations, key=lambda e: abs(deviations[e]))
        deviations[top] = float(np.copysign(target, deviations[top]))
        return AttackSpec(self.support, deviations, budget=target)

    def to_dict(self) -> dict:
        return {
            "support": [list(e) for e in self.support],
            "deviations": {edge_key(e): v for e, v in sorted(self.deviations.items())},
            "budget": self.budget,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AttackSpec":
        return cls(
            support=tuple(tuple(e) for e in data["support"]),
            deviations={parse_edge_key(k): v for k, v in data["deviations"].items()},
            budget=data["budget"],
        )


def zero_attack(support: Iterable[Edge]) -> AttackSpec:
    support = tuple(support)
    return AttackSpec(support, {e: 0.0 for e in support}, budget=0.0)


def benchmark_attack(variant: int, rho: float) -> AttackSpec:
    """Benchmark attack: every edge of the variant's set is shifted by -rho/2.

    Variant 1 strikes edge (1,2); variant 2 strikes (1,2), (3,5) and (4,6).
    """
    if variant not in BENCHMARK_SUPPORTS:
        raise UnknownVariant(f"unknown attack variant {variant!r}; expected 1 or 2")
    rho = float(rho)
    if rho < 0.0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    support = BENCHMARK_SUPPORTS[variant]
    delta = -0.5 * rho
    logger.log(f"Benchmark attack variant {variant}: delta={delta:g} on {list(support)}", "ATTACK")
    return AttackSpec(support, {e: delta for e in support}, budget=0.5 * rho)


def random_attack(g: Graph, support: Iterable[Edge], budget: float, seed=None) -> AttackSpec:
    """Deviations drawn i.i.d. uniform on [-budget, budget]; deterministic per seed."""
    edges = tuple(sorted({canonical_edge(*e) for e in support}))
    if not edges:
        raise EmptySupport("random attack needs a nonempty support")
    for e in edges:
        g.index_of(e)
    budget = float(budget)
    if budget < 0.0:
        raise BudgetExceeded(f"budget must be >= 0, got {budget}")
    rng = np.random.default_rng(seed)
    values = rng.uniform(-budget, budget, len(edges))
    return AttackSpec(edges, dict(zip(edges, values.tolist())), budget=budget)


@dataclass(frozen=True)
class WeightPerturbation:
    """Effective-weight deviations delta^w on the attacked edges."""
    support: tuple[Edge, ...]
    deltas: tuple[float, ...]

    @property
    def norm(self) -> float:
        """Spectral norm of the diagonal perturbation, i.e. the max abs entry."""
        return max((abs(d) for d in self.deltas), default=0.0)

    def to_dict(self) -> dict:
        return {
            "deltas": {edge_key(e): d for e, d in zip(self.support, self.deltas)},
            "norm": self.norm,
        }


def induced_weight_perturbation(g: Graph, coding: CodingAssignment, theta: Codeword, attack: AttackSpec) -> WeightPerturbation:
    """delta^w_uv = p_uv(theta_uv + delta_uv) - p_uv(theta_uv) over the support."""
    nominal = decode_weights(g, coding, theta)
    perturbed = decode_weights(g, coding, theta, attack)
    deltas = tuple(float(perturbed[g.index_of(e)] - nominal[g.index_of(e)]) for e in attack.support)
    return WeightPerturbation(support=attack.support, deltas=deltas)
