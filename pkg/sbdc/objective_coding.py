"""
Objective decoding functions, codeword synthesis and weight decoding.

A decoding function maps a codeword fragment to an edge weight. The network
manager synthesizes fragments so that decoding reproduces the nominal
weights; tampering with a fragment moves the decoded weight by at most the
decoder's Lipschitz constant times the tampering magnitude.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy import optimize

from sbdc.errors import (
    DomainViolation,
    EmptyAttackSet,
    NonPositiveGain,
    UnknownEdge,
    UnknownFamily,
    WeightOutOfImage,
)
from sbdc.graph_core import Edge, Graph, canonical_edge, edge_key, parse_edge_key
from utils.config import (
    ASSUMPTION_SAMPLES,
    ASSUMPTION_TOL,
    ASSUMPTION_WINDOW,
    BISECTION_TOL,
    BRACKET_MAX_DOUBLINGS,
    ROUND_TRIP_TOL,
)

log = logging.getLogger(__name__)


class DecodingFunction:
    """Scalar map from a codeword fragment to an edge weight.

    Subclasses implement :meth:`evaluate` on numpy arrays and declare the
    Lipschitz constant, the admissible domain and any breakpoints where the
    formula switches branch.
    """
    family = "custom"

    def __init__(self, lipschitz, domain=(-np.inf, np.inf), breakpoints=()):
        self.lipschitz = float(lipschitz)
        self.domain = (float(domain[0]), float(domain[1]))
        self.breakpoints = tuple(float(b) for b in breakpoints)

    def evaluate(self, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, eta):
        values = self.evaluate(np.asarray(eta, dtype=float))
        if np.ndim(values) == 0:
            return float(values)
        return values

    def in_domain(self, eta: float) -> bool:
        lo, hi = self.domain
        return lo <= eta <= hi

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"family": self.family, **self.params()}

    def __eq__(self, other):
        return type(self) is type(other) and self.params() == other.params()

    def __hash__(self):
        return hash((self.family, tuple(sorted(self.params().items()))))

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


class ConcaveDecoder(DecodingFunction):
    """Piecewise concave decoder scaled by a gain K.

    K(4/13 sqrt(eta+1) + 1) for eta >= 3, K(-2/13 eta^2 + eta) on [0, 3),
    K eta below 0. Continuous with continuous slope at both breakpoints and
    globally K-Lipschitz.
    """
    family = "concave"

    def __init__(self, gain):
        super().__init__(lipschitz=gain, breakpoints=(0.0, 3.0))
        self.gain = float(gain)

    def evaluate(self, eta):
        upper = 4.0 / 13.0 * np.sqrt(np.maximum(eta + 1.0, 0.0)) + 1.0
        middle = -2.0 / 13.0 * eta ** 2 + eta
        values = np.where(eta >= 3.0, upper, np.where(eta >= 0.0, middle, eta))
        return self.gain * values

    def params(self):
        return {"gain": self.gain}


class LinearDecoder(DecodingFunction):
    """p(eta) = K eta: the simplest concave K-Lipschitz decoder."""
    family = "linear"

    def __init__(self, gain):
        super().__init__(lipschitz=gain)
        self.gain = float(gain)

    def evaluate(self, eta):
        return self.gain * eta

    def params(self):
        return {"gain": self.gain}


class CallableDecoder(DecodingFunction):
    """Wrap an arbitrary vectorized function with declared properties."""

    def __init__(self, func: Callable, lipschitz, domain=(-np.inf, np.inf), breakpoints=(), name="custom"):
        super().__init__(lipschitz=lipschitz, domain=domain, breakpoints=breakpoints)
        self.func = func
        self.name = name

    def evaluate(self, eta):
        return np.asarray(self.func(eta), dtype=float) * np.ones_like(eta)

    def params(self):
        return {"name": self.name, "lipschitz": self.lipschitz}

    def __eq__(self, other):
        return self is other

    __hash__ = object.__hash__


def _positive_gain(gain) -> float:
    gain = float(gain)
    if not np.isfinite(gain) or gain <= 0.0:
        raise NonPositiveGain(f"decoder gain must be > 0, got {gain}")
    return gain


def concave_decoder(gain) -> ConcaveDecoder:
    return ConcaveDecoder(_positive_gain(gain))


def linear_decoder(gain) -> LinearDecoder:
    return LinearDecoder(_positive_gain(gain))


# Families that can be (de)serialized
DECODER_FAMILIES: dict[str, Callable[..., DecodingFunction]] = {
    "concave": concave_decoder,
    "linear": linear_decoder,
}


def register_family(name: str, factory: Callable[..., DecodingFunction]):
    """Make a decoder family available to JSON coding assignments."""
    DECODER_FAMILIES[name] = factory


def decoder_from_dict(data: Mapping) -> DecodingFunction:
    params = dict(data)
    family = params.pop("family", None)
    if family not in DECODER_FAMILIES:
        raise UnknownFamily(f"unknown decoder family {family!r}; known: {sorted(DECODER_FAMILIES)}")
    return DECODER_FAMILIES[family](**params)


@dataclass(frozen=True)
class Codeword:
    """Per-edge codeword fragments; one scalar stands for theta_ij = theta_ji."""
    entries: Mapping[Edge, float]

    def __getitem__(self, edge: Edge) -> float:
        return self.entries[canonical_edge(*edge)]

    def vector(self, g: Graph) -> np.ndarray:
        return np.array([self.entries[e] for e in g.edges])

    def to_dict(self) -> dict:
        return {edge_key(e): v for e, v in sorted(self.entries.items())}

    @classmethod
    def from_dict(cls, data: Mapping[str, float]) -> "Codeword":
        return cls({parse_edge_key(k): float(v) for k, v in data.items()})


@dataclass(frozen=True)
class CodingAssignment:
    """Decoding function attached to every edge."""
    decoders: Mapping[Edge, DecodingFunction] = field(default_factory=dict)

    @classmethod
    def uniform(cls, g: Graph, decoder: DecodingFunction) -> "CodingAssignment":
        return cls({e: decoder for e in g.edges})

    def decoder_for(self, edge: Edge) -> DecodingFunction:
        try:
            return self.decoders[canonical_edge(*edge)]
        except KeyError:
            raise UnknownEdge(f"no decoding function for edge {edge}") from None

    def covers(self, g: Graph) -> bool:
        return set(self.decoders) == set(g.edges)

    def aggregate(self, attacked: Iterable[Edge]) -> float:
        return aggregate_lipschitz(self, attacked)

    def to_dict(self) -> dict:
        return {"edges": {edge_key(e): d.to_dict() for e, d in sorted(self.decoders.items())}}

    @classmethod
    def from_dict(cls, data: Mapping, g: Graph | None = None) -> "CodingAssignment":
        if "uniform" in data:
            if g is None:
                raise ValueError("a uniform coding assignment needs the graph")
            return cls.uniform(g, decoder_from_dict(data["uniform"]))
        return cls({parse_edge_key(k): decoder_from_dict(v) for k, v in data["edges"].items()})


def aggregate_lipschitz(coding: CodingAssignment, attacked: Iterable[Edge]) -> float:
    """K_Delta: the largest Lipschitz constant over the attacked edges."""
    edges = [canonical_edge(*e) for e in attacked]
    if not edges:
        raise EmptyAttackSet("K_Delta is undefined for an empty attack set")
    return max(coding.decoder_for(e).lipschitz for e in edges)


def _climb(f: DecodingFunction, start: float, target: float) -> tuple[float, float]:
    """Walk uphill from ``start`` with doubling steps until f reaches ``target``.

    The direction is whichever side of ``start`` increases. When a step
    overshoots the peak, the peak lies between the last two points before it.
    Walking left means walking the decreasing branch, where only values
    strictly above the target leave a single crossing further left.
    """
    lo_bound, hi_bound = f.domain
    f_start = f(start)
    ahead = min(start + 1.0, hi_bound)
    if ahead > start and f(ahead) > f_start:
        direction, prev, strict = 1.0, start, False
    else:
        direction, prev, strict = -1.0, ahead, True
    if f_start > target or (f_start == target and not strict):
        return start, f_start

    cur, f_cur, step = start, f_start, 1.0
    for _ in range(BRACKET_MAX_DOUBLINGS):
        nxt = cur + direction * step
        nxt = min(nxt, hi_bound) if direction > 0 else max(nxt, lo_bound)
        if nxt == cur:
            break
        f_next = f(nxt)
        if f_next > target or (f_next == target and not strict):
            return nxt, f_next
        if f_next <= f_cur:
            a, b = sorted((prev, nxt))
            peak = float(optimize.minimize_scalar(
                lambda eta: -f(eta), bounds=(a, b), method="bounded",
                options={"xatol": BISECTION_TOL},
            ).x)
            f_peak = f(peak)
            if f_peak < target:
                raise WeightOutOfImage(f"weight {target} exceeds the maximum {f_peak:.6g} of {f!r}")
            return peak, f_peak
        prev, cur, f_cur, step = cur, nxt, f_next, 2.0 * step
    raise WeightOutOfImage(f"weight {target} not reached by {f!r}")


def preimage(f: DecodingFunction, target: float) -> float:
    """Smallest fragment on the increasing part of ``f`` that decodes to ``target``.

    Brackets the level set by doubling steps inside the domain, then solves
    with Brent's method. Concavity leaves at most two preimages per level and
    the increasing branch holds the smaller one.
    """
    lo_bound, hi_bound = f.domain
    start = min(max(0.0, lo_bound), hi_bound)
    hi, f_hi = _climb(f, start, target)

    # Walk left until f drops below the target
    lo, step = hi, 1.0
    f_lo = f_hi
    for _ in range(BRACKET_MAX_DOUBLINGS):
        if f_lo < target or lo <= lo_bound:
            break
        lo = max(lo - step, lo_bound)
        f_lo = f(lo)
        step *= 2.0
    if f_lo > target:
        raise WeightOutOfImage(f"weight {target} lies below the image of {f!r} on its domain")
    if f_lo == target:
        return float(lo)
    if f_hi == target:
        return float(hi)
    return float(optimize.brentq(lambda eta: f(eta) - target, lo, hi, xtol=BISECTION_TOL, rtol=4 * np.finfo(float).eps))


def synthesize_codeword(g: Graph, coding: CodingAssignment) -> Codeword:
    """Codeword whose decoding reproduces the nominal weights of ``g``."""
    entries = {}
    for edge, w in zip(g.edges, g.weights):
        f = coding.decoder_for(edge)
        theta = preimage(f, w)
        if abs(f(theta) - w) > ROUND_TRIP_TOL:
            raise WeightOutOfImage(f"edge {edge}: decoded {f(theta)!r} does not match weight {w!r}")
        entries[edge] = theta
    return Codeword(entries)


def decode_weights(g: Graph, coding: CodingAssignment, theta: Codeword, attack=None) -> np.ndarray:
    """Effective (possibly negative) weights p_ij(theta_ij + delta_ij).

    Raises:
        DomainViolation: a tampered fragment falls outside its decoder's domain.
        UnknownEdge: the attack touches an edge that is not in the graph.
    """
    deviations = {} if attack is None else dict(attack.deviations)
    unknown = set(deviations) - set(g.edges)
    if unknown:
        raise UnknownEdge(f"attack touches edges not in the graph: {sorted(unknown)}")

    weights = np.empty(g.m)
    for k, edge in enumerate(g.edges):
        f = coding.decoder_for(edge)
        value = theta[edge]
        if edge in deviations:
            value = value + deviations[edge]
        if not f.in_domain(value):
            raise DomainViolation(
                f"edge {edge}: fragment {value:.6g} outside decoder domain {f.domain}",
                edge=edge,
                value=value,
            )
        weights[k] = f(value)
    return weights


@dataclass(frozen=True)
class Assumption1Report:
    samples: int
    nonconstant: bool
    concavity_pass_rate: float
    max_slope: float
    lipschitz: float
    continuity_jump: float

    @property
    def concave(self) -> bool:
        return self.concavity_pass_rate == 1.0

    @property
    def lipschitz_ok(self) -> bool:
        return self.max_slope <= self.lipschitz + ASSUMPTION_TOL

    @property
    def continuous(self) -> bool:
        return self.continuity_jump < ASSUMPTION_TOL

    @property
    def passed(self) -> bool:
        return self.nonconstant and self.concave and self.lipschitz_ok and self.continuous

    def failures(self) -> list[str]:
        checks = {
            "non-constancy": self.nonconstant,
            "concavity": self.concave,
            "lipschitz": self.lipschitz_ok,
            "continuity": self.continuous,
        }
        return [name for name, ok in checks.items() if not ok]


def verify_assumption1(f: DecodingFunction, samples: int = ASSUMPTION_SAMPLES, seed=0, window=ASSUMPTION_WINDOW) -> Assumption1Report:
    """Numerically check non-constancy, concavity, Lipschitz bound and continuity.

    Pairs are drawn uniformly from the decoder's domain clipped to ``window``.
    The slope estimate also scans a dense grid and both sides of every
    breakpoint so the supremum is approached where it is attained.
    """
    if samples < 100:
        raise ValueError("verify_assumption1 needs at least 100 samples")
    lo = max(f.domain[0], window[0])
    hi = min(f.domain[1], window[1])
    rng = np.random.default_rng(seed)
    a = rng.uniform(lo, hi, samples)
    b = rng.uniform(lo, hi, samples)

    fa, fb = f(a), f(b)
    fm = f(0.5 * (a + b))
    concave_hits = fm >= 0.5 * (fa + fb) - ASSUMPTION_TOL
    nonconstant = bool(np.max(np.abs(np.concatenate([fa, fb]) - fa[0])) > 1e-12)

    gap = np.abs(b - a)
    keep = gap > 1e-9
    slopes = np.abs(fb[keep] - fa[keep]) / gap[keep]
    grid = np.linspace(lo, hi, 20 * samples + 1)
    grid_slopes = np.abs(np.diff(f(grid))) / np.diff(grid)
    max_slope = float(max(slopes.max(initial=0.0), grid_slopes.max(initial=0.0)))

    jump = 0.0
    h = 1e-12
    for point in f.breakpoints:
        if lo < point < hi:
            left, mid, right = f(np.array([point - h, point, point + h]))
            jump = max(jump, abs(mid - left), abs(right - mid))
            side_step = 1e-4 * max(1.0, abs(point))
            for x0, x1 in ((point - side_step, point), (point, point + side_step)):
                max_slope = max(max_slope, abs(f(x1) - f(x0)) / (x1 - x0))

    return Assumption1Report(
        samples=samples,
        nonconstant=nonconstant,
        concavity_pass_rate=float(np.mean(concave_hits)),
        max_slope=max_slope,
        lipschitz=f.lipschitz,
        continuity_jump=float(jump),
    )
