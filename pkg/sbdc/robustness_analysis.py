"""
Robustness certificates for consensus under structured codeword tampering.

Continuous time: the tampered protocol keeps agreement while
``||delta^theta||_inf < rho = (K_Delta * R)^-1`` where ``R`` is the
multi-edge effective resistance of the attacked set. Discrete time adds a
weighted-degree condition on the step size. Strict inequalities are evaluated
with zero margin; every certificate also reports its raw slack.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np
from scipy import linalg

from sbdc.attack_model import AttackSpec, WeightPerturbation, induced_weight_perturbation
from sbdc.errors import EpsilonTooLarge, NonPositiveLipschitz
from sbdc.graph_core import (
    Edge,
    Graph,
    cutset_matrix,
    edge_key,
    edge_selector,
    laplacian,
    spanning_tree_partition,
    weighted_degrees,
)
from sbdc.objective_coding import CodingAssignment, Codeword, aggregate_lipschitz
from utils.config import FAST_PATH_TOL

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResistanceProfile:
    """Multi-edge (spectral), worst single-edge and total effective resistance."""
    support: tuple[Edge, ...]
    r_multi: float
    r_star: float
    r_tot: float
    argmax_edge: Edge
    per_edge: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "support": [list(e) for e in self.support],
            "r_multi": self.r_multi,
            "r_star": self.r_star,
            "r_tot": self.r_tot,
            "argmax_edge": list(self.argmax_edge),
            "per_edge": {edge_key(e): r for e, r in zip(self.support, self.per_edge)},
        }


def selected_resistance_matrix(g: Graph, attacked: Iterable[Edge]) -> tuple[np.ndarray, tuple[int, ...]]:
    """``P' R' (R W R')^-1 R P`` for the attacked edges, symmetrized.

    The cut-set matrix lives in the spanning-tree permuted edge order, so the
    weights and the selector rows are permuted to match.
    """
    selector = edge_selector(g, attacked)
    part = spanning_tree_partition(g)
    R = cutset_matrix(g, part)
    perm = list(part.permutation)
    W = g.weight_vector[perm]
    RP = R @ selector.matrix[perm, :]
    factor = linalg.cho_factor((R * W) @ R.T)
    Q = RP.T @ linalg.cho_solve(factor, RP)
    return 0.5 * (Q + Q.T), selector.support


def effective_resistance_multi(g: Graph, attacked: Iterable[Edge], fast_path: bool = True) -> ResistanceProfile:
    """Effective resistance profile of an attacked edge set.

    On trees the cut-set matrix is the identity and the spectral norm reduces
    to ``max 1/w_k`` over the attacked edges; with ``fast_path`` that closed
    form is returned after checking it against the general formula.
    """
    Q, support = selected_resistance_matrix(g, attacked)
    per_edge = np.diag(Q).copy()
    if len(support) == 1:
        r_multi = float(Q[0, 0])
    else:
        r_multi = float(linalg.eigvalsh(Q)[-1])

    if fast_path and g.is_tree:
        inverse_weights = 1.0 / g.weight_vector[list(support)]
        closed_form = float(inverse_weights.max())
        if abs(closed_form - r_multi) > FAST_PATH_TOL * max(1.0, closed_form):
            log.warning("tree fast path %.15g differs from general formula %.15g", closed_form, r_multi)
        r_multi = closed_form
        per_edge = inverse_weights

    top = int(np.argmax(per_edge))
    edges = tuple(g.edges[k] for k in support)
    return ResistanceProfile(
        support=edges,
        r_multi=r_multi,
        r_star=float(per_edge[top]),
        r_tot=float(np.trace(Q)),
        argmax_edge=edges[top],
        per_edge=tuple(float(r) for r in per_edge),
    )


def resilience_gap(profile: ResistanceProfile) -> float:
    """g = 1 - r_star / r_multi, clipped into [0, 1) against round-off."""
    gap = 1.0 - profile.r_star / profile.r_multi
    return float(min(max(gap, 0.0), np.nextafter(1.0, 0.0)))


@dataclass(frozen=True)
class CodewordBound:
    rho: float
    rho_star: float
    gap: float


def codeword_bound_ct(profile: ResistanceProfile, k_delta: float) -> CodewordBound:
    """Continuous-time tampering bound rho = (K_Delta * r_multi)^-1.

    Also returns the single-edge bound rho_star = (K_Delta * r_star)^-1,
    related through rho = (1 - gap) * rho_star.
    """
    if not k_delta > 0.0:
        raise NonPositiveLipschitz(f"K_Delta must be > 0, got {k_delta}")
    rho = 1.0 / (k_delta * profile.r_multi)
    rho_star = 1.0 / (k_delta * profile.r_star)
    gap = resilience_gap(profile)
    if abs(rho - (1.0 - gap) * rho_star) > 1e-12 * max(1.0, rho):
        log.warning("gap identity off: rho=%.15g, (1-g)*rho_star=%.15g", rho, (1.0 - gap) * rho_star)
    return CodewordBound(rho=rho, rho_star=rho_star, gap=gap)


@dataclass(frozen=True)
class EpsilonGuidance:
    epsilon_star: float
    psi: float
    lambda_max: float
    stability_limit: float

    @property
    def within_stability(self) -> bool:
        """epsilon_star lies inside the nominal interval (0, 2/lambda_n)."""
        return self.epsilon_star < self.stability_limit


def epsilon_star(g: Graph, profile: ResistanceProfile) -> EpsilonGuidance:
    """Largest step size keeping the discrete bound equal to the continuous one."""
    psi = weighted_degrees(g).maximum
    lambda_max = float(linalg.eigvalsh(laplacian(g))[-1])
    return EpsilonGuidance(
        epsilon_star=1.0 / (psi + 1.0 / profile.r_multi),
        psi=psi,
        lambda_max=lambda_max,
        stability_limit=2.0 / lambda_max,
    )


def codeword_bound_dt(g: Graph, profile: ResistanceProfile, k_delta: float, epsilon: float) -> float:
    """Discrete-time bound K_Delta^-1 * min(1/r_multi, 1/epsilon - Psi).

    Raises:
        EpsilonTooLarge: unless 0 < epsilon < 1/Psi.
    """
    if not k_delta > 0.0:
        raise NonPositiveLipschitz(f"K_Delta must be > 0, got {k_delta}")
    psi = weighted_degrees(g).maximum
    if not (0.0 < epsilon < 1.0 / psi):
        raise EpsilonTooLarge(f"epsilon={epsilon} must lie in (0, 1/Psi) = (0, {1.0 / psi:.12g})")
    return min(1.0 / profile.r_multi, 1.0 / epsilon - psi) / k_delta


@dataclass(frozen=True)
class PhiCheck:
    phi: float
    phi_coarse: float
    psi_graph: float
    node_terms: dict
    epsilon: float
    rho_ct: float
    attack_norm: float

    @property
    def phi_ok(self) -> bool:
        return self.phi < 1.0 / self.epsilon

    @property
    def coarse_ok(self) -> bool:
        return self.phi_coarse < 1.0 / self.epsilon

    @property
    def ct_ok(self) -> bool:
        return self.attack_norm < self.rho_ct

    @property
    def verdict(self) -> bool:
        return self.phi_ok and self.ct_ok

    @property
    def slack(self) -> float:
        return 1.0 / self.epsilon - self.phi

    def to_dict(self) -> dict:
        data = asdict(self)
        data.update(verdict=self.verdict, phi_ok=self.phi_ok, coarse_ok=self.coarse_ok,
                    ct_ok=self.ct_ok, slack=self.slack)
        return data


def phi_check_dt(g: Graph, coding: CodingAssignment, attack: AttackSpec, epsilon: float) -> PhiCheck:
    """Weighted-degree condition for the tampered discrete-time protocol.

    For every attacked edge (u, v) and i in {u, v}: psi_i = wbar_i + K_uv |delta_uv|
    (one attacked edge at a time), phi = max(Psi, max psi_i). The verdict also
    requires the continuous-time bound. The coarser Psi + K_Delta ||delta||
    bound is reported alongside.
    """
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    degrees = weighted_degrees(g)
    node_terms: dict[str, float] = {}
    phi = degrees.maximum
    for edge in attack.support:
        k_uv = coding.decoder_for(edge).lipschitz
        for node in edge:
            psi_i = degrees.degrees[node - 1] + k_uv * abs(attack.deviations[edge])
            node_terms[f"{node}@{edge_key(edge)}"] = float(psi_i)
            phi = max(phi, psi_i)

    k_delta = aggregate_lipschitz(coding, attack.support)
    profile = effective_resistance_multi(g, attack.support)
    return PhiCheck(
        phi=float(phi),
        phi_coarse=degrees.maximum + k_delta * attack.norm,
        psi_graph=degrees.maximum,
        node_terms=node_terms,
        epsilon=float(epsilon),
        rho_ct=codeword_bound_ct(profile, k_delta).rho,
        attack_norm=attack.norm,
    )


def compensated_lipschitz(k_delta: float, gap: float) -> float:
    """K'_Delta = (1 - g) K_Delta: shrink the decoder slope to absorb the gap."""
    if not k_delta > 0.0:
        raise NonPositiveLipschitz(f"K_Delta must be > 0, got {k_delta}")
    if not 0.0 <= gap < 1.0:
        raise ValueError(f"gap must lie in [0, 1), got {gap}")
    return (1.0 - gap) * k_delta


@dataclass(frozen=True)
class WeightCertificate:
    verdict: bool
    norm: float
    bound: float

    @property
    def slack(self) -> float:
        return self.bound - self.norm


def certify_weight_perturbation(g: Graph, attacked: Iterable[Edge], wp: WeightPerturbation) -> WeightCertificate:
    """Agreement is kept when max |delta^w| < 1 / r_multi."""
    profile = effective_resistance_multi(g, attacked)
    if set(wp.support) != set(profile.support):
        raise ValueError(f"perturbation support {list(wp.support)} differs from attacked set {list(profile.support)}")
    bound = 1.0 / profile.r_multi
    return WeightCertificate(verdict=wp.norm < bound, norm=wp.norm, bound=bound)


@dataclass
class RobustnessReport:
    """Every certificate for one (graph, coding, codeword, attack) scenario."""
    resistance: ResistanceProfile
    gap: float
    k_delta: float
    rho_ct: float
    rho_star: float
    epsilon_star: float
    stability_limit: float
    psi: float
    k_compensated: float
    rho_star_compensated: float
    attack_norm: float
    weight: WeightPerturbation
    weight_certificate: WeightCertificate
    epsilon: float | None = None
    rho_dt: float | None = None
    phi: PhiCheck | None = None
    verdicts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "resistance": self.resistance.to_dict(),
            "gap": self.gap,
            "k_delta": self.k_delta,
            "rho_ct": self.rho_ct,
            "rho_star": self.rho_star,
            "epsilon_star": self.epsilon_star,
            "stability_limit": self.stability_limit,
            "psi": self.psi,
            "k_compensated": self.k_compensated,
            "rho_star_compensated": self.rho_star_compensated,
            "attack_norm": self.attack_norm,
            "weight_perturbation": self.weight.to_dict(),
            "weight_certificate": {
                "verdict": self.weight_certificate.verdict,
                "norm": self.weight_certificate.norm,
                "bound": self.weight_certificate.bound,
                "slack": self.weight_certificate.slack,
            },
            "epsilon": self.epsilon,
            "rho_dt": self.rho_dt,
            "phi": None if self.phi is None else self.phi.to_dict(),
            "slacks": {
                "ct": self.rho_ct - self.attack_norm,
                "dt": None if self.rho_dt is None else self.rho_dt - self.attack_norm,
            },
            "verdicts": dict(self.verdicts),
            "passed": self.passed,
        }


def analyze(g: Graph, coding: CodingAssignment, theta: Codeword, attack: AttackSpec, epsilon: float | None = None) -> RobustnessReport:
    """Assemble the full certificate report for a concrete attack."""
    profile = effective_resistance_multi(g, attack.support)
    k_delta = aggregate_lipschitz(coding, attack.support)
    bound = codeword_bound_ct(profile, k_delta)
    guidance = epsilon_star(g, profile)
    k_prime = compensated_lipschitz(k_delta, bound.gap)
    wp = induced_weight_perturbation(g, coding, theta, attack)
    weight_cert = certify_weight_perturbation(g, attack.support, wp)

    verdicts = {
        "ct_codeword": attack.norm < bound.rho,
        "weight_perturbation": weight_cert.verdict,
    }
    report = RobustnessReport(
        resistance=profile,
        gap=bound.gap,
        k_delta=k_delta,
        rho_ct=bound.rho,
        rho_star=bound.rho_star,
        epsilon_star=guidance.epsilon_star,
        stability_limit=guidance.stability_limit,
        psi=guidance.psi,
        k_compensated=k_prime,
        rho_star_compensated=codeword_bound_ct(profile, k_prime).rho_star,
        attack_norm=attack.norm,
        weight=wp,
        weight_certificate=weight_cert,
        verdicts=verdicts,
    )
    if epsilon is not None:
        report.epsilon = float(epsilon)
        report.phi = phi_check_dt(g, coding, attack, epsilon)
        verdicts["dt_phi"] = report.phi.verdict
        try:
            report.rho_dt = codeword_bound_dt(g, profile, k_delta, epsilon)
            verdicts["dt_codeword"] = attack.norm < report.rho_dt
        except EpsilonTooLarge as exc:
            log.warning("discrete-time bound unavailable: %s", exc)
            verdicts["dt_codeword"] = False
    return report
