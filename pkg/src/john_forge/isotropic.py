"""Isotropic measures on contact points, John's conditions and the decomposition pipeline."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from .body import ConvexBody
from .config import DEFAULT_CONTACT_TOL, DEFAULT_MVEE_EPS, JOHN_TOL, WEIGHT_CLAMP
from .errors import AllZeroWeights, NonpositiveLambda
from .loewner import ContactSet, contact_points, to_loewner
from .minimize import MinimizeConfig, MinimizeResult, certify_uniqueness, minimize_Ic
from .objective import DiscreteMeasureProblem, ObjectiveF, SolvabilityResult, solvability_check
from .symspace import SymPair

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class IsotropicMeasure:
    points: np.ndarray
    weights: np.ndarray
    lam: float
    residual_iso: float
    residual_center: float

    @classmethod
    def from_weights(cls, points: Any, weights: Any) -> "IsotropicMeasure":
        P = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.asarray(weights, dtype=float).reshape(-1)
        if len(c) != len(P):
            raise ValueError(f"{len(c)} weights for {len(P)} points")
        n = P.shape[1]
        lam = float(np.sum(c)) / n
        T = (P.T * c) @ P
        return cls(P, c, lam,
                   float(np.linalg.norm(T - lam * np.eye(n))),
                   float(np.linalg.norm(P.T @ c)))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))

    def to_json(self) -> Dict[str, Any]:
        shown = np.where(np.abs(self.weights) < WEIGHT_CLAMP, 0.0, self.weights)
        return {
            "lambda": self.lam,
            "weights": shown.tolist(),
            "points": self.points.tolist(),
            "residual_iso": self.residual_iso,
            "residual_center": self.residual_center,
        }


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    lam: float
    residual_iso: float
    residual_center: float
    min_weight: float
    tol: float

    def to_json(self) -> Dict[str, Any]:
        return {
            "pass": self.passed,
            "lambda": self.lam,
            "residual_iso": self.residual_iso,
            "residual_center": self.residual_center,
            "min_weight": self.min_weight,
            "tol": self.tol,
        }


def extract_weights(prob: DiscreteMeasureProblem, minimizer: SymPair) -> IsotropicMeasure:
    """c_i = F'(<xi_i, M0 xi_i + w0>)."""
    c = np.asarray(prob.F.prime(prob.arguments(minimizer)), dtype=float)
    if not np.sum(c) > 0:
        raise AllZeroWeights("F' vanishes at every contact point")
    return IsotropicMeasure.from_weights(prob.points, c)


def verify_john(meas: IsotropicMeasure, tol: float = JOHN_TOL) -> VerificationReport:
    min_w = float(np.min(meas.weights))
    passed = (meas.residual_iso <= tol * meas.lam
              and meas.residual_center <= tol * meas.total
              and min_w >= -WEIGHT_CLAMP)
    return VerificationReport(bool(passed), meas.lam, meas.residual_iso, meas.residual_center, min_w, tol)


def normalize_to_lambda(meas: IsotropicMeasure, target: float = 1.0) -> IsotropicMeasure:
    if not meas.lam > 0:
        raise NonpositiveLambda(f"lambda = {meas.lam:g}")
    if not target > 0:
        raise NonpositiveLambda(f"target lambda = {target:g}")
    s = target / meas.lam
    return IsotropicMeasure(meas.points, s * meas.weights, target, s * meas.residual_iso, s * meas.residual_center)


@dataclass(frozen=True)
class PipelineConfig:
    F: ObjectiveF = field(default_factory=ObjectiveF)
    mvee_eps: float = DEFAULT_MVEE_EPS
    contact_tol: float = DEFAULT_CONTACT_TOL
    john_tol: float = JOHN_TOL
    minimize: MinimizeConfig = field(default_factory=MinimizeConfig)

    def __post_init__(self):
        for name in ("mvee_eps", "contact_tol", "john_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Every artifact of the pipeline; later stages are None when an earlier one stops it."""
    body: ConvexBody
    A: np.ndarray
    v: np.ndarray
    contacts: ContactSet
    solvability: SolvabilityResult
    result: Optional[MinimizeResult] = None
    measure: Optional[IsotropicMeasure] = None
    report: Optional[VerificationReport] = None
    unique: Optional[bool] = None


def decompose(body: ConvexBody, cfg: Optional[PipelineConfig] = None) -> Decomposition:
    """Position the body, collect contacts, minimize I_c and read off John weights."""
    cfg = cfg or PipelineConfig()
    positioned, A, v = to_loewner(body, cfg.mvee_eps)
    contacts = contact_points(positioned, cfg.contact_tol)
    check = solvability_check(contacts)
    out = Decomposition(positioned, A, v, contacts, check)
    if not check.minimum_exists:
        log.info("decompose: solvability %s, not minimizing", check.status.value)
        return out

    prob = DiscreteMeasureProblem(contacts, cfg.F)
    result = minimize_Ic(prob, cfg.minimize)
    if not result.converged:
        return Decomposition(positioned, A, v, contacts, check, result)
    meas = extract_weights(prob, result.minimizer)
    report = verify_john(meas, cfg.john_tol)
    return Decomposition(positioned, A, v, contacts, check, result, meas, report,
                         certify_uniqueness(prob, result))
