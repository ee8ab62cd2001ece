"""Unconstrained minimization of I_c in chart coordinates of sym0 x R^n."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .objective import DiscreteMeasureProblem, solvability_check
from .symspace import SymPair, chart_dim, coords_to_pair, pair_to_coords

log = logging.getLogger(__name__)


class Status(str, Enum):
    CONVERGED = "Converged"
    NOT_COERCIVE = "NotCoercive"
    MAX_ITER = "MaxIter"


@dataclass(frozen=True)
class MinimizeConfig:
    grad_tol: float = 1e-10
    max_iter: int = 500
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    start: Optional[SymPair] = None
    newton_floor: float = 1e-8      # Hessian eigenvalues below this get a gradient step
    escape_norm: float = 1e6
    max_halvings: int = 60
    max_doublings: int = 60

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not (0 < self.armijo_c1 < 1 and 0 < self.backtrack < 1):
            raise ValueError("line-search parameters must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class MinimizeResult:
    minimizer: SymPair
    value: float
    grad_norm: float
    iterations: int
    status: Status
    values: List[float] = field(default_factory=list)   # objective at each accepted iterate

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


def _direction(g: np.ndarray, H: np.ndarray, floor: float) -> np.ndarray:
    # Newton on well-curved eigendirections, steepest descent on the rest
    w, Q = np.linalg.eigh(H)
    gq = Q.T @ g
    newton = w >= floor
    step = np.where(newton, gq / np.where(newton, w, 1.0), gq)
    return -(Q @ step)


def _plateau_step(prob, x, d, f, gn, cfg) -> Optional[Tuple[np.ndarray, float]]:
    """A step along d whose value does not rise and whose gradient is smaller, when the
    Armijo decrease is below float resolution; None when the rise at the full step is real."""
    alpha, f_try = 1.0, prob.value(x + d)
    if abs(f_try - f) > 64.0 * np.finfo(float).eps * max(1.0, abs(f)):
        return None
    for _ in range(cfg.max_halvings):
        step = x + alpha * d
        if f_try <= f and float(np.linalg.norm(prob.gradient(step))) < gn:
            return step, f_try
        alpha *= cfg.backtrack
        f_try = prob.value(x + alpha * d)
    return None


def minimize_Ic(prob: DiscreteMeasureProblem, cfg: Optional[MinimizeConfig] = None) -> MinimizeResult:
    """Damped hybrid Newton with Armijo backtracking.

    Convergence needs grad_norm <= grad_tol both absolutely and relative to the
    total weight sum F'(z_i); along an escaping ray the weights vanish faster
    than the normalized gradient, so that case is reported as NotCoercive.
    """
    cfg = cfg or MinimizeConfig()
    n = prob.n
    x = np.zeros(chart_dim(n)) if cfg.start is None else pair_to_coords(cfg.start.traceless())

    def done(x, it, f, g, status):
        res = MinimizeResult(coords_to_pair(x, n), f, float(np.linalg.norm(g)), it, status, values)
        log.debug("minimize_Ic: %s after %d iterations, value %.6e, |grad| %.3e",
                  status.value, it, f, res.grad_norm)
        return res

    with np.errstate(over="ignore", invalid="ignore"):
        f = prob.value(x)
        values = [f]
        for it in range(cfg.max_iter + 1):
            g = prob.gradient(x)
            gn = float(np.linalg.norm(g))
            mass = float(np.sum(prob.F.prime(prob.V @ x)))
            if np.linalg.norm(x) > cfg.escape_norm or mass <= 1e-250:
                return done(x, it, f, g, Status.NOT_COERCIVE)
            if gn <= cfg.grad_tol and gn <= cfg.grad_tol * mass:
                return done(x, it, f, g, Status.CONVERGED)
            if it == cfg.max_iter:
                break

            d = _direction(g, prob.hessian(x), cfg.newton_floor)
            slope = float(g @ d)
            alpha, f_new = 1.0, prob.value(x + d)
            if f_new > f + cfg.armijo_c1 * slope:
                plateau = _plateau_step(prob, x, d, f, gn, cfg)
                if plateau is not None:
                    x, f = plateau
                    values.append(f)
                    continue
            for _ in range(cfg.max_halvings):
                if f_new <= f + cfg.armijo_c1 * alpha * slope:
                    break
                alpha *= cfg.backtrack
                f_new = prob.value(x + alpha * d)
            else:
                log.warning("minimize_Ic: line search stalled at iteration %d (|grad| %.3e)", it, gn)
                return done(x, it, f, g, Status.MAX_ITER)

            if alpha == 1.0:
                # keep doubling while the objective still drops; lets escaping rays reach escape_norm
                for _ in range(cfg.max_doublings):
                    f_try = prob.value(x + 2.0 * alpha * d)
                    if not f_try < f_new:
                        break
                    alpha, f_new = 2.0 * alpha, f_try

            x = x + alpha * d
            f = f_new
            values.append(f)

    log.warning("minimize_Ic: no convergence in %d iterations", cfg.max_iter)
    return done(x, cfg.max_iter, f, g, Status.MAX_ITER)


def certify_uniqueness(prob: DiscreteMeasureProblem, result: MinimizeResult, tol: float = 1e-9) -> bool:
    """Strict convexity at the minimizer plus interiority of (I/n, 0)."""
    if not result.converged:
        log.warning("certify_uniqueness: minimization did not converge (%s)", result.status.value)
        return False
    H = prob.hessian(pair_to_coords(result.minimizer))
    smallest = float(np.linalg.eigvalsh(H)[0])
    ok = smallest > tol and solvability_check(prob.contacts).interior
    if not ok:
        log.warning("minimizers may form a face (smallest Hessian eigenvalue %.3e)", smallest)
    return ok


def ray_values(prob: DiscreteMeasureProblem, direction: SymPair, ts: Sequence[float]) -> np.ndarray:
    """I_c along the ray t * direction, for coercivity checks."""
    d = pair_to_coords(direction.traceless())
    with np.errstate(over="ignore"):
        return np.array([prob.value(t * d) for t in ts])
