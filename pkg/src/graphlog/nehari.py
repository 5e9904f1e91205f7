"""Fibering map along rays and the closed-form Nehari projection.

Along the ray ``t -> t(u, v)`` the Nehari functional is

    phi(t) = t^p (N - C) - t^p log(t^2) B

so ``phi(t)/t^p`` is affine in ``log t^2`` and the unique positive root is
``exp((N - C) / (2B))`` whenever ``B > 0``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .calculus import FieldPair
from .energy import Problem, ProblemSpec
from .errors import CouplingDegenerate, EmptyCandidates, RayOverflow, ValidationError, ZeroPair
from .graph import GraphInstance

__all__ = [
    "FiberingCoefficients",
    "fibering_coefficients",
    "project_to_nehari",
    "fibering_maximality_check",
    "nehari_level",
    "on_nehari",
    "NEHARI_RTOL",
    "MAX_LOG_T",
]

NEHARI_RTOL = 1e-9
MAX_LOG_T = 700.0


@dataclass(frozen=True)
class FiberingCoefficients:
    N: float
    B: float
    C: float
    p: float

    def phi(self, t):
        """``J'(t u, t v) . (t u, t v)``."""
        t = np.asarray(t, dtype=float)
        tp = t**self.p
        return tp * (self.N - self.C) - tp * np.log(t * t) * self.B

    def gamma(self, t):
        """``J(t u, t v)``."""
        t = np.asarray(t, dtype=float)
        tp = t**self.p
        # C - 2B/p is the log-integral part of J
        L = self.C - 2.0 * self.B / self.p
        return tp / self.p * (self.N - L) - tp * np.log(t * t) / self.p * self.B

    def log_t_star(self) -> float:
        if self.B <= 0:
            raise CouplingDegenerate("B = 0: u and v share no support vertex, no Nehari point on this ray")
        log_t = (self.N - self.C) / (2.0 * self.B)
        if abs(log_t) > MAX_LOG_T:
            raise RayOverflow(f"|log t_star| = {abs(log_t):.3g} exceeds {MAX_LOG_T}")
        return log_t

    def tolerance(self) -> float:
        return NEHARI_RTOL * max(self.N, abs(self.C), self.B, 1.0)

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if k != "p"}


def _coefficients(prob: Problem, u, v) -> FiberingCoefficients:
    N, B, L = prob.coefficients(u, v)
    return FiberingCoefficients(N=N, B=B, C=2.0 * B / prob.p + L, p=prob.p)


def fibering_coefficients(g: GraphInstance, fp: FieldPair, spec: ProblemSpec) -> FiberingCoefficients:
    if fp.is_zero():
        raise ZeroPair("fibering coefficients are undefined for (0, 0)")
    prob = Problem(g, spec)
    u, v = prob.check(fp.u, fp.v)
    return _coefficients(prob, u, v)


def project_to_nehari(g: GraphInstance, fp: FieldPair, spec: ProblemSpec):
    """Return ``(t_star, t_star * fp)``, the unique Nehari point on the ray."""
    t = math.exp(fibering_coefficients(g, fp, spec).log_t_star())
    return t, fp.scaled(t)


def on_nehari(g: GraphInstance, fp: FieldPair, spec: ProblemSpec) -> bool:
    if fp.is_zero():
        return False
    prob = Problem(g, spec)
    u, v = prob.check(fp.u, fp.v)
    coef = _coefficients(prob, u, v)
    return abs(prob.pairing(u, v, u, v)) <= coef.tolerance()


def fibering_maximality_check(
    g: GraphInstance, fp: FieldPair, spec: ProblemSpec, t_grid, rtol: float = 1e-4
) -> bool:
    """True iff ``J(t_star fp)`` dominates ``J(t fp)`` on the grid.

    Domination must be strict for grid points farther than ``rtol * t_star``
    from ``t_star``.
    """
    prob = Problem(g, spec)
    t_star, _ = project_to_nehari(g, fp, spec)
    top = prob.J(t_star * fp.u, t_star * fp.v)
    for t in t_grid:
        t = float(t)
        val = prob.J(t * fp.u, t * fp.v)
        if abs(t - t_star) > rtol * t_star:
            if not val < top:
                return False
        elif val > top + 1e-12 * max(abs(top), 1.0):
            return False
    return True


def nehari_level(g: GraphInstance, candidates, spec: ProblemSpec) -> float:
    """Smallest energy among Nehari points, cross-checked against ``2B/p^2``."""
    candidates = list(candidates)
    if not candidates:
        raise EmptyCandidates("nehari_level needs at least one candidate")
    prob = Problem(g, spec)
    p = prob.p
    best_j = best_b = math.inf
    for k, fp in enumerate(candidates):
        u, v = prob.check(fp.u, fp.v)
        coef = _coefficients(prob, u, v)
        if fp.is_zero() or abs(prob.pairing(u, v, u, v)) > coef.tolerance():
            raise ValidationError(f"candidate {k} is not on the Nehari manifold")
        best_j = min(best_j, prob.J(u, v))
        best_b = min(best_b, 2.0 * coef.B / p**2)
    if abs(best_j - best_b) > 1e-10 * max(best_j, 1.0):
        raise ValidationError(
            f"energy minimum {best_j!r} and 2B/p^2 minimum {best_b!r} disagree"
        )
    return best_j
