"""Energy functional, derivative pairing and pointwise residuals.

Three problem variants share one code path:

``base``
    potentials ``a``, ``b`` from the graph.
``lambda``
    potentials ``1 + lam*a`` and ``1 + lam*b``.
``dirichlet``
    fields confined to ``omega_a`` / ``omega_b`` with zero boundary values,
    unit potential on the domains, gradients integrated over each domain
    plus its boundary and coupling integrals over ``omega_a | omega_b``.

Every ``s^2 log s^2`` is evaluated through :func:`log_sq`, which is 0 at 0.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .calculus import FieldPair, gradient_form, grad_power, p_laplacian
from .errors import BoundaryViolation, InvalidP, NonFiniteValue, ValidationError
from .graph import GraphInstance

__all__ = [
    "EnergyBreakdown",
    "ProblemSpec",
    "Problem",
    "log_sq",
    "energy",
    "derivative_pairing",
    "residual",
    "nehari_defect",
    "ground_level_identity",
]

VARIANTS = ("base", "lambda", "dirichlet")


def log_sq(s):
    """``s^2 log(s^2)``, continuously extended by 0 at ``s = 0``."""
    s = np.asarray(s, dtype=float)
    s2 = s * s
    out = np.zeros_like(s2)
    np.log(s2, out=out, where=s2 > 0)
    out *= s2
    return out if out.ndim else float(out)


def _s_log_sq(s):
    # s * log(s^2), zero at s = 0
    s = np.asarray(s, dtype=float)
    s2 = s * s
    out = np.zeros_like(s2)
    np.log(s2, out=out, where=s2 > 0)
    return s * out


# overflow is reported as NonFiniteValue, so numpy's own warnings are noise
_quiet = np.errstate(over="ignore", invalid="ignore")


def _fsum(x) -> float:
    return math.fsum(x.tolist())


@dataclass(frozen=True)
class ProblemSpec:
    """Exponent and variant; ``p > 4`` is required."""

    p: float
    variant: str = "base"
    lam: float = 0.0
    omega_a: frozenset = field(default_factory=frozenset)
    omega_b: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not (isinstance(self.p, (int, float)) and math.isfinite(self.p) and self.p > 4):
            raise InvalidP(f"p must exceed 4, got p={self.p}")
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant {self.variant!r}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValidationError(f"lambda must be a nonnegative real, got {self.lam}")
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "omega_a", frozenset(int(x) for x in self.omega_a))
        object.__setattr__(self, "omega_b", frozenset(int(x) for x in self.omega_b))
        if self.variant == "dirichlet" and not (self.omega_a and self.omega_b):
            raise ValidationError("dirichlet variant needs nonempty omega_a and omega_b")

    @classmethod
    def base(cls, p):
        return cls(p)

    @classmethod
    def with_lambda(cls, p, lam):
        return cls(p, "lambda", lam=lam)

    @classmethod
    def dirichlet(cls, p, omega_a, omega_b):
        return cls(p, "dirichlet", omega_a=frozenset(omega_a), omega_b=frozenset(omega_b))


@dataclass(frozen=True)
class EnergyBreakdown:
    norm_u_p: float
    norm_v_p: float
    coupling_B: float
    log_uv: float
    log_vu: float
    log_uv_pos: float
    log_uv_neg: float
    log_vu_pos: float
    log_vu_neg: float
    J: float

    def to_dict(self):
        return asdict(self)


class Problem:
    """A :class:`ProblemSpec` bound to a graph.

    Precomputes potentials and masks so the solver can evaluate the energy,
    the Nehari coefficients and the residual many times cheaply.
    """

    def __init__(self, g: GraphInstance, spec: ProblemSpec):
        self.g = g
        self.spec = spec
        p = spec.p
        self.p = p
        n = g.n
        if spec.variant == "base":
            self.pot_a, self.pot_b = g.a, g.b
            self.var_a = self.var_b = np.ones(n, dtype=bool)
        elif spec.variant == "lambda":
            self.pot_a = 1.0 + spec.lam * g.a
            self.pot_b = 1.0 + spec.lam * g.b
            self.var_a = self.var_b = np.ones(n, dtype=bool)
        else:
            self.var_a = g.mask(spec.omega_a)
            self.var_b = g.mask(spec.omega_b)
            self.pot_a = self.var_a.astype(float)
            self.pot_b = self.var_b.astype(float)
        self.dirichlet = spec.variant == "dirichlet"
        if self.dirichlet:
            self.grad_a = self.var_a | g.mask(g.boundary(spec.omega_a))
            self.grad_b = self.var_b | g.mask(g.boundary(spec.omega_b))
            self.coupling = self.var_a | self.var_b
        else:
            self.grad_a = self.grad_b = self.coupling = None

    # ------------------------------------------------------------------
    def check(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if u.shape != (self.g.n,) or v.shape != (self.g.n,):
            raise ValueError(f"fields must have length {self.g.n}")
        if self.dirichlet:
            for name, w, inside in (("u", u, self.var_a), ("v", v, self.var_b)):
                bad = np.flatnonzero((~inside) & (w != 0))
                if bad.size:
                    raise BoundaryViolation(
                        f"{name} is nonzero at vertex {self.g.ids[bad[0]]} outside its domain"
                    )
        return u, v

    def _masked(self, arr, mask):
        return arr if mask is None else np.where(mask, arr, 0.0)

    @_quiet
    def integrands(self, u, v):
        """Per-vertex integrands (before multiplication by ``mu``)."""
        p = self.p
        g = self.g
        au = np.abs(u) ** (p - 2.0)
        av = np.abs(v) ** (p - 2.0)
        nu = self._masked(grad_power(g, u, p), self.grad_a) + self.pot_a * np.abs(u) ** p
        nv = self._masked(grad_power(g, v, p), self.grad_b) + self.pot_b * np.abs(v) ** p
        cpl = self.coupling
        luv = self._masked(au * log_sq(v), cpl)
        lvu = self._masked(av * log_sq(u), cpl)
        bb = self._masked(av * u * u + au * v * v, cpl)
        return nu, nv, bb, luv, lvu

    def coefficients(self, u, v):
        """``(N, B, L)`` with ``L`` the two log integrals; ``C = 2B/p + L``."""
        mu = self.g.mu
        nu, nv, bb, luv, lvu = self.integrands(u, v)
        N = _fsum(mu * nu) + _fsum(mu * nv)
        B = _fsum(mu * bb)
        L = _fsum(mu * luv) + _fsum(mu * lvu)
        return N, B, L

    def breakdown(self, u, v) -> EnergyBreakdown:
        mu = self.g.mu
        nu, nv, bb, luv, lvu = self.integrands(u, v)
        vals = dict(
            norm_u_p=_fsum(mu * nu),
            norm_v_p=_fsum(mu * nv),
            coupling_B=_fsum(mu * bb),
            log_uv_pos=_fsum(mu * np.maximum(luv, 0.0)),
            log_uv_neg=_fsum(mu * np.maximum(-luv, 0.0)),
            log_vu_pos=_fsum(mu * np.maximum(lvu, 0.0)),
            log_vu_neg=_fsum(mu * np.maximum(-lvu, 0.0)),
        )
        vals["log_uv"] = _fsum(mu * luv)
        vals["log_vu"] = _fsum(mu * lvu)
        p = self.p
        vals["J"] = (vals["norm_u_p"] + vals["norm_v_p"]) / p - (vals["log_uv"] + vals["log_vu"]) / p
        _finite(vals)
        return EnergyBreakdown(**vals)

    def J(self, u, v) -> float:
        N, _, L = self.coefficients(u, v)
        val = (N - L) / self.p
        _finite({"J": val})
        return val

    @_quiet
    def pairing(self, u, v, xi, eta) -> float:
        """``J'(u, v) . (xi, eta)``, gradient part in summation-by-parts form."""
        p = self.p
        g = self.g
        mu = g.mu
        au = np.abs(u) ** (p - 2.0)
        av = np.abs(v) ** (p - 2.0)
        grad_u = self._masked(grad_power(g, u, p - 2.0) * gradient_form(g, u, xi), self.grad_a)
        grad_v = self._masked(grad_power(g, v, p - 2.0) * gradient_form(g, v, eta), self.grad_b)
        local = grad_u + grad_v + self.pot_a * au * u * xi + self.pot_b * av * v * eta
        # |u|^{p-4} u, zero at u = 0 because p > 4
        su = np.sign(u) * np.abs(u) ** (p - 3.0)
        sv = np.sign(v) * np.abs(v) ** (p - 3.0)
        cpl = (
            (p - 2.0) / p * su * xi * log_sq(v)
            + 2.0 / p * au * eta * (_s_log_sq(v) + v)
            + (p - 2.0) / p * sv * eta * log_sq(u)
            + 2.0 / p * av * xi * (_s_log_sq(u) + u)
        )
        cpl = self._masked(cpl, self.coupling)
        val = _fsum(mu * local) - _fsum(mu * cpl)
        _finite({"pairing": val})
        return val

    @_quiet
    def residual(self, u, v):
        """Pointwise residuals of both equations; ``dJ/du(x) = mu(x) * r_u(x)``."""
        p = self.p
        g = self.g
        au = np.abs(u) ** (p - 2.0)
        av = np.abs(v) ** (p - 2.0)
        su = np.sign(u) * np.abs(u) ** (p - 3.0)
        sv = np.sign(v) * np.abs(v) ** (p - 3.0)
        ru = (
            -p_laplacian(g, u, p)
            + self.pot_a * au * u
            - (p - 2.0) / p * su * log_sq(v)
            - 2.0 / p * av * (_s_log_sq(u) + u)
        )
        rv = (
            -p_laplacian(g, v, p)
            + self.pot_b * av * v
            - (p - 2.0) / p * sv * log_sq(u)
            - 2.0 / p * au * (_s_log_sq(v) + v)
        )
        if self.dirichlet:
            ru = np.where(self.var_a, ru, 0.0)
            rv = np.where(self.var_b, rv, 0.0)
        if not (np.all(np.isfinite(ru)) and np.all(np.isfinite(rv))):
            raise NonFiniteValue("residual is not finite")
        return ru, rv


def _finite(vals):
    for key, val in vals.items():
        if not math.isfinite(val):
            raise NonFiniteValue(f"{key} is not finite ({val})")


def _bind(g, spec, fp):
    prob = Problem(g, spec)
    u, v = prob.check(fp.u, fp.v)
    return prob, u, v


def energy(g: GraphInstance, fp: FieldPair, spec: ProblemSpec) -> EnergyBreakdown:
    prob, u, v = _bind(g, spec, fp)
    return prob.breakdown(u, v)


def derivative_pairing(g: GraphInstance, fp: FieldPair, test: FieldPair, spec: ProblemSpec) -> float:
    prob, u, v = _bind(g, spec, fp)
    return prob.pairing(u, v, np.asarray(test.u, float), np.asarray(test.v, float))


def residual(g: GraphInstance, fp: FieldPair, spec: ProblemSpec):
    prob, u, v = _bind(g, spec, fp)
    return prob.residual(u, v)


def nehari_defect(g: GraphInstance, fp: FieldPair, spec: ProblemSpec) -> float:
    """``J'(u, v) . (u, v)``; zero exactly on the Nehari set (and at the origin)."""
    prob, u, v = _bind(g, spec, fp)
    return prob.pairing(u, v, u, v)


def _mp_identity(prob: Problem, u, v, dps: int):
    """``J - J'(w).w / p`` and ``2B/p^2`` in ``dps``-digit arithmetic, term by term."""
    import mpmath as mp

    g = prob.g
    with mp.workdps(dps):
        p = mp.mpf(prob.p)
        mu = [mp.mpf(float(m)) for m in g.mu]
        U = [mp.mpf(float(x)) for x in u]
        V = [mp.mpf(float(x)) for x in v]
        n = g.n
        every = [True] * n

        def mask(m):
            return every if m is None else [bool(b) for b in m]

        def gamma(w, x):
            return sum((w[y] - w[x]) ** 2 for y in g.adjacency[x]) / (2 * mu[x])

        def apow(s, e):
            return abs(s) ** e if s != 0 else mp.mpf(0)

        def xlog(s):
            return s * s * mp.log(s * s) if s != 0 else mp.mpf(0)

        def slog(s):
            return s * mp.log(s * s) if s != 0 else mp.mpf(0)

        ga, gb, cp = mask(prob.grad_a), mask(prob.grad_b), mask(prob.coupling)
        N = L = B = P = mp.mpf(0)
        for x in range(n):
            m = mu[x]
            pa, pb = mp.mpf(float(prob.pot_a[x])), mp.mpf(float(prob.pot_b[x]))
            gu, gv = gamma(U, x), gamma(V, x)
            au, av = apow(U[x], p - 2), apow(V[x], p - 2)
            # energy side: |grad w|^p as Gamma^(p/2)
            N += m * ((apow(gu, p / 2) if ga[x] else 0) + (apow(gv, p / 2) if gb[x] else 0))
            N += m * (pa * apow(U[x], p) + pb * apow(V[x], p))
            # pairing side with test fields (u, v): |grad w|^(p-2) Gamma(w, w)
            P += m * ((apow(gu, (p - 2) / 2) * gu if ga[x] else 0) + (apow(gv, (p - 2) / 2) * gv if gb[x] else 0))
            P += m * (pa * au * U[x] * U[x] + pb * av * V[x] * V[x])
            if cp[x]:
                su = mp.sign(U[x]) * apow(U[x], p - 3)
                sv = mp.sign(V[x]) * apow(V[x], p - 3)
                L += m * (au * xlog(V[x]) + av * xlog(U[x]))
                B += m * (av * U[x] ** 2 + au * V[x] ** 2)
                P -= m * (
                    (p - 2) / p * su * U[x] * xlog(V[x])
                    + 2 / p * au * V[x] * (slog(V[x]) + V[x])
                    + (p - 2) / p * sv * V[x] * xlog(U[x])
                    + 2 / p * av * U[x] * (slog(U[x]) + U[x])
                )
        J = (N - L) / p
        return float(J - P / p), float(2 / p**2 * B)


def ground_level_identity(g: GraphInstance, fp: FieldPair, spec: ProblemSpec, dps: int | None = 40):
    """``(J - J'(u,v).(u,v)/p, 2/p^2 * B)``; the two agree for every pair.

    The left side subtracts two quantities that are much larger than ``B``
    whenever the coupling is weak, so in double precision it carries an
    error of order ``eps * N / B``.  By default both sides are therefore
    evaluated with ``dps`` significant digits (mpmath, one pass over the
    vertices), then rounded; ``dps=None`` uses the double-precision kernels.
    """
    prob, u, v = _bind(g, spec, fp)
    p = prob.p
    if dps is not None:
        return _mp_identity(prob, u, v, dps)
    br = prob.breakdown(u, v)
    lhs = br.J - prob.pairing(u, v, u, v) / p
    rhs = 2.0 / p**2 * br.coupling_B
    return lhs, rhs
