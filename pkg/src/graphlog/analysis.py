"""Stand-alone numerical checks: exponent calibration, log-series experiment, embedding constants.

The series experiment uses the truncated path graph built by
:func:`appendix_graph`: vertices ``0..N``, ``mu(n) = n`` and
``a(n) = b(n) = (log n)^delta`` for ``n >= 3``, with fields
``u(n) = n^(-2/p) (log n)^(-theta)`` and ``v(n) = n^(-2/p) (log n)^(-phi)``.
On that graph the potential-weighted norm series converges while both
log-coupling integrals diverge to ``-inf``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import FieldPair, grad_power, integrate
from .errors import DeltaTooLarge, EpsilonTooLarge, PotentialNotPositive, ValidationError
from .graph import GraphInstance, path_graph

__all__ = [
    "CalibrationResult",
    "calibrate_exponents",
    "AppendixParams",
    "appendix_params",
    "SeriesReport",
    "appendix_series",
    "appendix_graph",
    "log_power_integral",
    "loglog_power_integral",
    "series_classification",
    "embedding_constant",
    "DEFAULT_CHECKPOINTS",
]

IDENTITY_TOL = 1e-12
DEFAULT_CHECKPOINTS = (10**3, 10**4, 10**5, 10**6, 10**7)


# --------------------------------------------------------------------------
# exponent calibration

@dataclass(frozen=True)
class CalibrationResult:
    p: float
    epsilon: float
    s: float
    p1: float
    p2: float
    t: float

    def identities(self) -> dict:
        """Residuals (lhs - rhs) of the four defining equations."""
        p, e, s, t = self.p, self.epsilon, self.s, self.t
        return {
            "p1*s=4": self.p1 * s - 4.0,
            "p2*s=2(p-2)": self.p2 * s - 2.0 * (p - 2.0),
            "(2+eps-p1)st/(s-1)=p": (2.0 + e - self.p1) * s * t / (s - 1.0) - p,
            "(p-p2-2)st/((s-1)(t-1))=p": (p - self.p2 - 2.0) * s * t / ((s - 1.0) * (t - 1.0)) - p,
        }

    def inequalities(self) -> dict:
        return {
            "s>1": self.s > 1,
            "t>1": self.t > 1,
            "p1<2+eps": self.p1 < 2.0 + self.epsilon,
            "p2<p-2": self.p2 < self.p - 2.0,
        }

    def to_dict(self) -> dict:
        return {
            "p": self.p, "epsilon": self.epsilon, "s": self.s, "p1": self.p1, "p2": self.p2, "t": self.t,
            "identities": self.identities(), "inequalities": self.inequalities(),
        }


def calibrate_exponents(p: float, epsilon: float) -> CalibrationResult:
    """Closed-form solution of the four-equation calibration system.

    For ``p > 4`` and ``0 < epsilon < 1`` the strict inequalities always
    hold; :class:`EpsilonTooLarge` guards the check anyway.
    """
    if not p > 4:
        raise ValidationError(f"p must exceed 4, got p={p}")
    if not 0 < epsilon < 1:
        raise ValidationError(f"epsilon must lie in (0, 1), got epsilon={epsilon}")
    s = p / epsilon
    p1 = 4.0 * epsilon / p
    p2 = 2.0 * (p - 2.0) * epsilon / p
    denom = p * (2.0 + epsilon) - 4.0 * epsilon
    t = p * (p - epsilon) / denom
    res = CalibrationResult(float(p), float(epsilon), s, p1, p2, t)
    bad = [k for k, ok in res.inequalities().items() if not ok]
    if bad:
        raise EpsilonTooLarge(f"epsilon={epsilon} violates {', '.join(bad)}")
    scale = {"p1*s=4": 4.0, "p2*s=2(p-2)": 2.0 * (p - 2.0)}
    for key, r in res.identities().items():
        if abs(r) > IDENTITY_TOL * scale.get(key, p):
            raise ArithmeticError(f"calibration identity {key} off by {r:.3g}")
    return res


# --------------------------------------------------------------------------
# series experiment

@dataclass(frozen=True)
class AppendixParams:
    p: float
    delta: float
    theta: float
    phi: float
    N_max: int = 10**7

    @property
    def q_convergent(self) -> float:
        """Log exponent of the potential-weighted norm series, ``p theta - delta``."""
        return self.p * self.theta - self.delta

    @property
    def q_divergent_1(self) -> float:
        return (self.p - 2.0) * self.phi + 2.0 * self.theta - 1.0

    @property
    def q_divergent_2(self) -> float:
        return (self.p - 2.0) * self.theta + 2.0 * self.phi - 1.0

    def to_dict(self) -> dict:
        return {
            "p": self.p, "delta": self.delta, "theta": self.theta, "phi": self.phi, "N_max": self.N_max,
            "q_convergent": self.q_convergent, "q_divergent_1": self.q_divergent_1,
            "q_divergent_2": self.q_divergent_2,
        }


def appendix_params(p: float, delta: float, N_max: int = 10**7) -> AppendixParams:
    """``theta = phi = (1 + 2 delta) / p``; raises :class:`DeltaTooLarge` if a log exponent exceeds 1."""
    if not p > 4:
        raise ValidationError(f"p must exceed 4, got p={p}")
    if not delta > 0:
        raise ValidationError(f"delta must be positive, got delta={delta}")
    theta = phi = (1.0 + 2.0 * delta) / p
    prm = AppendixParams(float(p), float(delta), theta, phi, int(N_max))
    for name, q in (("(p-2)phi+2theta-1", prm.q_divergent_1), ("(p-2)theta+2phi-1", prm.q_divergent_2)):
        if q > 1:
            raise DeltaTooLarge(f"delta={delta}: {name} = {q:.6g} exceeds 1")
    return prm


def series_classification(q: float) -> str:
    """Integral-test verdict for ``sum n^-1 (log n)^-q``."""
    return "convergent" if q > 1 else "divergent"


def log_power_integral(q: float, lo: float, hi: float) -> float:
    """``int_lo^hi x^-1 (log x)^-q dx`` in closed form (``hi = inf`` allowed for ``q > 1``)."""
    a, b = math.log(lo), math.log(hi) if math.isfinite(hi) else math.inf
    if q == 1:
        return math.log(b) - math.log(a)
    if math.isinf(b):
        if q < 1:
            return math.inf
        return a ** (1.0 - q) / (q - 1.0)
    return (b ** (1.0 - q) - a ** (1.0 - q)) / (1.0 - q)


def loglog_power_integral(q: float, lo: float, hi: float) -> float:
    """``int_lo^hi x^-1 (log x)^-q log(log x) dx`` in closed form."""

    def prim(y):
        ly = math.log(y)
        if q == 1:
            return 0.5 * ly * ly
        r = 1.0 - q
        return y**r * ly / r - y**r / (r * r)

    return prim(math.log(hi)) - prim(math.log(lo))


@dataclass
class SeriesReport:
    params: AppendixParams
    checkpoints: list
    converging_partials: dict
    diverging_partials_I1: dict
    diverging_partials_I2: dict
    dominant_partials_I1: dict
    dominant_partials_I2: dict
    integral_asymptote: dict
    relative_gap: dict
    increments: dict
    verdict: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        key = lambda d: {str(k): v for k, v in d.items()}  # noqa: E731
        return {
            "params": self.params.to_dict(),
            "checkpoints": list(self.checkpoints),
            "converging_partials": key(self.converging_partials),
            "diverging_partials_I1": key(self.diverging_partials_I1),
            "diverging_partials_I2": key(self.diverging_partials_I2),
            "dominant_partials_I1": key(self.dominant_partials_I1),
            "dominant_partials_I2": key(self.dominant_partials_I2),
            "integral_asymptote": {str(k): v for k, v in self.integral_asymptote.items()},
            "relative_gap": {str(k): v for k, v in self.relative_gap.items()},
            "verdict": self.verdict,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "convergent_partial", "I1_partial", "I2_partial", "asymptote_q", "relative_gap"])
            for N in self.checkpoints:
                w.writerow([
                    N,
                    format(self.converging_partials[N], ".17g"),
                    format(self.diverging_partials_I1[N], ".17g"),
                    format(self.diverging_partials_I2[N], ".17g"),
                    format(self.integral_asymptote[N]["dominant_1"], ".17g"),
                    format(self.relative_gap[N]["dominant_1"], ".17g"),
                ])


def _terms(prm: AppendixParams, n: np.ndarray):
    L = np.log(n)
    LL = np.log(L)
    inv = 1.0 / n
    conv = inv * L ** (-prm.q_convergent)
    dom1 = -(4.0 / prm.p) * inv * L ** (-prm.q_divergent_1)
    dom2 = -(4.0 / prm.p) * inv * L ** (-prm.q_divergent_2)
    sub1 = -2.0 * prm.theta * inv * L ** (-(prm.q_divergent_1 + 1.0)) * LL
    sub2 = -2.0 * prm.phi * inv * L ** (-(prm.q_divergent_2 + 1.0)) * LL
    return conv, dom1, dom2, sub1, sub2


def appendix_series(params: AppendixParams, checkpoints=DEFAULT_CHECKPOINTS, chunk: int = 10**6) -> SeriesReport:
    """Partial sums from ``n = 3`` at each checkpoint, compared against the integral test.

    Summation runs in ascending ``n`` in chunks; each chunk and the running
    total are accumulated with :func:`math.fsum`.
    """
    checkpoints = sorted({int(N) for N in checkpoints})
    if not checkpoints or checkpoints[0] < 3:
        raise ValidationError("checkpoints must be integers >= 3")
    names = ("conv", "dom1", "dom2", "sub1", "sub2")
    parts = {k: [] for k in names}
    at = {k: {} for k in names}
    # a decreasing sum with every summand negative from n = 3 on
    strict = {"I1": True, "I2": True}
    last = {"I1": None, "I2": None}
    start = 3
    for N in checkpoints:
        while start <= N:
            stop = min(start + chunk, N + 1)
            n = np.arange(start, stop, dtype=float)
            conv, dom1, dom2, sub1, sub2 = _terms(params, n)
            for key, arr in zip(names, (conv, dom1, dom2, sub1, sub2)):
                parts[key].append(math.fsum(arr.tolist()))
            for key, arr in (("I1", dom1 + sub1), ("I2", dom2 + sub2)):
                strict[key] &= bool(np.all(arr[n >= 16] < 0))
            start = stop
        for key in names:
            at[key][N] = math.fsum(parts[key])
    conv_p = at["conv"]
    I1 = {N: math.fsum([at["dom1"][N], at["sub1"][N]]) for N in checkpoints}
    I2 = {N: math.fsum([at["dom2"][N], at["sub2"][N]]) for N in checkpoints}

    p = params.p
    asym, gap = {}, {}
    for N in checkpoints:
        d1 = -(4.0 / p) * log_power_integral(params.q_divergent_1, 3.0, N)
        d2 = -(4.0 / p) * log_power_integral(params.q_divergent_2, 3.0, N)
        f1 = d1 - 2.0 * params.theta * loglog_power_integral(params.q_divergent_1 + 1.0, 3.0, N)
        f2 = d2 - 2.0 * params.phi * loglog_power_integral(params.q_divergent_2 + 1.0, 3.0, N)
        cv = log_power_integral(params.q_convergent, 3.0, N)
        asym[N] = {"convergent": cv, "dominant_1": d1, "dominant_2": d2, "I1": f1, "I2": f2}
        gap[N] = {
            "dominant_1": abs(at["dom1"][N] - d1) / abs(d1),
            "dominant_2": abs(at["dom2"][N] - d2) / abs(d2),
            "I1": abs(I1[N] - f1) / abs(f1),
            "I2": abs(I2[N] - f2) / abs(f2),
        }

    # integral test on each block between checkpoints: sum_{M<n<=N} f(n) <= int_M^N f
    q = params.q_convergent
    increments = {}
    prev = None
    for N in checkpoints:
        if prev is not None:
            increments[N] = {
                "sum": conv_p[N] - conv_p[prev],
                "integral_bound": log_power_integral(q, prev, N),
            }
        prev = N
    N_last = checkpoints[-1]
    tail_bound = log_power_integral(q, N_last, math.inf)
    monotone = {
        "convergent_increasing": all(conv_p[a] < conv_p[b] for a, b in zip(checkpoints, checkpoints[1:])),
        "I1_decreasing": all(I1[a] > I1[b] for a, b in zip(checkpoints, checkpoints[1:])),
        "I2_decreasing": all(I2[a] > I2[b] for a, b in zip(checkpoints, checkpoints[1:])),
    }
    verdict = {
        "convergent_exponent": q,
        "convergent_class": series_classification(q),
        "divergent_exponents": [params.q_divergent_1, params.q_divergent_2],
        "divergent_class": [series_classification(params.q_divergent_1), series_classification(params.q_divergent_2)],
        "tail_bound": tail_bound,
        "tail_bound_reference": (math.log(N_last)) ** (1.0 - q) / (q - 1.0) if q > 1 else math.inf,
        "tail_bound_holds": all(v["sum"] <= v["integral_bound"] for v in increments.values()),
        "convergent_upper_estimate": conv_p[N_last] + tail_bound,
        "I1_tracks_asymptote": gap[N_last]["dominant_1"] <= 0.05 and gap[N_last]["I1"] <= 0.05,
        "I2_tracks_asymptote": gap[N_last]["dominant_2"] <= 0.05 and gap[N_last]["I2"] <= 0.05,
        "I1_summands_negative_from_16": strict["I1"],
        "I2_summands_negative_from_16": strict["I2"],
        **monotone,
    }
    return SeriesReport(
        params=params,
        checkpoints=checkpoints,
        converging_partials=conv_p,
        diverging_partials_I1=I1,
        diverging_partials_I2=I2,
        dominant_partials_I1=at["dom1"],
        dominant_partials_I2=at["dom2"],
        integral_asymptote=asym,
        relative_gap=gap,
        increments=increments,
        verdict=verdict,
    )


def appendix_graph(params: AppendixParams, N: int):
    """Truncation of the counterexample to vertices ``0..N``; returns ``(graph, FieldPair)``."""
    if N < 3:
        raise ValidationError("appendix graph needs N >= 3")
    n = np.arange(N + 1, dtype=float)
    tail = n >= 3
    logn = np.log(np.where(tail, n, 3.0))
    mu = np.where(tail, n, 1.0)
    pot = np.where(tail, logn**params.delta, 1.0)
    g = path_graph(N + 1, mu=mu, a=pot, b=pot)
    base = np.where(tail, np.where(tail, n, 1.0) ** (-2.0 / params.p), 0.0)
    u = np.where(tail, base * logn ** (-params.theta), 0.0)
    v = np.where(tail, base * logn ** (-params.phi), 0.0)
    return g, FieldPair(u, v)


# --------------------------------------------------------------------------
# embedding constants

def embedding_constant(g: GraphInstance, p: float, q: float, potential=None, trials: int = 1000, rng_seed: int = 0):
    """``(empirical_sup, analytic_bound)`` for ``||u||_q <= C ||u||_H``.

    The analytic constant is ``mu_min^(1/q - 1/p) * V0^(-1/p)`` with ``V0``
    the minimum of the potential (default: ``g.a``).  Trials mix uniform,
    Gaussian and single-vertex fields, the last being extremal when
    gradients are absent.
    """
    if q < p:
        raise ValidationError(f"q must be at least p, got q={q} < p={p}")
    pot = np.broadcast_to(np.asarray(g.a if potential is None else potential, dtype=float), (g.n,))
    V0 = float(np.min(pot))
    if not V0 > 0:
        raise PotentialNotPositive(f"potential minimum V0={V0} must be positive")
    bound = g.mu_min ** (1.0 / q - 1.0 / p) * V0 ** (-1.0 / p)
    rng = np.random.default_rng(rng_seed)
    best = 0.0
    for k in range(trials):
        kind = k % 3
        if kind == 0:
            u = rng.uniform(-1.0, 1.0, g.n)
        elif kind == 1:
            u = rng.standard_normal(g.n)
        else:
            u = np.zeros(g.n)
            u[rng.integers(g.n)] = 1.0
        peak = np.max(np.abs(u))
        if peak == 0:
            continue
        u = u / peak
        lq = integrate(g, np.abs(u) ** q) ** (1.0 / q)
        hp = integrate(g, grad_power(g, u, p) + pot * np.abs(u) ** p) ** (1.0 / p)
        best = max(best, lq / hp)
    return best, bound
