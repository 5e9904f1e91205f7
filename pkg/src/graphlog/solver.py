"""Ground states by multistart descent on the Nehari manifold.

Each run minimizes ``F(w) = J(t_star(w) w)`` over ray representatives ``w``.
``F`` is constant along rays, and at a Nehari point its gradient is ``mu``
times the pointwise residual, so every descent direction below is a
(preconditioned) negative residual.  The line search works on ``log F``,
which keeps steps meaningful even when a random start projects to an
astronomically large Nehari point.

Once the residual is small the run switches to a Newton polish on the
pointwise system (finite-difference Jacobian of the analytic residual),
re-projecting onto the Nehari set after every step.  Runs are declared
converged on the pointwise residual only.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .calculus import FieldPair, integrate, p_laplacian
from .energy import Problem, ProblemSpec, _s_log_sq, log_sq
from .errors import EmptyIntersection, GraphlogError, NoConvergedSeed, ValidationError
from .graph import GraphInstance
from .nehari import MAX_LOG_T, NEHARI_RTOL

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "SeedResult",
    "SolveReport",
    "SweepResult",
    "random_admissible_pair",
    "solve_ground_state",
    "solve_dirichlet",
    "lambda_sweep",
    "mountain_pass_diagnostics",
    "METHOD_LABEL",
]

METHOD_LABEL = "nehari-projected descent with Newton polish (artifact choice; no algorithm is prescribed)"


@dataclass(frozen=True)
class SolverConfig:
    seeds: int = 8
    rng_seed: int = 0
    max_iters: int = 5000
    step_init: float = 1.0
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4
    residual_tol: float = 1e-8
    stall_tol: float = 1e-15
    direction: str = "lbfgs"
    lbfgs_memory: int = 8
    polish: bool = True
    polish_start: float = 1e-4
    polish_iters: int = 60
    stall_window: int = 25

    def __post_init__(self):
        checks = [
            (isinstance(self.seeds, int) and self.seeds >= 1, "seeds must be a positive integer"),
            (isinstance(self.max_iters, int) and self.max_iters >= 1, "max_iters must be a positive integer"),
            (self.step_init > 0, "step_init must be positive"),
            (0 < self.backtrack_factor < 1, "backtrack_factor must lie in (0, 1)"),
            (0 < self.armijo_c < 1, "armijo_c must lie in (0, 1)"),
            (self.residual_tol >= 0, "residual_tol must be nonnegative"),
            (self.stall_tol >= 0, "stall_tol must be nonnegative"),
            (self.direction in ("lbfgs", "gradient"), "direction must be 'lbfgs' or 'gradient'"),
            (self.lbfgs_memory >= 1, "lbfgs_memory must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValidationError(msg)


@dataclass
class SeedResult:
    seed: int
    start: str
    pair: FieldPair | None
    energy: float
    residual_sup: float
    nehari_defect: float
    iterations: int
    converged: bool
    status: str
    trace: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "start": self.start,
            "energy": self.energy,
            "residual_sup": self.residual_sup,
            "nehari_defect": self.nehari_defect,
            "iterations": self.iterations,
            "converged": self.converged,
            "status": self.status,
        }


@dataclass
class SolveReport:
    best: FieldPair | None
    energy: float
    nehari_defect: float
    residual_sup: float
    iterations: int
    trace: list
    seed_results: list
    converged: bool
    spec: ProblemSpec | None = None
    coupling_B: float = math.nan
    winner: int = -1
    method: str = METHOD_LABEL


@dataclass
class SweepResult:
    lambdas: list
    d_lambda: list
    mass_out: list
    penalty_mass: list
    residual_sup: list
    converged: list
    d_omega: float
    omega_converged: bool
    errors: dict
    solutions: list | None = None
    omega_solution: FieldPair | None = None
    mu_values: list | None = None


def _exp(x):
    return math.exp(x) if x < 709.0 else math.inf


# --------------------------------------------------------------------------
# problem-level helpers on stacked vectors w = [u, v]

class _Objective:
    """``log F`` and its gradient on ray representatives, plus the residual at the projection."""

    def __init__(self, prob: Problem):
        self.prob = prob
        self.n = prob.g.n
        self.p = prob.p
        mu = prob.g.mu
        self.mu2 = np.concatenate([mu, mu])
        self.free = np.concatenate([prob.var_a, prob.var_b])

    def split(self, w):
        return w[: self.n], w[self.n :]

    def log_t(self, w):
        # log t_star of the ray through w; None when B vanishes
        N, B, L = self.prob.coefficients(*self.split(w))
        if not B > 0:
            return None, N, B, L
        C = 2.0 * B / self.p + L
        return (N - C) / (2.0 * B), N, B, L

    def value(self, w):
        K, N, B, L = self.log_t(w)
        if K is None or not math.isfinite(K):
            return math.inf, K
        return math.log(2.0 / self.p**2) + math.log(B) + self.p * K, K

    def gradient(self, w):
        """Euclidean gradient of ``log F`` at ``w`` and ``log t_star``."""
        prob = self.prob
        g = prob.g
        p = self.p
        mu = g.mu
        u, v = self.split(w)
        N, B, L = prob.coefficients(u, v)
        au = np.abs(u) ** (p - 2.0)
        av = np.abs(v) ** (p - 2.0)
        su = np.sign(u) * np.abs(u) ** (p - 3.0)
        sv = np.sign(v) * np.abs(v) ** (p - 3.0)
        dN = p * np.concatenate([
            mu * (-p_laplacian(g, u, p) + prob.pot_a * au * u),
            mu * (-p_laplacian(g, v, p) + prob.pot_b * av * v),
        ])
        dB = np.concatenate([mu * (2.0 * av * u + (p - 2.0) * su * v * v), mu * (2.0 * au * v + (p - 2.0) * sv * u * u)])
        dL = np.concatenate([
            mu * ((p - 2.0) * su * log_sq(v) + 2.0 * av * (_s_log_sq(u) + u)),
            mu * ((p - 2.0) * sv * log_sq(u) + 2.0 * au * (_s_log_sq(v) + v)),
        ])
        if prob.dirichlet:
            cpl = np.concatenate([prob.coupling, prob.coupling])
            dB = np.where(cpl, dB, 0.0)
            dL = np.where(cpl, dL, 0.0)
        C = 2.0 * B / p + L
        dC = 2.0 / p * dB + dL
        grad = dB / B + p * ((dN - dC) / (2.0 * B) - (N - C) * dB / (2.0 * B * B))
        return np.where(self.free, grad, 0.0), (N - C) / (2.0 * B)

    def project(self, w, K):
        return w * math.exp(K)

    def residual(self, P):
        ru, rv = self.prob.residual(*self.split(P))
        return np.concatenate([ru, rv])

    def energy(self, P):
        return self.prob.J(*self.split(P))


def _residual_sup(obj, w, K):
    if K is None or K * obj.p > MAX_LOG_T:
        return math.inf, None
    P = obj.project(w, K)
    try:
        return float(np.max(np.abs(obj.residual(P)))), P
    except GraphlogError:
        return math.inf, P


def _lbfgs_direction(grad_m, S, Y, mu2):
    # two-loop recursion in the mu-weighted inner product
    q = grad_m.copy()
    alphas = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / np.dot(mu2 * y, s)
        a = rho * np.dot(mu2 * s, q)
        alphas.append((rho, a))
        q -= a * y
    if S:
        q *= np.dot(mu2 * S[-1], Y[-1]) / np.dot(mu2 * Y[-1], Y[-1])
    for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
        b = rho * np.dot(mu2 * y, q)
        q += (a - b) * s
    return -q


def _descend(obj: _Objective, w0, cfg: SolverConfig, seed: int, start: str) -> SeedResult:
    free = obj.free
    w = np.where(free, np.asarray(w0, dtype=float), 0.0)
    scale = np.linalg.norm(w)
    if scale == 0:
        return SeedResult(seed, start, None, math.inf, math.inf, math.nan, 0, False, "zero start")
    w = w / scale
    f, K = obj.value(w)
    if not math.isfinite(f):
        return SeedResult(seed, start, None, math.inf, math.inf, math.nan, 0, False, "start has B = 0")

    grad, K = obj.gradient(w)
    grad_m = grad / obj.mu2
    S, Y = [], []
    trace = []
    status = "max_iters"
    step = cfg.step_init
    stall = 0
    it = 0
    rs = math.inf
    while it < cfg.max_iters:
        rs, _ = _residual_sup(obj, w, K)
        trace.append((_exp(f), rs, step if it else 0.0))
        if rs <= cfg.residual_tol:
            status = "residual"
            break
        if cfg.polish and rs <= cfg.polish_start:
            status = "polish"
            break
        if stall >= cfg.stall_window:
            status = "stall"
            break
        if cfg.direction == "lbfgs":
            d = _lbfgs_direction(grad_m, S, Y, obj.mu2)
        else:
            d = -grad_m
        slope = float(np.dot(grad, d))
        if not slope < 0:
            S, Y = [], []
            d = -grad_m
            slope = float(np.dot(grad, d))
        dnorm = float(np.linalg.norm(d))
        if cfg.direction == "lbfgs" and S:
            s = cfg.step_init
        else:
            s = min(step / cfg.backtrack_factor, cfg.step_init)
        # trial points stay within half the representative's length
        s = min(s, 0.5 * float(np.linalg.norm(w)) / max(dnorm, 1e-300))
        while True:
            f_new, _ = obj.value(w + s * d)
            if f_new <= f + cfg.armijo_c * s * slope:
                break
            s *= cfg.backtrack_factor
            if s * dnorm < 1e-16 * np.linalg.norm(w):
                f_new = None
                break
        if f_new is None:
            status = "line search failed"
            break
        w_new = w + s * d
        grad_new, K = obj.gradient(w_new)
        grad_m_new = grad_new / obj.mu2
        sv, yv = w_new - w, grad_m_new - grad_m
        if np.dot(obj.mu2 * sv, yv) > 1e-12 * np.linalg.norm(sv) * np.linalg.norm(yv):
            S.append(sv)
            Y.append(yv)
            if len(S) > cfg.lbfgs_memory:
                S.pop(0)
                Y.pop(0)
        # log F decrease equals the relative decrease of J
        stall = stall + 1 if (f - f_new) <= cfg.stall_tol else 0
        nrm = float(np.linalg.norm(w_new))
        w, grad, grad_m, f, step = w_new / nrm, grad_new * nrm, grad_m_new * nrm, f_new, s
        K += math.log(nrm)
        # rescaling w keeps F; stored pairs are rescaled consistently
        S = [x / nrm for x in S]
        Y = [y * nrm for y in Y]
        it += 1

    P = obj.project(w, K) if K is not None and K * obj.p <= MAX_LOG_T else None
    if P is not None and status in ("polish", "stall", "max_iters") and cfg.polish and rs > cfg.residual_tol:
        P, rs, extra, ptrace = _polish(obj, P, cfg, _exp(f))
        trace.extend(ptrace)
        it += extra
        if rs <= cfg.residual_tol:
            status = "residual"
    if P is None:
        return SeedResult(seed, start, None, _exp(f), math.inf, math.nan, it, False, "ray overflow", trace)
    u, v = obj.split(P)
    pair = FieldPair(u, v)
    J = obj.energy(P)
    defect = obj.prob.pairing(u, v, u, v)
    N, B, L = obj.prob.coefficients(u, v)
    on_n = abs(defect) <= NEHARI_RTOL * max(N, abs(2 * B / obj.p + L), B, 1.0)
    converged = status == "residual" and rs <= cfg.residual_tol and on_n
    return SeedResult(seed, start, pair, J, rs, defect, it, converged, status, trace)


def _fd_jacobian(obj, P, idx, h=1e-6):
    cols = []
    for j in idx:
        dh = h * max(1.0, abs(P[j]))
        e = np.zeros_like(P)
        e[j] = dh
        cols.append((obj.residual(P + e) - obj.residual(P - e))[idx] / (2.0 * dh))
    return np.column_stack(cols)


def _polish(obj: _Objective, P, cfg: SolverConfig, J):
    """Newton iterations on the pointwise system, re-projected onto the Nehari set."""
    idx = np.flatnonzero(obj.free)
    trace = []
    r = obj.residual(P)
    rs = float(np.max(np.abs(r)))
    J = obj.energy(P)
    k = 0
    for k in range(1, cfg.polish_iters + 1):
        if rs <= cfg.residual_tol:
            k -= 1
            break
        try:
            jac = _fd_jacobian(obj, P, idx)
            step = np.linalg.lstsq(jac, -r[idx], rcond=1e-13)[0]
        except (GraphlogError, np.linalg.LinAlgError):
            k -= 1
            break
        trial = P.copy()
        trial[idx] += step
        _, K = obj.value(trial)
        if K is None or abs(K) > MAX_LOG_T:
            k -= 1
            break
        trial = obj.project(trial, K)
        try:
            r_new = obj.residual(trial)
            J_new = obj.energy(trial)
        except GraphlogError:
            k -= 1
            break
        rs_new = float(np.max(np.abs(r_new)))
        # accepted iterates never raise the energy
        if not (rs_new < rs and J_new <= J):
            k -= 1
            break
        P, r, rs, J = trial, r_new, rs_new, J_new
        trace.append((J, rs, float(np.linalg.norm(step))))
    return P, rs, k, trace


# --------------------------------------------------------------------------
# public API

def random_admissible_pair(g: GraphInstance, rng_seed, spec: ProblemSpec) -> FieldPair:
    """I.i.d. uniform [-1, 1] values with one vertex forced into [0.5, 1] for both fields.

    For the Dirichlet variant supports are confined to the two domains and
    the forced vertex lies in their intersection.
    """
    rng = np.random.default_rng(rng_seed)
    n = g.n
    u = rng.uniform(-1.0, 1.0, n)
    v = rng.uniform(-1.0, 1.0, n)
    if spec.variant == "dirichlet":
        common = sorted(spec.omega_a & spec.omega_b)
        if not common:
            raise EmptyIntersection("omega_a and omega_b do not intersect")
        u = np.where(g.mask(spec.omega_a), u, 0.0)
        v = np.where(g.mask(spec.omega_b), v, 0.0)
        x = common[rng.integers(len(common))]
    else:
        x = int(rng.integers(n))
    u[x], v[x] = rng.uniform(0.5, 1.0, 2)
    return FieldPair(u, v)


def _worker_count() -> int:
    env = os.environ.get("GRAPHLOG_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer GRAPHLOG_THREADS=%r", env)
    return os.cpu_count() or 1


def _run_one(args):
    g, spec, cfg, w0, seed, start = args
    return _descend(_Objective(Problem(g, spec)), w0, cfg, seed, start)


def _energy_key(res: SeedResult, ref: float):
    # energies equal to 1e-12 relative count as ties; lower index wins
    return round(res.energy / ref, 12) if math.isfinite(res.energy) else math.inf


def solve_ground_state(
    g: GraphInstance,
    spec: ProblemSpec,
    cfg: SolverConfig | None = None,
    initial=(),
) -> SolveReport:
    """Multistart Nehari descent.

    ``initial`` pairs are tried first (warm starts), followed by
    ``cfg.seeds`` random admissible pairs.  Raises :class:`NoConvergedSeed`
    carrying the best-effort report when no run meets the residual tolerance.
    """
    cfg = cfg or SolverConfig()
    prob = Problem(g, spec)
    jobs = []
    for k, fp in enumerate(initial):
        u, v = np.asarray(fp.u, float), np.asarray(fp.v, float)
        jobs.append((g, spec, cfg, np.concatenate([u, v]) * np.concatenate([prob.var_a, prob.var_b]), k, "warm"))
    offset = len(jobs)
    for k in range(cfg.seeds):
        fp = random_admissible_pair(g, cfg.rng_seed + k, spec)
        jobs.append((g, spec, cfg, fp.as_vector(), offset + k, f"random:{cfg.rng_seed + k}"))

    workers = min(_worker_count(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]

    finite = [r.energy for r in results if math.isfinite(r.energy)]
    ref = min(finite) if finite else 1.0
    pool_ = [r for r in results if r.converged] or [r for r in results if r.pair is not None]
    summaries = [r.summary() for r in results]
    if not pool_:
        report = SolveReport(None, math.inf, math.nan, math.inf, 0, [], summaries, False, spec)
        raise NoConvergedSeed("no seed produced a Nehari point", report)
    win = min(pool_, key=lambda r: (_energy_key(r, ref), r.seed))
    _, B, _ = prob.coefficients(win.pair.u, win.pair.v)
    report = SolveReport(
        best=win.pair,
        energy=win.energy,
        nehari_defect=win.nehari_defect,
        residual_sup=win.residual_sup,
        iterations=win.iterations,
        trace=win.trace,
        seed_results=summaries,
        converged=win.converged,
        spec=spec,
        coupling_B=B,
        winner=win.seed,
    )
    if not report.converged:
        raise NoConvergedSeed(
            f"no seed reached residual_sup <= {cfg.residual_tol:g} (best {win.residual_sup:.3g})", report
        )
    return report


def _zero_sets(g):
    return frozenset(np.flatnonzero(g.a == 0).tolist()), frozenset(np.flatnonzero(g.b == 0).tolist())


def solve_dirichlet(g: GraphInstance, omega_a=None, omega_b=None, p: float = 6.0, cfg=None, initial=()) -> SolveReport:
    """Zero-boundary problem on the two domains (default: zero sets of ``a``, ``b``)."""
    za, zb = _zero_sets(g)
    omega_a = frozenset(za if omega_a is None else omega_a)
    omega_b = frozenset(zb if omega_b is None else omega_b)
    if not omega_a & omega_b:
        raise EmptyIntersection("omega_a and omega_b must intersect")
    spec = ProblemSpec.dirichlet(p, omega_a, omega_b)
    return solve_ground_state(g, spec, cfg, initial=initial)


def lambda_sweep(
    g: GraphInstance,
    lambdas,
    p: float,
    cfg: SolverConfig | None = None,
    warm_start: bool = True,
    seed_from_dirichlet: bool = True,
    keep_solutions: bool = True,
) -> SweepResult:
    """Ground states of the penalized family along ascending ``lambdas``.

    The zero-boundary problem on the zero sets of ``a``, ``b`` is solved
    first.  Its ground state, extended by zero, lies on every penalized
    Nehari set and is offered as a start (``seed_from_dirichlet``); with
    ``warm_start`` the previous solution is offered too.
    """
    cfg = cfg or SolverConfig()
    lambdas = [float(x) for x in lambdas]
    if any(b < a for a, b in zip(lambdas, lambdas[1:])):
        raise ValidationError("lambdas must be ascending")
    if np.any(g.a < 0) or np.any(g.b < 0):
        raise ValidationError("lambda sweep needs a >= 0 and b >= 0")
    omega_a, omega_b = _zero_sets(g)
    if not omega_a & omega_b:
        raise EmptyIntersection("zero sets of a and b must intersect")
    errors = {}
    omega_report = None
    try:
        omega_report = solve_dirichlet(g, omega_a, omega_b, p, cfg)
    except NoConvergedSeed as exc:
        omega_report = exc.report
        errors["omega"] = str(exc)
    d_omega = omega_report.energy if omega_report is not None else math.nan

    out_a = ~g.mask(omega_a)
    out_b = ~g.mask(omega_b)
    d_lambda, mass_out, penalty, rsup, conv, sols = [], [], [], [], [], []
    prev = None
    for lam in lambdas:
        spec = ProblemSpec.with_lambda(p, lam)
        initial = []
        if warm_start and prev is not None:
            initial.append(prev)
        if seed_from_dirichlet and omega_report is not None and omega_report.best is not None:
            initial.append(omega_report.best)
        try:
            rep = solve_ground_state(g, spec, cfg, initial=initial)
        except NoConvergedSeed as exc:
            rep = exc.report
            errors[repr(lam)] = str(exc)
        except GraphlogError as exc:
            rep = None
            errors[repr(lam)] = str(exc)
        if rep is None or rep.best is None:
            d_lambda.append(math.nan)
            mass_out.append(math.nan)
            penalty.append(math.nan)
            rsup.append(math.inf)
            conv.append(False)
            sols.append(None)
            continue
        u, v = rep.best.u, rep.best.v
        d_lambda.append(rep.energy)
        mass_out.append(integrate(g, np.abs(u) ** p, where=out_a) + integrate(g, np.abs(v) ** p, where=out_b))
        penalty.append(integrate(g, lam * g.a * np.abs(u) ** p) + integrate(g, lam * g.b * np.abs(v) ** p))
        rsup.append(rep.residual_sup)
        conv.append(rep.converged)
        sols.append(rep.best)
        prev = rep.best
    return SweepResult(
        lambdas=lambdas,
        d_lambda=d_lambda,
        mass_out=mass_out,
        penalty_mass=penalty,
        residual_sup=rsup,
        converged=conv,
        d_omega=d_omega,
        omega_converged=bool(omega_report is not None and omega_report.converged),
        errors=errors,
        solutions=sols if keep_solutions else None,
        omega_solution=omega_report.best if omega_report is not None else None,
    )


def mountain_pass_diagnostics(g, fp: FieldPair, spec: ProblemSpec, small=(1e-3, 1e-2, 0.1), large=(3.0, 10.0, 30.0)) -> dict:
    """``J`` along the ray through a Nehari point at small and large scalings.

    Near zero the energy is positive but below the ground level; far out it
    turns negative and keeps falling.
    """
    prob = Problem(g, spec)
    top = prob.J(fp.u, fp.v)
    vals = {s: prob.J(s * fp.u, s * fp.v) for s in (*small, *large)}
    return {
        "energy": top,
        "values": vals,
        "small_positive_below": all(0 < vals[s] < top for s in small),
        "large_below": all(vals[s] < top for s in large),
        "large_negative": vals[max(large)] < 0,
    }


def write_trace_csv(trace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "J", "residual_sup", "step"])
        for k, (J, rs, step) in enumerate(trace):
            w.writerow([k, format(J, ".17g"), format(rs, ".17g"), format(step, ".17g")])
