"""Slow reference implementations written straight from the definitions.

Everything here loops over vertices and neighbor lists in plain Python and
shares no code with the package, so it can serve as an independent oracle.
"""

import math


def gamma(adj, mu, u, w, x):
    return sum((u[y] - u[x]) * (w[y] - w[x]) for y in adj[x]) / (2.0 * mu[x])


def grad_len(adj, mu, u, x):
    return math.sqrt(gamma(adj, mu, u, u, x))


def p_lap(adj, mu, u, p, x):
    gx = grad_len(adj, mu, u, x) ** (p - 2)
    total = 0.0
    for y in adj[x]:
        total += (grad_len(adj, mu, u, y) ** (p - 2) + gx) * (u[y] - u[x])
    return total / (2.0 * mu[x])


def xlogx2(s):
    return 0.0 if s == 0 else s * s * math.log(s * s)


def energy(adj, mu, pa, pb, u, v, p, grad_a=None, grad_b=None, coupling=None):
    """J from the definition; optional vertex lists restrict each integral."""
    n = len(adj)
    ga = range(n) if grad_a is None else grad_a
    gb = range(n) if grad_b is None else grad_b
    cp = range(n) if coupling is None else coupling
    norm = sum(mu[x] * grad_len(adj, mu, u, x) ** p for x in ga)
    norm += sum(mu[x] * grad_len(adj, mu, v, x) ** p for x in gb)
    norm += sum(mu[x] * (pa[x] * abs(u[x]) ** p + pb[x] * abs(v[x]) ** p) for x in range(n))
    logs = sum(mu[x] * (abs(u[x]) ** (p - 2) * xlogx2(v[x]) + abs(v[x]) ** (p - 2) * xlogx2(u[x])) for x in cp)
    return (norm - logs) / p


def coupling_b(mu, u, v, p):
    return sum(mu[x] * (abs(v[x]) ** (p - 2) * u[x] ** 2 + abs(u[x]) ** (p - 2) * v[x] ** 2) for x in range(len(mu)))


def residual_u(adj, mu, pa, u, v, p, x):
    su = math.copysign(abs(u[x]) ** (p - 3), u[x]) if u[x] else 0.0
    ulog = u[x] * math.log(u[x] ** 2) if u[x] else 0.0
    return (
        -p_lap(adj, mu, u, p, x)
        + pa[x] * abs(u[x]) ** (p - 2) * u[x]
        - (p - 2) / p * su * xlogx2(v[x])
        - 2 / p * abs(v[x]) ** (p - 2) * (ulog + u[x])
    )


def bisect_root(f, lo, hi, iters=200):
    """Plain bisection for a sign change of ``f`` on ``[lo, hi]`` (geometric midpoints)."""
    flo = f(lo)
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return math.sqrt(lo * hi)


def ray_energy_mp(adj, mu, pa, pb, u, v, p, s, dps=60):
    """``J(e^s u, e^s v)`` in arbitrary precision, immune to overflow at any scale."""
    import mpmath as mp

    with mp.workdps(dps):
        t = mp.exp(s)
        U = [t * mp.mpf(float(x)) for x in u]
        V = [t * mp.mpf(float(x)) for x in v]
        n = len(adj)

        def glen_p(w, x, q):
            gam = sum((w[y] - w[x]) ** 2 for y in adj[x]) / (2 * mp.mpf(float(mu[x])))
            return gam ** (mp.mpf(q) / 2) if gam > 0 else mp.mpf(0)

        def xl(w):
            return w * w * mp.log(w * w) if w != 0 else mp.mpf(0)

        total = mp.mpf(0)
        for x in range(n):
            m = mp.mpf(float(mu[x]))
            total += m * (glen_p(U, x, p) + glen_p(V, x, p))
            total += m * (mp.mpf(float(pa[x])) * abs(U[x]) ** p + mp.mpf(float(pb[x])) * abs(V[x]) ** p)
            total -= m * (abs(U[x]) ** (p - 2) * xl(V[x]) + abs(V[x]) ** (p - 2) * xl(U[x]))
        return total / p


def log_t_star_mp(adj, mu, pa, pb, u, v, p, lo=-2000.0, hi=2000.0, tol=1e-13):
    """Root of ``d/ds J(e^s u, e^s v)`` by bisection on a high-precision central difference."""
    import mpmath as mp

    def slope(s):
        h = mp.mpf("1e-20")
        with mp.workdps(60):
            return ray_energy_mp(adj, mu, pa, pb, u, v, p, s + h) - ray_energy_mp(adj, mu, pa, pb, u, v, p, s - h)

    with mp.workdps(60):
        a, b = mp.mpf(lo), mp.mpf(hi)
        if not (slope(a) > 0 and slope(b) < 0):
            raise ValueError("no sign change in bracket")
        while b - a > tol * max(1, abs(a)):
            m = (a + b) / 2
            if slope(m) > 0:
                a = m
            else:
                b = m
        return float((a + b) / 2)


def ray_max(jfun, dirs, lo=-15.0, hi=15.0, iters=120):
    """``max_s jfun(e^s w)`` for each row ``w`` of ``dirs`` by vectorized golden section.

    ``jfun`` maps an ``(m, k)`` array of points to ``m`` energies.  Along a
    ray the energy has a single interior maximum, so golden section applies.
    """
    import numpy as np

    dirs = np.asarray(dirs, dtype=float)
    a = np.full(len(dirs), lo)
    b = np.full(len(dirs), hi)
    r = (math.sqrt(5) - 1) / 2
    f = lambda s: jfun(np.exp(s)[:, None] * dirs)  # noqa: E731
    c, d = b - r * (b - a), a + r * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c, d = b - r * (b - a), a + r * (b - a)
        fc, fd = f(c), f(d)
    s = (a + b) / 2
    return f(s), s


def _xl(w):
    import numpy as np

    w2 = w * w
    return np.where(w2 > 0, w2 * np.log(np.where(w2 > 0, w2, 1.0)), 0.0)


def two_vertex_energy(P, p=6.0):
    """J on the 2-vertex complete graph with unit measure and potentials, rows ``(u1, u2, v1, v2)``."""
    import numpy as np

    u1, u2, v1, v2 = P.T
    grad = np.abs(u2 - u1) ** p + np.abs(v2 - v1) ** p  # (|du|^2 / 2)^(p/2) at both vertices
    grad = 2 * grad / 2 ** (p / 2)
    pot = sum(np.abs(w) ** p for w in (u1, u2, v1, v2))
    logs = sum(np.abs(x) ** (p - 2) * _xl(y) + np.abs(y) ** (p - 2) * _xl(x) for x, y in ((u1, v1), (u2, v2)))
    return (grad + pot - logs) / p


def star_center_energy(P, p=6.0, deg=2):
    """Dirichlet J when both fields live on one vertex of degree ``deg`` with unit measures.

    The gradient density is ``w^2 deg / 2`` at the centre and ``w^2 / 2`` at each
    of its ``deg`` neighbours, all of which belong to the closure of the domain.
    """
    import numpy as np

    u, v = P.T
    gfac = (deg / 2) ** (p / 2) + deg * 0.5 ** (p / 2)
    n = (gfac + 1) * (np.abs(u) ** p + np.abs(v) ** p)
    logs = np.abs(u) ** (p - 2) * _xl(v) + np.abs(v) ** (p - 2) * _xl(u)
    return (n - logs) / p
