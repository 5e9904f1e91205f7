import math

import numpy as np
import pytest
from scipy.optimize import minimize

import oracles
from graphlog.calculus import FieldPair
from graphlog.energy import ProblemSpec, energy, nehari_defect, residual
from graphlog.errors import EmptyIntersection, NoConvergedSeed, ValidationError
from graphlog.graph import complete_graph, path_graph, random_connected_graph, ring_graph
from graphlog.solver import (
    METHOD_LABEL,
    SolverConfig,
    lambda_sweep,
    mountain_pass_diagnostics,
    random_admissible_pair,
    solve_dirichlet,
    solve_ground_state,
    write_trace_csv,
)

SPEC = ProblemSpec(6)
FAST = SolverConfig(seeds=4)


def _residual_sup(g, fp, spec):
    ru, rv = residual(g, fp, spec)
    return max(np.max(np.abs(ru)), np.max(np.abs(rv)))


@pytest.fixture(scope="module")
def two_vertex_report():
    return solve_ground_state(complete_graph(2), SPEC)


@pytest.fixture(scope="module")
def two_vertex_oracle():
    """Grid over the u = v ansatz at angular step 1e-3, then Nelder-Mead refinement."""
    th = np.arange(0.0, math.pi, 1e-3)
    dirs = np.stack([np.cos(th), np.sin(th), np.cos(th), np.sin(th)], 1)
    vals, _ = oracles.ray_max(oracles.two_vertex_energy, dirs)

    def level(x):
        c, s = math.cos(x[0]), math.sin(x[0])
        return oracles.ray_max(oracles.two_vertex_energy, np.array([[c, s, c, s]]))[0][0]

    res = minimize(level, [th[vals.argmin()]], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15})
    return res.fun


def test_config_validation():
    for bad in ({"seeds": 0}, {"backtrack_factor": 1.0}, {"armijo_c": 0}, {"direction": "newton"}, {"step_init": -1}):
        with pytest.raises(ValidationError):
            SolverConfig(**bad)


def test_single_vertex_ground_state(single):
    rep = solve_ground_state(single, SPEC)
    assert rep.converged
    assert rep.energy == pytest.approx(math.e**2 / 9.0, abs=1e-8)
    np.testing.assert_allclose(np.abs(rep.best.u), math.exp(1 / 3), atol=1e-8)
    np.testing.assert_allclose(np.abs(rep.best.v), math.exp(1 / 3), atol=1e-8)
    assert rep.method == METHOD_LABEL


def test_two_vertex_matches_grid_oracle(two_vertex_report, two_vertex_oracle):
    assert two_vertex_report.converged
    assert two_vertex_report.residual_sup <= 1e-8
    assert two_vertex_report.energy == pytest.approx(two_vertex_oracle, abs=1e-5)


def test_two_vertex_full_ansatz_not_lower(two_vertex_report):
    # coarse hyperspherical grid over all four values, best few refined
    def sph(a):
        a1, a2, a3 = a.T
        s1, s2 = np.sin(a1), np.sin(a2)
        return np.stack([np.cos(a1), s1 * np.cos(a2), s1 * s2 * np.cos(a3), s1 * s2 * np.sin(a3)], 1)

    g1 = np.linspace(0, math.pi, 17)
    g3 = np.linspace(0, 2 * math.pi, 33)
    A = np.array(np.meshgrid(g1, g1, g3, indexing="ij")).reshape(3, -1).T
    vals, _ = oracles.ray_max(oracles.two_vertex_energy, sph(A), iters=80)
    best = math.inf
    for k in np.argsort(vals)[:2]:
        res = minimize(
            lambda x: oracles.ray_max(oracles.two_vertex_energy, sph(np.array([x])))[0][0],
            A[k],
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-14},
        )
        best = min(best, res.fun)
    assert two_vertex_report.energy == pytest.approx(best, abs=1e-5)
    assert two_vertex_report.energy <= best + 1e-9


def test_converged_report_invariants(two_vertex_report, rng):
    reports = [two_vertex_report]
    for _ in range(3):
        g = random_connected_graph(int(rng.integers(3, 7)), rng)
        reports.append((g, solve_ground_state(g, SPEC, FAST)))
    reports[0] = (complete_graph(2), two_vertex_report)
    for g, rep in reports:
        assert rep.converged and rep.residual_sup <= 1e-8
        assert abs(nehari_defect(g, rep.best, SPEC)) <= 1e-9 * max(1.0, rep.coupling_B)
        assert rep.energy == pytest.approx(2.0 / 36.0 * rep.coupling_B, rel=1e-10)
        assert _residual_sup(g, rep.best, SPEC) == pytest.approx(rep.residual_sup, rel=1e-12)


def test_sign_flips(two_vertex_report):
    g = complete_graph(2)
    fp = two_vertex_report.best
    e0 = energy(g, fp, SPEC).J
    r0 = _residual_sup(g, fp, SPEC)
    for su, sv in ((-1, 1), (1, -1), (-1, -1)):
        flipped = fp.flipped(su, sv)
        assert abs(energy(g, flipped, SPEC).J - e0) <= 1e-12
        assert _residual_sup(g, flipped, SPEC) == r0


def test_determinism(rng):
    g = random_connected_graph(5, rng)
    a = solve_ground_state(g, SPEC, FAST)
    b = solve_ground_state(g, SPEC, FAST)
    assert a.energy == b.energy and a.winner == b.winner
    assert a.best == b.best
    assert a.seed_results == b.seed_results


@pytest.mark.parametrize("direction", ["lbfgs", "gradient"])
def test_descent_monotone(direction, rng):
    g = random_connected_graph(6, rng)
    cfg = SolverConfig(seeds=1, direction=direction, max_iters=400)
    try:
        rep = solve_ground_state(g, SPEC, cfg)
    except NoConvergedSeed as exc:
        rep = exc.report
    J = np.array([t[0] for t in rep.trace])
    assert len(J) > 1
    assert np.all(np.diff(J) <= 1e-14 * np.abs(J[:-1]))


def test_no_converged_seed(rng):
    g = random_connected_graph(6, rng)
    cfg = SolverConfig(seeds=2, max_iters=1, polish=False)
    with pytest.raises(NoConvergedSeed) as info:
        solve_ground_state(g, SPEC, cfg)
    rep = info.value.report
    assert not rep.converged
    assert len(rep.seed_results) == 2
    assert all(not s["converged"] for s in rep.seed_results)
    assert math.isfinite(rep.energy)


def test_warm_start_is_seed_zero(single):
    start = FieldPair([1.0], [2.0])
    rep = solve_ground_state(single, SPEC, SolverConfig(seeds=2), initial=[start])
    assert [s["start"] for s in rep.seed_results] == ["warm", "random:0", "random:1"]


def test_random_admissible_pair(path3):
    fp = random_admissible_pair(path3, 3, SPEC)
    assert np.array_equal(fp.u, random_admissible_pair(path3, 3, SPEC).u)
    assert np.any((fp.u >= 0.5) & (fp.v >= 0.5))
    spec = ProblemSpec.dirichlet(6, {0, 1}, {1, 2})
    fp = random_admissible_pair(path3, 3, spec)
    assert fp.u[2] == 0.0 and fp.v[0] == 0.0
    assert fp.u[1] >= 0.5 and fp.v[1] >= 0.5
    with pytest.raises(EmptyIntersection):
        random_admissible_pair(path3, 0, ProblemSpec.dirichlet(6, {0}, {2}))


def test_dirichlet_single_vertex_oracle():
    g = path_graph(3, a=[1, 0, 1], b=[1, 0, 1])
    rep = solve_dirichlet(g, p=6.0)
    assert rep.converged
    assert rep.best.u[0] == 0.0 and rep.best.u[2] == 0.0
    assert rep.best.v[0] == 0.0 and rep.best.v[2] == 0.0

    th = np.arange(0.0, 2 * math.pi, 1e-3)
    vals, _ = oracles.ray_max(oracles.star_center_energy, np.stack([np.cos(th), np.sin(th)], 1))
    res = minimize(
        lambda x: oracles.ray_max(oracles.star_center_energy, np.array([[math.cos(x[0]), math.sin(x[0])]]))[0][0],
        [th[vals.argmin()]],
        method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-15},
    )
    assert rep.energy == pytest.approx(res.fun, rel=1e-8)


def test_dirichlet_boundary_exactly_zero(ring12):
    rep = solve_dirichlet(ring12, p=6.0, cfg=FAST)
    assert np.all(rep.best.u[4:] == 0.0) and np.all(rep.best.v[4:] == 0.0)
    assert np.any(rep.best.u[:4] != 0.0)


def test_dirichlet_whole_graph_is_base(rng):
    g0 = random_connected_graph(5, rng)
    g = g0.replace(a=np.zeros(5), b=np.zeros(5))
    whole = set(g.vertices)
    d = solve_dirichlet(g, whole, whole, 6.0, FAST)
    base = solve_ground_state(g0.replace(a=np.ones(5), b=np.ones(5)), SPEC, FAST)
    assert d.energy == pytest.approx(base.energy, rel=1e-9)


def test_dirichlet_empty_intersection(path3):
    with pytest.raises(EmptyIntersection):
        solve_dirichlet(path3, {0}, {2}, 6.0)


def test_mountain_pass_geometry(two_vertex_report):
    diag = mountain_pass_diagnostics(complete_graph(2), two_vertex_report.best, SPEC)
    assert diag["small_positive_below"] and diag["large_below"] and diag["large_negative"]
    assert diag["energy"] == pytest.approx(two_vertex_report.energy, rel=1e-14)


def test_small_sweep_invariants():
    a = np.ones(6)
    a[:2] = 0.0
    g = ring_graph(6, a=a, b=a)
    sw = lambda_sweep(g, [0.0, 1.0, 10.0, 100.0], 6.0, FAST)
    assert all(sw.converged) and sw.omega_converged and not sw.errors
    base = solve_ground_state(g.replace(a=np.ones(6), b=np.ones(6)), SPEC, FAST)
    assert sw.d_lambda[0] == pytest.approx(base.energy, rel=1e-9)
    for d, m, pm in zip(sw.d_lambda, sw.mass_out, sw.penalty_mass):
        assert d <= sw.d_omega + 1e-9
        assert math.isfinite(m) and m >= 0
        assert math.isfinite(pm) and pm >= 0
    assert sw.penalty_mass[0] == 0.0


def test_sweep_rejects_bad_input(ring12):
    with pytest.raises(ValidationError):
        lambda_sweep(ring12, [10.0, 1.0], 6.0)
    with pytest.raises(ValidationError):
        lambda_sweep(ring12.replace(a=-np.ones(12)), [1.0], 6.0)
    with pytest.raises(EmptyIntersection):
        lambda_sweep(path_graph(3, a=[0, 1, 1], b=[1, 1, 0]), [1.0], 6.0)


def test_trace_csv(tmp_path, single):
    rep = solve_ground_state(single, SPEC, SolverConfig(seeds=1))
    path = tmp_path / "trace.csv"
    write_trace_csv(rep.trace, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iter,J,residual_sup,step"
    assert len(lines) == len(rep.trace) + 1

