import math

import numpy as np
import pytest

import oracles
from conftest import adjlists, moderate_pair, random_graph, random_pair
from graphlog.calculus import FieldPair
from graphlog.energy import Problem, ProblemSpec, energy, nehari_defect
from graphlog.errors import CouplingDegenerate, EmptyCandidates, RayOverflow, ValidationError, ZeroPair
from graphlog.graph import path_graph
from graphlog.nehari import (
    FiberingCoefficients,
    fibering_coefficients,
    fibering_maximality_check,
    nehari_level,
    on_nehari,
    project_to_nehari,
)

SPEC = ProblemSpec(6)
ONE = FieldPair([1.0], [1.0])


def test_single_vertex_coefficients(single):
    c = fibering_coefficients(single, ONE, SPEC)
    assert (c.N, c.B) == (2.0, 2.0)
    assert c.C == pytest.approx(2.0 / 3.0, rel=1e-15)
    assert c.to_dict() == {"N": c.N, "B": c.B, "C": c.C}


def test_single_vertex_projection(single):
    t, proj = project_to_nehari(single, ONE, SPEC)
    assert t == pytest.approx(math.exp(1.0 / 3.0), rel=1e-15)
    assert t == pytest.approx(1.3956124250860895, rel=1e-14)
    assert nehari_defect(single, proj, SPEC) == pytest.approx(0.0, abs=1e-13)
    assert on_nehari(single, proj, SPEC)


def test_single_vertex_level(single):
    _, proj = project_to_nehari(single, ONE, SPEC)
    assert nehari_level(single, [proj], SPEC) == pytest.approx(math.e**2 / 9.0, rel=1e-14)


def test_disjoint_supports(path3):
    fp = FieldPair([1.0, 0.0, 0.0], [0.0, 0.0, 1.0])
    assert fibering_coefficients(path3, fp, SPEC).B == 0.0
    with pytest.raises(CouplingDegenerate):
        project_to_nehari(path3, fp, SPEC)


def test_zero_pair(path3):
    with pytest.raises(ZeroPair):
        fibering_coefficients(path3, FieldPair.zeros(3), SPEC)
    assert not on_nehari(path3, FieldPair.zeros(3), SPEC)


def test_ray_overflow(single):
    with pytest.raises(RayOverflow):
        project_to_nehari(single.replace(a=1e6, b=1e6), ONE, SPEC)


def test_coefficient_scaling(rng):
    g = random_graph(rng)
    fp = random_pair(g, rng)
    c = fibering_coefficients(g, fp, SPEC)
    for t in (0.3, 2.0, 5.0):
        ct = fibering_coefficients(g, fp.scaled(t), SPEC)
        tp = t**6
        assert ct.N == pytest.approx(tp * c.N, rel=1e-12)
        assert ct.B == pytest.approx(tp * c.B, rel=1e-12)
        assert ct.C == pytest.approx(tp * c.C + tp * math.log(t * t) * c.B, rel=1e-11)


def test_phi_matches_defect(rng):
    for _ in range(10):
        g = random_graph(rng)
        fp = random_pair(g, rng)
        spec = ProblemSpec(float(rng.uniform(4.5, 8)))
        c = fibering_coefficients(g, fp, spec)
        for t in (0.25, 1.0, 1.7, 3.0):
            want = nehari_defect(g, fp.scaled(t), spec)
            assert c.phi(t) == pytest.approx(want, rel=1e-10, abs=1e-10)
            assert c.gamma(t) == pytest.approx(energy(g, fp.scaled(t), spec).J, rel=1e-10, abs=1e-12)


def test_bisection_oracle_in_window(rng):
    for _ in range(20):
        g = random_graph(rng)
        fp = moderate_pair(g, rng, SPEC)
        prob = Problem(g, SPEC)
        # phi from pairings alone, not from the closed form
        f = lambda t: prob.pairing(t * fp.u, t * fp.v, t * fp.u, t * fp.v) / t**6  # noqa: E731
        root = oracles.bisect_root(f, 1e-8, 1e8)
        t, _ = project_to_nehari(g, fp, SPEC)
        assert t == pytest.approx(root, rel=1e-10)


def test_high_precision_oracle_any_scale(rng):
    # unfiltered pairs, including Nehari scales far outside double range for J
    for _ in range(12):
        g = random_graph(rng)
        fp = random_pair(g, rng)
        p = float(rng.choice([4.5, 6.0, 8.0]))
        spec = ProblemSpec(p)
        c = fibering_coefficients(g, fp, spec)
        want = oracles.log_t_star_mp(adjlists(g), g.mu, g.a, g.b, fp.u, fp.v, p)
        assert c.log_t_star() == pytest.approx(want, rel=1e-10, abs=1e-10)


def test_projection_idempotent_and_equivariant(rng):
    for _ in range(20):
        g = random_graph(rng)
        fp = random_pair(g, rng)
        t, proj = project_to_nehari(g, fp, SPEC)
        t2, _ = project_to_nehari(g, proj, SPEC)
        assert t2 == pytest.approx(1.0, abs=1e-10)
        for su, sv in ((-1, 1), (1, -1), (-1, -1)):
            assert project_to_nehari(g, fp.flipped(su, sv), SPEC)[0] == pytest.approx(t, rel=1e-13)
        s = float(rng.uniform(0.2, 5))
        assert project_to_nehari(g, fp.scaled(s), SPEC)[0] == pytest.approx(t / s, rel=1e-12)


def test_on_nehari_energy_identity(rng):
    for _ in range(20):
        g = random_graph(rng)
        _, proj = project_to_nehari(g, moderate_pair(g, rng, SPEC), SPEC)
        br = energy(g, proj, SPEC)
        assert br.J == pytest.approx(2.0 / 36.0 * br.coupling_B, rel=1e-10)
        assert br.J > 0


def test_maximality_single_vertex(single):
    t = math.exp(1.0 / 3.0)
    assert fibering_maximality_check(single, ONE, SPEC, [0.5, 1.0, t, 2.0, 5.0])
    assert fibering_maximality_check(single, ONE, SPEC, [t])


def test_maximality_random(rng):
    for _ in range(10):
        g = random_graph(rng)
        fp = moderate_pair(g, rng, SPEC)
        t, _ = project_to_nehari(g, fp, SPEC)
        grid = np.geomspace(t / 10, 10 * t, 50)
        assert fibering_maximality_check(g, fp, SPEC, grid)


def test_nehari_level_rejects_off_manifold(single):
    with pytest.raises(ValidationError, match="candidate 0"):
        nehari_level(single, [ONE], SPEC)
    with pytest.raises(EmptyCandidates):
        nehari_level(single, [], SPEC)


def test_nehari_level_minimum(rng):
    g = path_graph(4)
    cands = [project_to_nehari(g, moderate_pair(g, rng, SPEC), SPEC)[1] for _ in range(5)]
    level = nehari_level(g, cands, SPEC)
    assert level == pytest.approx(min(energy(g, c, SPEC).J for c in cands), rel=1e-14)
    assert level > 0


def test_log_t_star_degenerate():
    with pytest.raises(CouplingDegenerate):
        FiberingCoefficients(1.0, 0.0, 0.0, 6.0).log_t_star()
