import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _scenes import random_scene, two_sphere_scene
from enclosure import stationary as S
from enclosure.errors import DegenerateError
from enclosure.geometry import Ellipsoid, Sphere
from enclosure.scene import Cavity, Scene, cfg1


def _synthetic(pair, G, H, l0):
    G, H = np.asarray(G, float), np.asarray(H, float)
    hL0 = S.hess_L0_blocks(G, H, l0)
    return dataclasses.replace(pair, G=G, H=H, l0_local=l0, hess_L0=hL0,
                               hess_L=S.hess_triple_blocks(G, H, l0),
                               min_eig_L0=float(np.linalg.eigvalsh(hL0)[0]))


def test_cfg1_single_pair(cfg1_pair):
    np.testing.assert_allclose(cfg1_pair.x0, [0, 0, 3], atol=1e-12)
    np.testing.assert_allclose(cfg1_pair.y0, [0, 0, 1], atol=1e-12)
    assert cfg1_pair.l0_local == pytest.approx(2.0, abs=1e-12)
    assert cfg1_pair.grad_norm <= 1e-10 * cfg1().scale
    np.testing.assert_allclose(cfg1_pair.G, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(cfg1_pair.H, np.eye(2), atol=1e-14)


def test_two_symmetric_cavities_give_two_pairs():
    sc = two_sphere_scene("neumann_plus", z2=-4.0, R2=1.0)
    pairs = S.find_pairs(sc)
    assert len(pairs) == 2
    assert {p.cavity_id for p in pairs} == {"d", "n"}
    for p in pairs:
        assert p.l0_local == pytest.approx(2.0, abs=1e-12)


def test_farther_cavity():
    sc = Scene(1.0, Sphere([0, 0, 0], 1.0), (Cavity("c", "dirichlet", Sphere([0, 0, 5], 1.0)),))
    (p,) = S.find_pairs(sc)
    assert p.l0_local == pytest.approx(3.0, abs=1e-12)
    np.testing.assert_allclose(p.x0, [0, 0, 4], atol=1e-12)
    np.testing.assert_allclose(p.y0, [0, 0, 1], atol=1e-12)


def test_only_global_minimizers_are_kept():
    sc = two_sphere_scene("dirichlet", z2=-6.0, R2=1.0)
    pairs = S.find_pairs(sc)
    assert [p.cavity_id for p in pairs] == ["d"]


def test_find_pairs_is_deterministic():
    sc = two_sphere_scene("neumann_plus", z2=-4.0, R2=1.0)
    a = S.find_pairs(sc)
    b = S.find_pairs(sc)
    assert [p.cavity_id for p in a] == [p.cavity_id for p in b]
    for p, q in zip(a, b):
        np.testing.assert_array_equal(p.x0, q.x0)


def test_shortest_lengths_cfg1(cfg1_scene):
    L = S.shortest_lengths(S.find_pairs(cfg1_scene), cfg1_scene)
    assert L.l0 == pytest.approx(2.0, abs=1e-12)
    assert L.l0_minus == pytest.approx(2.0, abs=1e-12)
    assert L.l0_plus is None
    assert L.l1 == pytest.approx(4.0, abs=1e-8)
    assert not L.equal


def test_shortest_lengths_example_layout_with_tie():
    sc = two_sphere_scene("neumann_plus", z2=-5.0, R2=2.0)
    L = S.shortest_lengths(S.find_pairs(sc), sc)
    assert L.l0_plus == pytest.approx(2.0, abs=1e-12)
    assert L.l0_minus == pytest.approx(2.0, abs=1e-12)
    assert L.equal


def test_shortest_lengths_lossy_robin_counts_as_minus():
    sc = cfg1("neumann_minus", lambda1=2.0)
    L = S.shortest_lengths(S.find_pairs(sc), sc)
    assert L.l0_plus is None
    assert L.l0_minus == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ValueError):
        S.shortest_lengths([], sc)


def test_hessian_determinants(cfg1_pair):
    assert np.linalg.det(S.hessian_triple(cfg1_pair)) == pytest.approx(36.0, rel=1e-13)
    assert np.linalg.det(cfg1_pair.hess_L0) == pytest.approx(4.0, rel=1e-13)
    np.testing.assert_array_equal(S.hessian_triple(cfg1_pair), S.hessian_triple(cfg1_pair).T)


def test_degenerate_probe_curvature(cfg1_pair):
    p = _synthetic(cfg1_pair, np.eye(2), -np.eye(2) / 2.0, 2.0)
    assert abs(np.linalg.det(S.hessian_triple(p))) < 1e-14


def test_nondegenerate_examples(cfg1_pair):
    rep = S.check_nondegenerate(cfg1_pair)
    assert rep.passed and rep.min_eig == pytest.approx(1.0, abs=1e-14)
    flat = _synthetic(cfg1_pair, np.zeros((2, 2)), np.zeros((2, 2)), 2.0)
    rep = S.check_nondegenerate(flat)
    assert not rep.passed and abs(rep.min_eig) < 1e-14
    sc = Scene(1.0, Sphere([0, 0, 0], 1.0),
               (Cavity("e", "dirichlet", Ellipsoid([0, 0, 4], [1.0, 1.5, 0.7])),))
    (p,) = S.find_pairs(sc)
    assert S.check_nondegenerate(p).passed


def test_inconsistent_hessians_are_reported(cfg1_pair):
    broken = dataclasses.replace(cfg1_pair, hess_L=-np.eye(6))
    with pytest.raises(DegenerateError):
        S.check_nondegenerate(broken)
    assert S.check_nondegenerate(broken, probe_convex=False).passed


def test_factorization_and_fd(cfg1_scene, cfg1_pair):
    assert S.factorization_residual(cfg1_pair) <= 1e-12
    fd = S.fd_hessian_triple(cfg1_scene.cavities[0].surface, cfg1_scene.probe, cfg1_pair)
    assert np.abs(fd - cfg1_pair.hess_L).max() <= 1e-5 * np.abs(cfg1_pair.hess_L).max()


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 100_000))
def test_random_scene_invariants(seed):
    rng = np.random.default_rng(seed)
    sc = random_scene(rng, ("sphere", "ellipsoid")[seed % 2], ("ball", "ellipsoid")[seed % 3 == 0])
    pairs = S.find_pairs(sc)
    for p in pairs:
        d = (p.y0 - p.x0) / p.l0_local
        cav = sc.cavity(p.cavity_id).surface
        np.testing.assert_allclose(cav.normal(p.x0), d, atol=1e-8)
        np.testing.assert_allclose(sc.probe.normal(p.y0), -d, atol=1e-8)
        np.testing.assert_allclose(p.frame.normal, d, atol=1e-8)
        assert p.grad_norm <= 1e-10 * sc.scale
        assert S.factorization_residual(p) <= 1e-12
        fd = S.fd_hessian_triple(cav, sc.probe, p)
        assert np.abs(fd - p.hess_L).max() <= 1e-5 * np.abs(p.hess_L).max()


def test_three_point_minimizer_collapses_to_two_legs(cfg1_scene, cfg1_pair):
    val, x, y, yt = S.l1_minimizer(cfg1_scene, cfg1_scene.cavities[0], cfg1_pair.x0,
                                   cfg1_pair.y0 * 0.9)
    assert val == pytest.approx(4.0, abs=1e-8)
    np.testing.assert_allclose(y, yt, atol=1e-6)
    np.testing.assert_allclose(x, cfg1_pair.x0, atol=1e-6)


@settings(max_examples=200)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 3), st.floats(0, 3),
       st.floats(0.2, 5))
def test_convex_probe_pd_tests_agree(g1, g2, g12, h1, h2, l0):
    G = np.array([[g1, g12], [g12, g2]])
    H = np.diag([h1, h2])
    m2 = np.linalg.eigvalsh(S.hess_L0_blocks(G, H, l0))[0]
    m3 = np.linalg.eigvalsh(S.hess_triple_blocks(G, H, l0))[0]
    if min(abs(m2), abs(m3)) > 1e-9:
        assert (m2 > 0) == (m3 > 0)


def test_surface_distance():
    a = Sphere([0, 0, 0], 1.0)
    assert S.surface_distance(a, Sphere([0, 0, 3.5], 0.5)) == pytest.approx(2.0, abs=1e-9)
