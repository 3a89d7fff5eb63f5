import math

import numpy as np
import pytest

from hopfloc.atlas import integrate_region
from hopfloc.bundle import connection_ch
from hopfloc.errors import ConfigurationError, ContractViolation, LemmaViolation
from hopfloc.localization import (
    CheckResult,
    Verifier,
    ZeroComponent,
    polar_nodes,
    run_checks,
    truncation,
    tube_masks,
)
from hopfloc.scenarios import build_scenario, load_config


@pytest.fixture(scope="module")
def sphere():
    return build_scenario(load_config("s2_rotation_isolated", resolution=32))


@pytest.fixture(scope="module")
def sphere_verifier(sphere):
    return Verifier(sphere)


def test_polar_nodes_integrate_disk_moments():
    pts, w, radii = polar_nodes((0.0, 0.3, 0.6, 0.9), (6, 12, 2), 16)
    assert abs(w.sum() - math.pi * 0.81) < 1e-13
    r2 = (pts**2).sum(axis=1)
    assert abs(np.sum(w * r2) - math.pi * 0.9**4 / 2) < 1e-13
    np.testing.assert_allclose(np.sqrt(r2), radii, atol=1e-15)
    # empty pieces are skipped
    _, w2, _ = polar_nodes((0.0, 0.5, 0.5, 1.0), (4, 4, 4), 8)
    assert abs(w2.sum() - math.pi) < 1e-13


def test_masks_partition_unity(sphere):
    pts = np.random.default_rng(0).uniform(-1.5, 1.5, size=(400, 2))
    masks, comp = tube_masks(sphere, "N", pts)
    np.testing.assert_allclose(masks.sum(axis=0) + comp, 1.0, atol=1e-15)
    d = np.linalg.norm(pts, axis=1)
    _, b = sphere.trunc
    assert np.all(masks[0][d <= b] == 1)
    assert np.all(masks[0][d >= sphere.components[0].tube_radius] == 0)


def test_truncation_vanishes_near_zeros(sphere):
    rho_fn = truncation(sphere)
    a, b = sphere.trunc
    pts = np.array([[0.0, 0.0], [0.9 * a, 0.0], [0.0, 1.1 * b], [1.0, 0.0]])
    rho, drho = rho_fn("N", pts)
    np.testing.assert_allclose(rho, [0, 0, 1, 1])
    np.testing.assert_allclose(drho, 0)


def test_truncation_gradient_matches_finite_differences(sphere):
    rho_fn = truncation(sphere)
    pts = np.array([[0.5, 0.2], [-0.3, 0.55], [0.1, -0.7]])
    _, drho = rho_fn("S", pts)
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (rho_fn("S", pts + e)[0] - rho_fn("S", pts - e)[0]) / (2 * h)
        np.testing.assert_allclose(drho[:, k], fd, atol=1e-6)


def test_overlapping_tubes_rejected(sphere):
    comp = sphere.components[0]
    twin = ZeroComponent("twin", 0, 2, lambda cid, p: comp.distance(cid, p), comp.tube_radius, comp.center)
    sc = build_scenario(load_config("s2_rotation_isolated", resolution=32))
    sc.components = [comp, twin]
    with pytest.raises(ConfigurationError, match="overlapping"):
        tube_masks(sc, "N", np.array([[0.1, 0.0]]))


def test_component_radius_validation():
    dist = lambda cid, p: (np.linalg.norm(p, axis=1), p)  # noqa: E731
    with pytest.raises(ConfigurationError):
        ZeroComponent("x", 0, 2, dist, 0.0)
    with pytest.raises(ConfigurationError, match="injectivity"):
        ZeroComponent("x", 0, 2, dist, 1.0, injectivity=0.5)


def test_tube_integral_agrees_with_grid_mask(sphere_verifier):
    # the polar tube quadrature and the grid integral of the masked form agree to discretisation error
    sc = sphere_verifier.scenario
    ver = sphere_verifier
    def masked(cid, pts):
        return connection_ch(ver.deformed, cid, pts).scale(tube_masks(sc, cid, pts)[0][0])

    grid = integrate_region(masked, sc.atlas)
    assert abs(ver.tube_integral(0) - grid) < 5e-3
    assert abs(ver.tube_integral(0) - (-2)) < 5e-3


def test_sweep_values(sphere_verifier):
    sw = sphere_verifier.sweep
    assert abs(sw.global_value - (-4)) < 1e-3
    assert abs(sw.complement_value) < 1e-6
    assert sw.sup_rho_one < 1e-8
    assert len(sw.tube_values) == 2
    assert abs(sum(sw.tube_values) - sw.global_value) < 1e-2


def test_connection_independence_default_configuration():
    # the global graded ch number does not depend on the connection
    ver = Verifier(build_scenario(load_config("s2_rotation_isolated")))
    sw = ver.sweep
    assert abs(sw.global_value - sw.deformed_total) < 1e-4


def test_degrees_at_poles(sphere_verifier):
    assert sphere_verifier.degrees() == [2, 2]
    assert sphere_verifier.degrees(0.5) == [2, 2]


def test_check_result_semantics():
    assert CheckResult("a", 1.0, 1.005, 1e-2).passed
    assert not CheckResult("a", 1.0, 1.1, 1e-2).passed
    assert not CheckResult("a", math.nan, math.nan, math.inf).passed
    assert CheckResult("a", 1 + 1e-3j, 1, 1e-2).abs_error == pytest.approx(1e-3)


def test_lemma2_statuses(sphere_verifier):
    comp = sphere_verifier.scenario.components[0]
    skipped = sphere_verifier.check_lemma2_diagnostic(comp)
    assert skipped.diagnostic and skipped.passed and "skipped" in skipped.note
    odd = ZeroComponent("odd", 1, 1, comp.distance, comp.tube_radius)
    res = sphere_verifier.check_lemma2_diagnostic(odd)
    assert res.diagnostic and not res.passed and "odd codimension" in res.note


def test_zero_set_cross_validation(sphere_verifier):
    assert sphere_verifier.check_zero_set(count=200) == 200
    sc = build_scenario(load_config("s2_rotation_isolated", resolution=32))
    # declare a regular point as lying on the zero set
    comp = sc.components[0]
    sc.components = [ZeroComponent("fake", 0, 2, comp.distance, comp.tube_radius, comp.center, lambda rng, k: [("N", np.array([0.5, 0.0]))])]
    with pytest.raises(LemmaViolation, match="zero-set mismatch"):
        Verifier(sc).check_zero_set(count=50)


def test_lemma4_needs_signature_bundle():
    ver = Verifier(build_scenario(load_config("s2_corollary1", resolution=32)))
    with pytest.raises(ContractViolation):
        ver.check_lemma4()


def test_run_checks_on_nonvanishing_torus():
    results = run_checks(build_scenario(load_config("t2_nonvanishing")))
    names = [r.name for r in results]
    assert names[:2] == ["lemma1_global_vs_tubes", "lemma1_complement_integral"]
    assert "lemma1_pointwise_vanishing" not in names
    assert all(r.passed for r in results)
    assert all(abs(complex(r.lhs)) < 1e-6 for r in results if r.name != "theorem2")


def test_run_checks_failures_and_configuration_errors():
    sc = build_scenario(load_config("s2_rotation_isolated", resolution=32))
    sc.tolerances = {"lemma1": 0.0}
    results = {r.name: r for r in run_checks(sc)}
    assert not results["lemma1_global_vs_tubes"].passed
    assert results["theorem1"].passed
    # configuration errors propagate out of the guarded checks
    sc.euler_number, sc.mesh = None, None
    with pytest.raises(ConfigurationError):
        run_checks(sc)


def test_missing_euler_characteristic_raises():
    sc = build_scenario(load_config("s2_rotation_isolated", resolution=32))
    sc.euler_number, sc.mesh = None, None
    with pytest.raises(ConfigurationError):
        Verifier(sc).euler_characteristic()
