"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are printed again in the terminal summary.  Scenario runs are cached
per (scenario, resolution, tube radius) so the expensive four-dimensional
sweeps are shared between criteria.
"""

import functools
import math
import time

import numpy as np
import pytest
from conftest import record_criterion

from hopfloc.atlas import BoundarySphere, ChartGrid, SphereAtlas, integrate_boundary_sphere, integrate_region
from hopfloc.bundle import (
    CHERN_FACTOR,
    GaugeConnection,
    GradedConnection,
    LocalConnection,
    atlas_steps,
    chern_simons_form,
    connection_ch,
    degree_at_zero,
    degree_value,
    euler_form,
    transgression_value,
)
from hopfloc.clifford import PointClass, build_clifford_model, classify_point
from hopfloc.errors import LemmaViolation
from hopfloc.localization import Verifier, run_checks, tube_masks
from hopfloc.scenarios import build_scenario, builtin_configs, load_config

SCENARIOS = sorted(builtin_configs())


@functools.lru_cache(maxsize=None)
def run(name, resolution=None, tube_radius=None):
    """(checks by name, wall seconds, scenario) for one configuration."""
    cfg = load_config(name, resolution=resolution, tube_radius=tube_radius)
    start = time.perf_counter()
    sc = build_scenario(cfg)
    checks = run_checks(sc)
    return {c.name: c for c in checks}, time.perf_counter() - start, sc


def test_criterion_01_clifford_exactness():
    start = time.perf_counter()
    bad = []
    for n in (1, 2, 3):
        m = build_clifford_model(n)
        c = m.generators_int
        eye = np.eye(m.size, dtype=np.int64)
        for i in range(m.dim):
            for j in range(m.dim):
                if not np.array_equal(c[i] @ c[j] + c[j] @ c[i], -2 * (i == j) * eye):
                    bad.append(f"n={n} anticommutator ({i},{j})")
        if not np.array_equal(m.tau @ m.tau, np.eye(m.size)):
            bad.append(f"n={n} tau^2")
        for g in m.generators:
            if not np.array_equal(m.tau @ g, -g @ m.tau):
                bad.append(f"n={n} tau c(e)")
        half = 2 ** (2 * n - 1)
        if m.basis_plus.shape[1] != half or m.basis_minus.shape[1] != half:
            bad.append(f"n={n} ranks")
        if np.linalg.matrix_rank(m.projector_plus) != half:
            bad.append(f"n={n} projector rank")
    secs = time.perf_counter() - start
    ok = not bad and secs < 1.0
    record_criterion(1, ok, f"exact Clifford relations for n=1,2,3 in {secs:.2f} s {bad or ''}")
    assert ok


def test_criterion_02_lemma3_exhaustive():
    start = time.perf_counter()
    violations = 0
    rng = np.random.default_rng(2024)
    for n in (1, 2):
        m = build_clifford_model(n)
        xs = rng.normal(size=(10_000, 2 * n))
        ys = rng.normal(size=(10_000, 2 * n))
        # structured samples: orthogonal equal-length pairs, parallel pairs, zeros
        e = np.eye(2 * n)
        structured = [(e[0], e[1]), (e[1], e[0]), (e[0], e[0]), (e[0], 0 * e[0]), (0 * e[0], e[0]), (0 * e[0], 0 * e[0])]
        for xi, eta in list(zip(xs, ys)) + structured:
            try:
                classify_point(m, xi, eta)
            except LemmaViolation:
                violations += 1
    m1 = build_clifford_model(1)
    frames_ok = True
    for theta in np.linspace(0, 2 * np.pi, 13)[:-1]:
        u = np.array([np.cos(theta), np.sin(theta)])
        w = np.array([-np.sin(theta), np.cos(theta)])
        for scale in (0.3, 1.0, 2.5):
            frames_ok &= classify_point(m1, scale * u, scale * w) is PointClass.ZERO_PLUS_FRAME
            frames_ok &= classify_point(m1, scale * u, -scale * w) is PointClass.ZERO_NONINVERTIBLE
    secs = time.perf_counter() - start
    ok = violations == 0 and frames_ok and secs < 5.0
    record_criterion(2, ok, f"{violations} Lemma 3 violations in 2 x 10000 samples, frame branch {'ok' if frames_ok else 'wrong'}, {secs:.2f} s")
    assert ok


def gauss_bonnet(resolution):
    atlas = SphereAtlas(resolution)
    lc = LocalConnection(atlas.levi_civita, 2, 2, atlas_steps(atlas))
    return integrate_region(lambda cid, p: euler_form(lc.curvature(cid, p)), atlas).real


def test_criterion_03_gauss_bonnet():
    start = time.perf_counter()
    e48 = abs(gauss_bonnet(48) - 2)
    e96 = abs(gauss_bonnet(96) - 2)
    secs = time.perf_counter() - start
    ratio = e48 / e96 if e96 else math.inf
    ok = e96 < 1e-3 and ratio >= 4 and secs < 10
    record_criterion(3, ok, f"|chi - 2| = {e96:.2e} at 96, ratio 48->96 = {ratio:.1f}, {secs:.2f} s")
    assert ok


def test_criterion_04_lemma4():
    s2, _, _ = run("s2_rotation_isolated")
    t2, _, _ = run("t2_nonvanishing")
    s22, secs4, _ = run("s2xs2_nonisolated")
    errs = [abs(complex(s2["lemma4"].lhs) + 4), abs(complex(t2["lemma4"].lhs)), abs(complex(s22["lemma4"].lhs) - 16)]
    ok = errs[0] < 2e-2 and errs[1] < 1e-6 and errs[2] < 0.5 and secs4 < 300
    record_criterion(4, ok, f"errors S2 {errs[0]:.2e}, T2 {errs[1]:.2e}, S2xS2 {errs[2]:.2e} ({secs4:.0f} s)")
    assert ok


def test_criterion_05_degree():
    chart = ChartGrid("A", (-2.0, -2.0), (2.0, 2.0), (16, 16), (False, False))
    worst, ok = 0.0, True
    for k in range(-2, 3):
        v = lambda p, k=k: np.exp(1j * k * np.arctan2(p[:, 1], p[:, 0]))  # noqa: E731
        ints = []
        for radius in (0.5, 1.0):
            sphere = BoundarySphere(chart, (0.0, 0.0), radius, 256)
            worst = max(worst, abs(degree_value(v, sphere, 1) - k))
            ints.append(degree_at_zero(v, sphere, 1))
        ok &= ints == [k, k]
    ok = ok and worst < 1e-6
    record_criterion(5, ok, f"degrees exact for k=-2..2 at radius r and 2r, max residual {worst:.1e}")
    assert ok


def test_criterion_06_lemma1_vanishing():
    parts, ok = [], True
    for name in SCENARIOS:
        checks, _, sc = run(name)
        if not sc.components:
            continue
        tol = 1e-2 if sc.atlas.dim == 2 else 5e-2
        sup = float(complex(checks["lemma1_pointwise_vanishing"].lhs).real)
        err = checks["lemma1_global_vs_tubes"].abs_error
        ok &= sup < 1e-8 and err < tol
        parts.append(f"{name}: sup {sup:.1e}, |global - tubes| {err:.1e}")
    record_criterion(6, ok, "; ".join(parts))
    assert ok


@pytest.mark.xfail(strict=True, reason="for n = 1 the global number is -sum(deg), not +sum(deg); see the decisions ledger")
def test_criterion_07_corollary1():
    parts, ok = [], True
    for name in ("s2_rotation_isolated", "s2_corollary1"):
        checks, _, sc = run(name)
        c = checks["corollary1"]
        target = (-1) ** (sc.n - 1) * sum(Verifier(sc).degrees())
        ok &= c.passed and abs(complex(c.lhs) - target) < 1e-2
        parts.append(f"{name}: global {complex(c.lhs).real:.6f} vs {target}")
    record_criterion(7, ok, "; ".join(parts))
    assert ok


def test_criterion_08_theorem2():
    s2, _, _ = run("s2_rotation_isolated")
    s22, secs4, _ = run("s2xs2_nonisolated")
    t2, _, tsc = run("t2_oriented_frame")
    a, b, c = s2["theorem2"], s22["theorem2"], t2["theorem2"]
    # h vanishes everywhere on the torus, yet every point lands in the oriented-frame branch
    pts = np.random.default_rng(8).uniform(0, 1, size=(20, 2))
    branch = {classify_point(tsc.model, x, e) for x, e in zip(tsc.xi_fn("T", pts), tsc.eta_fn("T", pts))}
    ok = (
        abs(complex(a.rhs) - 2) < 2e-2
        and "outside theorem hypothesis" in a.note
        and abs(complex(b.rhs) - 4) < 0.25
        and secs4 < 300
        and abs(complex(c.rhs)) < 1e-6
        and c.lhs == 0
        and branch == {PointClass.ZERO_PLUS_FRAME}
    )
    record_criterion(
        8, ok, f"chi(S2) = {complex(a.rhs).real:.5f}, chi(S2xS2) = {complex(b.rhs).real:.4f} ({secs4:.0f} s), chi(T2) = {complex(c.rhs).real + 0.0:.1e}"
    )
    assert ok


def quaternion_map(p):
    z1 = p[:, 0] + 1j * p[:, 1]
    z2 = p[:, 2] + 1j * p[:, 3]
    return np.stack([np.stack([z1, -np.conj(z2)], axis=-1), np.stack([z2, np.conj(z1)], axis=-1)], axis=-2)


def flat_oracle_gap(n):
    """Relative gap between -(i/2pi) of the CS boundary integral (t-quadrature) and the closed-form degree integral."""
    dim, h = 2 * n, 1e-3
    v_fn = (lambda cid, p: (p[:, 0] + 1j * p[:, 1])[:, None, None]) if n == 1 else (lambda cid, p: quaternion_map(p))
    triv = LocalConnection.trivial(n, dim)
    c0 = GradedConnection(triv, triv)
    c1 = GradedConnection(GaugeConnection(triv, v_fn, h), triv)
    chart = ChartGrid("A", (-2.0,) * dim, (2.0,) * dim, (8,) * dim, (False,) * dim)
    sphere = BoundarySphere(chart, np.zeros(dim), 0.7, 64 if n == 1 else 16)
    cs = integrate_boundary_sphere(lambda p: chern_simons_form(c0, c1, "A", p, 16), sphere)
    # the t-integral returns (-1)^(n-1) times the normalized degree integral
    lhs = -CHERN_FACTOR * cs
    rhs = degree_value(lambda p: v_fn("A", p), sphere, n, h)
    return abs(lhs - rhs) / abs(rhs), rhs


def test_criterion_09_transgression():
    # the two sides are separate quadratures of a bump a few cells wide; 192 puts both below 1e-5
    sc = build_scenario(load_config("s2_rotation_isolated", resolution=192))
    ver = Verifier(sc)
    regions = {
        "north tube": lambda cid, p: tube_masks(sc, cid, p)[0][0],
        "hemisphere band": lambda cid, p: 0.5 + 0.5 * np.tanh(3 * (sc.atlas.to_physical(cid, p)[:, 2])),
        "whole sphere": None,
    }
    worst = 0.0
    for mask in regions.values():
        lhs = transgression_value(sc.connection, ver.deformed, sc.atlas, mask, sc.steps)
        ch0 = integrate_region(lambda cid, p: connection_ch(sc.connection, cid, p), sc.atlas, mask)
        ch1 = integrate_region(lambda cid, p: connection_ch(ver.deformed, cid, p), sc.atlas, mask)
        worst = max(worst, abs(lhs - (ch0 - ch1)))
    gaps = [flat_oracle_gap(n)[0] for n in (1, 2)]
    ok = worst < 1e-4 and max(gaps) < 1e-8
    record_criterion(9, ok, f"max |transgression - ch difference| {worst:.1e} over {len(regions)} regions; Beta prefactor gap n=1 {gaps[0]:.1e}, n=2 {gaps[1]:.1e}")
    assert ok


def test_criterion_10_robustness():
    parts, ok = [], True
    for name in SCENARIOS:
        base, _, _ = run(name)
        cfg = load_config(name)
        passing = {k for k, c in base.items() if c.passed}
        verdict = all(c.passed for c in base.values() if not c.diagnostic)
        for label, kw in (("R x0.75", {"tube_radius": 0.75 * cfg.tube_radius}), ("res x2", {"resolution": 2 * cfg.resolution})):
            other, secs, _ = run(name, **kw)
            lost = sorted(k for k in passing if not other[k].passed)
            same = verdict == all(c.passed for c in other.values() if not c.diagnostic)
            ok &= not lost and same
            parts.append(f"{name} {label}: {'stable' if not lost and same else f'changed {lost}'} ({secs:.0f} s)")
    record_criterion(10, ok, "; ".join(parts))
    assert ok
