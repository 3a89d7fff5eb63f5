"""Tubes around zero components and the localization checks.

A :class:`Scenario` bundles a manifold atlas, a graded connection, the bundle
map v (E+ -> E-), the declared zero components with their tube distance
fields, and optionally the Clifford data K = xi + i eta.  The verifier computes
the global graded Chern character integral with the block connection in one
sweep over the atlas, and every check reads from that shared sweep.

Tube integrals of the deformed connection use their own quadrature: polar
coordinates in the normal disk, Gauss-Legendre in the radius on each piece
[0, a], [a, b], [b, R] of the truncation profile (where the integrand is
smooth) and the trapezoid rule in the angle.  The deformed integrand is a
narrow bump around the zero set, which a coarse chart grid resolves poorly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Hashable, Sequence

import numpy as np

from .atlas import Atlas, BoundarySphere, SimplicialMesh, euler_char_oracle, flat_step, integrate_region, sample_on_atlas, smoothstep
from .bundle import (
    GradedConnection,
    TruncationProfile,
    connection_ch,
    degree_at_zero,
    degree_value,
    deformed_connection,
    euler_form,
)
from .clifford import CliffordModel, PointClass, classify_point, symbol_at_point
from .errors import ConfigurationError, ContractViolation, LemmaViolation, NumericalFailure
from .forms import Form, total

DistanceFn = Callable[[Hashable, np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass
class FiberStructure:
    """Normal-disk coordinates around a positive-dimensional component X.

    ``embed(base_chart, base_points, fiber_points)`` returns the ambient chart id
    and coordinates of the point of the tube over ``base_points`` with normal
    coordinates ``fiber_points``; ``fiber_axes`` are the ambient axes spanned by
    the fiber directions (ambient chart axes are base axes followed by fiber
    axes).  ``normal_curvature`` gives the curvature of the metric normal
    connection on X in an oriented orthonormal normal frame.
    """

    base_atlas: Atlas
    embed: Callable
    fiber_axes: tuple[int, ...]
    normal_curvature: Callable[[Hashable, np.ndarray], Form]


@dataclass
class ZeroComponent:
    """A connected component X of the zero set with its tube U_X."""

    name: str
    dimension: int
    codimension: int
    distance: DistanceFn
    tube_radius: float
    center: tuple[Hashable, np.ndarray] | None = None
    on_component: Callable[[np.random.Generator, int], list[tuple[Hashable, np.ndarray]]] | None = None
    fiber: FiberStructure | None = None
    injectivity: float = math.inf

    def __post_init__(self):
        if self.tube_radius <= 0:
            raise ConfigurationError(f"tube radius of {self.name} must be positive")
        if self.tube_radius >= self.injectivity:
            raise ConfigurationError(f"tube radius {self.tube_radius} of {self.name} exceeds the injectivity bound {self.injectivity}")

    @property
    def isolated(self) -> bool:
        return self.dimension == 0


@dataclass
class CheckResult:
    name: str
    lhs: complex
    rhs: complex
    tolerance: float
    diagnostic: bool = False
    note: str = ""
    seconds: float = 0.0

    @property
    def abs_error(self) -> float:
        return float(abs(complex(self.lhs) - complex(self.rhs)))

    @property
    def passed(self) -> bool:
        err = self.abs_error
        return bool(np.isfinite(err) and err <= self.tolerance)


@dataclass
class Scenario:
    name: str
    atlas: Atlas
    n: int
    connection: GradedConnection
    v_fn: Callable
    components: list[ZeroComponent]
    trunc: tuple[float, float]
    steps: dict
    order: int = 4
    profile_kind: str = "quintic"
    mesh: SimplicialMesh | None = None
    euler_number: int | None = None
    model: CliffordModel | None = None
    xi_fn: Callable | None = None
    eta_fn: Callable | None = None
    signature_bundle: bool = False
    tolerances: dict = field(default_factory=dict)
    chunk: int = 2048

    def __post_init__(self):
        if self.atlas.dim != 2 * self.n:
            raise ConfigurationError(f"manifold dimension {self.atlas.dim} does not equal 2n = {2 * self.n}")

    def profile_for(self, component: ZeroComponent) -> TruncationProfile:
        a, b = self.trunc
        if not (0 < a < b <= component.tube_radius):
            raise ConfigurationError(f"truncation radii need 0 < a < b <= tube radius, got a={a}, b={b}, R={component.tube_radius}")
        return TruncationProfile(a, b, self.profile_kind)

    def tolerance(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, self.tolerances.get("all", default)))


# ---------------------------------------------------------------------------
# masks and truncation


def _step(kind: str, t):
    return smoothstep(t) if kind == "quintic" else flat_step(t)


def tube_masks(scenario: Scenario, chart_id, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-component masks (k, m) and the complement (m,), summing to one.

    m_X = 1 for d <= b and falls to 0 at d = R; overlapping supports are rejected.
    """
    comps = scenario.components
    masks = np.zeros((len(comps), len(points)))
    for k, comp in enumerate(comps):
        d, _ = comp.distance(chart_id, points)
        _, b = scenario.trunc
        masks[k] = 1.0 - _step(scenario.profile_kind, (d - b) / (comp.tube_radius - b)) if comp.tube_radius > b else (d <= b).astype(float)
    if len(comps) > 1 and np.any(np.count_nonzero(masks > 0, axis=0) > 1):
        raise ConfigurationError("overlapping tubes")
    return masks, 1.0 - masks.sum(axis=0)


def truncation(scenario: Scenario) -> Callable[[Hashable, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    """rho = prod_X rho_X(d_X) with its differential."""
    def rho_fn(chart_id, points):
        m = len(points)
        rho = np.ones(m)
        drho = np.zeros((m, scenario.atlas.dim))
        for comp in scenario.components:
            prof = scenario.profile_for(comp)
            d, grad = comp.distance(chart_id, points)
            r = prof(d)
            s = prof.slope(d)
            g = np.where(s[:, None] != 0, np.nan_to_num(grad), 0.0)
            drho = drho * r[:, None] + rho[:, None] * s[:, None] * g
            rho = rho * r
        return rho, drho

    return rho_fn


def check_tubes_disjoint(scenario: Scenario) -> None:
    for chart in scenario.atlas.charts:
        for sel, pts in scenario.atlas.iter_chunks(chart.chart_id, scenario.chunk, all_nodes=True):
            tube_masks(scenario, chart.chart_id, pts)


def polar_nodes(breaks: Sequence[float], per_piece: Sequence[int], angles: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Disk quadrature: points (k, 2), weights (k,) including the factor r, radii (k,)."""
    radii, wr = [], []
    for lo, hi, count in zip(breaks[:-1], breaks[1:], per_piece):
        if hi <= lo:
            continue
        x, w = np.polynomial.legendre.leggauss(count)
        radii.append(lo + (x + 1) * (hi - lo) / 2)
        wr.append(w * (hi - lo) / 2)
    r = np.concatenate(radii)
    wr = np.concatenate(wr)
    theta = 2 * np.pi * np.arange(angles) / angles
    rr, tt = np.meshgrid(r, theta, indexing="ij")
    pts = np.stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()], axis=1)
    weights = np.outer(wr * r, np.full(angles, 2 * np.pi / angles)).ravel()
    return pts, weights, rr.ravel()


def _check_polar(comp: ZeroComponent, chart_id, points: np.ndarray, radii: np.ndarray) -> None:
    d, _ = comp.distance(chart_id, points)
    err = float(np.max(np.abs(d - radii))) if len(radii) else 0.0
    if not err <= 1e-9 * max(1.0, comp.tube_radius):
        raise ContractViolation(f"tube coordinates of {comp.name} disagree with its distance field (max {err:.3g})")


# ---------------------------------------------------------------------------
# the shared sweep


@dataclass
class Sweep:
    global_value: complex
    tube_values: list[complex]
    complement_value: complex
    deformed_total: complex
    sup_rho_one: float
    seconds: float


class Verifier:
    """Runs the atlas sweep once and exposes the individual checks."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario

    @cached_property
    def deformed(self) -> GradedConnection:
        sc = self.scenario
        if not sc.components:
            return sc.connection
        return deformed_connection(sc.connection, sc.v_fn, truncation(sc), sc.steps, sc.order)

    @cached_property
    def sweep(self) -> Sweep:
        sc = self.scenario
        start = time.perf_counter()
        check_tubes_disjoint(sc)
        rho_fn = truncation(sc)
        k = len(sc.components)
        sup = [0.0]

        def fn(cid, pts):
            base = connection_ch(sc.connection, cid, pts).top()
            deformed = connection_ch(self.deformed, cid, pts).top() if k else base
            masks, comp = tube_masks(sc, cid, pts)
            rho, _ = rho_fn(cid, pts)
            one = rho == 1.0
            if np.any(one):
                sup[0] = max(sup[0], float(np.max(np.abs(deformed[one]))))
            return np.stack([base, deformed * comp, deformed], axis=1)

        sampled = sample_on_atlas(fn, sc.atlas, sc.chunk)
        values = [integrate_region({cid: arr[:, col] for cid, arr in sampled.items()}, sc.atlas) for col in range(3)]
        return Sweep(
            global_value=values[0],
            complement_value=values[1],
            deformed_total=values[2],
            tube_values=[self.tube_integral(j) for j in range(k)],
            sup_rho_one=sup[0],
            seconds=time.perf_counter() - start,
        )

    def tube_integral(self, index: int, radial: tuple[int, int, int] = (6, 12, 2), angles: int = 16) -> complex:
        """Integral of the deformed graded ch form times the tube mask of one component."""
        sc = self.scenario
        comp = sc.components[index]
        a, b = sc.trunc
        pts, w, radii = polar_nodes((0.0, a, b, comp.tube_radius), radial, angles)

        def weighted(cid, amb):
            top = connection_ch(self.deformed, cid, amb).top()
            masks, _ = tube_masks(sc, cid, amb)
            return top * masks[index]

        if comp.isolated:
            cid, center = comp.center
            amb = np.asarray(center, dtype=float) + pts
            _check_polar(comp, cid, amb, radii)
            return sc.atlas.orientation(cid) * total(w * weighted(cid, amb))
        fib = comp.fiber
        if fib is None or len(fib.fiber_axes) != 2:
            raise ContractViolation(f"{comp.name}: tube quadrature needs a two-dimensional normal fiber")
        nf = len(pts)

        def fn(cid, base_pts):
            m = len(base_pts)
            base_rep = np.repeat(base_pts, nf, axis=0)
            fib_rep = np.tile(pts, (m, 1))
            vals = np.empty(m * nf, dtype=complex)
            for start in range(0, m * nf, sc.chunk):
                sl = slice(start, start + sc.chunk)
                mid, amb = fib.embed(cid, base_rep[sl], fib_rep[sl])
                if start == 0:
                    _check_polar(comp, mid, amb, np.tile(radii, m)[sl])
                    sign = sc.atlas.orientation(mid) * fib.base_atlas.orientation(cid)
                vals[sl] = sign * weighted(mid, amb)
            return (vals.reshape(m, nf) * w).sum(axis=1)

        sampled = sample_on_atlas(fn, fib.base_atlas, max(1, sc.chunk // nf))
        return integrate_region(sampled, fib.base_atlas)

    @property
    def dim_tolerance(self) -> float:
        return 1e-2 if self.scenario.atlas.dim == 2 else 5e-2

    # checks --------------------------------------------------------------------
    def check_lemma1(self) -> list[CheckResult]:
        sc, sw = self.scenario, self.sweep
        tol = sc.tolerance("lemma1", self.dim_tolerance)
        out = [
            CheckResult("lemma1_global_vs_tubes", sw.global_value, total(sw.tube_values), tol, seconds=sw.seconds),
            CheckResult("lemma1_complement_integral", sw.complement_value, 0.0, sc.tolerance("lemma1_complement", 1e-6)),
        ]
        if sc.components:
            out.append(
                CheckResult(
                    "lemma1_pointwise_vanishing",
                    sw.sup_rho_one,
                    0.0,
                    sc.tolerance("lemma1_vanishing", 1e-8),
                    note="sup norm of the deformed graded ch integrand where rho = 1",
                )
            )
        return out

    def check_theorem1(self) -> CheckResult:
        sc, sw = self.scenario, self.sweep
        return CheckResult(
            "theorem1",
            sw.global_value,
            total(sw.tube_values),
            sc.tolerance("theorem1", self.dim_tolerance),
            note="right side: sum of tube integrals of the deformed graded ch form",
        )

    def degrees(self, radius_scale: float = 1.0, resolution: int = 256) -> list[int]:
        sc = self.scenario
        out = []
        for comp in sc.components:
            if not comp.isolated or comp.center is None:
                raise ContractViolation("degrees are only defined at isolated zeros with a declared center")
            cid, coords = comp.center
            sphere = BoundarySphere(sc.atlas.chart(cid), coords, comp.tube_radius * radius_scale, resolution)
            out.append(degree_at_zero(lambda p, cid=cid: sc.v_fn(cid, p), sphere, sc.n))
        return out

    def check_corollary1(self) -> list[CheckResult]:
        sc, sw = self.scenario, self.sweep
        if any(not c.isolated for c in sc.components):
            raise ContractViolation("Corollary 1 needs isolated zeros")
        start = time.perf_counter()
        degs = self.degrees()
        half = self.degrees(0.5)
        secs = time.perf_counter() - start
        tol = sc.tolerance("corollary1", 1e-2)
        sign = (-1) ** (sc.n - 1)
        note = f"degrees {degs}; at half radius {half}"
        return [
            CheckResult("corollary1", sw.global_value, sign * sum(degs), tol, note=note, seconds=secs),
            CheckResult("degree_radius_independence", sum(abs(a - b) for a, b in zip(degs, half)), 0.0, 0.0, note=note),
            CheckResult(
                "corollary1_sign_corrected",
                sw.global_value,
                -sum(degs),
                tol,
                diagnostic=True,
                note="global number against -sum(deg); differs from the stated sign when n is odd",
            ),
        ]

    def check_lemma4(self) -> CheckResult:
        sc, sw = self.scenario, self.sweep
        if not sc.signature_bundle:
            raise ContractViolation("Lemma 4 needs the signature-graded exterior bundle")
        chi = self.euler_characteristic()
        default = {2: 2e-2, 4: 0.5}.get(sc.atlas.dim, 2e-2)
        return CheckResult("lemma4", sw.global_value, (-2) ** sc.n * chi, sc.tolerance("lemma4", default))

    def euler_characteristic(self) -> int:
        sc = self.scenario
        if sc.mesh is not None:
            chi = euler_char_oracle(sc.mesh)
            if sc.euler_number is not None and chi != sc.euler_number:
                raise ConfigurationError(f"mesh oracle gives chi = {chi}, scenario declares {sc.euler_number}")
            return chi
        if sc.euler_number is None:
            raise ConfigurationError("scenario supplies no Euler characteristic")
        return sc.euler_number

    def check_zero_set(self, count: int = 500, seed: int = 0) -> int:
        """Cross-validate the declared zero set with classify_point; returns the number of samples."""
        sc = self.scenario
        rng = np.random.default_rng(seed)
        on: list[tuple[Hashable, np.ndarray]] = []
        for comp in sc.components:
            if comp.on_component is not None:
                on.extend(comp.on_component(rng, max(1, count // (5 * max(1, len(sc.components))))))
        phys = sc.atlas.random_physical(rng, count - len(on))
        samples = []
        for p in phys:
            for cid in sc.atlas.chart_ids:
                coords, ok = sc.atlas.from_physical(cid, p[None])
                if ok[0]:
                    samples.append((cid, coords[0], False))
                    break
        samples += [(cid, np.asarray(x, dtype=float), True) for cid, x in on]
        for cid, x, declared in samples:
            xi = sc.xi_fn(cid, x[None])[0]
            eta = sc.eta_fn(cid, x[None])[0]
            cls = classify_point(sc.model, xi, eta)
            near = declared or any(c.distance(cid, x[None])[0][0] < 1e-9 for c in sc.components)
            if near != (cls is PointClass.ZERO_NONINVERTIBLE):
                raise LemmaViolation(f"zero-set mismatch at chart {cid!r}, point {x}: classified {cls.value}, declared {'zero' if near else 'nonzero'}")
        return len(samples)

    def check_theorem2(self) -> CheckResult:
        sc, sw = self.scenario, self.sweep
        if sc.model is None or sc.xi_fn is None:
            raise ContractViolation("Theorem 2 needs K = xi + i eta")
        samples = self.check_zero_set()
        chi = self.euler_characteristic()
        recovered = total(sw.tube_values) / (-2) ** sc.n
        default = {2: 2e-2, 4: 0.25}.get(sc.atlas.dim, 2e-2)
        note = f"zero set confirmed on {samples} samples"
        if sc.n < 2:
            note += "; outside theorem hypothesis (n = 1)"
        return CheckResult("theorem2", chi, recovered, sc.tolerance("theorem2", default), note=note)

    def check_lemma2_diagnostic(self, component: ZeroComponent, base_quad: int = 8, angles: int = 16) -> CheckResult:
        sc = self.scenario
        if component.isolated:
            return CheckResult(f"lemma2_{component.name}", 0.0, 0.0, math.inf, diagnostic=True, note="skipped: zero-dimensional component")
        if component.codimension % 2:
            return CheckResult(f"lemma2_{component.name}", math.nan, math.nan, 0.0, diagnostic=True, note="diagnostic undefined: odd codimension")
        fib = component.fiber
        if fib is None or component.codimension != 2:
            return CheckResult(f"lemma2_{component.name}", math.nan, math.nan, 0.0, diagnostic=True, note="diagnostic undefined: no fiber grid")
        R = component.tube_radius
        x, wx = np.polynomial.legendre.leggauss(base_quad)
        radii = (x + 1) * R / 2
        wr = wx * R / 2
        theta = 2 * np.pi * np.arange(angles) / angles
        rr, tt = np.meshgrid(radii, theta, indexing="ij")
        fiber_pts = np.stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()], axis=1)
        fiber_w = (np.outer(wr * radii, np.full(angles, 2 * np.pi / angles))).ravel()
        deformed = self.deformed
        fa = fib.fiber_axes

        base_axes = tuple(k for k in range(sc.atlas.dim) if k not in fa)
        nf = len(fiber_pts)

        def lhs_fn(cid, pts):
            # u = pi_! of the deformed graded ch form (base-degree-0 part), e = Euler form of N_X
            m = len(pts)
            base_rep = np.repeat(pts, nf, axis=0)
            fib_rep = np.tile(fiber_pts, (m, 1))
            vals = np.empty(m * nf, dtype=complex)
            for start in range(0, m * nf, sc.chunk):
                sl = slice(start, start + sc.chunk)
                mid, amb = fib.embed(cid, base_rep[sl], fib_rep[sl])
                vals[sl] = connection_ch(deformed, mid, amb).component(fa)
            us = (vals.reshape(m, nf) * fiber_w).sum(axis=1)
            e = euler_form(fib.normal_curvature(cid, pts))
            mid, amb = fib.embed(cid, pts, np.zeros((m, 2)))
            restricted = connection_ch(deformed, mid, amb).component(base_axes)
            return np.stack([e.top() * us, restricted], axis=1)

        sampled = sample_on_atlas(lhs_fn, fib.base_atlas, sc.chunk)
        left = integrate_region({c: a[:, 0] for c, a in sampled.items()}, fib.base_atlas)
        right = integrate_region({c: a[:, 1] for c, a in sampled.items()}, fib.base_atlas)
        return CheckResult(
            f"lemma2_{component.name}",
            left,
            right,
            sc.tolerance("lemma2", 5e-2),
            diagnostic=True,
            note="left: int_X e(N_X) pi_!(ch); right: int_X ch restricted to X",
        )


def run_checks(scenario: Scenario) -> list[CheckResult]:
    """Every check applicable to the scenario, in a fixed order.

    Numerical or structural failures inside a check become failing results;
    configuration errors propagate.
    """
    ver = Verifier(scenario)
    results: list[CheckResult] = []

    def guarded(name, fn, diagnostic=False):
        start = time.perf_counter()
        try:
            out = fn()
        except (LemmaViolation, NumericalFailure, ContractViolation) as exc:
            out = CheckResult(name, math.nan, math.nan, 0.0, diagnostic=diagnostic, note=f"error: {exc}")
        items = out if isinstance(out, list) else [out]
        for item in items:
            if not item.seconds:
                item.seconds = time.perf_counter() - start
        results.extend(items)

    guarded("lemma1", ver.check_lemma1)
    for comp in scenario.components:
        guarded(f"lemma2_{comp.name}", lambda comp=comp: ver.check_lemma2_diagnostic(comp), diagnostic=True)
    guarded("theorem1", ver.check_theorem1)
    if all(c.isolated for c in scenario.components):
        guarded("corollary1", ver.check_corollary1)
    if scenario.signature_bundle:
        guarded("lemma4", ver.check_lemma4)
    if scenario.model is not None and scenario.xi_fn is not None:
        guarded("theorem2", ver.check_theorem2)
    return results
