"""Connections on graded bundles, Chern-Weil forms, the deformed connection, transgression and degree.

Connections are evaluated lazily: ``evaluate(chart_id, points)`` returns the
connection 1-form as an array of shape (m, dim, r, r) together with its
curvature as a matrix 2-form on the point batch.  Base connections obtain the
curvature as d(omega) + omega ^ omega with centered differences of the analytic
connection form.  Derived connections (gauge transforms and affine
interpolations) assemble their curvature from the curvatures of the pieces,
so identities such as "curvature of v^-1 nabla v equals v^-1 R v" hold to
round-off instead of to discretization order.

Convention: in a local frame nabla s = ds + omega s, R = d omega + omega ^ omega.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

from .atlas import Atlas, BoundarySphere, flat_step, integrate_boundary_sphere, integrate_region, sample_on_atlas, smoothstep, smoothstep_slope
from .errors import ConfigurationError, ContractViolation, NumericalFailure
from .forms import (
    Form,
    GradingTag,
    matrix_exp_form,
    stencil_derivative,
    stencil_exterior_derivative,
    supertrace,
    trace,
    trace_exp,
    trace_wedge,
    wedge,
    wedge_power,
)

CHERN_FACTOR = 1j / (2 * np.pi)
SINGULAR_COND = 1e8
DEGREE_RESIDUAL = 0.05

Steps = float | Sequence[float] | Mapping[Hashable, Sequence[float]] | Callable[[Hashable], Sequence[float]]


def resolve_step(steps: Steps, chart_id) -> np.ndarray | float:
    if callable(steps):
        return np.asarray(steps(chart_id), dtype=float)
    if isinstance(steps, Mapping):
        return np.asarray(steps[chart_id], dtype=float)
    return np.asarray(steps, dtype=float)


def atlas_steps(atlas: Atlas) -> dict:
    """Finite-difference steps equal to the grid spacing of each chart."""
    return {c.chart_id: c.spacing for c in atlas.charts}


def one_form(values: np.ndarray) -> Form:
    """Matrix 1-form from an array (m, dim, r, r)."""
    return Form.from_axes(values, value_shape=values.shape[-2:])


def curvature_from(values: np.ndarray, d_values: np.ndarray) -> Form:
    """d(omega) + omega ^ omega from omega (m, dim, r, r) and its partials (m, dim_k, dim_l, r, r)."""
    m, dim = values.shape[:2]
    comps = {}
    for k, l in itertools.combinations(range(dim), 2):
        comps[(k, l)] = (
            d_values[:, k, l] - d_values[:, l, k] + values[:, k] @ values[:, l] - values[:, l] @ values[:, k]
        )
    return Form(dim, comps, values.shape[-2:], (m,))


def _conjugate(form: Form, left: np.ndarray, right: np.ndarray) -> Form:
    return form.map_values(lambda a: left @ a @ right)


# ---------------------------------------------------------------------------
# connections


class Connection:
    """A connection on a rank-r bundle, given chart by chart.

    Subclasses implement ``_evaluate``.  Results for the most recent point
    batches are memoized, since one sweep asks for the same connection several
    times per chunk (block connection, deformed connection, both blocks).
    """

    rank: int
    dim: int
    _memo_size = 4

    def _evaluate(self, chart_id, points: np.ndarray) -> tuple[np.ndarray, Form]:
        raise NotImplementedError

    def evaluate(self, chart_id, points: np.ndarray) -> tuple[np.ndarray, Form]:
        points = np.ascontiguousarray(points, dtype=float)
        key = (chart_id, points.shape, hash(points.tobytes()))
        memo = self.__dict__.setdefault("_memo", {})
        hit = memo.get(key)
        if hit is not None and np.array_equal(hit[0], points):
            return hit[1]
        result = self._evaluate(chart_id, points)
        if len(memo) >= self._memo_size:
            memo.pop(next(iter(memo)))
        memo[key] = (points.copy(), result)
        return result

    def evaluate_at(self, chart_id, points: np.ndarray, idx: np.ndarray) -> tuple[np.ndarray, Form]:
        """``evaluate(chart_id, points[idx])``, reusing a memoized result for the whole batch.

        Valid because every connection here is evaluated pointwise.
        """
        points = np.ascontiguousarray(points, dtype=float)
        hit = self.__dict__.get("_memo", {}).get((chart_id, points.shape, hash(points.tobytes())))
        if hit is not None and np.array_equal(hit[0], points):
            values, curv = hit[1]
            return values[idx], curv.restrict(idx)
        return self._evaluate_at(chart_id, points, idx)

    def _evaluate_at(self, chart_id, points, idx):
        return self.evaluate(chart_id, points[idx])

    def form(self, chart_id, points: np.ndarray) -> np.ndarray:
        return self.evaluate(chart_id, points)[0]

    def curvature(self, chart_id, points: np.ndarray) -> Form:
        return self.evaluate(chart_id, points)[1]


class LocalConnection(Connection):
    """Connection from an analytic connection form ``fn(chart_id, points) -> (m, dim, r, r)``."""

    def __init__(self, fn, rank: int, dim: int, steps: Steps, order: int = 4):
        self.fn, self.rank, self.dim, self.steps, self.order = fn, rank, dim, steps, order

    @classmethod
    def trivial(cls, rank: int, dim: int) -> "LocalConnection":
        return cls(lambda cid, p: np.zeros((len(p), dim, rank, rank), dtype=complex), rank, dim, 1.0)

    def _evaluate(self, chart_id, points):
        values = np.asarray(self.fn(chart_id, points), dtype=complex)
        if values.shape[1:] != (self.dim, self.rank, self.rank):
            raise ConfigurationError(f"connection form has shape {values.shape[1:]}, expected {(self.dim, self.rank, self.rank)}")
        d_values = stencil_derivative(lambda p: self.fn(chart_id, p), points, resolve_step(self.steps, chart_id), self.order)
        return values, curvature_from(values, d_values)


class InducedConnection(Connection):
    """Image of a connection under a linear Lie-algebra map given by ``ops`` (a, b, r, r).

    The induced form is sum_ab omega[a, b] ops[a, b]; because the map is a Lie
    algebra homomorphism the curvature is the image of the base curvature.
    With ``skew=True`` the base matrices are assumed skew and only their upper
    triangle is read.
    """

    def __init__(self, base: Connection, ops: np.ndarray, skew: bool = False):
        self.base, self.ops = base, np.asarray(ops, dtype=complex)
        self.rank, self.dim = self.ops.shape[-1], base.dim
        a, b, r, _ = self.ops.shape
        if skew:
            self._rows, self._cols = np.triu_indices(a, 1)
            self._flat = (self.ops[self._rows, self._cols] - self.ops[self._cols, self._rows]).reshape(-1, r * r)
        else:
            self._rows, self._cols = None, None
            self._flat = self.ops.reshape(a * b, r * r)

    def _apply(self, arr: np.ndarray) -> np.ndarray:
        if self._rows is None:
            coeffs = arr.reshape(arr.shape[:-2] + (-1,))
        else:
            coeffs = arr[..., self._rows, self._cols]
        r = self.rank
        return (coeffs @ self._flat).reshape(arr.shape[:-2] + (r, r))

    def _evaluate(self, chart_id, points):
        return self._induce(*self.base.evaluate(chart_id, points))

    def _evaluate_at(self, chart_id, points, idx):
        return self._induce(*self.base.evaluate_at(chart_id, points, idx))

    def _induce(self, values, curv):
        return self._apply(values), curv.map_values(self._apply, value_shape=(self.rank, self.rank))


class GaugeConnection(Connection):
    """The pullback connection g^-1 nabla g for a pointwise invertible ``g_fn(chart_id, points)``.

    Form: g^-1 omega g + g^-1 dg.  Curvature: g^-1 R g, exactly.
    """

    def __init__(self, base: Connection, g_fn, steps: Steps, order: int = 4, cond_limit: float = SINGULAR_COND):
        self.base, self.g_fn, self.steps, self.order, self.cond_limit = base, g_fn, steps, order, cond_limit
        self.rank, self.dim = base.rank, base.dim

    def inverse(self, chart_id, points) -> tuple[np.ndarray, np.ndarray]:
        g = np.asarray(self.g_fn(chart_id, points), dtype=complex)
        if not len(points):
            return g, g.copy()
        try:
            gi = np.linalg.inv(g)
        except np.linalg.LinAlgError:
            gi = np.full_like(g, np.nan)
        # Frobenius condition number: an upper bound for the spectral one, no SVD needed
        cond = np.linalg.norm(g, axis=(-2, -1)) * np.linalg.norm(gi, axis=(-2, -1))
        bad = ~np.isfinite(cond) | (cond > self.cond_limit)
        if np.any(bad):
            raise ContractViolation(
                f"truncation region touches zero set: bundle map singular (condition {np.max(cond):.3g}) at {np.count_nonzero(bad)} nodes"
            )
        return g, gi

    def _evaluate(self, chart_id, points):
        return self._gauge(chart_id, points, self.base.evaluate(chart_id, points))

    def _evaluate_at(self, chart_id, points, idx):
        return self._gauge(chart_id, points[idx], self.base.evaluate_at(chart_id, points, idx))

    def _gauge(self, chart_id, points, base_values):
        g, gi = self.inverse(chart_id, points)
        values, curv = base_values
        dg = stencil_derivative(lambda p: self.g_fn(chart_id, p), points, resolve_step(self.steps, chart_id), self.order)
        new = gi[:, None] @ values @ g[:, None] + gi[:, None] @ dg
        return new, _conjugate(curv, gi, g)


class InterpolatedConnection(Connection):
    """nabla_0 + rho (nabla_1 - nabla_0) for a function rho with known differential.

    ``rho_fn(chart_id, points)`` returns (rho (m,), d rho (m, dim)).  With
    C = omega_1 - omega_0 the curvature is
    (1 - rho) R_0 + rho R_1 + d rho ^ C - rho (1 - rho) C ^ C.
    The second connection is only evaluated where rho or d rho is nonzero.
    """

    def __init__(self, c0: Connection, c1: Connection, rho_fn):
        if c0.rank != c1.rank or c0.dim != c1.dim:
            raise ConfigurationError("interpolated connections must act on the same bundle")
        self.c0, self.c1, self.rho_fn = c0, c1, rho_fn
        self.rank, self.dim = c0.rank, c0.dim

    @classmethod
    def constant(cls, c0: Connection, c1: Connection, t: float) -> "InterpolatedConnection":
        dim = c0.dim
        return cls(c0, c1, lambda cid, p: (np.full(len(p), float(t)), np.zeros((len(p), dim))))

    def pieces(self, chart_id, points):
        """(omega_0, R_0, C, R_1, rho, d rho) with C, R_1 zero off the active set."""
        rho, drho = self.rho_fn(chart_id, points)
        rho = np.asarray(rho, dtype=float)
        drho = np.asarray(drho, dtype=float)
        a0, r0 = self.c0.evaluate(chart_id, points)
        m, r = len(points), self.rank
        active = (rho != 0) | np.any(drho != 0, axis=1)
        c = np.zeros_like(a0)
        r1 = Form.zero(self.dim, (m,), (r, r))
        if np.any(active):
            idx = np.flatnonzero(active)
            a1, r1a = self.c1.evaluate_at(chart_id, points, idx)
            c[idx] = a1 - a0[idx]
            comps = {}
            for key, arr in r1a.components.items():
                full = np.zeros((m, r, r), dtype=complex)
                full[idx] = arr
                comps[key] = full
            r1 = Form(self.dim, comps, (r, r), (m,))
        return a0, r0, c, r1, rho, drho

    def _evaluate(self, chart_id, points):
        a0, r0, c, r1, rho, drho = self.pieces(chart_id, points)
        return a0 + rho[:, None, None, None] * c, interpolated_curvature(r0, r1, c, rho, drho)


def interpolated_curvature(r0: Form, r1: Form, c: np.ndarray, rho: np.ndarray, drho: np.ndarray) -> Form:
    cf = one_form(c)
    drho_form = Form.from_axes(drho)
    out = r0.scale(1.0 - rho) + r1.scale(rho) + wedge(drho_form, cf) - wedge(cf, cf).scale(rho * (1.0 - rho))
    return out


class GradedConnection(Connection):
    """Block-diagonal connection on E+ (+) E-."""

    def __init__(self, plus: Connection, minus: Connection):
        if plus.dim != minus.dim:
            raise ConfigurationError("graded blocks must live on the same manifold")
        self.plus, self.minus = plus, minus
        self.dim = plus.dim
        self.rank = plus.rank + minus.rank
        self.grading = GradingTag.from_ranks(plus.rank, minus.rank)

    def evaluate_blocks(self, chart_id, points):
        return self.plus.evaluate(chart_id, points), self.minus.evaluate(chart_id, points)

    def _evaluate(self, chart_id, points):
        (ap, rp), (am, rm) = self.evaluate_blocks(chart_id, points)
        return block_diag(ap, am), block_diag_form(rp, rm)


def block_diag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ra, rb = a.shape[-1], b.shape[-1]
    out = np.zeros(a.shape[:-2] + (ra + rb, ra + rb), dtype=complex)
    out[..., :ra, :ra] = a
    out[..., ra:, ra:] = b
    return out


def block_diag_form(a: Form, b: Form) -> Form:
    keys = set(a.components) | set(b.components)
    comps = {k: block_diag(a.component(k), b.component(k)) for k in keys}
    r = a.rank + b.rank
    return Form(a.dim, comps, (r, r), a.base_shape)


def curvature(connection: Connection, chart_id, points: np.ndarray) -> Form:
    return connection.curvature(chart_id, points)


# ---------------------------------------------------------------------------
# characteristic forms


def chern_character_form(curv: Form, grading: GradingTag | None = None) -> Form:
    """tr exp(i R / 2 pi), or the supertrace when a grading is given."""
    omega = curv.scale(CHERN_FACTOR)
    if grading is None:
        return trace_exp(omega)
    if grading.size != curv.rank:
        raise ConfigurationError(f"grading of size {grading.size} does not match a rank-{curv.rank} curvature")
    return supertrace(matrix_exp_form(omega), grading)


def graded_chern_character(r_plus: Form, r_minus: Form) -> Form:
    """ch(E+) - ch(E-) from the block curvatures."""
    return trace_exp(r_plus.scale(CHERN_FACTOR)) - trace_exp(r_minus.scale(CHERN_FACTOR))


def connection_ch(connection: Connection, chart_id, points) -> Form:
    if isinstance(connection, GradedConnection):
        (_, rp), (_, rm) = connection.evaluate_blocks(chart_id, points)
        return graded_chern_character(rp, rm)
    return chern_character_form(connection.curvature(chart_id, points))


def pfaffian_form(omega: Form) -> Form:
    """Pfaffian of a skew matrix of 2-forms (entries commute, so the usual expansion applies)."""
    size = omega.rank
    if size % 2:
        raise ContractViolation("Pfaffian needs an even-rank bundle")
    m = size // 2
    entries = {
        (i, j): omega.map_values(lambda a, i=i, j=j: a[..., i, j], value_shape=()) for i in range(size) for j in range(size)
    }
    total = Form.zero(omega.dim, omega.base_shape)
    for perm in itertools.permutations(range(size)):
        # keep each pairing once: pairs increasing inside and in their first elements
        pairs = [(perm[2 * k], perm[2 * k + 1]) for k in range(m)]
        if any(p > q for p, q in pairs) or any(pairs[k][0] > pairs[k + 1][0] for k in range(m - 1)):
            continue
        sign = _perm_sign(perm)
        term = entries[pairs[0]]
        for p in pairs[1:]:
            term = wedge(term, entries[p])
        total = total + term.scale(sign)
    return total


def _perm_sign(perm: Sequence[int]) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def euler_form(curv: Form, tol: float = 1e-8) -> Form:
    """Pf(R / 2 pi) for the curvature of a metric connection in an oriented orthonormal frame."""
    if not curv.is_matrix:
        raise ContractViolation("euler_form expects a matrix-valued curvature")
    scale = max(1.0, curv.max_abs())
    for arr in curv.components.values():
        if np.max(np.abs(arr + np.swapaxes(arr, -1, -2)), initial=0.0) > tol * scale:
            raise ContractViolation("curvature is not skew: connection is not metric in this frame")
    return pfaffian_form(curv.scale(1.0 / (2 * np.pi)))


# ---------------------------------------------------------------------------
# truncation and the deformed connection


@dataclass(frozen=True)
class TruncationProfile:
    """rho = 0 for d <= a, 1 for d >= b, with a C^2 quintic (or C-infinity) transition."""

    a: float
    b: float
    kind: str = "quintic"

    def __post_init__(self):
        if not (0 < self.a < self.b):
            raise ConfigurationError(f"truncation radii need 0 < a < b, got a={self.a}, b={self.b}")
        if self.kind not in ("quintic", "smooth"):
            raise ConfigurationError(f"unknown profile kind {self.kind!r}")

    def _t(self, d):
        return (np.asarray(d, dtype=float) - self.a) / (self.b - self.a)

    def __call__(self, d) -> np.ndarray:
        t = self._t(d)
        return smoothstep(t) if self.kind == "quintic" else flat_step(t)

    def slope(self, d) -> np.ndarray:
        t = self._t(d)
        if self.kind == "quintic":
            return smoothstep_slope(t) / (self.b - self.a)
        h = 1e-6
        return (flat_step(t + h) - flat_step(t - h)) / (2 * h * (self.b - self.a))


def deformed_connection(nabla: GradedConnection, v_fn, rho_fn, steps: Steps, order: int = 4) -> GradedConnection:
    """E+ block replaced by nabla+ + rho (v^-1 nabla- v - nabla+); E- block unchanged.

    ``v_fn(chart_id, points)`` is the bundle map E+ -> E- in the local frames
    (square, invertible wherever rho or d rho is nonzero); ``rho_fn`` returns
    (rho, d rho).  ``rho_fn=None`` means rho = 0 and returns ``nabla`` itself.
    """
    if rho_fn is None:
        return nabla
    if nabla.plus.rank != nabla.minus.rank:
        raise ConfigurationError("the deformed connection needs rank E+ = rank E- (v invertible off the zero set)")
    pulled = GaugeConnection(nabla.minus, v_fn, steps, order)
    return GradedConnection(InterpolatedConnection(nabla.plus, pulled, rho_fn), nabla.minus)


# ---------------------------------------------------------------------------
# transgression


def gauss_legendre_unit(count: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(count)
    return (x + 1) / 2, w / 2


def chern_simons_form(c0: GradedConnection, c1: GradedConnection, chart_id, points, nodes: int = 8) -> Form:
    """The (dim-1)-degree part of int_0^1 tr_s[(d nabla_t / dt) exp(i R_t / 2 pi)] dt on nabla_t = (1-t) nabla_0 + t nabla_1."""
    dim = c0.dim
    blocks = []
    for b0, b1, sign in ((c0.plus, c1.plus, 1.0), (c0.minus, c1.minus, -1.0)):
        a0, r0 = b0.evaluate(chart_id, points)
        a1, r1 = b1.evaluate(chart_id, points)
        blocks.append((a1 - a0, r0, r1, sign))
    ts, ws = gauss_legendre_unit(nodes)
    m = len(points)
    out = Form.zero(dim, (m,))
    zero_drho = np.zeros((m, dim))
    k = dim // 2 - 1  # power of the curvature paired with the 1-form
    for t, w in zip(ts, ws):
        for c, r0, r1, sign in blocks:
            rt = interpolated_curvature(r0, r1, c, np.full(m, t), zero_drho).scale(CHERN_FACTOR)
            cf = one_form(c)
            if k == 0:
                term = trace(cf)
            else:
                term = trace_wedge(cf, wedge_power(rt, k)).scale(1.0 / math.factorial(k))
            out = out + term.part(dim - 1).scale(sign * w)
    return out


def transgression_value(
    c0: GradedConnection,
    c1: GradedConnection,
    atlas: Atlas,
    region_mask,
    steps: Steps,
    order: int = 4,
    nodes: tuple[int, int] = (8, 16),
    tol: float = 1e-10,
) -> complex:
    """-(i/2 pi) int_region d CS(nabla_0, nabla_1), which equals int_region ch(nabla_0) - ch(nabla_1).

    The t-integral uses Gauss-Legendre with ``nodes[0]`` points and is checked
    against ``nodes[1]`` points; a mismatch above ``tol`` raises.
    """
    if c0.dim != c1.dim or c0.plus.rank != c1.plus.rank or c0.minus.rank != c1.minus.rank:
        raise ConfigurationError("transgression needs two connections on the same graded bundle")
    values = []
    for count in nodes:
        def integrand(cid, pts, count=count):
            h = resolve_step(steps, cid)
            return stencil_exterior_derivative(lambda p: chern_simons_form(c0, c1, cid, p, count), pts, h, order)

        values.append(-CHERN_FACTOR * integrate_region(integrand, atlas, region_mask))
    if abs(values[0] - values[1]) > tol * max(1.0, abs(values[1])):
        raise NumericalFailure(f"t-quadrature not converged: {values[0]} vs {values[1]}")
    return values[0]


# ---------------------------------------------------------------------------
# boundary degree


def degree_prefactor(n: int) -> complex:
    """-(i/2 pi)^n (n-1)!/(2n-1)!, the normalization of the boundary trace integral."""
    return -(CHERN_FACTOR**n) * math.factorial(n - 1) / math.factorial(2 * n - 1)


def maurer_cartan_trace(v_fn, points: np.ndarray, n: int, h: float) -> Form:
    """tr((v^-1 dv)^(2n-1)) at ``points`` for ``v_fn(points) -> (m, r, r)``."""
    v = np.asarray(v_fn(points), dtype=complex)
    if v.ndim == 1:
        v = v[:, None, None]
        fn = lambda p: np.asarray(v_fn(p), dtype=complex)[:, None, None]  # noqa: E731
    else:
        fn = v_fn
    dv = stencil_derivative(fn, points, h)
    theta = one_form(np.linalg.inv(v)[:, None] @ dv)
    power = wedge_power(theta, 2 * n - 2) if n > 1 else None
    return trace(theta) if power is None else trace_wedge(power, theta)


def degree_value(v_fn, sphere: BoundarySphere, n: int, h: float | None = None) -> complex:
    """(-1)^(n-1) times the normalized boundary integral of tr((v^-1 dv)^(2n-1)), before rounding."""
    if sphere.dim != 2 * n:
        raise ConfigurationError(f"sphere in dimension {sphere.dim} does not match n={n}")
    h = sphere.radius * 1e-3 if h is None else h
    integral = integrate_boundary_sphere(lambda p: maurer_cartan_trace(v_fn, p, n, h), sphere)
    return (-1) ** (n - 1) * degree_prefactor(n) * integral


def degree_at_zero(v_fn, sphere: BoundarySphere, n: int, h: float | None = None) -> int:
    value = degree_value(v_fn, sphere, n, h)
    k = int(round(value.real))
    residual = abs(value - k)
    if residual >= DEGREE_RESIDUAL:
        raise NumericalFailure(f"non-integral degree {value:.6g} (sphere too coarse or crosses zero set)")
    return k


# ---------------------------------------------------------------------------
# bundle data and overlap checks


@dataclass
class BundleSpec:
    """Rank, field and transition functions of a bundle over an atlas.

    ``transition(src, dst, points)`` maps frame components in chart ``src`` to
    those in chart ``dst`` at points given in ``src`` coordinates.
    """

    atlas: Atlas
    rank: int
    field: str
    transition: Callable
    fiber_metric: Callable | None = None
    ranks: tuple[int, int] | None = None

    def __post_init__(self):
        if self.field not in ("real", "complex"):
            raise ConfigurationError(f"fiber field must be real or complex, got {self.field!r}")
        if self.ranks is not None and sum(self.ranks) != self.rank:
            raise ConfigurationError("graded ranks must add up to the bundle rank")

    def overlap_points(self, src, dst) -> np.ndarray:
        """Nodes of ``src`` that also lie in the support of the partition of ``dst``."""
        chart = self.atlas.chart(src)
        pts = chart.nodes[self.atlas.supported_nodes(src)]
        coords, ok = self.atlas.from_physical(dst, self.atlas.to_physical(src, pts))
        psi = np.where(ok, self.atlas.partition(dst, np.where(ok[:, None], coords, 0.0)), 0.0)
        return pts[psi > 0]

    def cocycle_error(self, a, b, c) -> float:
        pts = self.overlap_points(a, b)
        if len(pts) == 0:
            return 0.0
        pb, _ = self.atlas.transition(a, b, pts)
        g_ab = self.transition(a, b, pts)
        g_bc = self.transition(b, c, pb)
        g_ac = self.transition(a, c, pts)
        return float(np.max(np.abs(g_bc @ g_ab - g_ac)))

    def connection_error(self, connection: Connection, src, dst, steps: Steps) -> float:
        """max |omega_src - (g^-1 omega_dst(g) g + g^-1 dg)| over the overlap, in src coordinates."""
        pts = self.overlap_points(src, dst)
        if len(pts) == 0:
            return 0.0
        a_src = connection.form(src, pts)
        pd, jac = self.atlas.transition(src, dst, pts)
        a_dst = connection.form(dst, pd)  # components along dst axes
        a_dst_pulled = np.einsum("mlk,mlab->mkab", jac, a_dst)
        g = self.transition(src, dst, pts)
        gi = np.linalg.inv(g)
        dg = stencil_derivative(lambda p: self.transition(src, dst, p), pts, resolve_step(steps, src))
        expected = gi[:, None] @ a_dst_pulled @ g[:, None] + gi[:, None] @ dg
        return float(np.max(np.abs(a_src - expected)))


def exterior_power_matrix(model_basis: Sequence[tuple[int, ...]], frame_change: np.ndarray) -> np.ndarray:
    """Lambda(O) in the exterior basis: entries det O[I, J] (batched over leading axes)."""
    size = len(model_basis)
    out = np.zeros(frame_change.shape[:-2] + (size, size))
    for a, i_idx in enumerate(model_basis):
        for b, j_idx in enumerate(model_basis):
            if len(i_idx) != len(j_idx):
                continue
            if not i_idx:
                out[..., a, b] = 1.0
            else:
                out[..., a, b] = np.linalg.det(frame_change[..., list(i_idx), :][..., list(j_idx)])
    return out


def sample_graded_ch(connections: Sequence[Connection], atlas: Atlas, chunk: int = 2048) -> list[dict]:
    """Top coefficients of ch for several connections in one pass over the nodes."""
    def fn(cid, pts):
        return np.stack([connection_ch(c, cid, pts).top() for c in connections], axis=1)

    stacked = sample_on_atlas(fn, atlas, chunk)
    return [{cid: arr[:, k] for cid, arr in stacked.items()} for k in range(len(connections))]
