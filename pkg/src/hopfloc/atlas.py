"""Chart atlases for the scenario manifolds, quadrature, and an Euler-characteristic oracle.

Three manifolds are provided: the flat torus T^(2k) (one periodic chart), the
round unit sphere S^2 (two stereographic charts glued along an equatorial band)
and products of atlases (used for S^2 x S^2).  Every atlas supplies, per chart:
node grids with product quadrature weights, a partition of unity, the metric in
coordinates, an orthonormal frame, and the Levi-Civita connection written in
that frame.  Integrands are sampled chunk by chunk on the nodes where the
partition of unity is nonzero.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Hashable, Iterator, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolation
from .forms import Form, GridSpec, multi_indices, total

DEFAULT_CHUNK = 2048


# ---------------------------------------------------------------------------
# smooth steps


def smoothstep(t: np.ndarray) -> np.ndarray:
    """Quintic step: 0 for t <= 0, 1 for t >= 1, C^2 in between."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))


def flat_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step built from exp(-1/t); satisfies flat_step(1 - t) = 1 - flat_step(t)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def smoothstep_slope(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    tc = np.clip(t, 0.0, 1.0)
    return np.where(inside, 30.0 * tc * tc * (1.0 - tc) ** 2, 0.0)


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class ChartGrid:
    """A coordinate box sampled on a tensor grid with product quadrature weights."""

    chart_id: Hashable
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    resolution: tuple[int, ...]
    periodic: tuple[bool, ...]

    def __post_init__(self):
        if not (len(self.lower) == len(self.upper) == len(self.resolution) == len(self.periodic)):
            raise ConfigurationError("chart box, resolution and periodicity must have equal length")
        for lo, hi, n in zip(self.lower, self.upper, self.resolution):
            if not hi > lo:
                raise ConfigurationError(f"empty parameter box [{lo}, {hi}]")
            if n < 5:
                raise ConfigurationError(f"resolution {n} is too coarse for the finite-difference stencils")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @cached_property
    def axes(self) -> list[np.ndarray]:
        out = []
        for lo, hi, n, per in zip(self.lower, self.upper, self.resolution, self.periodic):
            if per:
                out.append(lo + (hi - lo) * np.arange(n) / n)
            else:
                out.append(np.linspace(lo, hi, n))
        return out

    @cached_property
    def spacing(self) -> tuple[float, ...]:
        return tuple(
            (hi - lo) / (n if per else n - 1)
            for lo, hi, n, per in zip(self.lower, self.upper, self.resolution, self.periodic)
        )

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.resolution)

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.shape, self.spacing, tuple(self.periodic))

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    @cached_property
    def nodes(self) -> np.ndarray:
        """All nodes, shape (size, dim), in C order of the grid."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def weights(self) -> np.ndarray:
        """Product trapezoid weights (exact rectangle rule on periodic axes), shape = grid."""
        per_axis = []
        for n, h, per in zip(self.resolution, self.spacing, self.periodic):
            w = np.full(n, h)
            if not per:
                w[0] = w[-1] = h / 2
            per_axis.append(w)
        out = per_axis[0]
        for w in per_axis[1:]:
            out = np.multiply.outer(out, w)
        return out

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    def contains(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        points = np.atleast_2d(points)
        ok = np.ones(len(points), dtype=bool)
        for k in range(self.dim):
            if not self.periodic[k]:
                ok &= (points[:, k] >= self.lower[k] + margin) & (points[:, k] <= self.upper[k] - margin)
        return ok


# ---------------------------------------------------------------------------
# atlases


class Atlas:
    """Base class: a closed oriented manifold covered by coordinate charts."""

    name = "atlas"

    def __init__(self, charts: Sequence[ChartGrid]):
        self.charts = list(charts)
        self._by_id = {c.chart_id: c for c in self.charts}
        dims = {c.dim for c in self.charts}
        if len(dims) != 1:
            raise ConfigurationError("all charts must have the same dimension")
        self.dim = dims.pop()

    def chart(self, chart_id) -> ChartGrid:
        return self._by_id[chart_id]

    @property
    def chart_ids(self) -> list:
        return [c.chart_id for c in self.charts]

    # geometry supplied by subclasses --------------------------------------
    def orientation(self, chart_id) -> int:
        return 1

    def partition(self, chart_id, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def metric(self, chart_id, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def frame(self, chart_id, points: np.ndarray) -> np.ndarray:
        """Orthonormal frame; column i is e_i in coordinate components, shape (m, dim, dim)."""
        raise NotImplementedError

    def levi_civita(self, chart_id, points: np.ndarray) -> np.ndarray:
        """so(dim)-valued connection 1-form in the chart frame, shape (m, dim_axes, dim, dim).

        Convention: nabla e_j = sum_i omega[i, j] e_i, so frame components obey
        nabla s = ds + omega s and R = d omega + omega ^ omega.
        """
        raise NotImplementedError

    def to_physical(self, chart_id, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def from_physical(self, chart_id, phys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Chart coordinates of physical points and a mask of points the chart box covers."""
        raise NotImplementedError

    def random_physical(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def transition(self, src, dst, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates in ``dst`` and the Jacobian d(dst)/d(src) at ``points`` of ``src``."""
        phys = self.to_physical(src, points)
        coords, _ = self.from_physical(dst, phys)
        fn = lambda p: self.from_physical(dst, self.to_physical(src, p))[0]  # noqa: E731
        from .forms import stencil_derivative

        jac = stencil_derivative(fn, points, 1e-4).real  # (m, src axis, dst coord)
        return coords, np.swapaxes(jac, 1, 2)

    def frame_transition(self, src, dst, points: np.ndarray) -> np.ndarray:
        """Matrix taking orthonormal-frame components in ``src`` to those in ``dst``."""
        _, jac = self.transition(src, dst, points)
        coords_dst, _ = self.transition(src, dst, points)
        e_src = self.frame(src, points)
        e_dst = self.frame(dst, coords_dst)
        return np.linalg.solve(e_dst, jac @ e_src)

    def volume_density(self, chart_id, points: np.ndarray) -> np.ndarray:
        return np.sqrt(np.linalg.det(self.metric(chart_id, points)))

    # sampling ----------------------------------------------------------------
    def supported_nodes(self, chart_id) -> np.ndarray:
        """Flat indices of chart nodes where the partition of unity is nonzero."""
        chart = self.chart(chart_id)
        psi = self.partition(chart_id, chart.nodes)
        return np.flatnonzero(psi > 0.0)

    def iter_chunks(self, chart_id, chunk: int = DEFAULT_CHUNK, all_nodes: bool = False) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        chart = self.chart(chart_id)
        idx = np.arange(chart.size) if all_nodes else self.supported_nodes(chart_id)
        for start in range(0, len(idx), chunk):
            sel = idx[start : start + chunk]
            yield sel, chart.nodes[sel]

    def quadrature(self, chart_id) -> np.ndarray:
        """partition * orientation * weight at every node, flattened."""
        chart = self.chart(chart_id)
        return self.orientation(chart_id) * self.partition(chart_id, chart.nodes) * chart.weights.ravel()


class TorusAtlas(Atlas):
    """Flat unit torus R^d / Z^d in one periodic chart."""

    def __init__(self, dim: int = 2, resolution: int = 32):
        self.name = f"t{dim}"
        chart = ChartGrid("T", (0.0,) * dim, (1.0,) * dim, (resolution,) * dim, (True,) * dim)
        super().__init__([chart])

    def partition(self, chart_id, points):
        return np.ones(len(points))

    def metric(self, chart_id, points):
        return np.broadcast_to(np.eye(self.dim), (len(points), self.dim, self.dim)).copy()

    def frame(self, chart_id, points):
        return self.metric(chart_id, points)

    def levi_civita(self, chart_id, points):
        return np.zeros((len(points), self.dim, self.dim, self.dim))

    def to_physical(self, chart_id, points):
        return np.mod(points, 1.0)

    def from_physical(self, chart_id, phys):
        return np.mod(phys, 1.0), np.ones(len(phys), dtype=bool)

    def random_physical(self, rng, count):
        return rng.random((count, self.dim))

    def transition(self, src, dst, points):
        return np.mod(points, 1.0), np.broadcast_to(np.eye(self.dim), (len(points), self.dim, self.dim)).copy()


class SphereAtlas(Atlas):
    """Unit round S^2 with stereographic charts ``N`` (z) and ``S`` (w = 1/z).

    Chart ``N`` projects from the south pole, so the north pole sits at its
    origin; chart ``S`` is the mirror image with holomorphic transition w = 1/z.
    Each chart box is [-L, L]^2.  The partition of unity is a C-infinity step in
    log|z| switching between |z| = 1/L and |z| = L, so it sums to one exactly and
    the trapezoid rule on the chart boxes converges spectrally.
    """

    name = "s2"

    def __init__(self, resolution: int = 96, overlap: float = 1.5):
        if overlap <= 1.0:
            raise ConfigurationError("overlap radius must exceed 1")
        self.overlap = overlap
        box = ((-overlap, -overlap), (overlap, overlap))
        charts = [ChartGrid(c, box[0], box[1], (resolution, resolution), (False, False)) for c in ("N", "S")]
        super().__init__(charts)

    @staticmethod
    def conformal_factor(points: np.ndarray) -> np.ndarray:
        r2 = np.sum(points * points, axis=-1)
        return 2.0 / (1.0 + r2)

    def partition(self, chart_id, points):
        r = np.hypot(points[:, 0], points[:, 1])
        delta = math.log(self.overlap)
        with np.errstate(divide="ignore"):
            t = (np.log(r) + delta) / (2 * delta)
        return 1.0 - flat_step(t)

    def metric(self, chart_id, points):
        phi2 = self.conformal_factor(points) ** 2
        return phi2[:, None, None] * np.eye(2)

    def frame(self, chart_id, points):
        return (1.0 / self.conformal_factor(points))[:, None, None] * np.eye(2)

    def levi_civita(self, chart_id, points):
        x, y = points[:, 0], points[:, 1]
        q = 1.0 + x * x + y * y
        # omega^1_2 = u_y dx - u_x dy with u = log(2 / (1 + r^2))
        w12 = np.stack([-2.0 * y / q, 2.0 * x / q], axis=1)
        out = np.zeros((len(points), 2, 2, 2))
        out[:, :, 0, 1] = w12
        out[:, :, 1, 0] = -w12
        return out

    def to_physical(self, chart_id, points):
        x, y = points[:, 0], points[:, 1]
        r2 = x * x + y * y
        X, Y, Z = 2 * x / (1 + r2), 2 * y / (1 + r2), (1 - r2) / (1 + r2)
        if chart_id == "S":
            Y, Z = -Y, -Z
        return np.stack([X, Y, Z], axis=1)

    def from_physical(self, chart_id, phys):
        X, Y, Z = phys[:, 0], phys[:, 1], phys[:, 2]
        if chart_id == "S":
            Y, Z = -Y, -Z
        with np.errstate(divide="ignore", invalid="ignore"):
            coords = np.stack([X / (1 + Z), Y / (1 + Z)], axis=1)
        ok = np.all(np.isfinite(coords), axis=1)
        ok &= self.chart(chart_id).contains(np.where(ok[:, None], coords, 0.0)) & ok
        return coords, ok

    def random_physical(self, rng, count):
        v = rng.normal(size=(count, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def transition(self, src, dst, points):
        if src == dst:
            return points.copy(), np.broadcast_to(np.eye(2), (len(points), 2, 2)).copy()
        x, y = points[:, 0], points[:, 1]
        r2 = x * x + y * y
        coords = np.stack([x / r2, -y / r2], axis=1)
        # derivative of the holomorphic map z -> 1/z: multiplication by -1/z^2
        a = (y * y - x * x) / r2**2
        b = 2 * x * y / r2**2
        jac = np.empty((len(points), 2, 2))
        jac[:, 0, 0], jac[:, 0, 1] = a, -b
        jac[:, 1, 0], jac[:, 1, 1] = b, a
        return coords, jac


class ProductAtlas(Atlas):
    """Product of two atlases with product charts, weights and partitions."""

    def __init__(self, first: Atlas, second: Atlas):
        self.first, self.second = first, second
        self.name = f"{first.name}x{second.name}"
        self._split = first.dim
        charts = []
        for a, b in itertools.product(first.charts, second.charts):
            charts.append(
                ChartGrid(
                    (a.chart_id, b.chart_id),
                    a.lower + b.lower,
                    a.upper + b.upper,
                    a.resolution + b.resolution,
                    a.periodic + b.periodic,
                )
            )
        super().__init__(charts)

    def _halves(self, points):
        return points[:, : self._split], points[:, self._split :]

    def orientation(self, chart_id):
        return self.first.orientation(chart_id[0]) * self.second.orientation(chart_id[1])

    def partition(self, chart_id, points):
        p, q = self._halves(points)
        return self.first.partition(chart_id[0], p) * self.second.partition(chart_id[1], q)

    def _block(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        m, da, db = len(a), a.shape[-1], b.shape[-1]
        out = np.zeros((m, da + db, da + db), dtype=np.result_type(a, b))
        out[:, :da, :da] = a
        out[:, da:, da:] = b
        return out

    def metric(self, chart_id, points):
        p, q = self._halves(points)
        return self._block(self.first.metric(chart_id[0], p), self.second.metric(chart_id[1], q))

    def frame(self, chart_id, points):
        p, q = self._halves(points)
        return self._block(self.first.frame(chart_id[0], p), self.second.frame(chart_id[1], q))

    def levi_civita(self, chart_id, points):
        p, q = self._halves(points)
        wa = self.first.levi_civita(chart_id[0], p)
        wb = self.second.levi_civita(chart_id[1], q)
        m, da, db = len(points), self.first.dim, self.second.dim
        out = np.zeros((m, da + db, da + db, da + db))
        out[:, :da, :da, :da] = wa
        out[:, da:, da:, da:] = wb
        return out

    def to_physical(self, chart_id, points):
        p, q = self._halves(points)
        return np.concatenate([self.first.to_physical(chart_id[0], p), self.second.to_physical(chart_id[1], q)], axis=1)

    def _phys_split(self):
        probe = self.first.to_physical(self.first.chart_ids[0], np.zeros((1, self.first.dim)))
        return probe.shape[1]

    def from_physical(self, chart_id, phys):
        k = self._phys_split()
        ca, oka = self.first.from_physical(chart_id[0], phys[:, :k])
        cb, okb = self.second.from_physical(chart_id[1], phys[:, k:])
        return np.concatenate([ca, cb], axis=1), oka & okb

    def random_physical(self, rng, count):
        return np.concatenate([self.first.random_physical(rng, count), self.second.random_physical(rng, count)], axis=1)

    def transition(self, src, dst, points):
        p, q = self._halves(points)
        ca, ja = self.first.transition(src[0], dst[0], p)
        cb, jb = self.second.transition(src[1], dst[1], q)
        return np.concatenate([ca, cb], axis=1), self._block(ja, jb)


def sphere_product(resolution: int = 24, overlap: float = 1.5) -> ProductAtlas:
    s = SphereAtlas(resolution, overlap)
    return ProductAtlas(s, SphereAtlas(resolution, overlap))


# ---------------------------------------------------------------------------
# integration


def sample_on_atlas(
    fn: Callable[[Hashable, np.ndarray], np.ndarray],
    atlas: Atlas,
    chunk: int = DEFAULT_CHUNK,
    all_nodes: bool = False,
) -> dict[Hashable, np.ndarray]:
    """Evaluate ``fn(chart_id, points)`` chunk-wise; unsupported nodes are left at zero.

    ``fn`` returns an array whose first axis runs over the points; the result for
    each chart has shape ``(chart.size,) + trailing``.
    """
    out: dict[Hashable, np.ndarray] = {}
    for chart in atlas.charts:
        buf = None
        for sel, pts in atlas.iter_chunks(chart.chart_id, chunk, all_nodes):
            vals = np.asarray(fn(chart.chart_id, pts))
            if buf is None:
                buf = np.zeros((chart.size,) + vals.shape[1:], dtype=vals.dtype if vals.dtype.kind == "c" else complex)
            buf[sel] = vals
        if buf is None:
            buf = np.zeros(chart.size, dtype=complex)
        out[chart.chart_id] = buf
    return out


def _top_values(omega, atlas: Atlas, chunk: int) -> dict:
    if callable(omega):
        return sample_on_atlas(lambda cid, pts: omega(cid, pts).top(), atlas, chunk)
    out = {}
    for cid, val in omega.items():
        if isinstance(val, Form):
            if val.components and atlas.dim not in val.degrees:
                raise ContractViolation(f"integrate_top_form needs a degree-{atlas.dim} form, got degrees {sorted(val.degrees)}")
            val = val.top()
        out[cid] = np.asarray(val, dtype=complex).reshape(atlas.chart(cid).size)
    return out


def integrate_region(omega, atlas: Atlas, region_mask=None, chunk: int = DEFAULT_CHUNK) -> complex:
    """Integral of a top-degree form weighted by a per-node mask in [0, 1].

    ``omega`` is either a mapping chart id -> (Form on the chart grid | array of
    top coefficients at nodes), or a callable ``(chart_id, points) -> Form``.
    ``region_mask`` is a mapping chart id -> node values or a callable of
    ``(chart_id, points)``; ``None`` means the whole manifold.
    """
    values = _top_values(omega, atlas, chunk)
    parts = []
    for chart in atlas.charts:
        cid = chart.chart_id
        q = atlas.quadrature(cid)
        vals = values[cid]
        if region_mask is None:
            m = 1.0
        else:
            m = region_mask(cid, chart.nodes) if callable(region_mask) else np.asarray(region_mask[cid]).reshape(chart.size)
            m = np.asarray(m, dtype=float)
            if np.any(m < -1e-15) or np.any(m > 1 + 1e-15):
                raise ContractViolation("region mask values must lie in [0, 1]")
        parts.append(np.sum(q * m * vals))
    return total(parts)


def integrate_top_form(omega, atlas: Atlas, chunk: int = DEFAULT_CHUNK) -> complex:
    """Integral over the whole manifold of a top-degree form (see :func:`integrate_region`)."""
    if isinstance(omega, Mapping):
        for val in omega.values():
            if isinstance(val, Form) and val.components and val.degrees != {atlas.dim}:
                raise ContractViolation(f"integrate_top_form needs a degree-{atlas.dim} form, got degrees {sorted(val.degrees)}")
    return integrate_region(omega, atlas, None, chunk)


# ---------------------------------------------------------------------------
# boundary spheres


@dataclass
class BoundarySphere:
    """Coordinate sphere of ``radius`` around ``center`` inside one chart.

    The parametrization is the angle on circles and Hopf coordinates
    (eta, alpha, beta) on 3-spheres; ``orientation`` makes the parameter order
    agree with the outward-normal-first boundary orientation.
    """

    chart: ChartGrid
    center: np.ndarray
    radius: float
    resolution: int = 256
    injectivity: float | None = None
    orientation: int = field(init=False)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        dim = self.chart.dim
        if dim not in (2, 4):
            raise ConfigurationError("boundary spheres are implemented for charts of dimension 2 and 4")
        if self.radius <= 0:
            raise ConfigurationError("sphere radius must be positive")
        if self.injectivity is not None and self.radius >= self.injectivity:
            raise ConfigurationError(f"radius {self.radius} exceeds the injectivity bound {self.injectivity}")
        lo = self.center - self.radius
        hi = self.center + self.radius
        if not (self.chart.contains(lo[None])[0] and self.chart.contains(hi[None])[0]):
            raise ConfigurationError("sphere leaves its chart")
        pts, tang, _ = self._param()
        normal = (pts[0] - self.center) / self.radius
        sign = np.linalg.det(np.column_stack([normal, tang[0]]))
        self.orientation = 1 if sign > 0 else -1

    @property
    def dim(self) -> int:
        return self.chart.dim

    def _param(self):
        r, c, n = self.radius, self.center, self.resolution
        if self.dim == 2:
            theta = 2 * np.pi * np.arange(n) / n
            pts = c + r * np.stack([np.cos(theta), np.sin(theta)], axis=1)
            tang = (r * np.stack([-np.sin(theta), np.cos(theta)], axis=1))[:, :, None]
            w = np.full(n, 2 * np.pi / n)
            return pts, tang, w
        n_eta = max(8, n // 4)
        x, wx = np.polynomial.legendre.leggauss(n_eta)
        eta = (x + 1) * np.pi / 4
        weta = wx * np.pi / 4
        ang = 2 * np.pi * np.arange(n) / n
        E, A, B = np.meshgrid(eta, ang, ang, indexing="ij")
        W = np.multiply.outer(np.multiply.outer(weta, np.full(n, 2 * np.pi / n)), np.full(n, 2 * np.pi / n))
        E, A, B, W = E.ravel(), A.ravel(), B.ravel(), W.ravel()
        ce, se, ca, sa, cb, sb = np.cos(E), np.sin(E), np.cos(A), np.sin(A), np.cos(B), np.sin(B)
        pts = c + r * np.stack([ce * ca, ce * sa, se * cb, se * sb], axis=1)
        d_eta = r * np.stack([-se * ca, -se * sa, ce * cb, ce * sb], axis=1)
        d_a = r * np.stack([-ce * sa, ce * ca, 0 * E, 0 * E], axis=1)
        d_b = r * np.stack([0 * E, 0 * E, -se * sb, se * cb], axis=1)
        tang = np.stack([d_eta, d_a, d_b], axis=2)
        return pts, tang, W

    @cached_property
    def points(self) -> np.ndarray:
        return self._param()[0]

    @cached_property
    def tangents(self) -> np.ndarray:
        """(m, dim, dim-1): columns are derivatives of the embedding along each parameter."""
        return self._param()[1]

    @cached_property
    def weights(self) -> np.ndarray:
        return self._param()[2]


def pullback_top(form: Form, tangents: np.ndarray) -> np.ndarray:
    """Coefficient of the pullback of a (dim-1)-form along the parameter frame."""
    dim = form.dim
    k = tangents.shape[2]
    out = np.zeros(form.base_shape, dtype=complex)
    for idx in multi_indices(dim, k):
        if idx not in form.components:
            continue
        minors = np.linalg.det(tangents[:, list(idx), :])
        out = out + form.components[idx] * minors
    return out


def integrate_boundary_sphere(omega: Callable[[np.ndarray], Form], sphere: BoundarySphere) -> complex:
    """Integral of a (dim-1)-form over a coordinate sphere with boundary orientation.

    ``omega`` maps an array of points (m, dim) to a :class:`Form` on those points.
    """
    form = omega(sphere.points)
    if form.components and form.degrees != {sphere.dim - 1}:
        raise ContractViolation(f"expected a degree-{sphere.dim - 1} form on the sphere")
    coeff = pullback_top(form, sphere.tangents)
    return sphere.orientation * complex(np.sum(sphere.weights * coeff))


# ---------------------------------------------------------------------------
# Euler characteristic oracle


@dataclass
class SimplicialMesh:
    """Cell counts per dimension, or explicit simplices as vertex tuples per dimension."""

    counts: tuple[int, ...] | None = None
    cells: dict[int, list[tuple[int, ...]]] | None = None

    def __post_init__(self):
        if self.cells is not None:
            normalized = {k: sorted({tuple(sorted(c)) for c in v}) for k, v in self.cells.items()}
            for k, simplices in normalized.items():
                for s in simplices:
                    if len(s) != k + 1:
                        raise ConfigurationError(f"{k}-cell {s} does not have {k + 1} vertices")
                if k == 0:
                    continue
                lower = set(normalized.get(k - 1, []))
                for s in simplices:
                    for face in itertools.combinations(s, k):
                        if face not in lower:
                            raise ConfigurationError(f"face {face} of {k}-cell {s} is missing")
            self.cells = normalized
            top = max(normalized) if normalized else -1
            self.counts = tuple(len(normalized.get(k, [])) for k in range(top + 1))
        elif self.counts is None:
            raise ConfigurationError("SimplicialMesh needs counts or cells")
        if any(c < 0 for c in self.counts):
            raise ConfigurationError("cell counts must be nonnegative")


def euler_char_oracle(mesh: SimplicialMesh) -> int:
    return int(sum((-1) ** k * c for k, c in enumerate(mesh.counts)))


def octahedron() -> SimplicialMesh:
    faces = [(a, b, c) for a in (0, 1) for b in (2, 3) for c in (4, 5)]
    edges = {e for f in faces for e in itertools.combinations(f, 2)}
    return SimplicialMesh(cells={0: [(v,) for v in range(6)], 1: sorted(edges), 2: faces})


def torus_triangulation(m: int = 3) -> SimplicialMesh:
    """m x m grid on the torus, each square split along a diagonal (m >= 3)."""
    if m < 3:
        raise ConfigurationError("torus triangulation needs m >= 3")
    v = lambda i, j: (i % m) * m + (j % m)  # noqa: E731
    faces = []
    for i in range(m):
        for j in range(m):
            faces.append((v(i, j), v(i + 1, j), v(i + 1, j + 1)))
            faces.append((v(i, j), v(i, j + 1), v(i + 1, j + 1)))
    edges = {e for f in faces for e in itertools.combinations(sorted(f), 2)}
    return SimplicialMesh(cells={0: [(k,) for k in range(m * m)], 1: sorted(edges), 2: faces})


def product_mesh(a: SimplicialMesh, b: SimplicialMesh) -> SimplicialMesh:
    """Cell counts of the product CW structure (cells are products of cells)."""
    counts = np.convolve(np.asarray(a.counts), np.asarray(b.counts))
    return SimplicialMesh(counts=tuple(int(c) for c in counts))
