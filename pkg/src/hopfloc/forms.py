"""Alternating forms on grids and point sets.

A :class:`Form` stores one coefficient array per increasing multi-index.  The
arrays share a common *base shape* (a grid, or a flat batch of points) and an
optional trailing *value shape* ``(r, r)`` for matrix-valued forms.  Only the
multi-indices that are present are materialized.

All coefficients are complex.  Exterior derivatives are centered finite
differences (2nd or 4th order), either along the axes of a regular grid
(:func:`exterior_derivative`) or by sampling an analytic field on shifted
copies of a point set (:func:`stencil_derivative`).  The two agree bitwise in
the grid interior up to round-off in the shifted coordinates.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolation

MultiIndex = tuple[int, ...]

# centered first-derivative stencils: offsets -> weights
CENTERED = {
    2: ((-1, 1), (-0.5, 0.5)),
    4: ((-2, -1, 1, 2), (1.0 / 12.0, -2.0 / 3.0, 2.0 / 3.0, -1.0 / 12.0)),
}
# one-sided stencils for node k from the edge (k = 0, 1, ...), same order
_EDGE = {
    2: [((0, 1, 2), (-1.5, 2.0, -0.5))],
    4: [
        ((0, 1, 2, 3, 4), (-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25)),
        ((-1, 0, 1, 2, 3), (-0.25, -5.0 / 6.0, 1.5, -0.5, 1.0 / 12.0)),
    ],
}


def multi_indices(dim: int, degree: int) -> list[MultiIndex]:
    """Increasing multi-indices of ``degree`` drawn from ``range(dim)``."""
    if degree < 0 or degree > dim:
        return []
    return list(itertools.combinations(range(dim), degree))


def merge(left: MultiIndex, right: MultiIndex) -> tuple[int, MultiIndex]:
    """Sign and sorted index of ``dx^left ^ dx^right`` (sign 0 if they overlap)."""
    if set(left) & set(right):
        return 0, ()
    seq = list(left) + list(right)
    inversions = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return (-1) ** inversions, tuple(sorted(seq))


@dataclass(frozen=True)
class GridSpec:
    """Regular tensor grid: node counts, spacings and periodicity per axis."""

    shape: tuple[int, ...]
    spacing: tuple[float, ...]
    periodic: tuple[bool, ...]

    @property
    def dim(self) -> int:
        return len(self.shape)


class Form:
    """A (possibly mixed-degree) form with scalar or square-matrix coefficients."""

    __slots__ = ("dim", "components", "value_shape", "base_shape", "grid")

    def __init__(
        self,
        dim: int,
        components: Mapping[MultiIndex, np.ndarray],
        value_shape: tuple[int, ...] = (),
        base_shape: tuple[int, ...] | None = None,
        grid: GridSpec | None = None,
    ):
        self.dim = dim
        self.value_shape = tuple(value_shape)
        self.grid = grid
        comps: dict[MultiIndex, np.ndarray] = {}
        for idx, arr in components.items():
            idx = tuple(idx)
            if list(idx) != sorted(set(idx)) or (idx and (idx[0] < 0 or idx[-1] >= dim)):
                raise ConfigurationError(f"multi-index {idx} is not increasing in range({dim})")
            comps[idx] = np.asarray(arr, dtype=complex)
        if base_shape is None:
            if grid is not None:
                base_shape = grid.shape
            elif comps:
                first = next(iter(comps.values()))
                base_shape = first.shape[: first.ndim - len(self.value_shape)]
            else:
                base_shape = ()
        self.base_shape = tuple(base_shape)
        want = self.base_shape + self.value_shape
        for idx, arr in comps.items():
            if arr.shape != want:
                raise ConfigurationError(f"component {idx} has shape {arr.shape}, expected {want}")
        self.components = comps

    # construction helpers -------------------------------------------------
    @classmethod
    def zero(cls, dim, base_shape=(), value_shape=(), grid=None) -> "Form":
        return cls(dim, {}, value_shape, base_shape, grid)

    @classmethod
    def function(cls, dim: int, values, grid: GridSpec | None = None, value_shape=()) -> "Form":
        """0-form with the given coefficient array."""
        values = np.asarray(values, dtype=complex)
        base = values.shape[: values.ndim - len(value_shape)]
        return cls(dim, {(): values}, value_shape, base, grid)

    @classmethod
    def identity(cls, dim: int, rank: int, base_shape=(), grid=None) -> "Form":
        eye = np.broadcast_to(np.eye(rank, dtype=complex), tuple(base_shape) + (rank, rank)).copy()
        return cls(dim, {(): eye}, (rank, rank), base_shape, grid)

    @classmethod
    def from_axes(cls, values: np.ndarray, value_shape=(), grid=None) -> "Form":
        """1-form from an array whose axis ``-1 - len(value_shape)`` runs over dx^k."""
        values = np.asarray(values, dtype=complex)
        k_axis = values.ndim - len(value_shape) - 1
        dim = values.shape[k_axis]
        comps = {(k,): np.take(values, k, axis=k_axis) for k in range(dim)}
        base = values.shape[:k_axis]
        return cls(dim, comps, value_shape, base, grid)

    # inspection -------------------------------------------------------------
    @property
    def is_matrix(self) -> bool:
        return len(self.value_shape) == 2

    @property
    def rank(self) -> int | None:
        return self.value_shape[0] if self.is_matrix else None

    @property
    def degrees(self) -> set[int]:
        return {len(idx) for idx in self.components}

    @property
    def degree(self) -> int:
        degs = self.degrees
        if len(degs) != 1:
            raise ContractViolation(f"form has mixed degrees {sorted(degs)}")
        return degs.pop()

    def component(self, idx: Sequence[int]) -> np.ndarray:
        idx = tuple(idx)
        if idx in self.components:
            return self.components[idx]
        return np.zeros(self.base_shape + self.value_shape, dtype=complex)

    def part(self, degree: int) -> "Form":
        comps = {i: a for i, a in self.components.items() if len(i) == degree}
        return Form(self.dim, comps, self.value_shape, self.base_shape, self.grid)

    def top(self) -> np.ndarray:
        """Coefficient of dx^0 ^ ... ^ dx^(dim-1)."""
        return self.component(tuple(range(self.dim)))

    def max_abs(self) -> float:
        if not self.components:
            return 0.0
        return max(float(np.max(np.abs(a))) if a.size else 0.0 for a in self.components.values())

    def restrict(self, selector) -> "Form":
        """Index every coefficient array by ``selector`` over the base axes."""
        comps = {i: a[selector] for i, a in self.components.items()}
        base = np.empty(self.base_shape, dtype=bool)[selector].shape
        return Form(self.dim, comps, self.value_shape, base, None)

    def map_values(self, fn: Callable[[np.ndarray], np.ndarray], value_shape=None) -> "Form":
        comps = {i: fn(a) for i, a in self.components.items()}
        vs = self.value_shape if value_shape is None else tuple(value_shape)
        return Form(self.dim, comps, vs, self.base_shape, self.grid)

    # arithmetic ---------------------------------------------------------------
    def _check_compatible(self, other: "Form"):
        if self.dim != other.dim:
            raise ConfigurationError(f"dimension mismatch {self.dim} vs {other.dim}")
        if self.base_shape != other.base_shape:
            raise ConfigurationError(f"forms live on different grids {self.base_shape} vs {other.base_shape}")
        if self.grid is not None and other.grid is not None and self.grid != other.grid:
            raise ConfigurationError("forms live on different grids")

    def __add__(self, other: "Form") -> "Form":
        self._check_compatible(other)
        if self.value_shape != other.value_shape:
            raise ConfigurationError(f"value shapes differ: {self.value_shape} vs {other.value_shape}")
        comps = dict(self.components)
        for idx, arr in other.components.items():
            comps[idx] = comps[idx] + arr if idx in comps else arr
        return Form(self.dim, comps, self.value_shape, self.base_shape, self.grid or other.grid)

    def __neg__(self) -> "Form":
        return self.map_values(np.negative)

    def __sub__(self, other: "Form") -> "Form":
        return self + (-other)

    def scale(self, factor) -> "Form":
        """Multiply by a number or by a base-shaped scalar field."""
        factor = np.asarray(factor)
        if factor.ndim:
            factor = factor.reshape(factor.shape + (1,) * len(self.value_shape))
        return self.map_values(lambda a: a * factor)

    def __mul__(self, factor) -> "Form":
        return self.scale(factor)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        kind = f"matrix{self.value_shape}" if self.value_shape else "scalar"
        return f"Form(dim={self.dim}, degrees={sorted(self.degrees)}, {kind}, base={self.base_shape})"


def _product(a: np.ndarray, b: np.ndarray, a_mat: bool, b_mat: bool) -> np.ndarray:
    if a_mat and b_mat:
        return a @ b
    if a_mat:
        return a * b[..., None, None]
    if b_mat:
        return a[..., None, None] * b
    return a * b


def wedge(a: Form, b: Form) -> Form:
    """Exterior product; matrix coefficients multiply as matrices (a on the left)."""
    a._check_compatible(b)
    if a.is_matrix and b.is_matrix and a.value_shape[1] != b.value_shape[0]:
        raise ConfigurationError(f"matrix sizes {a.value_shape} and {b.value_shape} do not compose")
    value_shape = a.value_shape or b.value_shape
    if a.is_matrix and b.is_matrix:
        value_shape = (a.value_shape[0], b.value_shape[1])
    out: dict[MultiIndex, np.ndarray] = {}
    for i, ai in a.components.items():
        for j, bj in b.components.items():
            sign, k = merge(i, j)
            if sign == 0:
                continue
            term = _product(ai, bj, a.is_matrix, b.is_matrix)
            if k in out:
                if sign > 0:
                    out[k] += term
                else:
                    out[k] -= term
            else:
                out[k] = term if sign > 0 else -term
    return Form(a.dim, out, value_shape, a.base_shape, a.grid or b.grid)


def wedge_power(a: Form, k: int) -> Form:
    """``a ^ a ^ ... ^ a`` (k factors); k = 0 gives the unit 0-form."""
    if k == 0:
        if a.is_matrix:
            return Form.identity(a.dim, a.rank, a.base_shape, a.grid)
        return Form.function(a.dim, np.ones(a.base_shape, dtype=complex), a.grid)
    out = a
    for _ in range(k - 1):
        out = wedge(out, a)
    return out


# ---------------------------------------------------------------------------
# finite differences


def _check_order(order: int):
    if order not in CENTERED:
        raise ConfigurationError(f"unsupported stencil order {order}; use 2 or 4")


def derivative(values: np.ndarray, axis: int, h: float, order: int = 4, periodic: bool = False) -> np.ndarray:
    """Finite-difference derivative along ``axis`` of a sampled array."""
    _check_order(order)
    n = values.shape[axis]
    offsets, weights = CENTERED[order]
    if n < len(offsets) + 1:
        raise ConfigurationError(f"grid axis of {n} nodes is too coarse for the order-{order} stencil")
    values = np.moveaxis(np.asarray(values, dtype=complex), axis, 0)
    out = np.zeros_like(values)
    if periodic:
        for off, w in zip(offsets, weights):
            out += w * np.roll(values, -off, axis=0)
    else:
        reach = max(offsets)
        for off, w in zip(offsets, weights):
            out[reach : n - reach] += w * values[reach + off : n - reach + off]
        for k, (offs, ws) in enumerate(_EDGE[order]):
            out[k] = sum(w * values[k + o] for o, w in zip(offs, ws))
            out[n - 1 - k] = -sum(w * values[n - 1 - k - o] for o, w in zip(offs, ws))
    return np.moveaxis(out / h, 0, axis)


def exterior_derivative(f: Form, order: int = 4) -> Form:
    """d of a form sampled on a regular grid (``f.grid`` must be set)."""
    if f.grid is None:
        raise ConfigurationError("exterior_derivative needs a form sampled on a GridSpec")
    grid = f.grid
    out: dict[MultiIndex, np.ndarray] = {}
    for idx, arr in f.components.items():
        if len(idx) >= f.dim:
            continue
        for k in range(f.dim):
            if k in idx:
                continue
            sign, new = merge((k,), idx)
            dk = derivative(arr, k, grid.spacing[k], order, grid.periodic[k])
            if new in out:
                out[new] += sign * dk
            else:
                out[new] = sign * dk
    return Form(f.dim, out, f.value_shape, f.base_shape, grid)


def stencil_derivative(
    fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, h: float | Sequence[float], order: int = 4
) -> np.ndarray:
    """Partial derivatives of an analytic field at ``points`` (shape (m, dim)).

    Returns an array of shape ``(m, dim) + value_shape`` where the second axis
    runs over the coordinate direction of the derivative.
    """
    _check_order(order)
    points = np.asarray(points, dtype=float)
    dim = points.shape[1]
    hs = np.broadcast_to(np.asarray(h, dtype=float), (dim,))
    offsets, weights = CENTERED[order]
    parts = []
    for k in range(dim):
        acc = None
        for off, w in zip(offsets, weights):
            shifted = points.copy()
            shifted[:, k] += off * hs[k]
            term = w * np.asarray(fn(shifted), dtype=complex)
            acc = term if acc is None else acc + term
        parts.append(acc / hs[k])
    return np.stack(parts, axis=1)


def differential_of(fn, points, h, order: int = 4, value_shape=()) -> Form:
    """The 1-form d(fn) at ``points`` via :func:`stencil_derivative`."""
    grad = stencil_derivative(fn, points, h, order)
    return Form.from_axes(grad, value_shape)


def stencil_exterior_derivative(
    fn: Callable[[np.ndarray], Form], points: np.ndarray, h: float | Sequence[float], order: int = 4
) -> Form:
    """d of a form given as an analytic function of the points, by centered differences."""
    _check_order(order)
    points = np.asarray(points, dtype=float)
    m, dim = points.shape
    hs = np.broadcast_to(np.asarray(h, dtype=float), (dim,))
    offsets, weights = CENTERED[order]
    out: dict[MultiIndex, np.ndarray] = {}
    value_shape = None
    for k in range(dim):
        partial: dict[MultiIndex, np.ndarray] = {}
        for off, w in zip(offsets, weights):
            shifted = points.copy()
            shifted[:, k] += off * hs[k]
            form = fn(shifted)
            value_shape = form.value_shape
            for idx, arr in form.components.items():
                partial[idx] = partial[idx] + w * arr if idx in partial else w * arr
        for idx, arr in partial.items():
            if k in idx:
                continue
            sign, new = merge((k,), idx)
            term = (sign / hs[k]) * arr
            out[new] = out[new] + term if new in out else term
    return Form(dim, out, value_shape or (), (m,), None)


# ---------------------------------------------------------------------------
# exponential series and traces


def matrix_exp_form(omega: Form) -> Form:
    """Finite series ``sum_k omega^k / k!`` of a nilpotent even matrix form."""
    if not omega.is_matrix:
        raise ConfigurationError("matrix_exp_form expects a matrix-valued form")
    degrees = omega.degrees
    if 0 in degrees:
        raise ContractViolation("degree-0 part present; split it off before exponentiating")
    if any(d % 2 for d in degrees):
        raise ContractViolation("matrix_exp_form expects even degrees only")
    result = Form.identity(omega.dim, omega.rank, omega.base_shape, omega.grid)
    if not degrees:
        return result
    term = Form.identity(omega.dim, omega.rank, omega.base_shape, omega.grid)
    for k in range(1, omega.dim // min(degrees) + 1):
        term = wedge(term, omega).scale(1.0 / k)
        if not term.components:
            break
        result = result + term
    return result


@dataclass(frozen=True)
class GradingTag:
    """A Z2-grading given by complementary projectors."""

    projector_plus: np.ndarray
    projector_minus: np.ndarray

    def __post_init__(self):
        p, m = np.asarray(self.projector_plus, complex), np.asarray(self.projector_minus, complex)
        if p.shape != m.shape or p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ConfigurationError("grading projectors must be square and of equal size")
        eye = np.eye(p.shape[0])
        tol = 1e-12 * max(1, p.shape[0])
        if (
            np.abs(p + m - eye).max() > tol
            or np.abs(p @ p - p).max() > tol
            or np.abs(m @ m - m).max() > tol
            or np.abs(p @ m).max() > tol
        ):
            raise ConfigurationError("grading projectors are not complementary idempotents")
        object.__setattr__(self, "projector_plus", p)
        object.__setattr__(self, "projector_minus", m)

    @classmethod
    def from_ranks(cls, r_plus: int, r_minus: int) -> "GradingTag":
        d = np.concatenate([np.ones(r_plus), np.zeros(r_minus)])
        return cls(np.diag(d), np.diag(1 - d))

    @property
    def size(self) -> int:
        return self.projector_plus.shape[0]

    @property
    def involution(self) -> np.ndarray:
        return self.projector_plus - self.projector_minus

    @property
    def ranks(self) -> tuple[int, int]:
        return int(round(np.trace(self.projector_plus).real)), int(round(np.trace(self.projector_minus).real))


def _trace_with(weight: np.ndarray | None, arr: np.ndarray) -> np.ndarray:
    if weight is None:
        return np.trace(arr, axis1=-2, axis2=-1)
    return np.einsum("ij,...ji->...", weight, arr)


def trace(a: Form) -> Form:
    if not a.is_matrix:
        raise ConfigurationError("trace of a scalar form")
    return a.map_values(lambda arr: _trace_with(None, arr), value_shape=())


def supertrace(a: Form, grading: GradingTag) -> Form:
    """tr(P+ A) - tr(P- A), componentwise."""
    if not a.is_matrix or a.rank != grading.size:
        raise ConfigurationError(f"projector dimension {grading.size} does not match form values {a.value_shape}")
    s = grading.involution
    return a.map_values(lambda arr: _trace_with(s, arr), value_shape=())


def trace_wedge(a: Form, b: Form) -> Form:
    """tr(a ^ b) without materializing the matrix product."""
    a._check_compatible(b)
    out: dict[MultiIndex, np.ndarray] = {}
    for i, ai in a.components.items():
        for j, bj in b.components.items():
            sign, k = merge(i, j)
            if sign == 0:
                continue
            term = np.einsum("...ij,...ji->...", ai, bj)
            out[k] = out[k] + sign * term if k in out else sign * term
    return Form(a.dim, out, (), a.base_shape, a.grid or b.grid)


def trace_exp(omega: Form) -> Form:
    """tr exp(omega) for a nilpotent even matrix form, using cheap final contractions."""
    if 0 in omega.degrees:
        raise ContractViolation("degree-0 part present; split it off before exponentiating")
    rank = omega.rank
    result = Form.function(omega.dim, np.full(omega.base_shape, rank, dtype=complex), omega.grid)
    if not omega.components:
        return result
    kmax = omega.dim // min(omega.degrees)
    result = result + trace(omega)
    power = omega
    for k in range(2, kmax + 1):
        contribution = trace_wedge(power, omega).scale(1.0 / math.factorial(k))
        if not contribution.components:
            break
        result = result + contribution
        if k < kmax:
            power = wedge(power, omega)
    return result


def total(values: Iterable[complex]) -> complex:
    """Order-independent sum of partial results (exactly rounded per part)."""
    vals = [complex(v) for v in values]
    return complex(math.fsum(v.real for v in vals), math.fsum(v.imag for v in vals))


def pairwise_sum(arr: np.ndarray) -> complex:
    """Deterministic pairwise reduction of a flat array."""
    flat = np.ascontiguousarray(np.asarray(arr, dtype=complex).ravel())
    return complex(np.add.reduce(flat.real) + 1j * np.add.reduce(flat.imag))
