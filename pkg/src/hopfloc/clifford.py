"""Signature-graded exterior algebra: Clifford generators, tau, the Lambda+/- splitting and the symbol v_K.

The model acts on the complexified exterior algebra of (R^2n)^*, with basis
e^I indexed by increasing multi-indices in lexicographic order (the empty
index first).  Generators c(e_i) = ext(e^i) - int(e_i) are integer matrices;
tau = i^n c(e_1)...c(e_2n) is a signed permutation with phases, so every
algebraic identity holds with zero floating-point error.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, LemmaViolation

H_ZERO_TOL = 1e-12
FRAME_DET_TOL = 1e-12
SINGULAR_TOL = 1e-12


def exterior_basis(dim: int) -> list[tuple[int, ...]]:
    """All increasing multi-indices of range(dim), lexicographically sorted."""
    out = [idx for k in range(dim + 1) for idx in itertools.combinations(range(dim), k)]
    return sorted(out)


def exterior_operators(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer matrices of ext(e^i) and int(e_i), stacked over i: shape (dim, N, N)."""
    basis = exterior_basis(dim)
    pos = {idx: k for k, idx in enumerate(basis)}
    size = len(basis)
    ext = np.zeros((dim, size, size), dtype=np.int64)
    con = np.zeros((dim, size, size), dtype=np.int64)
    for col, idx in enumerate(basis):
        for i in range(dim):
            if i in idx:
                p = idx.index(i)
                rest = idx[:p] + idx[p + 1 :]
                con[i, pos[rest], col] = (-1) ** p
            else:
                p = sum(1 for j in idx if j < i)
                new = tuple(sorted(idx + (i,)))
                ext[i, pos[new], col] = (-1) ** p
    return ext, con


def _phase_power(n: int) -> complex:
    return (1, 1j, -1, -1j)[n % 4]


@dataclass(frozen=True, eq=False)
class CliffordModel:
    n: int
    basis: tuple[tuple[int, ...], ...]
    ext: np.ndarray  # (2n, N, N) integer
    con: np.ndarray  # (2n, N, N) integer
    generators_int: np.ndarray  # (2n, N, N) integer c(e_i)
    generators: np.ndarray  # complex copy
    tau: np.ndarray
    projector_plus: np.ndarray
    projector_minus: np.ndarray
    basis_plus: np.ndarray  # (N, N/2) orthonormal columns spanning Lambda+
    basis_minus: np.ndarray

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def size(self) -> int:
        return 4**self.n

    @property
    def half(self) -> int:
        return self.size // 2

    def clifford(self, vector: np.ndarray) -> np.ndarray:
        """c(vector) for components in the orthonormal basis; vector may be batched (..., 2n)."""
        vector = np.asarray(vector)
        if vector.shape[-1] != self.dim:
            raise ConfigurationError(f"vector dimension {vector.shape[-1]} does not match model dimension {self.dim}")
        return np.tensordot(vector, self.generators, axes=([-1], [0]))

    @property
    def graded_basis(self) -> np.ndarray:
        """Unitary change of basis whose first half spans Lambda+ and second half Lambda-."""
        return np.concatenate([self.basis_plus, self.basis_minus], axis=1)

    def tau_for_frame(self, frame: np.ndarray) -> np.ndarray:
        """tau computed from the orthonormal frame whose columns are ``frame``."""
        frame = np.asarray(frame, dtype=float)
        prod = np.eye(self.size, dtype=complex)
        for k in range(self.dim):
            prod = prod @ self.clifford(frame[:, k])
        return _phase_power(self.n) * prod

    def derivation(self, omega: np.ndarray) -> np.ndarray:
        """Action on the exterior algebra induced by a skew matrix omega (batched ..., 2n, 2n).

        With nabla e_j = sum_i omega[i, j] e_i the dual coframe has the same
        matrix, and the induced derivation is sum_ij omega[i, j] ext(e^i) int(e_j).
        """
        ops = self._derivation_ops
        return np.tensordot(np.asarray(omega), ops, axes=([-2, -1], [0, 1]))

    @property
    def _derivation_ops(self) -> np.ndarray:
        cache = self.__dict__.get("_dops")
        if cache is None:
            cache = np.einsum("iab,jbc->ijac", self.ext, self.con).astype(complex)
            object.__setattr__(self, "_dops", cache)
        return cache

    def symbol_components(self) -> tuple[np.ndarray, np.ndarray]:
        """Blocks B-^H tau c(e_i) B+ and B-^H c(e_i) B+, each of shape (2n, N/2, N/2)."""
        cache = self.__dict__.get("_symb")
        if cache is None:
            bm, bp = self.basis_minus.conj().T, self.basis_plus
            a = np.stack([bm @ self.tau @ g @ bp for g in self.generators])
            c = np.stack([bm @ g @ bp for g in self.generators])
            cache = (a, c)
            object.__setattr__(self, "_symb", cache)
        return cache


def build_clifford_model(n: int) -> CliffordModel:
    if not isinstance(n, (int, np.integer)) or n < 1 or n > 4:
        raise ConfigurationError(f"Clifford model needs 1 <= n <= 4, got {n}")
    return _build(int(n))


@lru_cache(maxsize=None)
def _build(n: int) -> CliffordModel:
    dim = 2 * n
    basis = exterior_basis(dim)
    ext, con = exterior_operators(dim)
    gens = ext - con
    prod = np.eye(len(basis), dtype=np.int64)
    for g in gens:
        prod = prod @ g
    tau = _phase_power(n) * prod.astype(complex)
    eye = np.eye(len(basis))
    p_plus = (eye + tau) / 2
    p_minus = (eye - tau) / 2

    # tau maps e^I to a phase times e^(I complement); pair each I with its complement
    pos = {idx: k for k, idx in enumerate(basis)}
    reps = [idx for idx in basis if pos[idx] < pos[tuple(sorted(set(range(dim)) - set(idx)))]]
    size, half = len(basis), len(basis) // 2
    b_plus = np.zeros((size, half), dtype=complex)
    b_minus = np.zeros((size, half), dtype=complex)
    for col, idx in enumerate(reps):
        e = np.zeros(size, dtype=complex)
        e[pos[idx]] = 1.0
        te = tau @ e
        b_plus[:, col] = (e + te) / np.sqrt(2)
        b_minus[:, col] = (e - te) / np.sqrt(2)
    return CliffordModel(
        n=n,
        basis=tuple(basis),
        ext=ext,
        con=con,
        generators_int=gens,
        generators=gens.astype(complex),
        tau=tau,
        projector_plus=p_plus,
        projector_minus=p_minus,
        basis_plus=b_plus,
        basis_minus=b_minus,
    )


# ---------------------------------------------------------------------------
# pointwise symbol and zero-set classification


def h_value(xi: np.ndarray, eta: np.ndarray, metric: np.ndarray | None = None) -> np.ndarray:
    """|xi|^2 - |eta|^2 + 2i <xi, eta>, batched over leading axes."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if metric is None:
        g = lambda a, b: np.sum(a * b, axis=-1)  # noqa: E731
    else:
        metric = np.asarray(metric, dtype=float)
        g = lambda a, b: np.einsum("...i,...ij,...j->...", a, metric, b)  # noqa: E731
    return g(xi, xi) - g(eta, eta) + 2j * g(xi, eta)


def symbol_at_point(model: CliffordModel, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """The Lambda- x Lambda+ block of tau c(xi) + i c(eta); xi, eta may be batched (..., 2n)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if xi.shape[-1] != model.dim or eta.shape[-1] != model.dim:
        raise ConfigurationError(f"vectors must have {model.dim} components")
    a, c = model.symbol_components()
    k, h = a.shape[0], a.shape[1]
    stacked = np.concatenate([xi, eta], axis=-1).astype(complex)
    ops = np.concatenate([a, 1j * c]).reshape(2 * k, h * h)
    return (stacked @ ops).reshape(stacked.shape[:-1] + (h, h))


def full_symbol(model: CliffordModel, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """tau c(xi) + i c(eta) on the whole exterior algebra."""
    return model.tau @ model.clifford(xi) + 1j * model.clifford(eta)


def odd_endomorphism(model: CliffordModel, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """V = v_K + v_K^* on the whole algebra, with the metric (Hermitian) adjoint."""
    v = model.projector_minus @ full_symbol(model, xi, eta) @ model.projector_plus
    return v + v.conj().T


class PointClass(str, enum.Enum):
    REGULAR = "regular"
    ZERO_NONINVERTIBLE = "zero_noninvertible"
    ZERO_PLUS_FRAME = "zero_plus_frame"


def is_oriented_frame(xi: np.ndarray, eta: np.ndarray, tol: float = FRAME_DET_TOL) -> bool:
    """n = 1 test: |xi| = |eta| != 0, <xi, eta> = 0 and det(xi, eta) > 0."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if xi.shape != (2,) or eta.shape != (2,):
        return False
    scale = max(1.0, float(xi @ xi + eta @ eta))
    det = xi[0] * eta[1] - xi[1] * eta[0]
    return (
        abs(xi @ xi - eta @ eta) <= tol * scale
        and abs(xi @ eta) <= tol * scale
        and xi @ xi > tol
        and det > tol * scale
    )


def classify_point(model: CliffordModel, xi: np.ndarray, eta: np.ndarray) -> PointClass:
    """Zero-set classification of a single point; inconsistent cases raise LemmaViolation."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    scale = max(1.0, float(xi @ xi + eta @ eta))
    h_zero = abs(complex(h_value(xi, eta))) <= H_ZERO_TOL * scale
    v = symbol_at_point(model, xi, eta)
    smin = np.linalg.svd(v, compute_uv=False)[-1]
    singular = smin <= SINGULAR_TOL * scale
    if not h_zero:
        if singular:
            raise LemmaViolation(f"Lemma 3 violation: h != 0 but v_K singular at xi={xi}, eta={eta}")
        return PointClass.REGULAR
    if singular:
        return PointClass.ZERO_NONINVERTIBLE
    if model.n >= 2 or not is_oriented_frame(xi, eta):
        raise LemmaViolation(f"Lemma 3 violation: h = 0 with v_K invertible at xi={xi}, eta={eta} (n={model.n})")
    return PointClass.ZERO_PLUS_FRAME
