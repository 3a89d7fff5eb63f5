import dataclasses

import numpy as np
import pytest

from hopfloc.clifford import (
    PointClass,
    build_clifford_model,
    classify_point,
    exterior_basis,
    exterior_operators,
    full_symbol,
    h_value,
    is_oriented_frame,
    odd_endomorphism,
    symbol_at_point,
)
from hopfloc.errors import ConfigurationError, LemmaViolation


@pytest.mark.parametrize("n", [1, 2, 3])
def test_clifford_relations_exact(n):
    m = build_clifford_model(n)
    c = m.generators_int
    eye = np.eye(m.size, dtype=np.int64)
    for i in range(m.dim):
        for j in range(m.dim):
            assert np.array_equal(c[i] @ c[j] + c[j] @ c[i], -2 * (i == j) * eye)
    assert np.array_equal(m.tau @ m.tau, np.eye(m.size))
    for g in m.generators:
        assert np.array_equal(m.tau @ g, -g @ m.tau)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_lambda_plus_minus_ranks(n):
    m = build_clifford_model(n)
    assert np.linalg.matrix_rank(m.projector_plus) == 2 ** (2 * n - 1)
    assert np.linalg.matrix_rank(m.projector_minus) == 2 ** (2 * n - 1)
    u = m.graded_basis
    np.testing.assert_allclose(u.conj().T @ u, np.eye(m.size), atol=1e-15)
    np.testing.assert_allclose(m.tau @ m.basis_plus, m.basis_plus, atol=1e-15)
    np.testing.assert_allclose(m.tau @ m.basis_minus, -m.basis_minus, atol=1e-15)


def test_exterior_operators_are_adjoint_and_nilpotent():
    ext, con = exterior_operators(4)
    for i in range(4):
        assert np.array_equal(ext[i].T, con[i])
        assert not np.any(ext[i] @ ext[i])
        for j in range(4):
            # ext_i con_j + con_j ext_i = delta_ij
            assert np.array_equal(ext[i] @ con[j] + con[j] @ ext[i], (i == j) * np.eye(16, dtype=np.int64))


def test_basis_order():
    assert exterior_basis(2) == [(), (0,), (0, 1), (1,)]
    assert len(exterior_basis(5)) == 32


def test_tau_is_hodge_like_on_top_and_bottom():
    # n = 1: tau(1) = i e^12 and c(e_i) swaps degrees by one
    m = build_clifford_model(1)
    one = np.zeros(4)
    one[m.basis.index(())] = 1
    top = np.zeros(4)
    top[m.basis.index((0, 1))] = 1
    np.testing.assert_allclose(m.tau @ one, 1j * top)


def test_tau_frame_invariance():
    m = build_clifford_model(2)
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    np.testing.assert_allclose(m.tau_for_frame(q), m.tau, atol=1e-12)
    q[:, 0] *= -1
    np.testing.assert_allclose(m.tau_for_frame(q), -m.tau, atol=1e-12)


def test_derivation_is_lie_homomorphism():
    m = build_clifford_model(2)
    rng = np.random.default_rng(1)
    a = rng.normal(size=(4, 4))
    b = rng.normal(size=(4, 4))
    a, b = a - a.T, b - b.T
    da, db = m.derivation(a), m.derivation(b)
    np.testing.assert_allclose(da @ db - db @ da, m.derivation(a @ b - b @ a), atol=1e-12)
    # skew matrices act by derivations commuting with tau
    np.testing.assert_allclose(da @ m.tau, m.tau @ da, atol=1e-12)


def test_symbol_block_matches_projected_symbol():
    m = build_clifford_model(2)
    rng = np.random.default_rng(2)
    xi, eta = rng.normal(size=4), rng.normal(size=4)
    full = full_symbol(m, xi, eta)
    block = m.basis_minus.conj().T @ full @ m.basis_plus
    np.testing.assert_allclose(symbol_at_point(m, xi, eta), block, atol=1e-12)
    # the other off-diagonal pieces of V vanish on the wrong side of the grading
    v = odd_endomorphism(m, xi, eta)
    np.testing.assert_allclose(m.projector_plus @ v @ m.projector_plus, 0, atol=1e-12)
    np.testing.assert_allclose(v, v.conj().T, atol=1e-12)


def test_symbol_batched():
    m = build_clifford_model(1)
    rng = np.random.default_rng(3)
    xi, eta = rng.normal(size=(7, 2)), rng.normal(size=(7, 2))
    batch = symbol_at_point(m, xi, eta)
    for k in range(7):
        np.testing.assert_allclose(batch[k], symbol_at_point(m, xi[k], eta[k]))
    with pytest.raises(ConfigurationError):
        symbol_at_point(m, xi[:, :1], eta)


def test_v_star_v_for_unit_vector():
    m = build_clifford_model(2)
    e1 = np.eye(4)[0]
    v = symbol_at_point(m, e1, np.zeros(4))
    np.testing.assert_allclose(v.conj().T @ v, np.eye(8), atol=1e-14)


def test_h_value():
    assert h_value(np.array([1.0, 0]), np.array([0, 1.0])) == 0
    assert h_value(np.array([2.0, 0]), np.array([1.0, 0])) == 3 + 4j
    g = np.diag([4.0, 1.0])
    assert h_value(np.array([1.0, 0]), np.array([0, 2.0]), g) == 0


def test_classification_examples():
    m2 = build_clifford_model(2)
    e = np.eye(4)
    assert classify_point(m2, e[0], e[1]) is PointClass.ZERO_NONINVERTIBLE
    assert classify_point(m2, e[0], np.zeros(4)) is PointClass.REGULAR
    assert classify_point(m2, np.zeros(4), np.zeros(4)) is PointClass.ZERO_NONINVERTIBLE
    m1 = build_clifford_model(1)
    f = np.eye(2)
    assert classify_point(m1, f[0], f[1]) is PointClass.ZERO_PLUS_FRAME
    assert classify_point(m1, f[1], f[0]) is PointClass.ZERO_NONINVERTIBLE
    assert is_oriented_frame(2 * f[0], 2 * f[1])
    assert not is_oriented_frame(f[0], 2 * f[1])


def test_build_model_validation():
    with pytest.raises(ConfigurationError):
        build_clifford_model(0)
    with pytest.raises(ConfigurationError):
        build_clifford_model(5)
    assert build_clifford_model(2) is build_clifford_model(2)


def test_inconsistent_classification_raises():
    # h != 0 but a singular symbol can only come from a broken model; fake one
    m = build_clifford_model(1)
    broken = dataclasses.replace(m, basis_plus=np.zeros_like(m.basis_plus))
    with pytest.raises(LemmaViolation, match="Lemma 3 violation"):
        classify_point(broken, np.array([1.0, 0.0]), np.zeros(2))
