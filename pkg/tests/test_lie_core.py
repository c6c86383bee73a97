"""Unit tests for the Lie-algebra core layer."""

import math

import numpy as np
import pytest

from momentflow import (AlgebraDescriptor, ComplexLieElement, DualElement,
                        GroupElement, LieElement, ValidationError, adjoint,
                        bracket, coadjoint, coadjoint_inf, coefficients,
                        exponential, from_coefficients, herm_inner,
                        identity_group, norm, orthonormal_basis, pair,
                        pair_complex, random_complex_element,
                        random_dual_element, random_lie_element,
                        random_unitary)

DESC = AlgebraDescriptor((2, 3), (False, True))


def test_descriptor_dimensions():
    assert DESC.real_dimension == 4 + 8
    assert AlgebraDescriptor((2,), (True,)).real_dimension == 3
    assert AlgebraDescriptor((4,), (False,)).real_dimension == 16


def test_basis_gram_is_identity():
    basis = orthonormal_basis(DESC)
    m = len(basis)
    assert m == DESC.real_dimension
    gram = np.array([[pair(basis[i].flat(), basis[j]) for j in range(m)]
                     for i in range(m)])
    assert np.max(np.abs(gram - np.eye(m))) <= 1e-12


def test_coefficients_round_trip():
    rng = np.random.default_rng(0)
    x = random_lie_element(DESC, rng)
    c = coefficients(x)
    assert c.dtype.kind == "f"
    y = from_coefficients(DESC, c, kind="lie")
    assert norm(x - y) <= 1e-12

    w = random_complex_element(DESC, rng)
    cw = coefficients(w)
    assert cw.dtype.kind == "c"
    v = from_coefficients(DESC, cw, kind="complex")
    assert norm(w - v) <= 1e-12


def test_validation_rejects_bad_blocks():
    n2 = np.eye(2, dtype=complex)  # Hermitian, not anti-Hermitian
    z3 = np.zeros((3, 3), complex)
    with pytest.raises(ValidationError):
        LieElement(DESC, [n2, z3])
    with pytest.raises(ValidationError):
        # nonzero trace on the traceless block
        LieElement(DESC, [np.zeros((2, 2), complex), 1j * np.eye(3)])
    with pytest.raises(ValidationError):
        GroupElement(DESC, [np.zeros((2, 2), complex), np.eye(3)])
    with pytest.raises(ValidationError):
        LieElement(DESC, [n2])  # wrong block count


def test_pairing_and_inner_products():
    rng = np.random.default_rng(1)
    x = random_lie_element(DESC, rng)
    y = random_lie_element(DESC, rng)
    # pair against flat == Frobenius-type inner product on the compact algebra
    assert abs(pair(x.flat(), y) - herm_inner(x, y).real) <= 1e-12
    assert pair(x.flat(), x) > 0
    assert abs(pair(x.flat(), x) - norm(x) ** 2) <= 1e-12
    # complex-bilinear pairing restricts to the real one
    assert abs(pair_complex(x.flat(), y) - pair(x.flat(), y)) <= 1e-12


def test_pair_ad_invariance_and_jacobi():
    rng = np.random.default_rng(2)
    x, y, w = (random_lie_element(DESC, rng) for _ in range(3))
    # infinitesimal invariance: pair([w,x]^flat, y) + pair(x^flat, [w,y]) = 0
    lhs = pair(bracket(w, x).flat(), y) + pair(x.flat(), bracket(w, y))
    assert abs(lhs) <= 1e-10
    jac = (bracket(x, bracket(y, w)) + bracket(y, bracket(w, x))
           + bracket(w, bracket(x, y)))
    assert norm(jac) <= 1e-10
    k = random_unitary(DESC, rng)
    # global invariance under the (co)adjoint action
    a = random_dual_element(DESC, rng)
    assert abs(pair(coadjoint(k, a), adjoint(k, x)) - pair(a, x)) <= 1e-10


def test_exponential_and_adjoint():
    rng = np.random.default_rng(3)
    x = random_lie_element(DESC, rng, scale=0.5)
    g = exponential(x)
    assert g.is_unitary
    gi = exponential(-1.0 * x)
    prod = g @ gi
    e = identity_group(DESC)
    assert max(np.max(np.abs(a - b)) for a, b in zip(prod.blocks, e.blocks)) <= 1e-12
    y = random_lie_element(DESC, rng)
    assert isinstance(adjoint(g, y), LieElement)
    # Ad_{exp(x)} = exp(ad_x) to second order
    h = 1e-5
    lhs = adjoint(exponential(h * x), y)
    rhs = y + h * bracket(x, y)
    assert norm(lhs - rhs) <= 10 * h ** 2 * norm(x) ** 2 * max(1.0, norm(y))
    # non-unitary group elements push compact elements into the complexification
    gc = exponential(1j * x)
    assert isinstance(adjoint(gc, y), ComplexLieElement)
    with pytest.raises(ValidationError):
        coadjoint(gc, y.flat())


def test_quarter_turn_exponential():
    desc = AlgebraDescriptor((2,), (False,))
    x = LieElement(desc, [np.array([[0.0, -math.pi / 2],
                                    [math.pi / 2, 0.0]], complex)])
    g = exponential(x)
    target = np.array([[0.0, -1.0], [1.0, 0.0]], complex)
    assert np.max(np.abs(g.blocks[0] - target)) <= 1e-12


def test_coadjoint_inf_matches_bracket():
    rng = np.random.default_rng(4)
    eta = random_lie_element(DESC, rng)
    a = random_dual_element(DESC, rng)
    x = random_lie_element(DESC, rng)
    # derivative of invariance: pair(ad*_eta a, x) = pair(a, [x, eta])
    assert abs(pair(coadjoint_inf(eta, a), x)
               - pair(a, bracket(x, eta))) <= 1e-10


def test_scalar_promotion():
    rng = np.random.default_rng(5)
    x = random_lie_element(DESC, rng)
    assert isinstance(2.0 * x, LieElement)
    assert isinstance(1j * x, ComplexLieElement)
    assert isinstance(x + 1j * x, ComplexLieElement)
    assert norm((1j * x).compact_part()) <= 1e-12
    assert norm((1j * x).anti_compact_part() - x) <= 1e-12


def test_group_inverse_and_matmul():
    rng = np.random.default_rng(6)
    g = exponential(random_complex_element(DESC, rng, 0.4))
    gi = g.inverse()
    prod = g @ gi
    e = identity_group(DESC)
    assert max(np.max(np.abs(a - b))
               for a, b in zip(prod.blocks, e.blocks)) <= 1e-10
