"""Unit tests for invariant convex functions and their calculus."""

import math

import numpy as np
import pytest

from momentflow import (AlgebraDescriptor, ConvergenceError, DomainError,
                        IndefiniteSplit, QuadraticKilling, ValidationError,
                        function_from_name, gradient_inverse, hess_inner,
                        legendre_value, norm, pair, random_dual_element,
                        random_lie_element, scalar_from_name,
                        verify_convex_identities)
from momentflow.invariant_convex import ScalarFunction, SpectralFunction

DESC = AlgebraDescriptor((2, 3), (False, True))


@pytest.mark.parametrize("name", ["quadratic", "spectral:cosh",
                                  "spectral:explin", "spectral:power:4"])
def test_identity_battery(name):
    f = function_from_name(name)
    rep = verify_convex_identities(f, DESC, trials=12, seed=7)
    for key, val in rep.items():
        tol = {"gradient_fd": 1e-5, "hessian_fd": 1e-3}.get(key, 1e-8)
        assert val <= tol, f"{name}:{key} defect {val:.3e} > {tol}"


def test_quadratic_closed_forms():
    rng = np.random.default_rng(0)
    f = QuadraticKilling()
    a = random_dual_element(DESC, rng)
    frob2 = sum(float(np.sum(np.abs(b) ** 2)) for b in a.blocks)
    assert abs(f.value(a) - frob2) <= 1e-12 * (1 + frob2)
    assert norm(f.gradient(a) - 2.0 * a.sharp()) <= 1e-12
    xi = random_lie_element(DESC, rng)
    assert norm(gradient_inverse(f, xi) - 0.5 * xi.flat()) <= 1e-10
    # legendre transform of |a|^2 evaluated at xi is |xi|^2/4
    assert abs(legendre_value(f, xi) - 0.25 * norm(xi) ** 2) <= 1e-10


@pytest.mark.parametrize("name", ["spectral:cosh", "spectral:explin",
                                  "spectral:power:4"])
def test_gradient_inverse_round_trip(name):
    rng = np.random.default_rng(1)
    f = function_from_name(name)
    for _ in range(5):
        # draw the target inside the image of the gradient map (for explin
        # the image is bounded below, so arbitrary targets need not be hit)
        ref = random_dual_element(DESC, rng, scale=0.6)
        xi = f.gradient(ref)
        a = gradient_inverse(f, xi)
        assert norm(f.gradient(a) - xi) <= 1e-10 * (1 + norm(xi))
        assert norm(a - ref) <= 1e-8 * (1 + norm(ref))
        # consistency of the scalar Legendre value with Fenchel-Young equality
        lv = legendre_value(f, xi)
        assert lv >= -1e-12
        assert abs(pair(a, xi) - f.value(a) - lv) <= 1e-9


def test_gradient_inverse_unreachable_target():
    # explin gradient eigenvalues exceed -1; a target below that has no
    # preimage and the solver must fail with its typed error
    f = function_from_name("spectral:explin")
    desc = AlgebraDescriptor((2,), (False,))
    from momentflow import LieElement
    xi = LieElement(desc, [1j * np.diag([-1.6, 0.4])])
    with pytest.raises(ConvergenceError):
        gradient_inverse(f, xi)


def test_gradient_inverse_refuses_nonstrict():
    f = IndefiniteSplit(split_index=1)
    xi = random_lie_element(DESC, np.random.default_rng(2))
    with pytest.raises(ValidationError):
        gradient_inverse(f, xi)


def test_gradient_inverse_convergence_error_metadata():
    f = function_from_name("spectral:cosh")
    xi = random_lie_element(DESC, np.random.default_rng(3))
    with pytest.raises(ConvergenceError) as exc:
        gradient_inverse(f, xi, max_iter=1, tol=1e-15)
    assert exc.value.iterations is not None
    assert exc.value.residual is not None and exc.value.residual > 0


def test_hessian_solve_round_trip_traceless():
    rng = np.random.default_rng(4)
    for name in ("quadratic", "spectral:cosh", "spectral:power:4"):
        f = function_from_name(name)
        a = random_dual_element(DESC, rng, scale=0.5)
        xi = random_lie_element(DESC, rng)
        sol = f.hessian_solve(a, xi)
        back = f.hessian_apply(a, sol)
        assert norm(back - xi) <= 1e-9 * (1 + norm(xi)), name
        # and the other composition order
        beta = random_dual_element(DESC, rng)
        again = f.hessian_solve(a, f.hessian_apply(a, beta))
        assert norm(again - beta) <= 1e-9 * (1 + norm(beta)), name


def test_hess_inner_symmetry_and_positivity():
    rng = np.random.default_rng(5)
    f = function_from_name("spectral:explin")
    a = random_dual_element(DESC, rng, scale=0.4)
    b = random_dual_element(DESC, rng)
    c = random_dual_element(DESC, rng)
    assert abs(hess_inner(f, a, b, c) - hess_inner(f, a, c, b)) <= 1e-10
    assert hess_inner(f, a, b, b) > 0


def test_scalar_registry_and_domains():
    cosh = scalar_from_name("cosh")
    assert cosh.value(0.0) == 0.0
    assert abs(cosh.value(1.0) - (math.cosh(1.0) - 1.0)) <= 1e-15
    explin = scalar_from_name("explin")
    assert explin.value(0.0) == 0.0
    assert abs(explin.deriv(1.0) - (math.e - 1.0)) <= 1e-15
    p4 = scalar_from_name("power:4")
    assert p4.value(-2.0) == 16.0 and p4.deriv(-2.0) == -32.0
    with pytest.raises(ValidationError):
        scalar_from_name("power:3")  # odd powers are not convex on R
    with pytest.raises(ValidationError):
        scalar_from_name("power:0")
    with pytest.raises(ValidationError):
        scalar_from_name("nope")


def test_spectral_domain_enforced():
    # scalar with a bounded open domain: -log(1-t^2) on (-1, 1)
    s = ScalarFunction(
        name="barrier",
        value=lambda t: -math.log1p(-t * t),
        deriv=lambda t: 2 * t / (1 - t * t),
        second=lambda t: (2 + 2 * t * t) / (1 - t * t) ** 2,
        domain=(-1.0, 1.0),
    )
    f = SpectralFunction(s)
    desc = AlgebraDescriptor((2,), (False,))
    from momentflow import DualElement
    ok = DualElement(desc, [0.3j * np.diag([1.0, -1.0])])
    assert f.value(ok) > 0
    bad = DualElement(desc, [2.5j * np.diag([1.0, -1.0])])
    with pytest.raises(DomainError):
        f.value(bad)


def test_indefinite_split_values():
    f = IndefiniteSplit(split_index=1)
    assert f.strict is False
    rng = np.random.default_rng(6)
    a = random_dual_element(DESC, rng)
    n1 = float(np.sum(np.abs(a.blocks[0]) ** 2))
    n2 = float(np.sum(np.abs(a.blocks[1]) ** 2))
    assert abs(f.value(a) - (n1 - n2)) <= 1e-12 * (1 + n1 + n2)
    # still coadjoint-invariant even though non-convex
    rep = verify_convex_identities(f, DESC, trials=6, seed=8)
    assert rep["invariance"] <= 1e-10
    assert rep["gradient_equivariance"] <= 1e-10
    with pytest.raises(ValidationError):
        IndefiniteSplit(split_index=0)._split(DESC)


def test_function_from_name_errors():
    with pytest.raises(ValidationError):
        function_from_name("spectral:")
    with pytest.raises(ValidationError):
        function_from_name("unknown")
