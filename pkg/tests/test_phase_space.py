"""Unit tests for the projective phase spaces and the moment map."""

import math

import numpy as np
import pytest

from momentflow import (PhasePoint, ProductSpace, ProjectivePower,
                        ProjectiveSpace, ValidationError, coadjoint, norm,
                        pair, phase_distance, random_lie_element,
                        random_unitary, space_from_config)


def unit(v):
    v = np.asarray(v, dtype=complex)
    return v / np.linalg.norm(v)


def test_phase_point_validation():
    PhasePoint([np.array([1.0, 0.0], complex)])
    with pytest.raises(ValidationError):
        PhasePoint([np.array([1.0, 1.0], complex)])  # not unit
    with pytest.raises(ValidationError):
        PhasePoint.normalized([np.zeros(2, complex)])
    z = PhasePoint.normalized([np.array([3.0, 4.0], complex)])
    assert abs(np.linalg.norm(z.components[0]) - 1.0) <= 1e-14


def test_moment_map_values():
    sp = ProjectivePower(3)
    z = PhasePoint([np.array([1, 0], complex)] * 3)
    mu = sp.moment(z)
    expected = 1.5j * np.diag([1.0, -1.0])
    assert np.max(np.abs(mu.blocks[0] - expected)) <= 1e-14
    # antipodal pair on (P^1)^2 is balanced
    sp2 = ProjectivePower(2)
    z2 = PhasePoint([np.array([1, 0], complex), np.array([0, 1], complex)])
    assert norm(sp2.moment(z2)) <= 1e-14


def test_moment_axiom_finite_difference():
    rng = np.random.default_rng(0)
    sp = ProjectivePower(3)
    z = sp.random_point(rng)
    xi = random_lie_element(sp.algebra, rng)
    raw = [rng.standard_normal(2) + 1j * rng.standard_normal(2)
           for _ in range(3)]
    v = sp.tangent_projection(z, raw)
    h = 1e-4
    zp = sp.displace(z, v, h)
    zm = sp.displace(z, v, -h)
    fd = (pair(sp.moment(zp), xi) - pair(sp.moment(zm), xi)) / (2 * h)
    omega = sp.symplectic_form(z, v, sp.infinitesimal_action(z, xi))
    assert abs(fd - omega) <= 1e-6


def test_moment_equivariance_and_kn():
    rng = np.random.default_rng(1)
    sp = ProjectivePower(2)
    z = sp.random_point(rng)
    k = random_unitary(sp.algebra, rng)
    lhs = sp.moment(sp.act(k, z))
    rhs = coadjoint(k, sp.moment(z))
    assert norm(lhs - rhs) <= 1e-10
    # Kempf-Ness value on P^1: g = diag(e^s, e^-s) at z = [1, 0] gives s
    from momentflow.lie_core import GroupElement
    sp1 = ProjectivePower(1)
    z1 = PhasePoint([np.array([1, 0], complex)])
    s = 0.7
    g = GroupElement(sp1.algebra, [np.diag([math.exp(s), math.exp(-s)])])
    assert abs(sp1.kempf_ness_value(g, z1) - s) <= 1e-12


def test_infinitesimal_action_complex_linear():
    rng = np.random.default_rng(2)
    sp = ProjectivePower(3)
    z = sp.random_point(rng)
    xi = random_lie_element(sp.algebra, rng)
    c = 0.3 - 1.2j
    a = sp.infinitesimal_action(z, c * xi)
    b = sp.infinitesimal_action(z, xi)
    diffs = [np.max(np.abs(x - c * y))
             for x, y in zip(a.components, b.components)]
    assert max(diffs) <= 1e-12


def test_stabilizer_dimensions_pinned_configs():
    # (P^1)^2 coincident pair
    sp = ProjectivePower(2)
    e1 = np.array([1, 0], complex)
    z_co = PhasePoint([e1, e1])
    assert len(sp.stabilizer_k(z_co)) == 1
    assert len(sp.stabilizer_g(z_co)) == 2
    # (P^1)^2 with components [1,0] and [1,1]/sqrt(2): the complexified
    # stabilizer is the line through [[1,-2],[0,-1]], the compact one is 0
    z_mix = PhasePoint([e1, unit([1, 1])])
    assert len(sp.stabilizer_k(z_mix)) == 0
    basis_g = sp.stabilizer_g(z_mix)
    assert len(basis_g) == 1
    ref = np.array([[1.0, -2.0], [0.0, -1.0]], complex)
    got = basis_g[0].blocks[0]
    overlap = abs(np.einsum("ij,ij->", got.conj(), ref))
    assert overlap >= (1 - 1e-10) * np.linalg.norm(got) * np.linalg.norm(ref)
    # (P^1)^3 coincident and generic
    sp3 = ProjectivePower(3)
    z3 = PhasePoint([e1] * 3)
    assert len(sp3.stabilizer_k(z3)) == 1
    assert len(sp3.stabilizer_g(z3)) == 2
    z_gen = PhasePoint([e1, unit([1, 1]), unit([1, -2 + 1j])])
    assert len(sp3.stabilizer_k(z_gen)) == 0
    assert len(sp3.stabilizer_g(z_gen)) == 0
    # P^2 with the full unitary algebra: point stabilizer u(1) x u(2),
    # complexified stabilizer is the parabolic of complex dimension 7
    p2 = ProjectiveSpace(2)
    zp = PhasePoint([np.array([1, 0, 0], complex)])
    assert len(p2.stabilizer_k(zp)) == 5
    assert len(p2.stabilizer_g(zp)) == 7


def test_stabilizer_elements_annihilate():
    sp = ProjectivePower(2)
    z = PhasePoint([np.array([1, 0], complex), unit([1, 1])])
    for e in sp.stabilizer_g(z):
        sig = sp.infinitesimal_action(z, e)
        assert max(np.max(np.abs(c)) for c in sig.components) <= 1e-10


def test_metric_symplectic_compatibility():
    rng = np.random.default_rng(3)
    sp = ProjectivePower(2)
    z = sp.random_point(rng)
    raw1 = [rng.standard_normal(2) + 1j * rng.standard_normal(2)
            for _ in range(2)]
    raw2 = [rng.standard_normal(2) + 1j * rng.standard_normal(2)
            for _ in range(2)]
    u = sp.tangent_projection(z, raw1)
    v = sp.tangent_projection(z, raw2)
    ju = sp.complex_structure(z, u)
    # omega(u, v) = metric(Ju, v)
    assert abs(sp.symplectic_form(z, u, v) - sp.metric(z, ju, v)) <= 1e-12
    with pytest.raises(ValidationError):
        sp.metric(z, u, raw2)  # raw (non-tangent) vector must be rejected


def test_act_and_phase_distance():
    rng = np.random.default_rng(4)
    sp = ProjectivePower(2)
    z = sp.random_point(rng)
    # phase changes are invisible to the distance
    phased = PhasePoint([np.exp(0.3j) * c for c in z.components])
    assert phase_distance(z, phased) <= 1e-12
    k = random_unitary(sp.algebra, rng)
    z2 = sp.act(k, z)
    assert phase_distance(z, z2) > 1e-3
    zi = sp.act(k.inverse(), z2)
    assert phase_distance(z, zi) <= 1e-12


def test_product_space_and_config_round_trip():
    left = ProjectivePower(2)
    right = ProjectiveSpace(2, traceless=True)
    prod = ProductSpace(left, right)
    # the power factor shares one su(2) block across its components
    assert prod.algebra.block_sizes == (2, 3)
    assert prod.component_dims == (2, 2, 3)
    zl = PhasePoint([np.array([1, 0], complex)] * 2)
    zr = PhasePoint([np.array([0, 0, 1], complex)])
    zz = prod.embed_point(zl, zr)
    mu = prod.moment(zz)
    assert np.max(np.abs(mu.blocks[0] - left.moment(zl).blocks[0])) <= 1e-14
    assert np.max(np.abs(mu.blocks[1] - right.moment(zr).blocks[0])) <= 1e-14
    cfg = prod.to_config()
    again = space_from_config(cfg)
    assert again.algebra == prod.algebra
    assert again.component_dims == prod.component_dims
    with pytest.raises(ValidationError):
        space_from_config({"space": "unknown"})


def test_fast_kernel_info():
    assert ProjectivePower(3).fast_kernel_info() is not None
    assert ProjectiveSpace(4).fast_kernel_info() is not None
    prod = ProductSpace(ProjectivePower(1), ProjectivePower(1))
    assert prod.fast_kernel_info() is None
