"""Fused stepper kernels: backend selection and parity with the generic path."""

import math

import numpy as np
import pytest

from momentflow import (
    ProjectivePower,
    ProjectiveSpace,
    QuadraticKilling,
    ValidationError,
    function_from_name,
    gradient_flow,
)
from momentflow import _kernels
from momentflow._kernels import (
    CODES,
    get_stepper,
    numba_available,
    resolve_backend,
    rhs_reference,
)
from momentflow.flow_engine import _GenericField

needs_numba = pytest.mark.skipif(not numba_available(),
                                 reason="numba not installed")

FUNCTIONS = [
    QuadraticKilling(),
    function_from_name("spectral:cosh"),
    function_from_name("spectral:explin"),
    function_from_name("spectral:power:4"),
]


def test_codes_registry():
    assert CODES == {"quadratic": 0, "cosh": 1, "explin": 2, "power": 3}
    for f in FUNCTIONS:
        name, param = f.kernel_code()
        assert name in CODES
        assert isinstance(param, float)


def test_resolve_backend_explicit(monkeypatch):
    monkeypatch.delenv("MOMENTFLOW_BACKEND", raising=False)
    assert resolve_backend("numpy") == "numpy"
    assert resolve_backend("NUMPY") == "numpy"
    expected_auto = "numba" if numba_available() else "numpy"
    assert resolve_backend(None) == expected_auto
    assert resolve_backend("auto") == expected_auto
    with pytest.raises(ValidationError):
        resolve_backend("fortran")


def test_resolve_backend_env(monkeypatch):
    monkeypatch.setenv("MOMENTFLOW_BACKEND", "numpy")
    assert resolve_backend(None) == "numpy"
    # an explicit argument overrides the environment
    if numba_available():
        assert resolve_backend("numba") == "numba"
    monkeypatch.setenv("MOMENTFLOW_BACKEND", "bogus")
    with pytest.raises(ValidationError):
        resolve_backend(None)
    # empty value falls back to auto
    monkeypatch.setenv("MOMENTFLOW_BACKEND", "")
    assert resolve_backend(None) in ("numba", "numpy")


def test_numba_requested_but_missing(monkeypatch):
    monkeypatch.delenv("MOMENTFLOW_BACKEND", raising=False)
    monkeypatch.setattr(_kernels, "numba_available", lambda: False)
    with pytest.raises(ValidationError):
        resolve_backend("numba")
    assert resolve_backend(None) == "numpy"
    assert resolve_backend("numpy") == "numpy"


def test_stepper_numpy_is_reference_implementation():
    assert get_stepper("numpy") is _kernels._attempt_np


def _state(space, seed):
    z = space.random_point(np.random.default_rng(seed))
    return z, np.array([c for c in z.components], dtype=np.complex128)


def test_rhs_reference_matches_generic_path():
    cases = [(ProjectivePower(3), 10), (ProjectiveSpace(2), 20)]
    for space, seed0 in cases:
        info = space.fast_kernel_info()
        for k, f in enumerate(FUNCTIONS):
            name, param = f.kernel_code()
            z, zarr = _state(space, seed0 + k)
            v_ref, e_ref, gn2_ref, rate_ref = rhs_reference(
                zarr, CODES[name], param, info["traceless"])
            gen = _GenericField(space, f)
            v_gen, e_gen, gn_gen, rate_gen = gen.rhs(
                [np.array(c) for c in z.components])
            dv = max(float(np.max(np.abs(a - b)))
                     for a, b in zip(v_ref, v_gen))
            assert dv <= 1e-12, (space, f.name)
            assert abs(e_ref - e_gen) <= 1e-12 * (1.0 + abs(e_gen))
            assert abs(math.sqrt(gn2_ref) - gn_gen) <= 1e-12
            assert abs(rate_ref - rate_gen) <= 1e-12 * (1.0 + abs(rate_gen))


def test_projective_space_single_point_oracles():
    # A single point of P^n is an eigenvector of mu, so the descent field
    # vanishes and the eigenvalues of -i*mu are {1, 0, ..., 0}; the energy
    # and Kempf-Ness rate then have closed forms.
    space = ProjectiveSpace(2)
    info = space.fast_kernel_info()
    assert info == {"n": 3, "d": 1, "traceless": False}
    _, zarr = _state(space, 33)
    expected = {
        "quadratic": (1.0, -2.0),
        "cosh": (math.cosh(1.0) - 1.0, -math.sinh(1.0)),
        "explin": (math.e - 2.0, -(math.e - 1.0)),
        "power": (1.0, -4.0),
    }
    for f in FUNCTIONS:
        name, param = f.kernel_code()
        v, e, gn2, rate = rhs_reference(zarr, CODES[name], param, False)
        e_exp, rate_exp = expected[name]
        assert float(np.max(np.abs(v))) <= 1e-14, name
        assert gn2 <= 1e-28, name
        assert e == pytest.approx(e_exp, abs=1e-12), name
        assert rate == pytest.approx(rate_exp, abs=1e-12), name


@needs_numba
def test_attempt_parity_synthetic_states():
    # The numba loop kernel and the vectorized numpy kernel are independent
    # implementations of the same step; compare them on synthetic states
    # covering every function code and both traceless branches.
    st_np = get_stepper("numpy")
    st_nb = get_stepper("numba")
    rng = np.random.default_rng(7)
    for d, n in ((3, 2), (2, 3)):
        z = rng.normal(size=(d, n)) + 1j * rng.normal(size=(d, n))
        z = z / np.linalg.norm(z, axis=1)[:, None]
        for code in range(4):
            param = 4.0 if code == 3 else 0.0
            for traceless in (True, False):
                a = st_np(z, 0.1, 1e-2, code, param, traceless)
                b = st_nb(z, 0.1, 1e-2, code, param, traceless)
                assert float(np.max(np.abs(a[0] - b[0]))) <= 1e-13
                assert abs(a[1] - b[1]) <= 1e-13            # kn
                assert abs(a[2] - b[2]) <= 1e-15 + 1e-6 * a[2]  # err
                assert abs(a[3] - b[3]) <= 1e-12            # energy
                assert abs(a[4] - b[4]) <= 1e-12            # grad norm
                assert abs(a[5] - b[5]) <= 1e-12            # kn rate


@needs_numba
def test_gradient_flow_backend_parity():
    space = ProjectivePower(3)
    f = function_from_name("spectral:cosh")
    z0 = space.random_point(np.random.default_rng(41))
    times = [float(t) for t in np.linspace(0.0, 5.0, 11)]
    tr_np = gradient_flow(space, f, z0, tol=0.0, t_max=5.0,
                          record_times=times, backend="numpy")
    tr_nb = gradient_flow(space, f, z0, tol=0.0, t_max=5.0,
                          record_times=times, backend="numba")
    assert tr_np.stats["backend"] == "numpy"
    assert tr_nb.stats["backend"] == "numba"
    for t in times:
        a = tr_np.sample_at(t)
        b = tr_nb.sample_at(t)
        assert abs(a.energy - b.energy) <= 1e-9
        assert abs(a.kn_value - b.kn_value) <= 1e-9
        assert abs(a.grad_norm - b.grad_norm) <= 1e-9


def test_env_var_selects_backend(monkeypatch):
    monkeypatch.setenv("MOMENTFLOW_BACKEND", "numpy")
    space = ProjectivePower(2)
    z0 = space.random_point(np.random.default_rng(5))
    tr = gradient_flow(space, QuadraticKilling(), z0, tol=1e-8, t_max=5.0)
    assert tr.stats["backend"] == "numpy"


def _flow_arrays(backend):
    space = ProjectivePower(3)
    f = function_from_name("spectral:cosh")
    z0 = space.random_point(np.random.default_rng(9))
    tr = gradient_flow(space, f, z0, tol=1e-8, t_max=20.0, backend=backend)
    return tr.arrays()


@pytest.mark.parametrize("backend", ["numpy"] + (
    ["numba"] if numba_available() else []))
def test_per_backend_determinism(backend):
    a = _flow_arrays(backend)
    b = _flow_arrays(backend)
    for key in a:
        assert np.array_equal(a[key], b[key]), key
