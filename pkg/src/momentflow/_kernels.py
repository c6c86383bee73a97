"""Fused descent-flow step kernels for single-block projective families.

The gradient-flow inner loop (an adaptive RK4 with step doubling: one full
step plus two half steps, i.e. 12 right-hand-side evaluations per attempted
step) is the only hot path in the package.  For phase spaces whose group is
a single unitary block acting on components of equal dimension (projective
space and its powers) the state is a dense ``(d, n)`` complex array, and the
whole attempted step is fused into one kernel.

Two implementations are provided:

* a vectorized pure-numpy fallback (always available), and
* loop kernels compiled with ``numba.njit`` when numba is installed.

Selection order: explicit ``backend=`` argument, then the environment
variable ``MOMENTFLOW_BACKEND`` (``auto`` | ``numba`` | ``numpy``), then
``auto`` (numba when importable).  Both paths implement identical formulas;
results agree to roundoff but are not guaranteed bit-identical across
backends (reduction order differs), so reproducibility guarantees are per
backend.

Function codes: ``0`` quadratic, ``1`` cosh, ``2`` explin,
``3`` power (parameter = even exponent).
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ValidationError

__all__ = ["CODES", "numba_available", "resolve_backend", "get_stepper",
           "rhs_reference"]

CODES = {"quadratic": 0, "cosh": 1, "explin": 2, "power": 3}

_NUMBA_STEPPER = None
_NUMBA_FAILED = False


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
        return True
    except ImportError:
        return False


def resolve_backend(backend: str | None = None) -> str:
    """Resolve a backend name to ``"numba"`` or ``"numpy"``."""
    choice = backend or os.environ.get("MOMENTFLOW_BACKEND", "auto") or "auto"
    choice = choice.lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValidationError(
            f"unknown backend {choice!r}; use auto, numba or numpy")
    if choice == "numba" and not numba_available():
        raise ValidationError("backend 'numba' requested but numba is not installed")
    if choice == "auto":
        return "numba" if numba_available() else "numpy"
    return choice


# ---------------------------------------------------------------------------
# numpy implementation (vectorized)
# ---------------------------------------------------------------------------

def _rhs_np(z, code, param, traceless):
    """Descent field and monitors at (the normalization of) ``z``.

    Returns ``(v, energy, grad_norm2, kn_rate)`` where ``v`` is the velocity
    ``i sigma_z(df)``, ``grad_norm2`` the squared metric norm of
    ``sigma_z(df)`` and ``kn_rate = -pair(mu, df)``.
    """
    zn = z / np.linalg.norm(z, axis=1)[:, None]
    n = z.shape[1]
    m = 1j * (zn.T @ zn.conj())
    if traceless:
        m = m - (np.trace(m) / n) * np.eye(n)
    if code == 0:
        g = 2.0 * m
        energy = float(np.sum(np.abs(m) ** 2))
    else:
        a, u = np.linalg.eigh(-1j * m)
        if code == 1:
            d1 = np.sinh(a)
            energy = float(np.sum(np.cosh(a) - 1.0))
        elif code == 2:
            d1 = np.expm1(a)
            energy = float(np.sum(np.expm1(a) - a))
        else:
            k = int(param)
            d1 = float(k) * a ** (k - 1)
            energy = float(np.sum(a ** k))
        g = 1j * (u * d1) @ u.conj().T
        if traceless:
            g = g - (np.trace(g) / n) * np.eye(n)
    w = zn @ g.T
    c = np.einsum("jp,jp->j", zn.conj(), w)
    sig = w - c[:, None] * zn
    v = 1j * sig
    grad_norm2 = 2.0 * float(np.sum(np.abs(sig) ** 2))
    kn_rate = float(np.einsum("pq,qp->", m, g).real)
    return v, energy, grad_norm2, kn_rate


def _rk4_np(z, kn, h, code, param, traceless):
    v1, _, _, r1 = _rhs_np(z, code, param, traceless)
    v2, _, _, r2 = _rhs_np(z + 0.5 * h * v1, code, param, traceless)
    v3, _, _, r3 = _rhs_np(z + 0.5 * h * v2, code, param, traceless)
    v4, _, _, r4 = _rhs_np(z + h * v3, code, param, traceless)
    zn = z + (h / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
    zn = zn / np.linalg.norm(zn, axis=1)[:, None]
    return zn, kn + (h / 6.0) * (r1 + 2.0 * r2 + 2.0 * r3 + r4)


def _attempt_np(z, kn, h, code, param, traceless):
    """One attempted step: full step vs two half steps.

    Returns ``(z_new, kn_new, err, energy0, grad_norm0, kn_rate0)`` with the
    new state taken from the half-step chain and ``err`` the step-doubling
    local error estimate; monitors are evaluated at the base point.
    """
    _, e0, gn2, r0 = _rhs_np(z, code, param, traceless)
    zb, knb = _rk4_np(z, kn, h, code, param, traceless)
    zh, knh = _rk4_np(z, kn, 0.5 * h, code, param, traceless)
    zh, knh = _rk4_np(zh, knh, 0.5 * h, code, param, traceless)
    err = max(float(np.max(np.abs(zb - zh))), abs(knb - knh)) / 15.0
    return zh, knh, err, e0, float(np.sqrt(gn2)), r0


# ---------------------------------------------------------------------------
# numba implementation (loop kernels)
# ---------------------------------------------------------------------------

_NUMBA_SRC_DOC = """Loop version of the same math, compiled with numba."""


def _build_numba_stepper():
    from numba import njit

    @njit(cache=True)
    def rhs(z, code, param, traceless):
        d, n = z.shape
        zn = np.empty((d, n), np.complex128)
        for j in range(d):
            s = 0.0
            for p in range(n):
                s += z[j, p].real ** 2 + z[j, p].imag ** 2
            s = np.sqrt(s)
            for p in range(n):
                zn[j, p] = z[j, p] / s
        m = np.zeros((n, n), np.complex128)
        for j in range(d):
            for p in range(n):
                for q in range(n):
                    m[p, q] += 1j * zn[j, p] * np.conj(zn[j, q])
        if traceless:
            tr = 0.0 + 0.0j
            for p in range(n):
                tr += m[p, p]
            tr /= n
            for p in range(n):
                m[p, p] -= tr
        energy = 0.0
        g = np.empty((n, n), np.complex128)
        if code == 0:
            for p in range(n):
                for q in range(n):
                    g[p, q] = 2.0 * m[p, q]
                    energy += m[p, q].real ** 2 + m[p, q].imag ** 2
        else:
            hmat = np.empty((n, n), np.complex128)
            for p in range(n):
                for q in range(n):
                    hmat[p, q] = -1j * m[p, q]
            a, u = np.linalg.eigh(hmat)
            d1 = np.empty(n)
            for p in range(n):
                if code == 1:
                    d1[p] = np.sinh(a[p])
                    energy += np.cosh(a[p]) - 1.0
                elif code == 2:
                    d1[p] = np.expm1(a[p])
                    energy += np.expm1(a[p]) - a[p]
                else:
                    k = int(param)
                    d1[p] = k * a[p] ** (k - 1)
                    energy += a[p] ** k
            for p in range(n):
                for q in range(n):
                    acc = 0.0 + 0.0j
                    for r in range(n):
                        acc += u[p, r] * d1[r] * np.conj(u[q, r])
                    g[p, q] = 1j * acc
            if traceless:
                tr = 0.0 + 0.0j
                for p in range(n):
                    tr += g[p, p]
                tr /= n
                for p in range(n):
                    g[p, p] -= tr
        v = np.empty((d, n), np.complex128)
        grad_norm2 = 0.0
        for j in range(d):
            c = 0.0 + 0.0j
            w = np.empty(n, np.complex128)
            for p in range(n):
                acc = 0.0 + 0.0j
                for q in range(n):
                    acc += g[p, q] * zn[j, q]
                w[p] = acc
                c += np.conj(zn[j, p]) * acc
            for p in range(n):
                sjp = w[p] - c * zn[j, p]
                grad_norm2 += 2.0 * (sjp.real ** 2 + sjp.imag ** 2)
                v[j, p] = 1j * sjp
        kn_rate = 0.0
        for p in range(n):
            for q in range(n):
                kn_rate += (m[p, q] * g[q, p]).real
        return v, energy, grad_norm2, kn_rate

    @njit(cache=True)
    def rk4(z, kn, h, code, param, traceless):
        d, n = z.shape
        v1, _, _, r1 = rhs(z, code, param, traceless)
        v2, _, _, r2 = rhs(z + 0.5 * h * v1, code, param, traceless)
        v3, _, _, r3 = rhs(z + 0.5 * h * v2, code, param, traceless)
        v4, _, _, r4 = rhs(z + h * v3, code, param, traceless)
        zn = z + (h / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
        for j in range(d):
            s = 0.0
            for p in range(n):
                s += zn[j, p].real ** 2 + zn[j, p].imag ** 2
            s = np.sqrt(s)
            for p in range(n):
                zn[j, p] = zn[j, p] / s
        return zn, kn + (h / 6.0) * (r1 + 2.0 * r2 + 2.0 * r3 + r4)

    @njit(cache=True)
    def attempt(z, kn, h, code, param, traceless):
        _, e0, gn2, r0 = rhs(z, code, param, traceless)
        zb, knb = rk4(z, kn, h, code, param, traceless)
        zh, knh = rk4(z, kn, 0.5 * h, code, param, traceless)
        zh, knh = rk4(zh, knh, 0.5 * h, code, param, traceless)
        err = 0.0
        d, n = z.shape
        for j in range(d):
            for p in range(n):
                dv = zb[j, p] - zh[j, p]
                av = np.sqrt(dv.real ** 2 + dv.imag ** 2)
                if av > err:
                    err = av
        dk = abs(knb - knh)
        if dk > err:
            err = dk
        return zh, knh, err / 15.0, e0, np.sqrt(gn2), r0

    return attempt


def get_stepper(backend: str | None = None):
    """Attempted-step kernel for the resolved backend.

    The callable signature is
    ``attempt(z, kn, h, code, param, traceless) ->
    (z_new, kn_new, err, energy0, grad_norm0, kn_rate0)``
    with ``z`` a ``(d, n)`` complex array of unit rows.
    """
    global _NUMBA_STEPPER, _NUMBA_FAILED
    resolved = resolve_backend(backend)
    if resolved == "numba" and not _NUMBA_FAILED:
        if _NUMBA_STEPPER is None:
            try:
                _NUMBA_STEPPER = _build_numba_stepper()
            except Exception:
                # fall back silently unless numba was explicitly requested
                _NUMBA_FAILED = True
                if backend == "numba" or \
                        os.environ.get("MOMENTFLOW_BACKEND", "").lower() == "numba":
                    raise
                return _attempt_np
        return _NUMBA_STEPPER
    return _attempt_np


def rhs_reference(z: np.ndarray, code: int, param: float, traceless: bool):
    """Reference (numpy) right-hand side, exposed for tests and benchmarks."""
    return _rhs_np(np.asarray(z, dtype=np.complex128), code, param, traceless)
