"""Ad*-invariant convex functions on the dual of a compact algebra.

A function ``f : k* -> R`` here is invariant under the coadjoint action of
the compact group and convex.  Three families are provided:

* :class:`QuadraticKilling` — ``f(alpha) = |alpha|^2`` in the pairing norm;
* :class:`SpectralFunction` — ``f(alpha) = sum_b sum_j phi(a_bj)`` where
  ``a_b`` is the spectrum of the Hermitian matrix ``-i alpha_b`` and ``phi``
  is a convex scalar;
* :class:`IndefiniteSplit` — a sign-split quadratic used as a *non-convex*
  control case (``strict`` is False and inversion is refused).

Gradients are Riesz representatives with respect to the pairing, so they
live in the compact algebra; on trace-free blocks they are trace-projected,
which is the correct representative for the restricted dual.  Spectral
derivatives use the Daleckii-Krein divided-difference formula with a
second-derivative fallback on (numerically) coincident eigenvalues.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConvergenceError, DomainError, ValidationError
from .lie_core import (AlgebraDescriptor, DualElement, LieElement, adjoint,
                       bracket, coadjoint, coadjoint_inf, coefficients,
                       from_coefficients, norm, orthonormal_basis, pair,
                       random_dual_element, random_lie_element, random_unitary)

__all__ = [
    "ConvexInvariantFunction",
    "QuadraticKilling",
    "SpectralFunction",
    "IndefiniteSplit",
    "ScalarFunction",
    "quadratic_killing",
    "spectral",
    "indefinite_split",
    "scalar_from_name",
    "function_from_name",
    "hess_inner",
    "gradient_inverse",
    "legendre_value",
    "verify_convex_identities",
]

# eigenvalue gaps below this (relative) threshold use the second-derivative
# divided-difference fallback
_COINCIDENT_RTOL = 1e-7


class ConvexInvariantFunction(abc.ABC):
    """Interface of an invariant convex function on the dual space."""

    #: True when the Hessian is positive definite on the whole domain,
    #: enabling gradient inversion.
    strict: bool = True
    name: str = "convex"

    @abc.abstractmethod
    def value(self, alpha: DualElement) -> float:
        """Evaluate ``f(alpha)``."""

    @abc.abstractmethod
    def gradient(self, alpha: DualElement) -> LieElement:
        """Pairing-Riesz gradient ``df|_alpha`` in the compact algebra."""

    @abc.abstractmethod
    def hessian_apply(self, alpha: DualElement, xi_star: DualElement) -> LieElement:
        """Hessian as a map ``k* -> k`` applied to the direction ``xi_star``."""

    def hessian_solve(self, alpha: DualElement, xi: LieElement) -> DualElement:
        """Solve ``hessian_apply(alpha, delta) = xi`` for ``delta``.

        Default implementation assembles the dense Hessian matrix in a
        pairing-orthonormal basis.  Strictly convex subclasses override
        this with closed forms.

        Raises:
            ValidationError: if the function is not strictly convex.
            ConvergenceError: if the Hessian is numerically singular.
        """
        if not self.strict:
            raise ValidationError(f"{self.name} is not strictly convex")
        desc = alpha.descriptor
        basis = orthonormal_basis(desc)
        m = np.column_stack([
            coefficients(self.hessian_apply(alpha, e.flat()), basis)
            for e in basis])
        rhs = coefficients(xi, basis)
        try:
            sol = np.linalg.solve(m, rhs)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"Hessian numerically singular: {exc}") from exc
        return from_coefficients(desc, sol, basis, kind="dual")

    def kernel_code(self):
        """(code, parameter) consumed by the fused flow kernels, or None."""
        return None


def hess_inner(f: ConvexInvariantFunction, alpha: DualElement,
               xi_star: DualElement, eta_star: DualElement) -> float:
    """Hessian bilinear form ``pair(eta*, Hess f|_alpha (xi*))``.

    Symmetric in ``xi_star`` and ``eta_star``; positive definite exactly
    when ``f`` is strictly convex at ``alpha``.
    """
    return pair(eta_star, f.hessian_apply(alpha, xi_star))


# ---------------------------------------------------------------------------
# Quadratic function
# ---------------------------------------------------------------------------

class QuadraticKilling(ConvexInvariantFunction):
    """``f(alpha) = pair(alpha, alpha.sharp()) = |alpha|^2``."""

    strict = True
    name = "quadratic"

    def value(self, alpha: DualElement) -> float:
        return pair(alpha, alpha.sharp())

    def gradient(self, alpha: DualElement) -> LieElement:
        return 2.0 * alpha.sharp()

    def hessian_apply(self, alpha: DualElement, xi_star: DualElement) -> LieElement:
        return 2.0 * xi_star.sharp()

    def hessian_solve(self, alpha: DualElement, xi: LieElement) -> DualElement:
        return (0.5 * xi).flat()

    def kernel_code(self):
        return ("quadratic", 0.0)


def quadratic_killing() -> QuadraticKilling:
    return QuadraticKilling()


# ---------------------------------------------------------------------------
# Spectral functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarFunction:
    """Convex scalar profile with two derivatives and an open domain."""

    name: str
    value: Callable[[float], float]
    deriv: Callable[[float], float]
    second: Callable[[float], float]
    domain: tuple[float, float] = (-math.inf, math.inf)


def _power_scalar(k: int) -> ScalarFunction:
    if k < 2 or k % 2 != 0:
        raise ValidationError(f"power scalar needs an even exponent >= 2, got {k}")
    return ScalarFunction(
        name=f"power:{k}",
        value=lambda t, k=k: t ** k,
        deriv=lambda t, k=k: k * t ** (k - 1),
        second=lambda t, k=k: k * (k - 1) * t ** (k - 2),
    )


_SCALARS: dict[str, Callable[[], ScalarFunction]] = {
    "cosh": lambda: ScalarFunction("cosh", lambda t: math.cosh(t) - 1.0,
                                   math.sinh, math.cosh),
    "explin": lambda: ScalarFunction("explin", lambda t: math.exp(t) - 1.0 - t,
                                     lambda t: math.exp(t) - 1.0, math.exp),
}


def scalar_from_name(name: str) -> ScalarFunction:
    """Scalar profile by registry name: ``cosh``, ``explin``, ``power:<k>``."""
    if name in _SCALARS:
        return _SCALARS[name]()
    if name.startswith("power:"):
        return _power_scalar(int(name.split(":", 1)[1]))
    raise ValidationError(f"unknown scalar function {name!r}")


def _eigh_blocks(alpha: DualElement):
    """Eigendecompositions of the Hermitian matrices ``-i alpha_b``."""
    out = []
    for b in alpha.blocks:
        h = -1j * b
        a, u = np.linalg.eigh(h)
        out.append((a, u))
    return out


class SpectralFunction(ConvexInvariantFunction):
    """Invariant function built from a convex scalar applied to spectra."""

    def __init__(self, scalar: ScalarFunction | str):
        if isinstance(scalar, str):
            scalar = scalar_from_name(scalar)
        self.scalar = scalar
        self.strict = True
        self.name = f"spectral:{scalar.name}"

    def _check_domain(self, a: np.ndarray):
        lo, hi = self.scalar.domain
        if np.any(a <= lo) or np.any(a >= hi):
            raise DomainError(
                f"eigenvalue outside the open domain ({lo}, {hi}) of "
                f"{self.scalar.name}")

    def value(self, alpha: DualElement) -> float:
        total = 0.0
        for b in alpha.blocks:
            a = np.linalg.eigvalsh(-1j * b)
            self._check_domain(a)
            total += sum(self.scalar.value(t) for t in a)
        return float(total)

    def _divided(self, a: np.ndarray) -> np.ndarray:
        d1 = np.array([self.scalar.deriv(t) for t in a])
        n = len(a)
        g = np.empty((n, n))
        scale = 1.0 + float(np.max(np.abs(a)))
        for j in range(n):
            for k in range(n):
                da = a[j] - a[k]
                if abs(da) <= _COINCIDENT_RTOL * scale:
                    g[j, k] = self.scalar.second(0.5 * (a[j] + a[k]))
                else:
                    g[j, k] = (d1[j] - d1[k]) / da
        return g

    def gradient(self, alpha: DualElement) -> LieElement:
        blocks = []
        for b, t in zip(alpha.blocks, alpha.descriptor.traceless):
            a, u = np.linalg.eigh(-1j * b)
            self._check_domain(a)
            d1 = np.array([self.scalar.deriv(x) for x in a])
            m = 1j * (u * d1) @ u.conj().T
            if t:
                n = b.shape[0]
                m = m - (np.trace(m) / n) * np.eye(n)
            blocks.append(m)
        return LieElement(alpha.descriptor, blocks)

    def hessian_apply(self, alpha: DualElement, xi_star: DualElement) -> LieElement:
        blocks = []
        for b, s, t in zip(alpha.blocks, xi_star.blocks,
                           alpha.descriptor.traceless):
            a, u = np.linalg.eigh(-1j * b)
            self._check_domain(a)
            g = self._divided(a)
            w = u.conj().T @ (-1j * s) @ u
            m = 1j * u @ (g * w) @ u.conj().T
            if t:
                n = b.shape[0]
                m = m - (np.trace(m) / n) * np.eye(n)
            blocks.append(m)
        return LieElement(alpha.descriptor, blocks)

    def hessian_solve(self, alpha: DualElement, xi: LieElement) -> DualElement:
        blocks = []
        for b, x, t, n in zip(alpha.blocks, xi.blocks,
                              alpha.descriptor.traceless,
                              alpha.descriptor.block_sizes):
            a, u = np.linalg.eigh(-1j * b)
            self._check_domain(a)
            g = self._divided(a)
            if np.min(np.abs(g)) == 0.0:
                raise ConvergenceError("spectral Hessian numerically singular")

            def invapply(mat):
                w = u.conj().T @ (-1j * mat) @ u
                r = w / g
                if not np.all(np.isfinite(r)):
                    raise ConvergenceError(
                        "spectral Hessian solve overflowed")
                return 1j * u @ r @ u.conj().T

            sol = invapply(x)
            if t:
                # invert on the trace-free subspace: correct by the unique
                # multiple of the identity direction killed by the projection
                w_id = invapply(1j * np.eye(n))
                sol = sol - (np.trace(sol) / np.trace(w_id)) * w_id
            blocks.append(sol)
        return DualElement(alpha.descriptor, blocks)

    def kernel_code(self):
        name = self.scalar.name
        if name == "cosh":
            return ("cosh", 0.0)
        if name == "explin":
            return ("explin", 0.0)
        if name.startswith("power:"):
            return ("power", float(name.split(":", 1)[1]))
        return None


def spectral(scalar: ScalarFunction | str) -> SpectralFunction:
    return SpectralFunction(scalar)


# ---------------------------------------------------------------------------
# Indefinite (non-convex) control case
# ---------------------------------------------------------------------------

class IndefiniteSplit(ConvexInvariantFunction):
    """Sign-split quadratic ``|alpha_first|^2 - |alpha_rest|^2``.

    Invariant under the coadjoint action (blockwise), but not convex; used
    to demonstrate that convexity is what forces one-sided spectra in the
    critical-point decomposition.  ``gradient_inverse`` refuses it.
    """

    strict = False

    def __init__(self, split_index: int | None = None):
        self.split_index = split_index
        self.name = "indefinite_split"

    def _split(self, desc: AlgebraDescriptor) -> int:
        k = self.split_index
        if k is None:
            k = desc.n_blocks // 2
        if not (0 < k < desc.n_blocks):
            raise ValidationError(
                "indefinite_split needs at least one block on each side")
        return k

    def _signs(self, desc: AlgebraDescriptor):
        k = self._split(desc)
        return [1.0 if i < k else -1.0 for i in range(desc.n_blocks)]

    def value(self, alpha: DualElement) -> float:
        signs = self._signs(alpha.descriptor)
        return float(sum(s * float(np.sum(np.abs(b) ** 2))
                         for s, b in zip(signs, alpha.blocks)))

    def gradient(self, alpha: DualElement) -> LieElement:
        signs = self._signs(alpha.descriptor)
        return LieElement(alpha.descriptor,
                          [2.0 * s * b for s, b in zip(signs, alpha.blocks)])

    def hessian_apply(self, alpha: DualElement, xi_star: DualElement) -> LieElement:
        signs = self._signs(alpha.descriptor)
        return LieElement(alpha.descriptor,
                          [2.0 * s * b for s, b in zip(signs, xi_star.blocks)])


def indefinite_split(split_index: int | None = None) -> IndefiniteSplit:
    return IndefiniteSplit(split_index)


def function_from_name(name: str) -> ConvexInvariantFunction:
    """Function registry used by the command-line interface.

    Accepts ``quadratic``, ``spectral:cosh``, ``spectral:explin``,
    ``spectral:power:<even k>`` and ``indefinite_split``.
    """
    if name == "quadratic":
        return quadratic_killing()
    if name == "indefinite_split":
        return indefinite_split()
    if name.startswith("spectral:"):
        return spectral(name.split(":", 1)[1])
    raise ValidationError(f"unknown function name {name!r}")


# ---------------------------------------------------------------------------
# Gradient inversion and Legendre transform
# ---------------------------------------------------------------------------

def gradient_inverse(f: ConvexInvariantFunction, xi: LieElement,
                     tol: float = 1e-12, max_iter: int = 60) -> DualElement:
    """Solve ``f.gradient(alpha) = xi`` for ``alpha`` by damped Newton.

    The iteration starts from ``xi.flat()`` rescaled to match gradient
    magnitude, takes Newton steps through :meth:`hessian_solve`, and halves
    the step until the residual decreases (also backing off steps that leave
    the scalar domain of a spectral function).

    Raises:
        ValidationError: if ``f`` is not strictly convex.
        ConvergenceError: if the residual does not reach
            ``tol * (1 + |xi|)`` within ``max_iter`` iterations.
    """
    if not f.strict:
        raise ValidationError(f"{f.name} is not strictly convex; "
                              "gradient inversion is refused")
    desc = xi.descriptor
    scale = 1.0 + norm(xi)
    alpha = xi.flat()
    if norm(alpha) > 0:
        try:
            g0 = f.gradient(alpha)
            ng = norm(g0)
            if ng > 1e-14:
                alpha = (norm(xi) / ng) * alpha
        except DomainError:
            alpha = 0.25 * alpha

    def residual(a):
        return f.gradient(a) - xi

    r = residual(alpha)
    res = norm(r)
    for it in range(1, max_iter + 1):
        if res <= tol * scale:
            return alpha
        delta = f.hessian_solve(alpha, r)
        step = 1.0
        for _ in range(40):
            cand = alpha - step * delta
            try:
                r_new = residual(cand)
            except DomainError:
                step *= 0.5
                continue
            res_new = norm(r_new)
            if res_new < res * (1.0 - 1e-4 * step) or res_new <= tol * scale:
                alpha, r, res = cand, r_new, res_new
                break
            step *= 0.5
        else:
            raise ConvergenceError(
                "gradient_inverse line search stalled",
                iterations=it, residual=res)
    if res <= tol * scale:
        return alpha
    raise ConvergenceError("gradient_inverse did not converge",
                           iterations=max_iter, residual=res)


def legendre_value(f: ConvexInvariantFunction, xi: LieElement,
                   tol: float = 1e-12) -> float:
    """Legendre transform ``f^(xi) = pair(alpha, xi) - f(alpha)``.

    ``alpha`` is the gradient preimage of ``xi``, where the supremum of
    ``pair(alpha, xi) - f(alpha)`` is attained for convex ``f``.
    """
    alpha = gradient_inverse(f, xi, tol=tol)
    return pair(alpha, xi) - f.value(alpha)


# ---------------------------------------------------------------------------
# Identity battery
# ---------------------------------------------------------------------------

def _commuting_direction(gamma: DualElement, rng: np.random.Generator) -> LieElement:
    """Random element commuting with ``gamma`` (same eigenbasis)."""
    blocks = []
    for b, t, n in zip(gamma.blocks, gamma.descriptor.traceless,
                       gamma.descriptor.block_sizes):
        _, u = np.linalg.eigh(-1j * b)
        q = rng.standard_normal(n)
        if t:
            q = q - q.mean()
        blocks.append(1j * (u * q) @ u.conj().T)
    return LieElement(gamma.descriptor, blocks)


def verify_convex_identities(f: ConvexInvariantFunction,
                             desc: AlgebraDescriptor,
                             trials: int = 30,
                             seed: int = 0,
                             h_fd: float = 1e-4,
                             scale: float = 0.5) -> dict:
    """Randomized check battery for the structural identities of ``f``.

    Checks, over ``trials`` random draws (max defect reported per key):

    * ``invariance``             ``f(Ad*_k alpha) = f(alpha)``
    * ``gradient_equivariance``  ``df|_(Ad*_k alpha) = Ad_k df|_alpha``
    * ``hessian_equivariance``   same for the Hessian applied to a direction
    * ``inner_invariance``       Hessian bilinear form is Ad*-invariant
    * ``bracket_gradient``       ``[eta, df|_alpha] = Hess f|_alpha(ad*_eta alpha)``
    * ``gradient_commutes``      ``[df|_alpha, alpha.sharp()] = 0``
    * ``commuting_hessian_ad``   ``Hess f|_gamma`` commutes with ``ad_eta``
      when ``[eta, gamma] = 0``
    * ``symmetry``               symmetry of the Hessian bilinear form
    * ``gradient_fd``            central-difference check of the gradient
    * ``hessian_fd``             central-difference check of the Hessian

    The finite-difference rows are limited by truncation error
    ``O(h_fd^2)``; all other rows are exact identities up to roundoff.

    Returns:
        dict with one max-defect float per key.
    """
    rng = np.random.default_rng(seed)
    keys = ["invariance", "gradient_equivariance", "hessian_equivariance",
            "inner_invariance", "bracket_gradient", "gradient_commutes",
            "commuting_hessian_ad", "symmetry", "gradient_fd", "hessian_fd"]
    worst = {k: 0.0 for k in keys}

    def bump(key, val):
        worst[key] = max(worst[key], float(val))

    for _ in range(trials):
        alpha = random_dual_element(desc, rng, scale=scale)
        beta = random_dual_element(desc, rng, scale=scale)
        gamma = random_dual_element(desc, rng, scale=scale)
        eta = random_lie_element(desc, rng, scale=scale)
        k = random_unitary(desc, rng, scale=0.7)

        ka = coadjoint(k, alpha)
        kb = coadjoint(k, beta)
        kg = coadjoint(k, gamma)

        bump("invariance", abs(f.value(ka) - f.value(alpha)))
        bump("gradient_equivariance",
             norm(f.gradient(ka) - adjoint(k, f.gradient(alpha))))
        bump("hessian_equivariance",
             norm(f.hessian_apply(ka, kb)
                  - adjoint(k, f.hessian_apply(alpha, beta))))
        bump("inner_invariance",
             abs(hess_inner(f, ka, kb, kg) - hess_inner(f, alpha, beta, gamma)))
        bump("bracket_gradient",
             norm(bracket(eta, f.gradient(alpha))
                  - f.hessian_apply(alpha, coadjoint_inf(eta, alpha))))
        bump("gradient_commutes",
             norm(bracket(f.gradient(alpha), alpha.sharp())))

        eta_c = _commuting_direction(gamma, rng)
        bump("commuting_hessian_ad",
             norm(f.hessian_apply(gamma, coadjoint_inf(eta_c, beta))
                  - bracket(eta_c, f.hessian_apply(gamma, beta))))

        bump("symmetry",
             abs(hess_inner(f, alpha, beta, gamma) - hess_inner(f, alpha, gamma, beta)))

        fd_grad = (f.value(alpha + h_fd * beta) - f.value(alpha - h_fd * beta)) / (2 * h_fd)
        bump("gradient_fd", abs(fd_grad - pair(beta, f.gradient(alpha))))

        fd_hess = (1.0 / (2 * h_fd)) * (f.gradient(alpha + h_fd * beta)
                                        - f.gradient(alpha - h_fd * beta))
        bump("hessian_fd", norm(fd_hess - f.hessian_apply(alpha, beta)))

    return worst
