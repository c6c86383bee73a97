"""Structure theory at critical points of the descent energy.

At a critical point ``z`` of ``f o mu`` (i.e. ``sigma_z(df|mu(z)) = 0``) the
complexified stabilizer algebra ``g_z`` carries the operator

    T(x) = i [df|mu(z), x],

which is self-adjoint with nonpositive spectrum with respect to the
Hermitian inner product induced by the inverse Hessian of a strictly
*convex* ``f`` (for non-convex invariant functions the operator is still
self-adjoint with respect to the Frobenius product but its spectrum can
change sign).  Its kernel is the complexification of the compact stabilizer
``k_z``, giving a decomposition of ``g_z`` into a reductive part and
strictly negative blocks.

This module computes that decomposition, the mu-type invariant

    chi(g) = pair_C(mu(act(g, z)), Ad_g eta) - pair_C((df)^{-1}(xi), eta),

(constant in ``g`` for ``eta`` in ``g_z`` and ``xi`` fixing ``z``), and the
extremal vector field: the unique center element ``xi`` of ``k_z`` solving

    P_{k_z}( (df)^{-1}(xi).sharp() - mu(z).sharp() ) = 0,

together with its transport along group moves of the base point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import (ConvergenceError, CriticalityError,
                     EmptyStabilizerError, RankDeficientError,
                     TransportError, ValidationError)
from .invariant_convex import ConvexInvariantFunction, gradient_inverse
from .lie_core import (ComplexLieElement, DualElement, GroupElement,
                       LieElement, adjoint, bracket, coefficients,
                       exponential, identity_group, norm, orthonormal_basis,
                       pair, pair_complex)
from .phase_space import PhasePoint, PhaseSpace

__all__ = [
    "critical_check",
    "CalabiDecomposition",
    "calabi_decomposition",
    "convexity_counterexample",
    "mu_invariant",
    "mu_invariant_constancy",
    "extremal_field",
    "extremal_field_transport",
    "stabilizer_condition",
]


def critical_check(space: PhaseSpace, f: ConvexInvariantFunction,
                   z: PhasePoint, tol: float = 1e-6) -> tuple[bool, float]:
    """Whether ``z`` is critical: metric norm of ``sigma_z(df|mu(z))``.

    Returns ``(ok, residual)`` with ``ok = residual <= tol``.
    """
    mu = space.moment(z)
    df = f.gradient(mu)
    sig = space.infinitesimal_action(z, df)
    res = math.sqrt(2.0 * sum(float(np.sum(np.abs(c) ** 2))
                              for c in sig.components))
    return res <= tol, res


# ---------------------------------------------------------------------------
# Decomposition of the complexified stabilizer
# ---------------------------------------------------------------------------

@dataclass
class CalabiDecomposition:
    """Spectral decomposition of ``x -> i [df, x]`` on ``g_z``.

    Attributes:
        residual: critical-point residual of the base point.
        eigenvalues: ascending real spectrum (length ``dim_C g_z``).
        eigenvectors: matching basis of ``g_z`` (orthonormal for the
            inverse-Hessian Hermitian product used to symmetrize).
        zero_block_dim: multiplicity of the zero eigenvalue.
        hermitian_defect: max of the non-Hermitian part of the operator
            matrix and the leakage of the operator image out of ``g_z``.
        zero_angle: largest principal angle (radians) between the zero
            eigenspace and the complexified compact stabilizer.
        dim_k / dim_g: stabilizer dimensions (real / complex).
        inner: ``"inverse_hessian"`` or ``"frobenius"`` (fallback used for
            functions that are not strictly convex).
    """

    residual: float
    eigenvalues: np.ndarray
    eigenvectors: list[ComplexLieElement] = field(repr=False)
    zero_block_dim: int
    hermitian_defect: float
    zero_angle: float
    dim_k: int
    dim_g: int
    inner: str


def _complex_inverse_hessian_inner(f: ConvexInvariantFunction, mu: DualElement):
    """Hermitian product ``B(x, y) = sum_b Tr(S(x)_b y_b^*)`` on ``g``.

    ``S`` is the complexified inverse Hessian of ``f`` at ``mu``; for
    strictly convex ``f`` this extends the positive form
    ``pair(Hess^{-1} xi, eta)`` on ``k`` to a Hermitian inner product.
    """
    desc = mu.descriptor

    def solve_tilde(x: ComplexLieElement) -> list[np.ndarray]:
        x1 = x.compact_part()
        x2 = x.anti_compact_part()
        s1 = f.hessian_solve(mu, x1)
        s2 = f.hessian_solve(mu, x2)
        return [a + 1j * b for a, b in zip(s1.blocks, s2.blocks)]

    def inner(x: ComplexLieElement, y: ComplexLieElement) -> complex:
        sx = solve_tilde(x)
        return complex(sum(np.einsum("ij,ij->", a, b.conj())
                           for a, b in zip(sx, y.blocks)))

    return inner


def _frobenius_inner(x: ComplexLieElement, y: ComplexLieElement) -> complex:
    return complex(sum(np.einsum("ij,ij->", a, b.conj())
                       for a, b in zip(x.blocks, y.blocks)))


def _principal_angle(cols_a: np.ndarray, cols_b: np.ndarray) -> float:
    """Largest principal angle between column spans (radians)."""
    if cols_a.shape[1] != cols_b.shape[1]:
        return math.pi / 2.0
    if cols_a.shape[1] == 0:
        return 0.0
    qa, _ = np.linalg.qr(cols_a)
    qb, _ = np.linalg.qr(cols_b)
    s = np.linalg.svd(qa.conj().T @ qb, compute_uv=False)
    c = min(1.0, max(-1.0, float(np.min(s))))
    return float(np.arccos(c))


def calabi_decomposition(space: PhaseSpace, f: ConvexInvariantFunction,
                         z: PhasePoint, crit_tol: float = 1e-6,
                         zero_tol: float = 1e-7,
                         stab_tol: float = 1e-8) -> CalabiDecomposition:
    """Decompose ``g_z`` under ``x -> i [df|mu(z), x]`` at a critical point.

    Raises:
        CriticalityError: if the critical residual exceeds ``crit_tol``.
    """
    ok, res = critical_check(space, f, z, tol=crit_tol)
    if not ok:
        raise CriticalityError(
            f"point is not critical (residual {res:.3e} > {crit_tol:.1e})")

    mu = space.moment(z)
    df = f.gradient(mu)
    basis_g = space.stabilizer_g(z, tol=stab_tol)
    basis_k = space.stabilizer_k(z, tol=stab_tol)
    m = len(basis_g)
    if m == 0:
        return CalabiDecomposition(res, np.array([]), [], 0, 0.0, 0.0,
                                   len(basis_k), 0,
                                   "inverse_hessian" if f.strict else "frobenius")

    if f.strict:
        inner = _complex_inverse_hessian_inner(f, mu)
        inner_name = "inverse_hessian"
    else:
        inner = _frobenius_inner
        inner_name = "frobenius"

    # orthonormalize the stabilizer basis for the chosen Hermitian product
    gram = np.array([[inner(basis_g[j], basis_g[i]) for j in range(m)]
                     for i in range(m)])
    gram = 0.5 * (gram + gram.conj().T)
    evals, evecs = np.linalg.eigh(gram)
    if np.min(evals) <= 0:
        raise ValidationError(
            "stabilizer Gram matrix is not positive definite "
            f"(min eigenvalue {np.min(evals):.3e})")
    w = evecs @ np.diag(evals ** -0.5) @ evecs.conj().T
    onb = []
    for j in range(m):
        x = ComplexLieElement.zero(space.algebra)
        for i in range(m):
            x = x + complex(w[i, j]) * basis_g[i]
        onb.append(x)

    # operator matrix and self-adjointness defect
    tmat = np.empty((m, m), dtype=np.complex128)
    leak = 0.0
    images = [1j * bracket(df, e) for e in onb]
    for j, img in enumerate(images):
        for i in range(m):
            tmat[i, j] = inner(img, onb[i])
        resid = img
        for i in range(m):
            resid = resid + (-complex(tmat[i, j])) * onb[i]
        leak = max(leak, math.sqrt(max(0.0, inner(resid, resid).real)))
    herm_defect = float(np.linalg.norm(tmat - tmat.conj().T, 2))
    herm_defect = max(herm_defect, leak)

    lam, vv = np.linalg.eigh(0.5 * (tmat + tmat.conj().T))
    vectors = []
    for k in range(m):
        x = ComplexLieElement.zero(space.algebra)
        for j in range(m):
            x = x + complex(vv[j, k]) * onb[j]
        vectors.append(x)

    scale = max(1.0, float(np.max(np.abs(lam))) if m else 1.0)
    zero_idx = [k for k in range(m) if abs(lam[k]) <= zero_tol * scale]

    # compare the zero eigenspace with the complexified compact stabilizer
    full_basis = orthonormal_basis(space.algebra)
    if zero_idx:
        za = np.column_stack([coefficients(vectors[k], full_basis)
                              for k in zero_idx])
        kb = (np.column_stack([coefficients(e, full_basis) for e in basis_k])
              .astype(np.complex128)
              if basis_k else np.zeros((len(full_basis), 0), np.complex128))
        angle = _principal_angle(za, kb)
    else:
        angle = 0.0 if not basis_k else math.pi / 2.0

    return CalabiDecomposition(
        residual=res,
        eigenvalues=lam,
        eigenvectors=vectors,
        zero_block_dim=len(zero_idx),
        hermitian_defect=herm_defect,
        zero_angle=angle,
        dim_k=len(basis_k),
        dim_g=m,
        inner=inner_name,
    )


def convexity_counterexample(space: PhaseSpace, z: PhasePoint,
                             delta: float = 1e-6) -> dict:
    """Show that convexity forces one-sided spectra, on a doubled space.

    Builds the product of ``space`` with itself, places ``(z, z)`` on it
    (critical for both functions below when ``z`` is critical for the
    quadratic energy on ``space``), and decomposes with

    * the convex quadratic energy: spectrum ``<= delta`` expected;
    * the sign-split (non-convex) energy: eigenvalues of *both* signs with
      magnitude ``>= delta`` expected, demonstrating the failure.

    Returns a dict with both spectra and the verdict flags.
    """
    from .invariant_convex import IndefiniteSplit, QuadraticKilling
    from .phase_space import ProductSpace

    doubled = ProductSpace(space, space)
    zz = doubled.embed_point(z, z)

    convex = calabi_decomposition(doubled, QuadraticKilling(), zz)
    split = IndefiniteSplit(split_index=space.algebra.n_blocks)
    indef = calabi_decomposition(doubled, split, zz)

    lam_c = convex.eigenvalues
    lam_i = indef.eigenvalues
    return {
        "convex_eigenvalues": lam_c,
        "indefinite_eigenvalues": lam_i,
        "convex_max": float(np.max(lam_c)) if lam_c.size else 0.0,
        "indefinite_max": float(np.max(lam_i)) if lam_i.size else 0.0,
        "indefinite_min": float(np.min(lam_i)) if lam_i.size else 0.0,
        "delta": delta,
        "convex_one_sided": bool(lam_c.size == 0 or np.max(lam_c) <= delta),
        "indefinite_two_sided": bool(lam_i.size > 0
                                     and np.max(lam_i) >= delta
                                     and np.min(lam_i) <= -delta),
        "hermitian_defect": max(convex.hermitian_defect, indef.hermitian_defect),
    }


# ---------------------------------------------------------------------------
# mu-type invariant
# ---------------------------------------------------------------------------

def _check_in_stabilizer(space, z, x, tol, label):
    sig = space.infinitesimal_action(z, x)
    r = math.sqrt(sum(float(np.sum(np.abs(c) ** 2)) for c in sig.components))
    if r > tol * (1.0 + norm(x)):
        raise ValidationError(
            f"{label} is not in the stabilizer (|sigma| = {r:.3e})")


def mu_invariant(space: PhaseSpace, f: ConvexInvariantFunction, z: PhasePoint,
                 xi: LieElement, eta: ComplexLieElement | LieElement,
                 check_tol: float = 1e-8) -> complex:
    """``pair_C(mu(z), eta) - pair_C((df)^{-1}(xi), eta)``.

    ``xi`` must lie in the compact stabilizer ``k_z`` and ``eta`` in the
    complexified stabilizer ``g_z`` (validated within ``check_tol``).
    """
    _check_in_stabilizer(space, z, xi, check_tol, "xi")
    _check_in_stabilizer(space, z, eta, check_tol, "eta")
    mu = space.moment(z)
    if norm(xi) == 0.0:
        base = 0.0 + 0.0j
    else:
        base = pair_complex(gradient_inverse(f, xi), eta)
    return pair_complex(mu, eta) - base


def mu_invariant_constancy(space: PhaseSpace, f: ConvexInvariantFunction,
                           z: PhasePoint, xi: LieElement,
                           eta: ComplexLieElement | LieElement,
                           g_samples: list[GroupElement],
                           check_tol: float = 1e-8) -> dict:
    """Evaluate ``chi(g)`` over group samples and report its spread.

    ``chi(g) = pair_C(mu(act(g, z)), Ad_g eta) - pair_C((df)^{-1}(xi), eta)``
    with the second term independent of ``g``.  For ``xi`` in ``k_z`` and
    ``eta`` in ``g_z`` the value is constant along the complexified orbit.

    Returns a dict with ``value`` (at the identity), ``max_deviation`` and
    the individual ``values``.
    """
    _check_in_stabilizer(space, z, xi, check_tol, "xi")
    _check_in_stabilizer(space, z, eta, check_tol, "eta")
    if norm(xi) == 0.0:
        base = 0.0 + 0.0j
    else:
        base = pair_complex(gradient_inverse(f, xi), eta)

    def chi(g: GroupElement) -> complex:
        zg = space.act(g, z)
        return pair_complex(space.moment(zg), adjoint(g, eta)) - base

    e = identity_group(space.algebra)
    v0 = chi(e)
    values = [chi(g) for g in g_samples]
    dev = max((abs(v - v0) for v in values), default=0.0)
    return {"value": v0, "values": values, "max_deviation": float(dev),
            "n_samples": len(g_samples)}


# ---------------------------------------------------------------------------
# Extremal vector field
# ---------------------------------------------------------------------------

def _center_basis(space: PhaseSpace, basis_k: list[LieElement],
                  tol: float = 1e-10) -> list[LieElement]:
    """Orthonormal basis of the center of the compact stabilizer algebra."""
    m = len(basis_k)
    full = orthonormal_basis(space.algebra)
    rows = []
    for i in range(m):
        cols = []
        for j in range(m):
            cols.append(coefficients(bracket(basis_k[i], basis_k[j]), full))
        rows.append(np.concatenate(cols))
    a = np.array(rows).T  # maps center coefficients to stacked brackets
    _, s, vh = np.linalg.svd(a)
    smax = s[0] if len(s) else 0.0
    rank = int(np.sum(s > max(tol, 1e-12) * max(smax, 1.0)))
    coeffs = [vh[i] for i in range(rank, m)]
    out = []
    for c in coeffs:
        x = LieElement.zero(space.algebra)
        for ci, e in zip(c, basis_k):
            x = x + float(ci) * e
        out.append(x)
    return out


def extremal_field(space: PhaseSpace, f: ConvexInvariantFunction,
                   z: PhasePoint, tol: float = 1e-10,
                   init: np.ndarray | None = None,
                   max_iter: int = 50) -> LieElement:
    """Extremal vector field at ``z``.

    Solves ``P_{k_z}((df)^{-1}(xi).sharp() - mu(z).sharp()) = 0`` for
    ``xi`` in the center of ``k_z`` by a damped Newton iteration with
    finite-difference Jacobian; the default start is the projection of
    ``df|mu(z)`` onto the center (exact for the quadratic energy).

    Raises:
        EmptyStabilizerError: when ``k_z = 0``.
        RankDeficientError: when the Jacobian loses rank (the solution
            would not be isolated).
        ConvergenceError: when Newton stalls.
    """
    basis_k = space.stabilizer_k(z)
    if not basis_k:
        raise EmptyStabilizerError(
            "extremal field needs a nontrivial compact stabilizer")
    center = _center_basis(space, basis_k)
    mu = space.moment(z)
    mu_scale = 1.0 + norm(mu)
    nc = len(center)

    def assemble(c: np.ndarray) -> LieElement:
        x = LieElement.zero(space.algebra)
        for ci, e in zip(c, center):
            x = x + float(ci) * e
        return x

    def residual(c: np.ndarray) -> np.ndarray:
        xi = assemble(c)
        if norm(xi) == 0.0:
            alpha = DualElement.zero(space.algebra)
        else:
            alpha = gradient_inverse(f, xi)
        diff = alpha - mu
        return np.array([pair(diff, e) for e in basis_k])

    if nc == 0:
        r0 = residual(np.zeros(0))
        if np.linalg.norm(r0) <= tol * mu_scale:
            return LieElement.zero(space.algebra)
        raise RankDeficientError(
            "stabilizer center is trivial but the residual does not vanish",
            residual=float(np.linalg.norm(r0)))

    if init is not None:
        c = np.asarray(init, dtype=float).copy()
        if c.shape != (nc,):
            raise ValidationError(f"init must have shape ({nc},)")
    else:
        grad = f.gradient(mu)
        c = np.array([pair(grad.flat(), e) for e in center])

    r = residual(c)
    rn = float(np.linalg.norm(r))
    jac = None
    for it in range(1, max_iter + 1):
        if rn <= tol * mu_scale:
            break
        h = 1e-6 * (1.0 + float(np.linalg.norm(c)))
        jac = np.empty((len(basis_k), nc))
        for k in range(nc):
            e = np.zeros(nc)
            e[k] = h
            jac[:, k] = (residual(c + e) - residual(c - e)) / (2.0 * h)
        s = np.linalg.svd(jac, compute_uv=False)
        if s[-1] < 1e-8 * max(s[0], 1.0):
            raise RankDeficientError(
                "extremal-field Jacobian is rank deficient "
                f"(singular values {s})", iterations=it, residual=rn)
        delta = np.linalg.lstsq(jac, -r, rcond=None)[0]
        step = 1.0
        for _ in range(30):
            c_new = c + step * delta
            r_new = residual(c_new)
            rn_new = float(np.linalg.norm(r_new))
            if rn_new < rn * (1.0 - 1e-4 * step) or rn_new <= tol * mu_scale:
                c, r, rn = c_new, r_new, rn_new
                break
            step *= 0.5
        else:
            raise ConvergenceError("extremal-field line search stalled",
                                   iterations=it, residual=rn)
    if rn > tol * mu_scale:
        raise ConvergenceError("extremal-field Newton did not converge",
                               iterations=max_iter, residual=rn)
    return assemble(c)


@dataclass
class TransportReport:
    field: LieElement
    conjugator: GroupElement
    defect: float
    dim_k: int
    dim_g: int


def extremal_field_transport(space: PhaseSpace, f: ConvexInvariantFunction,
                             z: PhasePoint, g: GroupElement,
                             budget: int = 50, tol: float = 1e-9,
                             full_report: bool = False):
    """Extremal field at ``act(g, z)``, certified against ``Ad_g``-transport.

    Computes the field ``xi`` at ``z`` and ``xi'`` at ``z' = act(g, z)``
    (Newton seeded with the compact part of ``Ad_g xi``), checks that the
    stabilizer dimensions at ``z`` and ``z'`` agree, and certifies the
    transport relation by finding ``g' = exp(zeta)`` with ``zeta`` in
    ``g_{z'}`` such that ``Ad_{g'} Ad_g xi = xi'`` (for unitary ``g`` the
    identity works).  The certification search is limited to ``budget``
    residual evaluations.

    Returns the transported field (or a :class:`TransportReport` when
    ``full_report`` is set).

    Raises:
        TransportError: on stabilizer-dimension mismatch or when no
            conjugator is found within the budget.
    """
    xi = extremal_field(space, f, z, tol=tol)
    z2 = space.act(g, z)

    k1, k2 = space.stabilizer_k(z), space.stabilizer_k(z2)
    g1, g2 = space.stabilizer_g(z), space.stabilizer_g(z2)
    if len(k1) != len(k2) or len(g1) != len(g2):
        raise TransportError(
            f"stabilizer dimensions changed along the move: "
            f"k {len(k1)}->{len(k2)}, g {len(g1)}->{len(g2)}")

    x = adjoint(g, xi).complexify()

    center2 = _center_basis(space, k2)
    seed = np.array([pair(x.compact_part().flat(), e) for e in center2])
    xi2 = extremal_field(space, f, z2, tol=tol, init=seed)

    scale = 1.0 + norm(xi2)
    direct = norm(x - xi2.complexify())
    ident = identity_group(space.algebra)
    if direct <= 1e-7 * scale:
        report = TransportReport(xi2, ident, float(direct), len(k2), len(g2))
        return report if full_report else xi2

    if budget <= 0:
        raise TransportError("no conjugator found within budget 0")

    m = len(g2)
    full = orthonormal_basis(space.algebra)
    target = coefficients(xi2.complexify(), full)

    def conjugator(par: np.ndarray) -> GroupElement:
        zeta = ComplexLieElement.zero(space.algebra)
        for i in range(m):
            zeta = zeta + complex(par[i], par[m + i]) * g2[i]
        return exponential(zeta)

    def fun(par: np.ndarray) -> np.ndarray:
        gp = conjugator(par)
        d = coefficients(adjoint(gp, x).complexify(), full) - target
        return np.concatenate([d.real, d.imag])

    sol = scipy.optimize.least_squares(fun, np.zeros(2 * m),
                                       max_nfev=budget, xtol=1e-14,
                                       ftol=1e-14, gtol=1e-14)
    defect = float(np.linalg.norm(sol.fun))
    if defect > 1e-7 * scale:
        raise TransportError(
            f"no conjugator found within budget {budget} "
            f"(best defect {defect:.3e})")
    report = TransportReport(xi2, conjugator(sol.x), defect, len(k2), len(g2))
    return report if full_report else xi2


# ---------------------------------------------------------------------------
# Stabilizer condition
# ---------------------------------------------------------------------------

def stabilizer_condition(space: PhaseSpace, f: ConvexInvariantFunction,
                         z: PhasePoint, crit_tol: float = 1e-6) -> dict:
    """Compare ``dim k_z`` with the reductive dimension of ``g_z``.

    At a critical point the reductive dimension is the zero-block dimension
    of the stabilizer decomposition; away from critical points the rank of
    the trace form ``Tr(x_i x_j)`` on ``g_z`` is used as a fallback (it
    annihilates nilpotent directions and counts torus and semisimple ones).
    The condition ``dim k_z == reductive dim`` characterizes the points of
    maximal compact stabilizer within the complexified orbit.
    """
    dim_k = len(space.stabilizer_k(z))
    basis_g = space.stabilizer_g(z)
    dim_g = len(basis_g)
    ok, res = critical_check(space, f, z, tol=crit_tol)
    if ok and f.strict:
        dec = calabi_decomposition(space, f, z, crit_tol=crit_tol)
        reductive = dec.zero_block_dim
        method = "decomposition"
    else:
        if dim_g == 0:
            reductive = 0
        else:
            k = np.array([[sum(np.einsum("ij,ji->", a, b)
                               for a, b in zip(x.blocks, y.blocks))
                           for y in basis_g] for x in basis_g])
            s = np.linalg.svd(k, compute_uv=False)
            smax = s[0] if len(s) else 0.0
            reductive = int(np.sum(s > 1e-8 * max(smax, 1.0)))
        method = "trace_form"
    return {"dim_k": dim_k, "dim_g": dim_g, "reductive_dim": int(reductive),
            "condition": bool(dim_k == reductive), "method": method,
            "residual": res}
