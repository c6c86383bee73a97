"""Products of complex projective spaces as Hamiltonian phase spaces.

Points are tuples of unit vectors, one per projective component; all
quantities of interest (moment map, symplectic form, metric, stabilizers,
Kempf-Ness function) depend only on the line spanned by each component, and
the implementation is invariant under per-component phase changes.

Conventions (with ``<u, v>`` the Hermitian product, conjugate-linear in the
first slot):

* moment map          ``mu(z)_b = sum_{j in block b} i z_j z_j^*``
  (trace-projected on trace-free blocks), so that
  ``pair(mu(z), xi) = sum_j Im <z_j, xi z_j>``;
* infinitesimal action ``sigma_z(xi)_j = xi z_j - <z_j, xi z_j> z_j``;
* symplectic form     ``omega_z(u, v) = 2 sum_j Im <u_j, v_j>``;
* metric              ``g_z(u, v) = 2 sum_j Re <u_j, v_j>``;
* complex structure   ``J v = i v``.

These satisfy the moment-map axiom ``d pair(mu(z), xi)[v] =
omega_z(v, sigma_z(xi))`` and ``omega(u, v) = g(J u, v)``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ValidationError
from .lie_core import (AlgebraDescriptor, ComplexLieElement, DualElement,
                       GroupElement, LieElement, from_coefficients,
                       orthonormal_basis)

__all__ = [
    "PhasePoint",
    "TangentVector",
    "PhaseSpace",
    "ProjectiveSpace",
    "ProjectivePower",
    "ProductSpace",
    "space_from_config",
    "phase_distance",
]


class PhasePoint:
    """Tuple of unit vectors, one per projective component."""

    __slots__ = ("components",)

    def __init__(self, components: Sequence[np.ndarray]):
        comps = []
        for c in components:
            arr = np.array(c, dtype=np.complex128, copy=True).reshape(-1)
            if not np.all(np.isfinite(arr.view(np.float64))):
                raise ValidationError("component contains non-finite entries")
            n = np.linalg.norm(arr)
            if n < 1e-12:
                raise ValidationError("component vector is numerically zero")
            if abs(n - 1.0) > 1e-6:
                raise ValidationError(
                    f"component norm {n:.6f} is not 1 (normalize first)")
            arr = arr / n
            arr.setflags(write=False)
            comps.append(arr)
        object.__setattr__(self, "components", tuple(comps))

    def __setattr__(self, *a):
        raise AttributeError("PhasePoint is immutable")

    def __repr__(self):
        dims = ",".join(str(len(c)) for c in self.components)
        return f"<PhasePoint dims=({dims})>"

    @staticmethod
    def normalized(components: Sequence[np.ndarray]) -> "PhasePoint":
        """Construct from arbitrary nonzero vectors, normalizing each."""
        out = []
        for c in components:
            arr = np.asarray(c, dtype=np.complex128).reshape(-1)
            n = np.linalg.norm(arr)
            if n < 1e-12:
                raise ValidationError("component vector is numerically zero")
            out.append(arr / n)
        return PhasePoint(out)


class TangentVector:
    """Tangent vector: per-component vectors orthogonal to the base point."""

    __slots__ = ("components",)

    def __init__(self, components: Sequence[np.ndarray]):
        comps = []
        for c in components:
            arr = np.array(c, dtype=np.complex128, copy=True).reshape(-1)
            arr.setflags(write=False)
            comps.append(arr)
        object.__setattr__(self, "components", tuple(comps))

    def __setattr__(self, *a):
        raise AttributeError("TangentVector is immutable")

    def __add__(self, other):
        return TangentVector([a + b for a, b in
                              zip(self.components, other.components)])

    def __sub__(self, other):
        return TangentVector([a - b for a, b in
                              zip(self.components, other.components)])

    def __mul__(self, s):
        return TangentVector([s * a for a in self.components])

    __rmul__ = __mul__

    def norms(self) -> float:
        return float(np.sqrt(sum(float(np.sum(np.abs(c) ** 2))
                                 for c in self.components)))


def phase_distance(z: PhasePoint, w: PhasePoint) -> float:
    """Largest per-component projective distance ``sqrt(1 - |<z_j, w_j>|^2)``.

    Zero exactly when every component agrees up to a phase.
    """
    worst = 0.0
    for a, b in zip(z.components, w.components):
        if len(a) != len(b):
            raise ValidationError("component dimension mismatch")
        c = abs(np.vdot(a, b))
        worst = max(worst, float(np.sqrt(max(0.0, 1.0 - c * c))))
    return worst


class PhaseSpace:
    """Base class: product of projective spaces with a blockwise group action.

    Subclasses define ``algebra`` (an :class:`AlgebraDescriptor`),
    ``component_dims`` (ambient dimension of each component) and
    ``component_block`` (index of the algebra block acting on each
    component).  All geometry is implemented generically from those.
    """

    algebra: AlgebraDescriptor
    component_dims: tuple[int, ...]
    component_block: tuple[int, ...]
    name: str = "space"

    # -- validation helpers -------------------------------------------------
    def _check_point(self, z: PhasePoint):
        if tuple(len(c) for c in z.components) != self.component_dims:
            raise ValidationError(
                f"point dims {tuple(len(c) for c in z.components)} do not "
                f"match space dims {self.component_dims}")

    def _check_tangent(self, z: PhasePoint, v: TangentVector, tol=1e-8):
        self._check_point(z)
        if not isinstance(v, TangentVector):
            raise ValidationError(
                f"expected a TangentVector, got {type(v).__name__}")
        if tuple(len(c) for c in v.components) != self.component_dims:
            raise ValidationError("tangent dims do not match space dims")
        for a, b in zip(z.components, v.components):
            ip = abs(np.vdot(a, b))
            if ip > tol * (1.0 + np.linalg.norm(b)):
                raise ValidationError(
                    f"vector is not tangent (|<z, v>| = {ip:.3e})")

    # -- group action ---------------------------------------------------------
    def act(self, g: GroupElement, z: PhasePoint) -> PhasePoint:
        """Componentwise action ``z_j -> g_b z_j / |g_b z_j|``."""
        self._check_point(z)
        if g.descriptor != self.algebra:
            raise ValidationError("group element descriptor mismatch")
        comps = []
        for j, c in enumerate(z.components):
            w = g.blocks[self.component_block[j]] @ c
            n = np.linalg.norm(w)
            if n < 1e-14:
                raise ValidationError("group action collapsed a component")
            comps.append(w / n)
        return PhasePoint(comps)

    def infinitesimal_action(self, z: PhasePoint, xi) -> TangentVector:
        """``sigma_z(xi)_j = xi_b z_j - <z_j, xi_b z_j> z_j``.

        Accepts compact or complexified algebra elements; the result is
        tangent (orthogonal to each component) by construction.
        """
        self._check_point(z)
        if xi.descriptor != self.algebra:
            raise ValidationError("algebra element descriptor mismatch")
        comps = []
        for j, c in enumerate(z.components):
            w = xi.blocks[self.component_block[j]] @ c
            comps.append(w - np.vdot(c, w) * c)
        return TangentVector(comps)

    def moment(self, z: PhasePoint) -> DualElement:
        """Moment map ``mu(z)_b = sum_{j in b} i z_j z_j^*`` (trace-projected)."""
        self._check_point(z)
        blocks = [np.zeros((n, n), np.complex128) for n in self.algebra.block_sizes]
        for j, c in enumerate(z.components):
            b = self.component_block[j]
            blocks[b] = blocks[b] + 1j * np.outer(c, c.conj())
        for b, (n, t) in enumerate(zip(self.algebra.block_sizes,
                                       self.algebra.traceless)):
            if t:
                blocks[b] = blocks[b] - (np.trace(blocks[b]) / n) * np.eye(n)
        return DualElement(self.algebra, blocks)

    # -- Riemannian / symplectic structure ------------------------------------
    def symplectic_form(self, z: PhasePoint, u: TangentVector,
                        v: TangentVector) -> float:
        self._check_tangent(z, u)
        self._check_tangent(z, v)
        return float(2.0 * sum(np.vdot(a, b).imag
                               for a, b in zip(u.components, v.components)))

    def metric(self, z: PhasePoint, u: TangentVector, v: TangentVector) -> float:
        self._check_tangent(z, u)
        self._check_tangent(z, v)
        return float(2.0 * sum(np.vdot(a, b).real
                               for a, b in zip(u.components, v.components)))

    def complex_structure(self, z: PhasePoint, v: TangentVector) -> TangentVector:
        self._check_tangent(z, v)
        return TangentVector([1j * c for c in v.components])

    def tangent_projection(self, z: PhasePoint,
                           raw: Sequence[np.ndarray]) -> TangentVector:
        """Project arbitrary per-component vectors onto the tangent space."""
        self._check_point(z)
        comps = []
        for c, w in zip(z.components, raw):
            w = np.asarray(w, dtype=np.complex128).reshape(-1)
            comps.append(w - np.vdot(c, w) * c)
        return TangentVector(comps)

    def displace(self, z: PhasePoint, v: TangentVector, t: float) -> PhasePoint:
        """Normalized straight-line displacement ``(z + t v)/|z + t v|``."""
        self._check_point(z)
        return PhasePoint.normalized([a + t * b for a, b in
                                      zip(z.components, v.components)])

    # -- stabilizers ----------------------------------------------------------
    def stabilizer_k(self, z: PhasePoint, tol: float = 1e-8) -> list[LieElement]:
        """Pairing-orthonormal basis of the compact stabilizer algebra.

        The stabilizer is computed as the real nullspace of
        ``xi -> sigma_z(xi)`` over the compact algebra (the action on lines
        already absorbs phases, so no phase quotient is needed).  Singular
        values below ``tol * s_max`` count as zero.
        """
        self._check_point(z)
        basis = orthonormal_basis(self.algebra)
        cols = []
        for e in basis:
            s = self.infinitesimal_action(z, e)
            flat = np.concatenate([c for c in s.components])
            cols.append(np.concatenate([flat.real, flat.imag]))
        a = np.column_stack(cols)
        coeff = _nullspace_real(a, tol)
        return [from_coefficients(self.algebra, c, basis, kind="lie")
                for c in coeff]

    def stabilizer_g(self, z: PhasePoint, tol: float = 1e-8) -> list[ComplexLieElement]:
        """Orthonormal basis of the complexified stabilizer algebra.

        Complex nullspace of the same map over the complexified algebra
        (complex coefficients on the compact basis).
        """
        self._check_point(z)
        basis = orthonormal_basis(self.algebra)
        cols = []
        for e in basis:
            s = self.infinitesimal_action(z, e)
            cols.append(np.concatenate([c for c in s.components]))
        a = np.column_stack(cols)
        coeff = _nullspace_complex(a, tol)
        return [from_coefficients(self.algebra, c, basis, kind="complex")
                for c in coeff]

    # -- Kempf-Ness function ----------------------------------------------------
    def kempf_ness_value(self, g: GroupElement, z: PhasePoint) -> float:
        """``sum_j log |g_b z_j|`` for unit representatives ``z_j``.

        The sign is chosen so that along the lifted descent direction the
        value satisfies ``d/dt kn = -pair(mu(z(t)), df|mu(z(t)))``, which is
        bounded above by ``-f(mu(z(t)))`` for convex ``f`` vanishing at 0.
        """
        self._check_point(z)
        if g.descriptor != self.algebra:
            raise ValidationError("group element descriptor mismatch")
        total = 0.0
        for j, c in enumerate(z.components):
            w = g.blocks[self.component_block[j]] @ c
            n = np.linalg.norm(w)
            if n < 1e-300:
                raise ValidationError("group action collapsed a component")
            total += np.log(n)
        return float(total)

    # -- sampling and config ------------------------------------------------
    def random_point(self, rng: np.random.Generator) -> PhasePoint:
        comps = []
        for n in self.component_dims:
            v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            comps.append(v)
        return PhasePoint.normalized(comps)

    def fast_kernel_info(self):
        """Shape information for the fused flow kernels, or None.

        Eligible spaces have a single algebra block acting on components of
        equal ambient dimension (projective space and its powers).
        """
        if self.algebra.n_blocks != 1:
            return None
        n = self.algebra.block_sizes[0]
        if any(d != n for d in self.component_dims):
            return None
        return {"n": n, "d": len(self.component_dims),
                "traceless": self.algebra.traceless[0]}

    def to_config(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.to_config()}>"


class ProjectiveSpace(PhaseSpace):
    """Complex projective space ``P^n`` under ``U(n+1)`` (or ``SU(n+1)``)."""

    def __init__(self, n: int, traceless: bool = False):
        if n < 1:
            raise ValidationError("projective space needs n >= 1")
        self.n = int(n)
        self.traceless_flag = bool(traceless)
        self.algebra = AlgebraDescriptor((self.n + 1,), (self.traceless_flag,))
        self.component_dims = (self.n + 1,)
        self.component_block = (0,)
        self.name = "projective"

    def to_config(self) -> dict:
        return {"space": "projective", "n": self.n,
                "traceless": self.traceless_flag}


class ProjectivePower(PhaseSpace):
    """``(P^1)^d`` under the diagonal ``SU(2)`` action."""

    def __init__(self, d: int):
        if d < 1:
            raise ValidationError("power space needs d >= 1")
        self.d = int(d)
        self.algebra = AlgebraDescriptor((2,), (True,))
        self.component_dims = (2,) * self.d
        self.component_block = (0,) * self.d
        self.name = "p1_power"

    def to_config(self) -> dict:
        return {"space": "p1_power", "d": self.d}


class ProductSpace(PhaseSpace):
    """Product of two phase spaces under the product group."""

    def __init__(self, left: PhaseSpace, right: PhaseSpace):
        self.left = left
        self.right = right
        self.algebra = left.algebra.concat(right.algebra)
        self.component_dims = left.component_dims + right.component_dims
        shift = left.algebra.n_blocks
        self.component_block = left.component_block + tuple(
            b + shift for b in right.component_block)
        self.name = "product"

    def to_config(self) -> dict:
        return {"space": "product",
                "factors": [self.left.to_config(), self.right.to_config()]}

    def embed_point(self, zl: PhasePoint, zr: PhasePoint) -> PhasePoint:
        """Product point from factor points."""
        return PhasePoint(list(zl.components) + list(zr.components))


def space_from_config(cfg: dict) -> PhaseSpace:
    """Build a phase space from its configuration dictionary.

    Accepted forms::

        {"space": "projective", "n": 3}               # optional "traceless"
        {"space": "p1_power", "d": 5}
        {"space": "product", "factors": [cfg, cfg]}
        {"space": "product", "inner": cfg}            # doubles the inner space
    """
    if not isinstance(cfg, dict) or "space" not in cfg:
        raise ValidationError("space config must be a dict with a 'space' key")
    kind = cfg["space"]
    if kind == "projective":
        return ProjectiveSpace(int(cfg["n"]), bool(cfg.get("traceless", False)))
    if kind == "p1_power":
        return ProjectivePower(int(cfg["d"]))
    if kind == "product":
        if "inner" in cfg:
            inner = space_from_config(cfg["inner"])
            inner2 = space_from_config(cfg["inner"])
            return ProductSpace(inner, inner2)
        factors = cfg.get("factors")
        if not factors or len(factors) < 2:
            raise ValidationError("product config needs 'inner' or >= 2 'factors'")
        space = space_from_config(factors[0])
        for fc in factors[1:]:
            space = ProductSpace(space, space_from_config(fc))
        return space
    raise ValidationError(f"unknown space kind {kind!r}")


def _nullspace_real(a: np.ndarray, tol: float) -> list[np.ndarray]:
    """Rows spanning the nullspace of a real matrix (SVD, relative cutoff)."""
    if a.size == 0:
        return []
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    smax = s[0] if len(s) else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return [vh[i] for i in range(rank, vh.shape[0])]


def _nullspace_complex(a: np.ndarray, tol: float) -> list[np.ndarray]:
    if a.size == 0:
        return []
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    smax = s[0] if len(s) else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    return [vh[i].conj() for i in range(rank, vh.shape[0])]
