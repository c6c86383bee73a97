"""Matrix realizations of compact Lie algebras and their complexifications.

The compact algebra is a direct sum of unitary blocks,

    k = g_1 (+) ... (+) g_m,   g_b = u(n_b) or su(n_b),

realized as anti-Hermitian complex matrices (trace-free for ``su`` blocks).
The dual space ``k*`` is identified with ``k`` through the invariant pairing

    pair(alpha, xi) = -sum_b Re Tr(alpha_b xi_b),

which is positive definite on anti-Hermitian matrices.  The complexified
algebra ``g = k (x) C`` consists of arbitrary (trace-free) complex blocks,
and the complexified group ``G`` of invertible blocks acts by conjugation.

All element types are immutable containers of per-block matrices tied to an
:class:`AlgebraDescriptor`.  Constructors validate structural invariants and
project away floating-point drift (skew-Hermitian part, trace part) so that
invariants hold to machine precision after every construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import ValidationError

__all__ = [
    "AlgebraDescriptor",
    "LieElement",
    "DualElement",
    "ComplexLieElement",
    "GroupElement",
    "pair",
    "pair_complex",
    "herm_inner",
    "norm",
    "bracket",
    "adjoint",
    "coadjoint",
    "coadjoint_inf",
    "exponential",
    "orthonormal_basis",
    "coefficients",
    "from_coefficients",
    "random_lie_element",
    "random_dual_element",
    "random_complex_element",
    "random_unitary",
    "sample_group_elements",
    "identity_group",
]

# Relative tolerance accepted for structural drift before construction fails.
_STRUCT_TOL = 1e-8


@dataclass(frozen=True)
class AlgebraDescriptor:
    """Shape of a direct sum of unitary blocks.

    Args:
        block_sizes: matrix size ``n_b`` of each block.
        traceless: per-block flag; ``True`` selects ``su(n_b)`` (trace-free),
            ``False`` selects ``u(n_b)``.
    """

    block_sizes: tuple[int, ...]
    traceless: tuple[bool, ...]

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.block_sizes)
        flags = tuple(bool(t) for t in self.traceless)
        object.__setattr__(self, "block_sizes", sizes)
        object.__setattr__(self, "traceless", flags)
        if len(sizes) != len(flags):
            raise ValidationError("block_sizes and traceless must have equal length")
        if len(sizes) == 0:
            raise ValidationError("descriptor needs at least one block")
        for n, t in zip(sizes, flags):
            if n < 1:
                raise ValidationError(f"block size must be >= 1, got {n}")
            if t and n < 2:
                raise ValidationError("a traceless block needs size >= 2")

    @property
    def n_blocks(self) -> int:
        return len(self.block_sizes)

    @property
    def real_dimension(self) -> int:
        """Real dimension of the compact algebra."""
        return sum(n * n - (1 if t else 0)
                   for n, t in zip(self.block_sizes, self.traceless))

    def concat(self, other: "AlgebraDescriptor") -> "AlgebraDescriptor":
        """Descriptor of the direct sum with ``other``."""
        return AlgebraDescriptor(self.block_sizes + other.block_sizes,
                                 self.traceless + other.traceless)

    def to_config(self) -> dict:
        return {"block_sizes": list(self.block_sizes),
                "traceless": list(self.traceless)}

    @staticmethod
    def from_config(cfg: dict) -> "AlgebraDescriptor":
        return AlgebraDescriptor(tuple(cfg["block_sizes"]), tuple(cfg["traceless"]))


def _as_blocks(desc: AlgebraDescriptor, blocks: Sequence[np.ndarray]) -> tuple[np.ndarray, ...]:
    if len(blocks) != desc.n_blocks:
        raise ValidationError(
            f"expected {desc.n_blocks} blocks, got {len(blocks)}")
    out = []
    for n, b in zip(desc.block_sizes, blocks):
        arr = np.array(b, dtype=np.complex128, copy=True)
        if arr.shape != (n, n):
            raise ValidationError(f"block shape {arr.shape} != ({n}, {n})")
        if not np.all(np.isfinite(arr.view(np.float64))):
            raise ValidationError("block contains non-finite entries")
        out.append(arr)
    return tuple(out)


class _Blocked:
    """Shared container behaviour for blocked matrix elements."""

    __slots__ = ("descriptor", "blocks")

    def __init__(self, descriptor: AlgebraDescriptor, blocks: Sequence[np.ndarray]):
        arrs = _as_blocks(descriptor, blocks)
        arrs = self._clean(descriptor, arrs)
        for a in arrs:
            a.setflags(write=False)
        object.__setattr__(self, "descriptor", descriptor)
        object.__setattr__(self, "blocks", arrs)

    def __setattr__(self, *args):  # immutability
        raise AttributeError(f"{type(self).__name__} is immutable")

    # subclasses override
    @staticmethod
    def _clean(desc: AlgebraDescriptor, blocks: tuple[np.ndarray, ...]):
        return blocks

    # ---- linear structure ------------------------------------------------
    def _binop(self, other, sign):
        if not isinstance(other, _Blocked) or other.descriptor != self.descriptor:
            return NotImplemented
        cls = type(self) if type(other) is type(self) else ComplexLieElement
        return cls(self.descriptor,
                   [a + sign * b for a, b in zip(self.blocks, other.blocks)])

    def __add__(self, other):
        return self._binop(other, 1.0)

    def __sub__(self, other):
        return self._binop(other, -1.0)

    def __neg__(self):
        return type(self)(self.descriptor, [-a for a in self.blocks])

    def __mul__(self, s):
        s = complex(s)
        if s.imag == 0.0 and not isinstance(self, GroupElement):
            return type(self)(self.descriptor, [s.real * a for a in self.blocks])
        return ComplexLieElement(self.descriptor, [s * a for a in self.blocks])

    __rmul__ = __mul__

    def __repr__(self):
        kind = type(self).__name__
        sizes = "+".join(str(n) for n in self.descriptor.block_sizes)
        return f"<{kind} blocks={sizes} norm={norm(self):.3g}>"

    def complexify(self) -> "ComplexLieElement":
        return ComplexLieElement(self.descriptor, self.blocks)

    @classmethod
    def zero(cls, desc: AlgebraDescriptor):
        return cls(desc, [np.zeros((n, n), np.complex128) for n in desc.block_sizes])


def _check_scale(blocks) -> float:
    return max(1.0, *(float(np.max(np.abs(b))) if b.size else 0.0 for b in blocks))


def _clean_anti_hermitian(desc, blocks):
    scale = _check_scale(blocks)
    out = []
    for b, t, n in zip(blocks, desc.traceless, desc.block_sizes):
        defect = np.max(np.abs(b + b.conj().T))
        if defect > _STRUCT_TOL * scale:
            raise ValidationError(
                f"block is not anti-Hermitian (defect {defect:.3e})")
        b = 0.5 * (b - b.conj().T)
        if t:
            tr = np.trace(b)
            if abs(tr) > _STRUCT_TOL * scale * n:
                raise ValidationError(
                    f"traceless block has |trace| = {abs(tr):.3e}")
            b = b - (tr / n) * np.eye(n)
        out.append(b)
    return tuple(out)


class LieElement(_Blocked):
    """Element of the compact algebra: anti-Hermitian (trace-free) blocks."""

    _clean = staticmethod(_clean_anti_hermitian)

    def flat(self) -> "DualElement":
        """Dual element identified through the pairing (same matrix data)."""
        return DualElement(self.descriptor, self.blocks)


class DualElement(_Blocked):
    """Element of the dual space, stored via the pairing identification."""

    _clean = staticmethod(_clean_anti_hermitian)

    def sharp(self) -> LieElement:
        """Algebra element identified through the pairing (same data)."""
        return LieElement(self.descriptor, self.blocks)


class ComplexLieElement(_Blocked):
    """Element of the complexified algebra: arbitrary (trace-free) blocks."""

    @staticmethod
    def _clean(desc, blocks):
        out = []
        for b, t, n in zip(blocks, desc.traceless, desc.block_sizes):
            if t:
                b = b - (np.trace(b) / n) * np.eye(n)
            out.append(b)
        return tuple(out)

    def compact_part(self) -> LieElement:
        """Anti-Hermitian part ``(x - x*)/2`` blockwise."""
        return LieElement(self.descriptor,
                          [0.5 * (b - b.conj().T) for b in self.blocks])

    def anti_compact_part(self) -> LieElement:
        """``xi_2`` in the decomposition ``x = xi_1 + i xi_2`` with both in k."""
        return LieElement(self.descriptor,
                          [-0.5j * (b + b.conj().T) for b in self.blocks])


class GroupElement(_Blocked):
    """Element of the complexified group: invertible blocks."""

    @staticmethod
    def _clean(desc, blocks):
        for b in blocks:
            sign, logdet = np.linalg.slogdet(b)
            if sign == 0 or not np.isfinite(logdet):
                raise ValidationError("group block is numerically singular")
        return blocks

    @property
    def is_unitary(self) -> bool:
        return all(np.max(np.abs(b @ b.conj().T - np.eye(b.shape[0]))) < 1e-10
                   for b in self.blocks)

    def inverse(self) -> "GroupElement":
        return GroupElement(self.descriptor, [np.linalg.inv(b) for b in self.blocks])

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        if not isinstance(other, GroupElement) or other.descriptor != self.descriptor:
            return NotImplemented
        return GroupElement(self.descriptor,
                            [a @ b for a, b in zip(self.blocks, other.blocks)])

    @classmethod
    def zero(cls, desc):
        raise ValidationError("the zero matrix is not a group element")

    @classmethod
    def identity(cls, desc: AlgebraDescriptor) -> "GroupElement":
        return cls(desc, [np.eye(n, dtype=np.complex128) for n in desc.block_sizes])


def identity_group(desc: AlgebraDescriptor) -> GroupElement:
    return GroupElement(desc, [np.eye(n, dtype=np.complex128) for n in desc.block_sizes])


# ---------------------------------------------------------------------------
# Bilinear / sesquilinear forms
# ---------------------------------------------------------------------------

def _same_desc(x: _Blocked, y: _Blocked):
    if x.descriptor != y.descriptor:
        raise ValidationError("descriptor mismatch")


def pair(alpha: _Blocked, xi: _Blocked) -> float:
    """Invariant pairing ``-sum_b Re Tr(alpha_b xi_b)``.

    Defined for a dual element against an algebra element; accepts any
    blocked elements under the matrix identification.
    """
    _same_desc(alpha, xi)
    return float(-sum(np.einsum("ij,ji->", a, b).real
                      for a, b in zip(alpha.blocks, xi.blocks)))


def pair_complex(alpha: _Blocked, x: _Blocked) -> complex:
    """Complex-bilinear extension ``-sum_b Tr(alpha_b x_b)`` of the pairing.

    Restricts to :func:`pair` when both arguments are in the compact algebra.
    """
    _same_desc(alpha, x)
    return complex(-sum(np.einsum("ij,ji->", a, b)
                        for a, b in zip(alpha.blocks, x.blocks)))


def herm_inner(x: _Blocked, y: _Blocked) -> complex:
    """Hermitian (Frobenius) inner product ``sum_b Tr(x_b y_b*)``.

    Conjugate-linear in ``y``.  On the compact algebra it coincides with the
    pairing: ``herm_inner(xi, eta) == pair(eta.flat(), xi)``.
    """
    _same_desc(x, y)
    return complex(sum(np.einsum("ij,ij->", a, b.conj())
                       for a, b in zip(x.blocks, y.blocks)))


def norm(x: _Blocked) -> float:
    """Frobenius norm across blocks (pairing norm on the compact algebra)."""
    return float(np.sqrt(sum(float(np.sum(np.abs(b) ** 2)) for b in x.blocks)))


# ---------------------------------------------------------------------------
# Brackets and adjoint actions
# ---------------------------------------------------------------------------

def _result_kind(*xs: _Blocked):
    if any(isinstance(x, ComplexLieElement) for x in xs):
        return ComplexLieElement
    return LieElement


def bracket(x: _Blocked, y: _Blocked):
    """Blockwise matrix commutator ``[x, y] = xy - yx``.

    Returns a :class:`LieElement` when both inputs are compact (anti-Hermitian
    matrices are closed under the commutator), else a
    :class:`ComplexLieElement`.
    """
    _same_desc(x, y)
    cls = _result_kind(x, y)
    return cls(x.descriptor, [a @ b - b @ a for a, b in zip(x.blocks, y.blocks)])


def adjoint(g: GroupElement, x: _Blocked):
    """Adjoint action ``Ad_g(x) = g x g^{-1}`` blockwise.

    Returns a :class:`LieElement` for unitary ``g`` acting on a compact
    element, otherwise a :class:`ComplexLieElement`.
    """
    _same_desc(g, x)
    blocks = [gb @ xb @ np.linalg.inv(gb) for gb, xb in zip(g.blocks, x.blocks)]
    if not isinstance(x, ComplexLieElement) and g.is_unitary:
        # re-symmetrize unitary-conjugation roundoff
        blocks = [0.5 * (b - b.conj().T) for b in blocks]
        return LieElement(x.descriptor, blocks)
    return ComplexLieElement(x.descriptor, blocks)


def coadjoint(g: GroupElement, alpha: DualElement) -> DualElement:
    """Coadjoint action of the compact group on the dual.

    Under the pairing identification ``Ad*_g(alpha) = g alpha g^{-1}``.
    Only unitary ``g`` is accepted: the coadjoint action of the compact
    group is the one that preserves the pairing, and the complexified
    group does not act on ``k*`` this way.

    Raises:
        ValidationError: if ``g`` is not unitary.
    """
    _same_desc(g, alpha)
    if not g.is_unitary:
        raise ValidationError("coadjoint is defined for unitary group elements")
    blocks = [0.5 * (b - b.conj().T) for b in
              (gb @ ab @ gb.conj().T for gb, ab in zip(g.blocks, alpha.blocks))]
    return DualElement(alpha.descriptor, blocks)


def coadjoint_inf(delta: LieElement, alpha: DualElement) -> DualElement:
    """Infinitesimal coadjoint action ``ad*_delta(alpha) = [delta, alpha]``."""
    _same_desc(delta, alpha)
    return DualElement(alpha.descriptor,
                       [d @ a - a @ d for d, a in zip(delta.blocks, alpha.blocks)])


def exponential(x: _Blocked) -> GroupElement:
    """Blockwise matrix exponential into the (complexified) group."""
    return GroupElement(x.descriptor, [scipy.linalg.expm(b) for b in x.blocks])


# ---------------------------------------------------------------------------
# Orthonormal basis and coordinates
# ---------------------------------------------------------------------------

_BASIS_CACHE: dict[AlgebraDescriptor, tuple] = {}


def _block_basis(n: int, traceless: bool) -> list[np.ndarray]:
    """Pairing-orthonormal anti-Hermitian basis of one block."""
    mats: list[np.ndarray] = []
    # diagonal directions
    if traceless:
        for k in range(1, n):
            d = np.zeros(n)
            d[:k] = 1.0
            d[k] = -k
            d /= np.sqrt(k * (k + 1))
            mats.append(1j * np.diag(d).astype(np.complex128))
    else:
        for j in range(n):
            m = np.zeros((n, n), np.complex128)
            m[j, j] = 1j
            mats.append(m)
    # off-diagonal pairs
    s = 1.0 / np.sqrt(2.0)
    for j in range(n):
        for k in range(j + 1, n):
            m = np.zeros((n, n), np.complex128)
            m[j, k] = s
            m[k, j] = -s
            mats.append(m)
            m = np.zeros((n, n), np.complex128)
            m[j, k] = 1j * s
            m[k, j] = 1j * s
            mats.append(m)
    return mats


def orthonormal_basis(desc: AlgebraDescriptor) -> tuple[LieElement, ...]:
    """Pairing-orthonormal basis of the compact algebra.

    The Gram matrix ``pair(e_i.flat(), e_j)`` is the identity exactly (up to
    floating-point representation of ``1/sqrt(2)``).
    """
    cached = _BASIS_CACHE.get(desc)
    if cached is not None:
        return cached
    basis: list[LieElement] = []
    for b, (n, t) in enumerate(zip(desc.block_sizes, desc.traceless)):
        for mat in _block_basis(n, t):
            blocks = [np.zeros((m, m), np.complex128) for m in desc.block_sizes]
            blocks[b] = mat
            basis.append(LieElement(desc, blocks))
    out = tuple(basis)
    if len(out) != desc.real_dimension:
        raise AssertionError("basis size mismatch")  # pragma: no cover
    _BASIS_CACHE[desc] = out
    return out


def coefficients(x: _Blocked, basis: Sequence[_Blocked] | None = None) -> np.ndarray:
    """Coordinates of ``x`` in a pairing-orthonormal basis.

    Real coordinates for compact elements, complex for complexified ones.
    """
    if basis is None:
        basis = orthonormal_basis(x.descriptor)
    c = np.array([herm_inner(x, e) for e in basis])
    if not isinstance(x, ComplexLieElement):
        return c.real
    return c


def from_coefficients(desc: AlgebraDescriptor, coeffs: np.ndarray,
                      basis: Sequence[LieElement] | None = None,
                      kind: str = "lie") -> _Blocked:
    """Element with the given coordinates in a pairing-orthonormal basis.

    Args:
        kind: one of ``"lie"``, ``"dual"``, ``"complex"``.
    """
    if basis is None:
        basis = orthonormal_basis(desc)
    coeffs = np.asarray(coeffs)
    if len(coeffs) != len(basis):
        raise ValidationError("coefficient length mismatch")
    blocks = [np.zeros((n, n), np.complex128) for n in desc.block_sizes]
    for c, e in zip(coeffs, basis):
        for k, eb in enumerate(e.blocks):
            blocks[k] = blocks[k] + c * eb
    cls = {"lie": LieElement, "dual": DualElement, "complex": ComplexLieElement}[kind]
    return cls(desc, blocks)


# ---------------------------------------------------------------------------
# Random sampling
# ---------------------------------------------------------------------------

def random_lie_element(desc: AlgebraDescriptor, rng: np.random.Generator,
                       scale: float = 1.0) -> LieElement:
    """Gaussian element of the compact algebra (coordinates ~ N(0, scale^2))."""
    c = scale * rng.standard_normal(desc.real_dimension)
    return from_coefficients(desc, c, kind="lie")


def random_dual_element(desc: AlgebraDescriptor, rng: np.random.Generator,
                        scale: float = 1.0) -> DualElement:
    c = scale * rng.standard_normal(desc.real_dimension)
    return from_coefficients(desc, c, kind="dual")


def random_complex_element(desc: AlgebraDescriptor, rng: np.random.Generator,
                           scale: float = 1.0) -> ComplexLieElement:
    d = desc.real_dimension
    c = scale * (rng.standard_normal(d) + 1j * rng.standard_normal(d)) / np.sqrt(2.0)
    return from_coefficients(desc, c, kind="complex")


def random_unitary(desc: AlgebraDescriptor, rng: np.random.Generator,
                   scale: float = 1.0) -> GroupElement:
    """Random unitary element ``exp(xi)`` with Gaussian ``xi`` in k."""
    return exponential(random_lie_element(desc, rng, scale))


def sample_group_elements(desc: AlgebraDescriptor, count: int,
                          rng: np.random.Generator,
                          max_norm: float = 2.0) -> list[GroupElement]:
    """Complexified group samples ``exp(zeta)`` with ``|zeta| <= max_norm``."""
    out = []
    for _ in range(count):
        zeta = random_complex_element(desc, rng)
        r = rng.uniform(0.0, max_norm)
        nz = norm(zeta)
        if nz > 0:
            zeta = (r / nz) * zeta
        out.append(exponential(zeta))
    return out
