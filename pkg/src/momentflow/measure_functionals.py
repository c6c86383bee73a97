"""Convex functionals of potentials over a finite positive measure.

A finite measure with weights ``w_i > 0`` (total mass ``V``) turns a scalar
convex function ``F`` into the functional ``D_F(u) = sum_i w_i F(u_i)`` on
potentials ``u``.  This module provides:

* evaluation, gradient (centered to exact ``w``-mean zero) and Hessian
  action of ``D_F``;
* Legendre-dual pairs ``(F, F_hat)`` with ``F_hat(p) = sup_u (p u - F(u))``,
  in particular the soliton pair built from ``s log s - s + 1``;
* the normalizations of potentials (plain / hat / tilde) used alongside a
  reference potential ``phi`` with ``sum_i w_i (e^{phi_i} - 1) = 0``;
* the weighted-mean identity relating the tilde-normalized exponential
  average to the hat/plain normalized potentials (``tian_zhu_check``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, ValidationError

__all__ = [
    "DiscreteMeasure",
    "ScalarConvex",
    "ScalarPair",
    "soliton_pair",
    "quadratic_pair",
    "d_functional",
    "d_gradient",
    "d_hessian",
    "legendre_functional",
    "fenchel_young_defect",
    "normalize_phi",
    "normalize_theta",
    "TianZhuReport",
    "tian_zhu_check",
]


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite positive measure on ``n`` atoms."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValidationError("weights must be a nonempty 1-d array")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValidationError("weights must be finite and positive")
        object.__setattr__(self, "weights", w)

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))

    @property
    def size(self) -> int:
        return int(self.weights.size)

    def mean(self, values: np.ndarray) -> float:
        """Weighted mean ``(1/V) sum_i w_i v_i``."""
        v = self._check(values)
        return float(np.sum(self.weights * v) / self.total)

    def _check(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if v.shape != self.weights.shape:
            raise ValidationError(
                f"potential shape {v.shape} does not match measure "
                f"shape {self.weights.shape}")
        return v


@dataclass(frozen=True)
class ScalarConvex:
    """Scalar convex function with derivatives on an open interval."""

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    second: Callable[[np.ndarray], np.ndarray]
    domain: tuple[float, float] = (-math.inf, math.inf)

    def check_domain(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lo, hi = self.domain
        if np.any(u <= lo) or np.any(u >= hi):
            raise DomainError(
                f"argument outside the open domain ({lo}, {hi}) "
                f"of {self.name}")
        return u


@dataclass(frozen=True)
class ScalarPair:
    """A convex function together with its Legendre conjugate."""

    F: ScalarConvex
    F_hat: ScalarConvex

    def swapped(self) -> "ScalarPair":
        return ScalarPair(self.F_hat, self.F)


def soliton_pair(total: float) -> ScalarPair:
    """Entropy-type pair for a measure of total mass ``V = total``.

    ``F(u) = s log s - s + 1`` with ``s = u + 1/V`` on ``u > -1/V``; its
    conjugate is ``F_hat(p) = e^p - p/V - 1`` on all of R, normalized so
    that ``F_hat(0) = 0``.
    """
    if not (total > 0):
        raise ValidationError("total mass must be positive")
    inv = 1.0 / total

    def f_val(u):
        s = np.asarray(u, dtype=float) + inv
        return np.where(s > 0, s * np.log(np.maximum(s, 1e-300)) - s + 1.0,
                        np.inf)

    f = ScalarConvex(
        name=f"soliton(V={total:g})",
        value=f_val,
        deriv=lambda u: np.log(np.asarray(u, dtype=float) + inv),
        second=lambda u: 1.0 / (np.asarray(u, dtype=float) + inv),
        domain=(-inv, math.inf),
    )
    f_hat = ScalarConvex(
        name=f"soliton_dual(V={total:g})",
        value=lambda p: np.exp(p) - np.asarray(p, dtype=float) * inv - 1.0,
        deriv=lambda p: np.exp(p) - inv,
        second=lambda p: np.exp(p),
    )
    return ScalarPair(f, f_hat)


def quadratic_pair(weight: float = 1.0) -> ScalarPair:
    """Self-dual quadratic pair ``F(u) = a u^2 / 2``, ``F_hat(p) = p^2/(2a)``."""
    if not (weight > 0):
        raise ValidationError("quadratic weight must be positive")
    a = float(weight)
    f = ScalarConvex("quadratic", lambda u: 0.5 * a * np.asarray(u, float) ** 2,
                     lambda u: a * np.asarray(u, float),
                     lambda u: a * np.ones_like(np.asarray(u, float)))
    fh = ScalarConvex("quadratic_dual",
                      lambda p: 0.5 * np.asarray(p, float) ** 2 / a,
                      lambda p: np.asarray(p, float) / a,
                      lambda p: np.ones_like(np.asarray(p, float)) / a)
    return ScalarPair(f, fh)


# ---------------------------------------------------------------------------
# Functionals
# ---------------------------------------------------------------------------

def d_functional(f: ScalarConvex, m: DiscreteMeasure, u: np.ndarray) -> float:
    """``D_F(u) = sum_i w_i F(u_i)``."""
    u = f.check_domain(m._check(u))
    return float(np.sum(m.weights * f.value(u)))


def d_gradient(f: ScalarConvex, m: DiscreteMeasure, u: np.ndarray) -> np.ndarray:
    """Gradient of ``D_F`` on mean-zero potentials: ``F'(u)`` centered.

    The result has ``w``-mean zero exactly (a second centering pass removes
    the rounding residue of the first).
    """
    u = f.check_domain(m._check(u))
    g = f.deriv(u)
    g = g - np.sum(m.weights * g) / m.total
    g = g - np.sum(m.weights * g) / m.total
    return g


def d_hessian(f: ScalarConvex, m: DiscreteMeasure, u: np.ndarray,
              du: np.ndarray) -> np.ndarray:
    """Hessian action ``F''(u) du`` centered to ``w``-mean zero."""
    u = f.check_domain(m._check(u))
    du = m._check(du)
    h = f.second(u) * du
    h = h - np.sum(m.weights * h) / m.total
    h = h - np.sum(m.weights * h) / m.total
    return h


def legendre_functional(pair: ScalarPair | ScalarConvex, m: DiscreteMeasure,
                        psi: np.ndarray) -> float:
    """Dual functional ``L(psi) = sum_i w_i F_hat(psi_i)``.

    Accepts the pair (uses its conjugate) or the conjugate directly.  With
    the soliton pair, ``L(0) = 0``.
    """
    fh = pair.F_hat if isinstance(pair, ScalarPair) else pair
    psi = fh.check_domain(m._check(psi))
    return float(np.sum(m.weights * fh.value(psi)))


def fenchel_young_defect(pair: ScalarPair, m: DiscreteMeasure,
                         u: np.ndarray) -> float:
    """Max defect of ``F(u) + F_hat(F'(u)) - u F'(u)`` over the atoms.

    Zero for an exactly conjugate pair (equality case of Fenchel-Young).
    """
    u = pair.F.check_domain(m._check(u))
    p = pair.F.deriv(u)
    vals = pair.F.value(u) + pair.F_hat.value(p) - u * p
    return float(np.max(np.abs(vals)))


# ---------------------------------------------------------------------------
# Normalizations
# ---------------------------------------------------------------------------

def normalize_phi(m: DiscreteMeasure, raw: np.ndarray) -> np.ndarray:
    """Shift ``raw`` so that ``sum_i w_i (e^{phi_i} - 1) = 0``.

    Closed form: ``phi = raw + log(V / sum_i w_i e^{raw_i})``.
    """
    raw = m._check(raw)
    with np.errstate(over="ignore"):
        s = float(np.sum(m.weights * np.exp(raw)))
    if not (s > 0 and np.isfinite(s)):
        raise DomainError("exponential average overflowed or vanished")
    return raw + math.log(m.total / s)


def normalize_theta(m: DiscreteMeasure, raw: np.ndarray, mode: str = "plain",
                    phi: np.ndarray | None = None) -> np.ndarray:
    """Normalize a potential by one of the three conventions.

    * ``"plain"``: subtract the ``w``-mean.
    * ``"hat"``: subtract ``log((1/V) sum_i w_i e^{raw_i})`` so that the
      exponential ``w``-average of the result is one.
    * ``"tilde"``: subtract the mean against the tilted measure
      ``w e^{phi}`` (requires ``phi``).
    """
    raw = m._check(raw)
    if mode == "plain":
        return raw - np.sum(m.weights * raw) / m.total
    if mode == "hat":
        with np.errstate(over="ignore"):
            s = float(np.sum(m.weights * np.exp(raw)))
        if not (s > 0 and np.isfinite(s)):
            raise DomainError("exponential average overflowed or vanished")
        return raw - math.log(s / m.total)
    if mode == "tilde":
        if phi is None:
            raise ValidationError("tilde normalization requires phi")
        phi = m._check(phi)
        tw = m.weights * np.exp(phi)
        return raw - float(np.sum(tw * raw) / np.sum(tw))
    raise ValidationError(f"unknown normalization mode {mode!r}")


# ---------------------------------------------------------------------------
# Weighted-mean identity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TianZhuReport:
    """Both sides of the weighted-mean identity and their defects.

    ``lhs``: tilted average ``sum w theta~_eta e^{theta~_xi} /
    sum w e^{theta~_xi}``; ``rhs``: ``(1/V) sum w (e^{theta^_xi} - e^phi)
    theta_eta``.  ``chain_defect_raw`` is the mismatch of the *unnormalized*
    chain ``(1/V) sum w theta~_eta e^{theta~_xi}`` against ``rhs`` (nonzero
    in general); dividing by ``e_chat = (1/V) sum w e^{theta~_xi}`` repairs
    it (``chain_defect_corrected``).
    """

    lhs: float
    rhs: float
    defect: float
    e_chat: float
    chain_defect_raw: float
    chain_defect_corrected: float


def tian_zhu_check(m: DiscreteMeasure, phi: np.ndarray,
                   theta_xi_raw: np.ndarray, theta_eta_raw: np.ndarray,
                   phi_tol: float = 1e-8) -> TianZhuReport:
    """Evaluate both sides of the weighted-mean identity.

    ``phi`` must already satisfy ``sum_i w_i (e^{phi_i} - 1) = 0`` within
    ``phi_tol * V`` (use :func:`normalize_phi`); the theta potentials are
    accepted raw and normalized internally (hat / plain / tilde as the
    identity requires).  Both sides equal
    ``<theta_eta>_{w e^{theta_xi}} - <theta_eta>_{w e^{phi}}`` exactly,
    so ``defect`` is pure floating-point noise.
    """
    phi = m._check(phi)
    theta_xi_raw = m._check(theta_xi_raw)
    theta_eta_raw = m._check(theta_eta_raw)
    mass_defect = abs(float(np.sum(m.weights * (np.exp(phi) - 1.0))))
    if mass_defect > phi_tol * m.total:
        raise ValidationError(
            f"phi is not normalized: |sum w (e^phi - 1)| = {mass_defect:.3e}")

    theta_eta = normalize_theta(m, theta_eta_raw, "plain")
    theta_xi_hat = normalize_theta(m, theta_xi_raw, "hat")
    theta_xi_tilde = normalize_theta(m, theta_xi_raw, "tilde", phi=phi)
    theta_eta_tilde = normalize_theta(m, theta_eta_raw, "tilde", phi=phi)

    w = m.weights
    v = m.total
    exp_tilde = np.exp(theta_xi_tilde)
    lhs = float(np.sum(w * theta_eta_tilde * exp_tilde)
                / np.sum(w * exp_tilde))
    rhs = float(np.sum(w * (np.exp(theta_xi_hat) - np.exp(phi)) * theta_eta)
                / v)
    e_chat = float(np.sum(w * exp_tilde) / v)
    chain_raw = float(np.sum(w * theta_eta_tilde * exp_tilde) / v)
    return TianZhuReport(
        lhs=lhs,
        rhs=rhs,
        defect=abs(lhs - rhs),
        e_chat=e_chat,
        chain_defect_raw=abs(chain_raw - rhs),
        chain_defect_corrected=abs(chain_raw / e_chat - rhs),
    )
