"""Descent flows, their group lifts, and trace consistency monitors.

The descent flow of an invariant convex function ``f`` composed with the
moment map is

    dz/dt = J sigma_z(df|mu(z)) = i sigma_z(df|mu(z)),

the direction in the group orbit along which the energy ``f(mu(z))``
dissipates at rate ``-|sigma_z(df)|^2`` (metric norm).  The group lift
integrates ``dg/dt g^{-1} = i df|mu(act(g, z0))`` in the complexified group,
so that ``act(g(t), z0)`` reproduces the descent path.

Both integrators are adaptive fourth-order Runge-Kutta schemes with
step-doubling error control; the group lift uses a Runge-Kutta-Munthe-Kaas
step (``u' = A - [u,A]/2 + [u,[u,A]]/12``, then ``g <- exp(u) g``) so that
``g`` stays exactly in the group.

Each accepted step is recorded as a :class:`FlowSample` carrying the time,
the point, the energy ``f(mu(z))``, the metric norm of ``sigma_z(df)`` and
the Kempf-Ness value.  In gradient traces the Kempf-Ness value is the RK4
co-integrated integral of ``-pair(mu, df)`` from 0; in group traces it is
evaluated directly from ``g``, making the monitor's rate check an
independent cross-verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from . import _kernels
from .invariant_convex import ConvexInvariantFunction
from .lie_core import DualElement, GroupElement, pair
from .phase_space import PhasePoint, PhaseSpace, phase_distance

__all__ = [
    "StepControl",
    "FlowSample",
    "FlowTrace",
    "gradient_flow",
    "group_flow",
    "flow_consistency",
    "kempf_ness_monitor",
    "dissipation_check",
]


@dataclass
class StepControl:
    """Adaptive step-size policy for the RK4 step-doubling integrators.

    A ``target`` below the integrator's roundoff floor (roughly 1e-16 on
    renormalized states) is unreachable at any step size, so the flow will
    terminate with reason ``step_underflow`` once the step hits ``h_min``.
    """

    target: float = 1e-9     # local error target per step
    h_init: float = 1e-2
    h_min: float = 1e-12
    h_max: float = 0.05
    safety: float = 0.9
    max_steps: int = 500_000


@dataclass
class FlowSample:
    """State recorded at one accepted step."""

    t: float
    z: PhasePoint
    energy: float
    grad_norm: float
    kn_value: float
    kn_rate: float = 0.0


@dataclass
class FlowTrace:
    """Result of a flow integration."""

    space: PhaseSpace
    f_name: str
    samples: list[FlowSample]
    terminated_reason: str   # "converged" | "max_time" | "step_underflow"
    stats: dict = field(default_factory=dict)

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "t": np.array([s.t for s in self.samples]),
            "energy": np.array([s.energy for s in self.samples]),
            "grad_norm": np.array([s.grad_norm for s in self.samples]),
            "kn_value": np.array([s.kn_value for s in self.samples]),
            "kn_rate": np.array([s.kn_rate for s in self.samples]),
        }

    def sample_at(self, t: float, atol: float = 1e-9) -> FlowSample:
        for s in self.samples:
            if abs(s.t - t) <= atol:
                return s
        raise KeyError(f"no sample at t = {t}")

    @property
    def final(self) -> FlowSample:
        return self.samples[-1]


# ---------------------------------------------------------------------------
# Generic right-hand side
# ---------------------------------------------------------------------------

class _GenericField:
    """Descent field through the generic space/function interfaces."""

    def __init__(self, space: PhaseSpace, f: ConvexInvariantFunction):
        self.space = space
        self.f = f

    def rhs(self, comps: Sequence[np.ndarray]):
        """Velocity and monitors at the normalization of ``comps``.

        Returns ``(v, energy, grad_norm, kn_rate)``; ``v`` is a list of
        per-component velocities.
        """
        z = PhasePoint.normalized(comps)
        mu = self.space.moment(z)
        df = self.f.gradient(mu)
        sig = self.space.infinitesimal_action(z, df)
        v = [1j * c for c in sig.components]
        energy = self.f.value(mu)
        gn2 = 2.0 * sum(float(np.sum(np.abs(c) ** 2)) for c in sig.components)
        rate = -pair(mu, df)
        return v, energy, math.sqrt(gn2), rate

    def rk4(self, comps, kn, h):
        v1, _, _, r1 = self.rhs(comps)
        c2 = [a + 0.5 * h * b for a, b in zip(comps, v1)]
        v2, _, _, r2 = self.rhs(c2)
        c3 = [a + 0.5 * h * b for a, b in zip(comps, v2)]
        v3, _, _, r3 = self.rhs(c3)
        c4 = [a + h * b for a, b in zip(comps, v3)]
        v4, _, _, r4 = self.rhs(c4)
        out = [a + (h / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
               for a, b1, b2, b3, b4 in zip(comps, v1, v2, v3, v4)]
        out = [c / np.linalg.norm(c) for c in out]
        return out, kn + (h / 6.0) * (r1 + 2 * r2 + 2 * r3 + r4)

    def attempt(self, comps, kn, h):
        _, e0, gn0, r0 = self.rhs(comps)
        zb, knb = self.rk4(comps, kn, h)
        zh, knh = self.rk4(comps, kn, 0.5 * h)
        zh, knh = self.rk4(zh, knh, 0.5 * h)
        err = max(max(float(np.max(np.abs(a - b))) for a, b in zip(zb, zh)),
                  abs(knb - knh)) / 15.0
        return zh, knh, err, e0, gn0, r0


# ---------------------------------------------------------------------------
# Adaptive driver shared by both flows
# ---------------------------------------------------------------------------

def _drive(attempt: Callable, monitor: Callable, snapshot: Callable,
           state, kn0: float, ctrl: StepControl, tol: float, t_max: float,
           record_times) -> tuple[list[FlowSample], str, dict, list]:
    """Shared adaptive loop.

    ``attempt(state, kn, h) -> (state', kn', err, e0, gn0, r0)``;
    ``monitor(state, kn) -> (energy, grad_norm, kn_value, kn_rate)``;
    ``snapshot(state) -> PhasePoint``.

    Returns (samples, reason, stats, states) where ``states`` holds the raw
    state at each sample (used by the group flow to expose the group path).
    """
    targets = []
    if record_times is not None:
        targets = sorted(float(t) for t in record_times if t > 1e-14)

    t = 0.0
    kn = kn0
    e, gn, knv, rate = monitor(state, kn)
    samples = [FlowSample(0.0, snapshot(state), e, gn, knv, rate)]
    states = [state]
    stats = {"accepted": 0, "rejected": 0}
    if gn <= tol:
        return samples, "converged", stats, states

    h = min(ctrl.h_init, ctrl.h_max)
    consec = 0
    reason = "max_time"
    ti = 0
    while t < t_max - 1e-14:
        if stats["accepted"] + stats["rejected"] >= ctrl.max_steps:
            reason = "max_time"
            break
        while ti < len(targets) and targets[ti] <= t + 1e-12:
            ti += 1
        h_eff = min(h, t_max - t)
        clipped = False
        if ti < len(targets) and targets[ti] - t < h_eff:
            h_eff = targets[ti] - t
            clipped = True
        if h_eff < h * 0.999:
            clipped = True

        new_state, new_kn, err, e0, gn0, r0 = attempt(state, kn, h_eff)
        accept = err <= ctrl.target
        if accept:
            t += h_eff
            state, kn = new_state, new_kn
            e, gn, knv, rate = monitor(state, kn)
            samples.append(FlowSample(t, snapshot(state), e, gn, knv, rate))
            states.append(state)
            stats["accepted"] += 1
            if gn <= tol:
                consec += 1
                if consec >= 3:
                    reason = "converged"
                    break
            else:
                consec = 0
        else:
            stats["rejected"] += 1
            if h_eff <= ctrl.h_min * (1 + 1e-9):
                # The target is unreachable even at the floor step; accepting
                # anyway would silently violate the error budget.
                reason = "step_underflow"
                break

        fac = ctrl.safety * (ctrl.target / max(err, 1e-300)) ** 0.2
        h_next = h_eff * min(5.0, max(0.2, fac))
        if accept and clipped:
            h_next = max(h_next, h)
        h = min(max(h_next, ctrl.h_min), ctrl.h_max)

    stats["final_h"] = h
    return samples, reason, stats, states


# ---------------------------------------------------------------------------
# Gradient flow
# ---------------------------------------------------------------------------

def gradient_flow(space: PhaseSpace, f: ConvexInvariantFunction,
                  z0: PhasePoint, step_ctrl: StepControl | None = None,
                  tol: float = 1e-8, t_max: float = 200.0,
                  record_times: Sequence[float] | None = None,
                  backend: str | None = None) -> FlowTrace:
    """Integrate the descent flow from ``z0``.

    Terminates when the metric norm of ``sigma_z(df)`` stays at or below
    ``tol`` for three consecutive accepted steps (immediately when ``z0``
    is already critical), when ``t_max`` or the step budget is exhausted
    (``max_time``), or when error control pushes the step below its floor
    (``step_underflow``).  A negative ``tol`` disables the convergence
    test, which is useful when starting at a critical point on purpose.

    ``record_times`` forces accepted steps at the listed times (useful for
    comparing traces sample-by-sample).  ``backend`` selects the fused
    kernels (``numba``/``numpy``/``auto``) when the space and function are
    kernel-eligible; other cases use the generic path.
    """
    ctrl = step_ctrl or StepControl()
    space._check_point(z0)

    info = space.fast_kernel_info()
    code = f.kernel_code()
    if info is not None and code is not None:
        stepper = _kernels.get_stepper(backend)
        code_id = _kernels.CODES[code[0]]
        param = float(code[1])
        traceless = bool(info["traceless"])

        def attempt(zarr, kn, h):
            return stepper(zarr, kn, h, code_id, param, traceless)

        def monitor(zarr, kn):
            _, e, gn, rate = _kernels.rhs_reference(zarr, code_id, param, traceless)
            return e, math.sqrt(gn), kn, rate

        def snapshot(zarr):
            return PhasePoint(list(zarr))

        state0 = np.array([c for c in z0.components], dtype=np.complex128)
    else:
        gen = _GenericField(space, f)

        def attempt(comps, kn, h):
            return gen.attempt(comps, kn, h)

        def monitor(comps, kn):
            _, e, gn, rate = gen.rhs(comps)
            return e, gn, kn, rate

        def snapshot(comps):
            return PhasePoint(list(comps))

        state0 = [np.array(c) for c in z0.components]

    samples, reason, stats, _ = _drive(attempt, monitor, snapshot, state0,
                                       0.0, ctrl, tol, t_max, record_times)
    stats["backend"] = (_kernels.resolve_backend(backend)
                        if info is not None and code is not None else "generic")
    return FlowTrace(space, f.name, samples, reason, stats)


# ---------------------------------------------------------------------------
# Group flow (Runge-Kutta-Munthe-Kaas)
# ---------------------------------------------------------------------------

def _dexpinv(u, a):
    """Truncated inverse differential of exp: ``a - [u,a]/2 + [u,[u,a]]/12``."""
    ua = u @ a - a @ u
    uua = u @ ua - ua @ u
    return a - 0.5 * ua + uua / 12.0


def group_flow(space: PhaseSpace, f: ConvexInvariantFunction,
               z0: PhasePoint, step_ctrl: StepControl | None = None,
               tol: float = 1e-8, t_max: float = 200.0,
               record_times: Sequence[float] | None = None
               ) -> tuple[FlowTrace, list[GroupElement]]:
    """Integrate the lifted flow ``dg/dt g^{-1} = i df|mu(act(g, z0))``.

    Returns the trace of ``z(t) = act(g(t), z0)`` together with the group
    path (one :class:`GroupElement` per sample).  The Kempf-Ness column is
    evaluated directly from ``g(t)``.  Termination semantics (including
    negative ``tol``) match :func:`gradient_flow`.
    """
    ctrl = step_ctrl or StepControl()
    space._check_point(z0)
    desc = space.algebra
    gen = _GenericField(space, f)

    def generator(gblocks):
        """``A = i df|mu(act(g, z0))`` as a list of matrices."""
        g = GroupElement(desc, gblocks)
        z = space.act(g, z0)
        mu = space.moment(z)
        df = f.gradient(mu)
        return [1j * b for b in df.blocks]

    def rkmk(gblocks, h):
        k1 = generator(gblocks)
        u2 = [0.5 * h * a for a in k1]
        k2 = [_dexpinv(u, a) for u, a in zip(
            u2, generator([scipy.linalg.expm(u) @ g for u, g in zip(u2, gblocks)]))]
        u3 = [0.5 * h * a for a in k2]
        k3 = [_dexpinv(u, a) for u, a in zip(
            u3, generator([scipy.linalg.expm(u) @ g for u, g in zip(u3, gblocks)]))]
        u4 = [h * a for a in k3]
        k4 = [_dexpinv(u, a) for u, a in zip(
            u4, generator([scipy.linalg.expm(u) @ g for u, g in zip(u4, gblocks)]))]
        u = [(h / 6.0) * (a + 2 * b + 2 * c + d)
             for a, b, c, d in zip(k1, k2, k3, k4)]
        return [scipy.linalg.expm(ub) @ gb for ub, gb in zip(u, gblocks)]

    def attempt(gblocks, kn, h):
        gb = rkmk(gblocks, h)
        gh = rkmk(rkmk(gblocks, 0.5 * h), 0.5 * h)
        err = max(float(np.max(np.abs(b - c))) / (1.0 + float(np.max(np.abs(c))))
                  for b, c in zip(gb, gh)) / 15.0
        g = GroupElement(desc, gblocks)
        z = space.act(g, z0)
        _, e0, gn0, r0 = gen.rhs(list(z.components))
        return gh, 0.0, err, e0, gn0, r0

    def monitor(gblocks, kn):
        g = GroupElement(desc, gblocks)
        z = space.act(g, z0)
        _, e, gn, rate = gen.rhs(list(z.components))
        return e, gn, space.kempf_ness_value(g, z0), rate

    def snapshot(gblocks):
        g = GroupElement(desc, gblocks)
        return space.act(g, z0)

    state0 = [np.eye(n, dtype=np.complex128) for n in desc.block_sizes]
    samples, reason, stats, states = _drive(attempt, monitor, snapshot, state0,
                                            0.0, ctrl, tol, t_max, record_times)
    stats["backend"] = "generic"
    path = [GroupElement(desc, s) for s in states]
    return FlowTrace(space, f.name, samples, reason, stats), path


# ---------------------------------------------------------------------------
# Trace consistency monitors
# ---------------------------------------------------------------------------

def flow_consistency(trace: FlowTrace, f: ConvexInvariantFunction,
                     n_sub: int = 6) -> dict:
    """Re-integrate each sample interval and compare against the trace.

    From each sample ``(t_i, z_i)`` the descent flow is re-integrated with
    ``n_sub`` fixed RK4 substeps, accumulating the quadratures

        Q1 = integral of -pair(mu, df) dt     (Kempf-Ness rate),
        Q2 = integral of -|sigma(df)|^2 dt    (energy dissipation),

    which are compared with the recorded increments of ``kn_value`` and
    ``energy``.  For group traces the Kempf-Ness column is computed
    independently from ``g(t)``, so the rate comparison is a genuine check
    of ``d/dt kn = -pair(mu, df)``; for gradient traces it certifies the
    consistency of the co-integrated column.

    Returns a dict with (all maxima over intervals):

    * ``rate_defect_max``        |Delta kn - Q1| / Delta t
    * ``dissipation_rel_max``    |Delta E - Q2| / |Delta E| on intervals with
      a meaningful energy change
    * ``dissipation_abs_max``    |Delta E - Q2| on the remaining intervals
    * ``energy_increase_max``    max(E_{i+1} - E_i)
    * ``inequality_pointwise_max``  max over samples of
      ``-pair(mu, df) + (f(mu) - f(0))``
    * ``inequality_secant_max``  same with the secant ``Delta kn / Delta t``
      against the interval-averaged energy
    * ``path_defect_max``        phase distance between the re-integrated
      endpoint and the recorded one
    """
    space = trace.space
    samples = trace.samples
    gen = _GenericField(space, f)
    shift = f.value(DualElement.zero(space.algebra))

    rate_defect = 0.0
    diss_rel = 0.0
    diss_abs = 0.0
    path_defect = 0.0
    e_inc = -math.inf
    pt_max = -math.inf
    sec_max = -math.inf

    e_scale = 1.0 + max(abs(s.energy) for s in samples)

    def aug_rhs(comps):
        v, e, gn, rate = gen.rhs(comps)
        return v, rate, -(gn * gn)

    for s in samples:
        pt_max = max(pt_max, s.kn_rate + (s.energy - shift))

    for i in range(len(samples) - 1):
        s0, s1 = samples[i], samples[i + 1]
        h = s1.t - s0.t
        if h <= 0:
            continue
        comps = [np.array(c) for c in s0.z.components]
        q1 = 0.0
        q2 = 0.0
        hs = h / n_sub
        for _ in range(n_sub):
            v1, r1, d1 = aug_rhs(comps)
            c2 = [a + 0.5 * hs * b for a, b in zip(comps, v1)]
            v2, r2, d2 = aug_rhs(c2)
            c3 = [a + 0.5 * hs * b for a, b in zip(comps, v2)]
            v3, r3, d3 = aug_rhs(c3)
            c4 = [a + hs * b for a, b in zip(comps, v3)]
            v4, r4, d4 = aug_rhs(c4)
            comps = [a + (hs / 6.0) * (b1 + 2 * b2 + 2 * b3 + b4)
                     for a, b1, b2, b3, b4 in zip(comps, v1, v2, v3, v4)]
            comps = [c / np.linalg.norm(c) for c in comps]
            q1 += (hs / 6.0) * (r1 + 2 * r2 + 2 * r3 + r4)
            q2 += (hs / 6.0) * (d1 + 2 * d2 + 2 * d3 + d4)

        dkn = s1.kn_value - s0.kn_value
        de = s1.energy - s0.energy
        rate_defect = max(rate_defect, abs(dkn - q1) / h)
        if abs(de) >= 1e-9 * e_scale:
            diss_rel = max(diss_rel, abs(de - q2) / abs(de))
        else:
            diss_abs = max(diss_abs, abs(de - q2))
        e_inc = max(e_inc, de)
        sec_max = max(sec_max, dkn / h + 0.5 * (s0.energy + s1.energy) - shift)
        path_defect = max(path_defect,
                          phase_distance(PhasePoint.normalized(comps), s1.z))

    return {
        "rate_defect_max": rate_defect,
        "dissipation_rel_max": diss_rel,
        "dissipation_abs_max": diss_abs,
        "energy_increase_max": e_inc,
        "inequality_pointwise_max": pt_max,
        "inequality_secant_max": sec_max,
        "path_defect_max": path_defect,
        "shift": shift,
        "intervals": len(samples) - 1,
    }


def kempf_ness_monitor(trace: FlowTrace, f: ConvexInvariantFunction,
                       n_sub: int = 6, rate_tol: float = 1e-4,
                       ineq_tol: float = 1e-6) -> dict:
    """Kempf-Ness checks on a trace.

    Verifies (a) the rate identity ``d/dt kn = -pair(mu, df)`` within
    ``rate_tol`` (per unit time, via interval re-integration) and (b) the
    descent inequality ``d/dt kn <= -(f(mu) - f(0)) + ineq_tol``, both
    pointwise (exact rates) and in secant form (recorded kn increments).
    """
    c = flow_consistency(trace, f, n_sub=n_sub)
    report = {
        "rate_defect_max": c["rate_defect_max"],
        "inequality_pointwise_max": c["inequality_pointwise_max"],
        "inequality_secant_max": c["inequality_secant_max"],
        "shift": c["shift"],
        "rate_tol": rate_tol,
        "ineq_tol": ineq_tol,
        "identity_ok": bool(c["rate_defect_max"] <= rate_tol),
        "inequality_ok": bool(c["inequality_pointwise_max"] <= ineq_tol
                              and c["inequality_secant_max"] <= ineq_tol),
    }
    return report


def dissipation_check(trace: FlowTrace, f: ConvexInvariantFunction,
                      n_sub: int = 6, rel_tol: float = 1e-3) -> dict:
    """Energy dissipation checks on a trace.

    Verifies ``d/dt f(mu(z)) = -|sigma_z(df)|^2`` in integral form within a
    relative defect of ``rel_tol``, and that the energy column never
    increases beyond roundoff slack ``1e-9 * (1 + |E|)``.
    """
    c = flow_consistency(trace, f, n_sub=n_sub)
    e_scale = 1.0 + max(abs(s.energy) for s in trace.samples)
    report = {
        "dissipation_rel_max": c["dissipation_rel_max"],
        "dissipation_abs_max": c["dissipation_abs_max"],
        "energy_increase_max": c["energy_increase_max"],
        "rel_tol": rel_tol,
        "dissipation_ok": bool(c["dissipation_rel_max"] <= rel_tol),
        "monotone_ok": bool(c["energy_increase_max"] <= 1e-9 * e_scale),
    }
    return report
