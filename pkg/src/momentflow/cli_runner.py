"""Command-line interface (installed as ``mforge``).

Tasks::

    mforge flow       --config CFG --out DIR [--seed N] [--backend B]
    mforge decompose  --config CFG --out DIR [--seed N]
    mforge invariant  --config CFG --out DIR [--seed N]
    mforge extremal   --config CFG --out DIR [--seed N]
    mforge legendre   --config CFG --out DIR [--seed N]
    mforge verify-all --config CFG --out DIR [--seed N] [--backend B]
    mforge schema     [--out DIR]

Each task writes ``report.json`` into ``--out`` (tasks that integrate a
flow also write ``trace.csv``) and exits with 0 when every check passed,
2 when a verification check failed, and 1 on usage or configuration
errors.  Runs are deterministic: the same config, seed and backend produce
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import critical_structure as cs
from . import flow_engine as fe
from . import measure_functionals as mf
from .errors import (ConfigError, EmptyStabilizerError, MomentflowError,
                     TransportError)
from .invariant_convex import (ConvexInvariantFunction, function_from_name,
                               gradient_inverse, verify_convex_identities)
from .lie_core import (LieElement, exponential, norm, pair,
                       random_complex_element, sample_group_elements)
from .phase_space import PhasePoint, PhaseSpace, space_from_config

SCHEMA_VERSION = 1

__all__ = ["main", "run_task", "report_schema"]


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------

_TASKS = ("flow", "decompose", "invariant", "extremal", "legendre",
          "verify-all", "schema")


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _expect(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _get_section(cfg: dict, key: str, default: dict | None = None) -> dict:
    sec = cfg.get(key, {} if default is None else dict(default))
    _expect(isinstance(sec, dict), f"config section {key!r} must be an object")
    return dict(sec)


def _positive(sec: dict, key: str, default: float) -> float:
    v = sec.get(key, default)
    _expect(isinstance(v, (int, float)) and not isinstance(v, bool)
            and math.isfinite(v) and v > 0,
            f"config value {key!r} must be a positive number")
    return float(v)


def _nonneg(sec: dict, key: str, default: float) -> float:
    v = sec.get(key, default)
    _expect(isinstance(v, (int, float)) and not isinstance(v, bool)
            and math.isfinite(v) and v >= 0,
            f"config value {key!r} must be a nonnegative number")
    return float(v)


def _int_in(sec: dict, key: str, default: int, lo: int, hi: int) -> int:
    v = sec.get(key, default)
    _expect(isinstance(v, int) and not isinstance(v, bool) and lo <= v <= hi,
            f"config value {key!r} must be an integer in [{lo}, {hi}]")
    return int(v)


def _build_space(cfg: dict) -> PhaseSpace:
    _expect("space" in cfg, "config must contain a 'space' section")
    _expect(isinstance(cfg["space"], dict), "'space' must be an object")
    try:
        return space_from_config(cfg["space"])
    except MomentflowError as exc:
        raise ConfigError(f"invalid space config: {exc}") from exc
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"invalid space config: {exc}") from exc


def _build_function(cfg: dict) -> ConvexInvariantFunction:
    name = cfg.get("function", "quadratic")
    if isinstance(name, dict):
        name = name.get("name")
    _expect(isinstance(name, str), "'function' must be a name string")
    try:
        return function_from_name(name)
    except MomentflowError as exc:
        raise ConfigError(f"invalid function config: {exc}") from exc


def _coincident_point(space: PhaseSpace) -> PhasePoint:
    comps = []
    for n in space.component_dims:
        v = np.zeros(n, dtype=np.complex128)
        v[0] = 1.0
        comps.append(v)
    return PhasePoint(comps)


def _initial_point(space: PhaseSpace, cfg: dict,
                   rng: np.random.Generator) -> PhasePoint:
    sec = _get_section(cfg, "point", {"kind": "random"})
    kind = sec.get("kind", "random")
    if kind == "random":
        return space.random_point(rng)
    if kind == "coincident":
        return _coincident_point(space)
    if kind == "components":
        values = sec.get("values")
        _expect(isinstance(values, list)
                and len(values) == len(space.component_dims),
                f"point values must list {len(space.component_dims)} "
                "components")
        comps = []
        for j, (comp, n) in enumerate(zip(values, space.component_dims)):
            _expect(isinstance(comp, list) and len(comp) == n,
                    f"point component {j} must have {n} entries")
            vec = np.empty(n, dtype=np.complex128)
            for i, entry in enumerate(comp):
                _expect(isinstance(entry, list) and len(entry) == 2
                        and all(isinstance(x, (int, float))
                                and not isinstance(x, bool) for x in entry),
                        f"point entry ({j},{i}) must be a [re, im] pair")
                vec[i] = complex(entry[0], entry[1])
            _expect(float(np.linalg.norm(vec)) > 0,
                    f"point component {j} must be nonzero")
            comps.append(vec)
        return PhasePoint.normalized(comps)
    raise ConfigError(f"unknown point kind {kind!r}")


def _flow_params(cfg: dict) -> dict:
    sec = _get_section(cfg, "flow")
    for key in sec:
        _expect(key in ("t_max", "tol", "h_max", "target", "terminal_tol"),
                f"unknown flow option {key!r}")
    return {
        "t_max": _positive(sec, "t_max", 60.0),
        "tol": _nonneg(sec, "tol", 1e-8),
        "h_max": _positive(sec, "h_max", 0.05),
        "target": _positive(sec, "target", 1e-9),
        "terminal_tol": _positive(sec, "terminal_tol", 1e-6),
    }


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _jsonable(x):
    """Convert numpy scalars/arrays and complex values to JSON-safe data."""
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def _atomic_write(path: str, data: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".mforge-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_report(path: str, report: dict):
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    _atomic_write(path, text)


def write_trace_csv(path: str, trace: fe.FlowTrace):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t", "energy", "grad_norm", "kn_value"])
    for s in trace.samples:
        writer.writerow(["%.17g" % s.t, "%.17g" % s.energy,
                         "%.17g" % s.grad_norm, "%.17g" % s.kn_value])
    _atomic_write(path, buf.getvalue())


def _check(name: str, value, threshold, comparator: str = "<=") -> dict:
    value = _jsonable(value)
    if comparator == "<=":
        passed = bool(value <= threshold)
    elif comparator == ">=":
        passed = bool(value >= threshold)
    elif comparator == "==":
        passed = bool(value == threshold)
    elif comparator == "in":
        passed = bool(value in threshold)
    elif comparator == "is":
        passed = bool(value) == bool(threshold)
    else:
        raise ValueError(f"unknown comparator {comparator!r}")
    return {"name": name, "value": value, "threshold": _jsonable(threshold),
            "comparator": comparator, "passed": passed}


# ---------------------------------------------------------------------------
# Task implementations (each returns (results, checks, trace_or_None))
# ---------------------------------------------------------------------------

def _task_flow(cfg, rng, backend):
    space = _build_space(cfg)
    f = _build_function(cfg)
    z0 = _initial_point(space, cfg, rng)
    p = _flow_params(cfg)
    ctrl = fe.StepControl(target=p["target"], h_max=p["h_max"])
    trace = fe.gradient_flow(space, f, z0, step_ctrl=ctrl, tol=p["tol"],
                             t_max=p["t_max"], backend=backend)
    km = fe.kempf_ness_monitor(trace, f)
    dc = fe.dissipation_check(trace, f)
    final = trace.final
    checks = [
        _check("terminated_ok",
               trace.terminated_reason in ("converged", "max_time"), True,
               "is"),
        _check("terminal_grad_norm", final.grad_norm, p["terminal_tol"]),
        _check("energy_monotone", dc["energy_increase_max"],
               1e-9 * (1.0 + max(abs(s.energy) for s in trace.samples))),
        _check("dissipation_identity", dc["dissipation_rel_max"],
               dc["rel_tol"]),
        _check("kempf_ness_rate_identity", km["rate_defect_max"],
               km["rate_tol"]),
        _check("kempf_ness_inequality",
               max(km["inequality_pointwise_max"],
                   km["inequality_secant_max"]), km["ineq_tol"]),
    ]
    results = {
        "terminated_reason": trace.terminated_reason,
        "stats": trace.stats,
        "n_samples": len(trace.samples),
        "final": {"t": final.t, "energy": final.energy,
                  "grad_norm": final.grad_norm, "kn_value": final.kn_value},
        "kempf_ness": km,
        "dissipation": dc,
    }
    return results, checks, trace


def _flow_to_critical(space, f, cfg, rng, backend):
    z0 = _initial_point(space, cfg, rng)
    p = _flow_params(cfg)
    ctrl = fe.StepControl(target=p["target"], h_max=p["h_max"])
    trace = fe.gradient_flow(space, f, z0, step_ctrl=ctrl, tol=p["tol"],
                             t_max=p["t_max"], backend=backend)
    return trace, p


def _task_decompose(cfg, rng, backend):
    space = _build_space(cfg)
    f = _build_function(cfg)
    trace, p = _flow_to_critical(space, f, cfg, rng, backend)
    zc = trace.final.z
    ok, res = cs.critical_check(space, f, zc, tol=p["terminal_tol"])
    checks = [_check("critical_residual", res, p["terminal_tol"])]
    results = {"critical_residual": res,
               "terminated_reason": trace.terminated_reason}
    if ok:
        dec = cs.calabi_decomposition(space, f, zc,
                                      crit_tol=p["terminal_tol"])
        lam = dec.eigenvalues
        checks += [
            _check("hermitian_defect", dec.hermitian_defect, 1e-8),
            _check("max_eigenvalue",
                   float(np.max(lam)) if lam.size else 0.0, 1e-6),
            _check("zero_block_matches_compact_stabilizer",
                   dec.zero_block_dim, dec.dim_k, "=="),
            _check("zero_block_angle", dec.zero_angle, 1e-6),
        ]
        results.update({
            "eigenvalues": lam,
            "zero_block_dim": dec.zero_block_dim,
            "hermitian_defect": dec.hermitian_defect,
            "zero_angle": dec.zero_angle,
            "dim_k": dec.dim_k,
            "dim_g": dec.dim_g,
            "inner": dec.inner,
        })
    return results, checks, trace


def _task_invariant(cfg, rng, backend):
    del backend
    space = _build_space(cfg)
    f = _build_function(cfg)
    sec = _get_section(cfg, "invariant")
    n_samples = _int_in(sec, "n_samples", 25, 1, 10000)
    max_norm = _positive(sec, "max_norm", 2.0)
    z = _initial_point(space, cfg, rng)
    basis_k = space.stabilizer_k(z)
    basis_g = space.stabilizer_g(z)
    checks = [_check("stabilizer_nontrivial", len(basis_g), 1, ">=")]
    results = {"dim_k": len(basis_k), "dim_g": len(basis_g)}
    if basis_g:
        if basis_k and f.strict:
            xi = basis_k[0]
        else:
            xi = LieElement.zero(space.algebra)
        eta = basis_g[0]
        samples = sample_group_elements(space.algebra, n_samples, rng,
                                        max_norm=max_norm)
        rep = cs.mu_invariant_constancy(space, f, z, xi, eta, samples)
        checks.append(_check("invariant_constancy", rep["max_deviation"],
                             1e-8))
        results.update({
            "value": rep["value"],
            "max_deviation": rep["max_deviation"],
            "n_samples": rep["n_samples"],
            "xi_norm": norm(xi),
        })
    return results, checks, None


def _task_extremal(cfg, rng, backend):
    space = _build_space(cfg)
    f = _build_function(cfg)
    if not f.strict:
        raise ConfigError(
            "the extremal task needs a strictly convex function")
    trace, p = _flow_to_critical(space, f, cfg, rng, backend)
    zc = trace.final.z
    _, res = cs.critical_check(space, f, zc, tol=p["terminal_tol"])
    checks = [_check("critical_residual", res, p["terminal_tol"])]
    results = {"critical_residual": res}
    try:
        xi = cs.extremal_field(space, f, zc)
    except EmptyStabilizerError:
        results["stabilizer_empty"] = True
        checks.append(_check("stabilizer_nonempty", 0, 1, ">="))
        return results, checks, trace
    mu = space.moment(zc)
    if norm(xi) > 0:
        alpha = gradient_inverse(f, xi)
        resid = math.sqrt(sum(pair(alpha - mu, e) ** 2
                              for e in space.stabilizer_k(zc)))
    else:
        resid = math.sqrt(sum(pair(mu, e) ** 2
                              for e in space.stabilizer_k(zc)))
    checks.append(_check("extremal_residual", resid, 1e-8))
    results.update({"field_norm": norm(xi), "extremal_residual": resid})

    zeta = random_complex_element(space.algebra, rng, scale=0.15)
    g = exponential(zeta)
    try:
        rep = cs.extremal_field_transport(space, f, zc, g, budget=400,
                                          full_report=True)
        checks.append(_check("transport_defect", rep.defect, 1e-7))
        results.update({"transport_defect": rep.defect,
                        "transported_norm": norm(rep.field),
                        "transport_dim_k": rep.dim_k,
                        "transport_dim_g": rep.dim_g})
    except TransportError as exc:
        checks.append(_check("transport_ok", False, True, "is"))
        results["transport_error"] = str(exc)
    return results, checks, trace


def _legendre_inputs(cfg, rng):
    sec = _get_section(cfg, "legendre")
    if "weights" in sec:
        w = sec.get("weights")
        _expect(isinstance(w, list) and len(w) > 0
                and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                        and x > 0 for x in w),
                "legendre weights must be a list of positive numbers")
        m = mf.DiscreteMeasure(np.asarray(w, dtype=float))
        n = m.size

        def arr(key):
            v = sec.get(key)
            _expect(isinstance(v, list) and len(v) == n
                    and all(isinstance(x, (int, float))
                            and not isinstance(x, bool) for x in v),
                    f"legendre {key!r} must be a list of {n} numbers")
            return np.asarray(v, dtype=float)

        phi_raw = arr("phi_raw")
        t_xi = arr("theta_xi_raw")
        t_eta = arr("theta_eta_raw")
    else:
        n = _int_in(sec, "n", 64, 2, 100000)
        m = mf.DiscreteMeasure(rng.uniform(0.2, 2.0, n))
        phi_raw = rng.normal(0.0, 0.7, n)
        t_xi = rng.normal(0.0, 0.7, n)
        t_eta = rng.normal(0.0, 0.7, n)
    return m, phi_raw, t_xi, t_eta


def _task_legendre(cfg, rng, backend):
    del backend
    m, phi_raw, t_xi, t_eta = _legendre_inputs(cfg, rng)
    pair_ = mf.soliton_pair(m.total)
    phi = mf.normalize_phi(m, phi_raw)
    mass_defect = abs(float(np.sum(m.weights * (np.exp(phi) - 1.0))))
    u = pair_.F_hat.deriv(t_xi)  # always inside the domain of F
    fy = mf.fenchel_young_defect(pair_, m, u)
    zero_val = mf.legendre_functional(pair_, m, np.zeros(m.size))
    tz = mf.tian_zhu_check(m, phi, t_xi, t_eta)
    checks = [
        _check("phi_mass_normalization", mass_defect, 1e-10 * m.total),
        _check("fenchel_young_defect", fy, 1e-9),
        _check("dual_functional_at_zero", abs(zero_val), 1e-12),
        _check("weighted_mean_identity_defect", tz.defect, 1e-10),
    ]
    results = {
        "n": m.size,
        "total_mass": m.total,
        "fenchel_young_defect": fy,
        "dual_functional_at_zero": zero_val,
        "identity_lhs": tz.lhs,
        "identity_rhs": tz.rhs,
        "identity_defect": tz.defect,
        "chain_defect_raw": tz.chain_defect_raw,
        "chain_defect_corrected": tz.chain_defect_corrected,
        "e_chat": tz.e_chat,
    }
    return results, checks, None


def _task_verify_all(cfg, rng, backend):
    space = _build_space(cfg)
    f = _build_function(cfg)
    if not f.strict:
        raise ConfigError("verify-all needs a strictly convex function")
    stages = {}
    checks = []

    def run(label, fn, *args):
        res, chk, tr = fn(*args)
        stages[label] = res
        for c in chk:
            c = dict(c)
            c["name"] = f"{label}.{c['name']}"
            checks.append(c)
        return res, tr

    _, trace = run("flow", _task_flow, cfg, rng, backend)

    cfg_dec = dict(cfg)
    cfg_dec["point"] = {"kind": "coincident"}
    run("decompose", _task_decompose, cfg_dec, rng, backend)

    zc = _coincident_point(space)
    ctr = cs.convexity_counterexample(space, zc)
    checks.append(_check("counterexample.convex_one_sided",
                         ctr["convex_one_sided"], True, "is"))
    checks.append(_check("counterexample.indefinite_two_sided",
                         ctr["indefinite_two_sided"], True, "is"))
    stages["counterexample"] = ctr

    cfg_inv = dict(cfg)
    cfg_inv["point"] = {"kind": "coincident"}
    run("invariant", _task_invariant, cfg_inv, rng, None)

    cfg_ext = dict(cfg)
    cfg_ext["point"] = {"kind": "coincident"}
    run("extremal", _task_extremal, cfg_ext, rng, backend)

    run("legendre", _task_legendre, cfg, rng, None)

    battery = verify_convex_identities(f, space.algebra, trials=12,
                                       seed=int(rng.integers(0, 2 ** 31)))
    for key, val in sorted(battery.items()):
        tol = {"gradient_fd": 1e-5, "hessian_fd": 1e-3}.get(key, 1e-8)
        checks.append(_check(f"identities.{key}", val, tol))
    stages["identities"] = battery

    return stages, checks, trace


_TASK_FNS = {
    "flow": _task_flow,
    "decompose": _task_decompose,
    "invariant": _task_invariant,
    "extremal": _task_extremal,
    "legendre": _task_legendre,
    "verify-all": _task_verify_all,
}


# ---------------------------------------------------------------------------
# Report schema
# ---------------------------------------------------------------------------

def report_schema() -> dict:
    """JSON-Schema-shaped description of ``report.json``."""
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "mforge report",
        "type": "object",
        "required": ["schema_version", "task", "seed", "passed", "checks",
                     "results"],
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "task": {"enum": sorted(_TASK_FNS)},
            "seed": {"type": "integer"},
            "backend": {"type": ["string", "null"]},
            "config": {"type": "object"},
            "passed": {"type": "boolean"},
            "checks": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["name", "value", "threshold", "comparator",
                                 "passed"],
                    "properties": {
                        "name": {"type": "string"},
                        "comparator": {"enum": ["<=", ">=", "==", "in", "is"]},
                        "passed": {"type": "boolean"},
                    },
                },
            },
            "results": {"type": "object"},
        },
        "notes": {
            "complex": "complex numbers serialize as [real, imag]",
            "floats": "floats use Python repr (shortest round-trip)",
            "trace_csv": "flow tasks also write trace.csv with columns "
                         "t,energy,grad_norm,kn_value (%.17g)",
        },
    }


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def run_task(task: str, cfg: dict, out_dir: str, seed: int,
             backend: str | None) -> int:
    """Execute ``task`` and write outputs; returns the process exit code."""
    rng = np.random.default_rng(seed)
    results, checks, trace = _TASK_FNS[task](cfg, rng, backend)
    passed = all(c["passed"] for c in checks)
    report = {
        "schema_version": SCHEMA_VERSION,
        "task": task,
        "seed": seed,
        "backend": backend,
        "config": cfg,
        "results": results,
        "checks": checks,
        "passed": passed,
    }
    os.makedirs(out_dir, exist_ok=True)
    if trace is not None:
        write_trace_csv(os.path.join(out_dir, "trace.csv"), trace)
    write_report(os.path.join(out_dir, "report.json"), report)
    return 0 if passed else 2


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage errors exit with status 1.

    Exit status 2 is reserved for verification failures.
    """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="mforge",
                     description="moment-map descent flows and their "
                                 "structure checks")
    sub = parser.add_subparsers(dest="task", required=True,
                                parser_class=_Parser)
    for task in _TASKS:
        p = sub.add_parser(task)
        if task == "schema":
            p.add_argument("--out", default=None,
                           help="directory to also write report_schema.json")
            continue
        p.add_argument("--config", required=True,
                       help="path to the JSON configuration")
        p.add_argument("--out", required=True,
                       help="output directory for report.json / trace.csv")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config's seed (default 0)")
        if task in ("flow", "verify-all"):
            p.add_argument("--backend",
                           choices=("auto", "numpy", "numba"), default=None,
                           help="kernel backend for flow integration")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.task == "schema":
        text = json.dumps(report_schema(), indent=2, sort_keys=True)
        print(text)
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            _atomic_write(os.path.join(args.out, "report_schema.json"),
                          text + "\n")
        return 0
    try:
        cfg = _load_config(args.config)
        seed = args.seed
        if seed is None:
            seed = cfg.get("seed", 0)
            _expect(isinstance(seed, int) and not isinstance(seed, bool),
                    "config 'seed' must be an integer")
        backend = getattr(args, "backend", None)
        return run_task(args.task, cfg, args.out, int(seed), backend)
    except ConfigError as exc:
        print(f"mforge: config error: {exc}", file=sys.stderr)
        return 1
    except MomentflowError as exc:
        print(f"mforge: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
