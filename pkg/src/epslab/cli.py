"""``eps`` command-line frontend.

Exit codes: 0 success / all checks passed, 1 a verification check failed,
2 usage or configuration error (a JSON diagnostic goes to stderr and no
output files are written).
"""

from __future__ import annotations

import argparse
import json
import sys
from math import pi

import numpy as np

from . import __version__
from .config import SUITES, RunConfig, apply_override, load_config_data, resolve
from .errors import ConfigError, EPSError, TruncationError
from .evolution import (
    eps_equation_residual,
    eps_states,
    evolve_wavefunctions,
    expectation_trajectory,
)
from .hamilton_jacobi import (
    husimi_equation_residual,
    imaginary_part_residual,
    modified_hj_residual,
    q_representation_residual,
    time_derivatives,
)
from .operator_algebra import (
    bch_similarity,
    commutator,
    cross_term,
    extended_hamiltonian,
    husimi_hamiltonian,
    parse,
    q_function_bindings,
    specialize,
)
from .serialization import OutputWriter, dumps_json, samples_to_csv
from .states import build_eps_state
from .transforms import QuasiDistribution, husimi_from_wigner, husimi_via_diffop, wigner_from_psi

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _load(args) -> RunConfig:
    data = load_config_data(getattr(args, "config", None))
    for item in getattr(args, "set", None) or []:
        apply_override(data, item)
    if getattr(args, "output_dir", None):
        data["output_dir"] = args.output_dir
    if getattr(args, "f", None) is not None:
        data["f"] = args.f if args.f == "q-function" else _float_arg(args.f, "--f")
    return resolve(data)


def _float_arg(text, flag):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{flag} expects a number or 'q-function', got {text!r}") from None


def _period(cfg: RunConfig) -> float:
    return 2 * pi / cfg.params.omega


# ----------------------------------------------------------------- state


def cmd_state(args) -> int:
    cfg = _load(args)
    if cfg.zero_state:
        raise ConfigError("the zero state has no normalizable chi")
    st = build_eps_state(cfg.state, cfg.grid, args.t)
    out = OutputWriter(cfg.output_dir)
    meta = {"state": cfg.state.to_dict(), "t": args.t, "params": cfg.params.to_dict()}
    out.add_field("chi", st.chi, meta)
    out.add("psi.csv", samples_to_csv("q", cfg.grid.q, st.psi))
    out.add("phi.csv", samples_to_csv("p", cfg.grid.p, st.phi))
    out.add_json("state.meta.json", {**meta, "grid": cfg.grid.to_dict()})
    files = out.commit()
    print(dumps_json({"command": "state", "files": files}), end="")
    return EXIT_OK


# ------------------------------------------------------------- transform


def _wigner(cfg: RunConfig, t: float) -> QuasiDistribution:
    if cfg.zero_state:
        return wigner_from_psi(np.zeros(cfg.grid.n_q), cfg.grid, cfg.params, t)
    return wigner_from_psi(cfg.state, cfg.grid, cfg.params, t)


def cmd_transform(args) -> int:
    cfg = _load(args)
    if args.kind == "qfunction" and getattr(args, "f", None) not in (None, "q-function"):
        raise ConfigError("--kind qfunction fixes f = hbar/(m omega); drop --f")
    pw = _wigner(cfg, args.t)
    f = cfg.params.q_function_f if args.kind == "qfunction" else cfg.f
    summary = {"command": "transform", "kind": args.kind, "path": args.path}
    if args.kind == "wigner":
        qd = pw
    elif args.path == "convolution":
        qd = husimi_from_wigner(pw, f)
    else:
        try:
            qd = husimi_via_diffop(pw, f, order=args.order)
        except TruncationError as exc:
            raise ConfigError(f"{exc} diagnostics={exc.diagnostics}") from None
        summary["discrepancy"] = qd.discrepancy
    out = OutputWriter(cfg.output_dir)
    stem = {"wigner": "wigner", "husimi": "husimi", "qfunction": "qfunction"}[args.kind]
    meta = qd.metadata()
    out.add_field(stem, qd.field, meta)
    summary["files"] = out.commit()
    summary.update({"min": float(np.min(qd.values)), "max": float(np.max(qd.values)), "mass": qd.mass})
    print(dumps_json(summary), end="")
    return EXIT_OK


# ---------------------------------------------------------------- verify


def _hj_like(cfg, suite, sign):
    spec = cfg.state
    fn = modified_hj_residual if suite == "hj" else imaginary_part_residual
    tol = cfg.tolerance(suite)
    t = 0.0
    if spec.stationary:
        st = build_eps_state(spec, cfg.grid, t)
        return fn(st, tolerance=tol, sign=sign)
    delta = 1e-4 * _period(cfg)
    before, now, after = eps_states(spec, cfg.grid, [t - delta, t, t + delta])
    td = time_derivatives(before, after)
    if suite == "hj":
        return fn(now, dSdt=td, tolerance=tol, sign=sign)
    return fn(now, dlogRdt=td, tolerance=tol, sign=sign)


def _triplets(cfg):
    """Eight evaluation times over one period, each with a short centered triplet."""
    period = _period(cfg)
    delta = period / 4000
    return [(t - delta, t, t + delta) for t in np.arange(8) * (period / 8)]


def _husimi_check(cfg, sign):
    spec = cfg.state
    tol = cfg.tolerance("qrep")
    qfun = abs(cfg.f - cfg.params.q_function_f) <= 1e-12 * cfg.params.q_function_f
    if qfun:
        run = lambda ts: q_representation_residual(spec, cfg.grid, ts, tolerance=tol, sign=sign)  # noqa: E731
    else:
        run = lambda ts: husimi_equation_residual(  # noqa: E731
            spec, cfg.grid, cfg.f, ts, full=True, tolerance=tol, sign=sign
        )
    if spec.stationary:
        return run(None)
    reports = [run(ts) for ts in _triplets(cfg)]
    worst = max(reports, key=lambda r: r.max_abs)
    worst.details["n_times"] = len(reports)
    return worst


def _eps_eq(cfg, sign):
    dt = _period(cfg) / 2000
    series = eps_states(cfg.state, cfg.grid, [0.0, dt, 2 * dt])
    return eps_equation_residual(series, tolerance=cfg.tolerance("eps-eq"), sign=sign)


def run_suite(cfg: RunConfig, suite: str, sign: float = 1.0) -> dict:
    """One check as a JSON-ready dict with ``status`` pass / fail / skipped."""
    try:
        if suite in ("hj", "imag"):
            rep = _hj_like(cfg, suite, sign)
        elif suite == "eps-eq":
            rep = _eps_eq(cfg, sign)
        elif suite == "qrep":
            rep = _husimi_check(cfg, sign)
        else:
            raise ConfigError(f"unknown suite {suite!r}")
    except EPSError as exc:
        if isinstance(exc, ConfigError):
            raise
        return {"suite": suite, "status": "skipped", "reason": f"{type(exc).__name__}: {exc}"}
    d = rep.to_dict()
    d["suite"] = suite
    if not rep.representative:
        d["status"] = "skipped"
        d["reason"] = "mask covers too little of the grid"
    else:
        d["status"] = "pass" if rep.passed else "fail"
    return d


def cmd_verify(args) -> int:
    cfg = _load(args)
    if cfg.zero_state:
        raise ConfigError("verification needs a normalizable state")
    suites = SUITES if args.suite == "all" else (args.suite,)
    sign = -1.0 if args.debug_flip_sign else 1.0
    checks = [run_suite(cfg, s, sign) for s in suites]
    failed = [c for c in checks if c["status"] == "fail"]
    skipped = [c for c in checks if c["status"] == "skipped"]
    ok = not failed and not (args.strict and skipped)
    report = {
        "command": "verify",
        "config": cfg.to_dict(),
        "checks": checks,
        "debug_flip_sign": bool(args.debug_flip_sign),
        "strict": bool(args.strict),
        "passed": ok,
    }
    out = OutputWriter(cfg.output_dir)
    out.add_json("verify.json", report)
    out.commit()
    print(dumps_json(report), end="")
    return EXIT_OK if ok else EXIT_FAIL


# --------------------------------------------------------------- algebra


def _parse_bindings(items) -> dict:
    bindings = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"binding {item!r} must look like name=value")
        name, value = item.split("=", 1)
        bindings[name.strip()] = value.strip()
    return bindings


def cmd_algebra(args) -> int:
    op = args.operation
    result: dict = {"command": "algebra", "operation": op}
    if op == "extend":
        expr = extended_hamiltonian(parse(args.expression))
        result["result"] = str(expr)
    elif op == "bch":
        if args.wigner_harmonic:
            res = husimi_hamiltonian(args.max_order)
        else:
            if not (args.exponent and args.operand):
                raise ConfigError("bch needs --wigner-harmonic or both --exponent and --operand")
            a = parse(args.exponent)
            res = bch_similarity(a, parse(args.operand, a.rep), args.max_order)
        result["result"] = str(res.result)
        result["termination_order"] = res.termination_order
        result["cross_term"] = str(cross_term(res.result))
    elif op == "specialize":
        expr = parse(args.expression) if args.expression else husimi_hamiltonian().result
        bindings = _parse_bindings(args.bind)
        if args.f is not None:
            bindings["f"] = args.f
            if args.f == "q-function":
                bindings.setdefault("k", str(q_function_bindings()["k"]))
        out = specialize(expr, bindings)
        result["result"] = str(out)
        result["cross_term"] = str(cross_term(out))
    elif op == "commutator":
        a = parse(args.left)
        result["result"] = str(commutator(a, parse(args.right, a.rep)))
    if args.json:
        print(dumps_json(result), end="")
    else:
        print(result["result"])
        if "termination_order" in result:
            print(f"termination order: {result['termination_order']}")
    return EXIT_OK


# ---------------------------------------------------------------- evolve


def cmd_evolve(args) -> int:
    cfg = _load(args)
    if cfg.zero_state:
        raise ConfigError("evolution needs a normalizable state")
    ev = cfg.evolution_or_default()
    ev.validate(cfg.params)
    series = evolve_wavefunctions(cfg.state, config=ev, grid=cfg.grid)
    traj = expectation_trajectory(series)
    traj.metadata = {"config": cfg.to_dict(), "evolution": ev.to_dict()}
    out = OutputWriter(cfg.output_dir)
    out.add("trajectory.csv", traj.to_csv())
    out.add("trajectory.meta.json", traj.to_json() + "\n")
    files = out.commit()
    final = {k: float(np.real(v[-1])) for k, v in sorted(traj.expectations.items())}
    print(dumps_json({"command": "evolve", "files": files, "final": final}), end="")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _common(p):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--output-dir", help="directory for output files (overrides config)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key, e.g. state.n=2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eps", description="Extended-phase-space oscillator laboratory")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("state", help="write chi, psi and phi for the configured state")
    _common(p)
    p.add_argument("--t", type=float, default=0.0)
    p.set_defaults(func=cmd_state)

    p = sub.add_parser("transform", help="Wigner / Husimi / Q-function of the configured state")
    _common(p)
    p.add_argument("--kind", choices=("wigner", "husimi", "qfunction"), default="qfunction")
    p.add_argument("--path", choices=("convolution", "diffop"), default="convolution")
    p.add_argument("--order", type=int, default=24, help="series truncation for --path diffop")
    p.add_argument("--f", help="smoothing parameter or 'q-function'")
    p.add_argument("--t", type=float, default=0.0)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("verify", help="run residual suites and report pass/fail")
    _common(p)
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p.add_argument("--f", help="smoothing parameter or 'q-function'")
    p.add_argument("--strict", action="store_true", help="treat skipped checks as failures")
    p.add_argument("--debug-flip-sign", action="store_true", help="negative control: flip one term's sign")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("algebra", help="exact operator-algebra derivations")
    asub = p.add_subparsers(dest="operation", required=True)
    a = asub.add_parser("extend", help="extended Hamiltonian of a polynomial H(p, q)")
    a.add_argument("expression")
    a = asub.add_parser("bch", help="e^A X e^-A by nested commutators")
    a.add_argument("--wigner-harmonic", action="store_true", help="harmonic Wigner Hamiltonian, Husimi exponent")
    a.add_argument("--exponent")
    a.add_argument("--operand")
    a.add_argument("--max-order", type=int, default=12)
    a = asub.add_parser("specialize", help="substitute parameter values")
    a.add_argument("expression", nargs="?", help="defaults to the Husimi Hamiltonian")
    a.add_argument("--f", help="value for f, or 'q-function' (also sets k = m*omega^2)")
    a.add_argument("--bind", action="append", metavar="NAME=EXPR")
    a = asub.add_parser("commutator", help="[A, B]")
    a.add_argument("left")
    a.add_argument("right")
    for a in asub.choices.values():
        a.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_algebra)

    p = sub.add_parser("evolve", help="expectation-value trajectory of the configured state")
    _common(p)
    p.set_defaults(func=cmd_evolve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EPSError) as exc:
        diag = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        sys.stderr.write(json.dumps(diag, sort_keys=True) + "\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
