"""Command-line driver: kernel certificates, construction runs, verification suites.

Every command writes a JSON run report (schema below) to --out when given
and prints one line per check. Exit codes: 0 all checks passed (or
certificate-only), 1 at least one verified failure, 2 malformed input or
usage error. Randomness is controlled by --seed and recorded in the report,
so residuals are reproducible; reports are byte-identical across runs and
parallelism settings except for the elapsed fields.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import presets
from .charfn import build_charfn, charfn_blocks_dict
from .operators import (
    NotPureError,
    OperatorTuple,
    defect_data,
    model_tuple,
    quadratic_form_certificate,
    tuple_from_spec,
)
from .presets import CheckResult, Configuration, run_configuration_checks
from .series import (
    KernelSeries,
    admissibility_report,
    factor_through_pick,
    FactorizationError,
    is_complete_pick,
    is_positive_quotient,
    kernel_from_spec,
    quotient,
    reciprocal_complement,
    _scalar_to_string,
)

SCHEMA_VERSION = 1

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "config", "environment", "checks"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "config": {"type": "object"},
        "environment": {
            "type": "object",
            "required": ["mode", "caps", "tolerances"],
            "properties": {
                "mode": {"enum": ["exact", "float"]},
                "caps": {"type": "object"},
                "tolerances": {"type": "object"},
                "seed": {"type": ["integer", "null"]},
            },
        },
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "verdict", "elapsed"],
                "properties": {
                    "name": {"type": "string"},
                    "verdict": {"enum": ["pass", "fail", "certificate-only"]},
                    "residual": {"type": ["number", "null"]},
                    "exact": {"type": ["boolean", "null"]},
                    "elapsed": {"type": "number"},
                },
            },
        },
    },
}


class InputError(Exception):
    """Bad user input: malformed spec files, unknown presets (exit code 2)."""


def _load_kernel(path: str, truncation: Optional[int]) -> KernelSeries:
    try:
        with open(path) as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read kernel spec {path}: {exc}") from exc
    if truncation is not None:
        spec = dict(spec)
        if spec.get("kind") == "coeffs":
            if len(spec["a"]) - 1 < truncation:
                raise InputError(f"coefficient spec too short for truncation {truncation}")
            spec["a"] = spec["a"][: truncation + 1]
        else:
            spec["truncation"] = truncation
    try:
        return kernel_from_spec(spec)
    except ValueError as exc:
        raise InputError(f"bad kernel spec {path}: {exc}") from exc


def _report(config: dict, environment: dict, checks: Sequence[CheckResult]) -> dict:
    names = [c.name for c in checks]
    if len(names) != len(set(names)):
        raise RuntimeError(f"duplicate check names in report: {names}")
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "environment": environment,
        "checks": [c.as_dict() for c in checks],
    }


def _finish(report: dict, out: Optional[str]) -> int:
    for check in report["checks"]:
        residual = check["residual"]
        residual_txt = "n/a" if residual is None else f"{residual:.3e}"
        exact_txt = " (exact)" if check.get("exact") else ""
        print(f"[{check['verdict'].upper():>16}] {check['name']}: residual {residual_txt}{exact_txt}")
    if out:
        with open(out, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"report written to {out}")
    return 1 if any(c["verdict"] == "fail" for c in report["checks"]) else 0


def _environment(mode: str, seed: Optional[int] = None, **caps) -> dict:
    return {
        "mode": mode,
        "seed": seed,
        "caps": caps,
        "tolerances": {
            "single_step": presets.TOL_SINGLE,
            "composite": presets.TOL_COMPOSITE,
            "block": presets.TOL_BLOCK,
        },
    }


def _certificate(name: str, payload_ok: bool, residual=None, exact=None) -> CheckResult:
    return CheckResult(name, "pass" if payload_ok else "fail", residual, exact, 0.0)


# ---------------------------------------------------------------------------
# kernel subcommands


def cmd_kernel(args) -> int:
    k = _load_kernel(args.spec, args.N) if args.spec else None
    tol = args.tol
    if args.kernel_cmd == "info":
        b = reciprocal_complement(k)
        adm = admissibility_report(k)
        print("a:", [_scalar_to_string(c) for c in k.coefficients])
        print("b:", [_scalar_to_string(c) for c in b.coefficients])
        print(f"ratio_sup: {_scalar_to_string(adm.ratio_sup)}")
        print(f"partial_sum_bound: {_scalar_to_string(adm.partial_sum_bound)}")
        print(f"admissibility: {adm.verdict}")
        checks = [CheckResult("kernel_info", "certificate-only", None, k.exact, 0.0)]
        report = _report(
            {"command": "kernel info", "spec": args.spec},
            _environment("exact" if k.exact else "float", truncation=k.truncation),
            checks,
        )
        return _finish(report, args.out)
    if args.kernel_cmd == "cnp":
        cert = is_complete_pick(k, tol)
        print(
            f"complete Nevanlinna-Pick up to degree {cert.holds_up_to}: "
            f"{'yes' if cert.holds else f'no (first negative at n={cert.first_negative})'}"
        )
        checks = [_certificate("complete_pick", cert.holds, exact=k.exact)]
        report = _report(
            {"command": "kernel cnp", "spec": args.spec, "first_negative": cert.first_negative},
            _environment("exact" if k.exact else "float", truncation=k.truncation),
            checks,
        )
        return _finish(report, args.out)
    if args.kernel_cmd == "quotient":
        num = _load_kernel(args.num, args.N)
        den = _load_kernel(args.den, args.N)
        q = quotient(num, den)
        cert = is_positive_quotient(num, den, tol)
        print("quotient:", [_scalar_to_string(c) for c in q.coefficients])
        print(
            f"non-negative up to degree {cert.holds_up_to}: "
            f"{'yes' if cert.holds else f'no (first negative at n={cert.first_negative})'}"
        )
        checks = [_certificate("positive_quotient", cert.holds, exact=q.exact)]
        report = _report(
            {"command": "kernel quotient", "num": args.num, "den": args.den,
             "first_negative": cert.first_negative},
            _environment("exact" if q.exact else "float", truncation=cert.holds_up_to),
            checks,
        )
        return _finish(report, args.out)
    if args.kernel_cmd == "factor":
        s = _load_kernel(args.cnp_factor, args.N)
        try:
            fac = factor_through_pick(k, s, tol)
        except (FactorizationError, ValueError) as exc:
            print(f"factorization failed: {exc}")
            checks = [_certificate("factorization", False)]
            report = _report(
                {"command": "kernel factor", "spec": args.spec, "factor": args.cnp_factor,
                 "error": str(exc)},
                _environment("exact" if k.exact else "float", truncation=k.truncation),
                checks,
            )
            return _finish(report, args.out)
        print("positive part:", [_scalar_to_string(c) for c in fac.positive_part.coefficients])
        checks = [_certificate("factorization", True, exact=k.exact and s.exact)]
        report = _report(
            {"command": "kernel factor", "spec": args.spec, "factor": args.cnp_factor},
            _environment("exact" if k.exact else "float", truncation=fac.truncation),
            checks,
        )
        return _finish(report, args.out)
    raise InputError(f"unknown kernel subcommand {args.kernel_cmd}")


# ---------------------------------------------------------------------------
# charfn subcommands


def _configuration_from_args(args) -> Configuration:
    if args.preset:
        try:
            config = presets.configuration(args.preset)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        return config
    if args.tuple_spec:
        if not (args.kernel and args.cnp_factor):
            raise InputError("--tuple needs --kernel and --cnp-factor")
        kernel = _load_kernel(args.kernel, args.N)
        pick = _load_kernel(args.cnp_factor, args.N)
        try:
            with open(args.tuple_spec) as fh:
                t = tuple_from_spec(json.load(fh))
        except (OSError, json.JSONDecodeError, ValueError) as exc:
            raise InputError(f"cannot read tuple spec {args.tuple_spec}: {exc}") from exc
        try:
            fac = factor_through_pick(kernel, pick)
        except (FactorizationError, ValueError) as exc:
            raise InputError(f"invalid factorization: {exc}") from exc
        bound = t.nilpotency_bound if t.nilpotency_bound is not None else 9
        support_cap, constant_cap = presets.default_caps(pick, kernel.dim, bound)
        if args.degree_cap:
            support_cap = constant_cap = args.degree_cap
        return Configuration(
            name="custom_tuple",
            dim=kernel.dim,
            factorization=fac,
            ops=t if t.weights is None else t.to_float(),
            support_cap=support_cap,
            constant_cap=constant_cap,
            source_degree=bound + 2,
        )
    if not (args.kernel and args.cnp_factor and args.d and args.model_degree is not None):
        raise InputError(
            "either --preset, --tuple, or all of --kernel/--cnp-factor/--d/--model-degree are required"
        )
    kernel = _load_kernel(args.kernel, args.N)
    pick = _load_kernel(args.cnp_factor, args.N)
    try:
        fac = factor_through_pick(kernel, pick)
    except (FactorizationError, ValueError) as exc:
        raise InputError(f"invalid factorization: {exc}") from exc
    t = model_tuple(kernel, args.d, args.model_degree, mode="float")
    support_cap, constant_cap = presets.default_caps(pick, args.d, args.model_degree)
    if args.degree_cap:
        support_cap = constant_cap = args.degree_cap
    return Configuration(
        name=f"custom_d{args.d}_n{args.model_degree}",
        dim=args.d,
        factorization=fac,
        ops=t,
        support_cap=support_cap,
        constant_cap=constant_cap,
        source_degree=args.model_degree + 2,
    )


def cmd_charfn(args) -> int:
    config = _configuration_from_args(args)
    if args.mode == "exact":
        config = _exact_variant(config)
    environment = _environment(
        args.mode,
        seed=args.seed,
        support_cap=config.support_cap,
        constant_cap=config.constant_cap,
        source_degree=config.source_degree,
    )
    config_echo = {
        "command": f"charfn {args.charfn_cmd}",
        "configuration": config.name,
        "description": config.description,
    }
    try:
        if args.charfn_cmd == "verify":
            checks = run_configuration_checks(config, seed=args.seed, composite_tol=args.tol)
        else:
            checks = _build_checks(config)
    except NotPureError as exc:
        dd = defect_data(config.ops, config.kernel, config.pick_factor)
        print(f"purity failure: {exc}")
        checks = [CheckResult("purity", "fail", dd.purity_residual, None, 0.0)]
        return _finish(_report(config_echo, environment, checks), args.out)
    if args.dump_theta:
        cfd = build_charfn(
            config.ops,
            config.factorization,
            support_cap=config.support_cap,
            constant_cap=config.constant_cap,
        )
        with open(args.dump_theta, "w") as fh:
            json.dump(charfn_blocks_dict(cfd), fh, indent=2, sort_keys=True)
        print(f"theta coefficients written to {args.dump_theta}")
    return _finish(_report(config_echo, environment, checks), args.out)


def _exact_variant(config: Configuration) -> Configuration:
    """Re-express the configuration's tuple with exact scalars when possible."""
    t = config.ops
    mats = []
    for m in np.asarray(t.mats, dtype=object):
        exact = np.empty(m.shape, dtype=object)
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                value = Fraction(m[i, j]).limit_denominator(10**9)
                if abs(float(value) - float(m[i, j])) > 1e-12:
                    raise InputError("exact mode needs rational matrix entries")
                exact[i, j] = value
        mats.append(exact)
    ops = OperatorTuple(tuple(mats), None, t.basis_labels, t.nilpotency_bound, t.kernel)
    return Configuration(
        name=config.name,
        dim=config.dim,
        factorization=config.factorization,
        ops=ops,
        support_cap=config.support_cap,
        constant_cap=config.constant_cap,
        source_degree=config.source_degree,
        description=config.description,
    )


def _build_checks(config: Configuration) -> list[CheckResult]:
    t0 = time.perf_counter()
    dd = defect_data(config.ops, config.kernel, config.pick_factor)
    if dd.purity_residual > presets.TOL_SINGLE and not dd.purity_exact:
        raise NotPureError(f"purity residual {dd.purity_residual:.3e}")
    cfd = build_charfn(
        config.ops,
        config.factorization,
        support_cap=config.support_cap,
        constant_cap=config.constant_cap,
    )
    elapsed = time.perf_counter() - t0
    block = max(
        v for k, v in cfd.diagnostics.items() if not isinstance(v, bool)
    )
    return [
        CheckResult("purity", "pass", dd.purity_residual, dd.purity_exact, elapsed),
        CheckResult(
            "construction_identities",
            "pass" if block <= presets.TOL_BLOCK else "fail",
            float(block),
            cfd.exact or None,
            elapsed,
        ),
    ]


# ---------------------------------------------------------------------------
# the impossibility sweep


def cmd_impossibility(args) -> int:
    m, n, n_max = args.m, args.n, args.N_max
    if m < 1 or n < 1:
        raise InputError("m and n must be >= 1")
    from .series import bergman_kernel

    first_violation = None
    agreement = 0.0
    t0 = time.perf_counter()
    truncation = n_max + 4
    kernel = bergman_kernel(m, 1, truncation)
    form = bergman_kernel(n, 1, truncation)
    for base in range(n_max + 1):
        closed = Fraction(1) - Fraction(n * (base + 2), base + m + 1)
        value = quadratic_form_certificate(
            kernel, form, base, [(base + 2,)], window_degree=base + 2, mode="exact"
        )[0]
        agreement = max(agreement, abs(float(value - closed)))
        if value < 0 and first_violation is None:
            first_violation = base
    elapsed = time.perf_counter() - t0
    checks = [
        CheckResult("closed_form_agreement", "pass" if agreement <= 1e-12 else "fail",
                    agreement, True, elapsed),
        CheckResult(
            "first_violation",
            "certificate-only",
            None if first_violation is None else float(first_violation),
            None,
            0.0,
        ),
    ]
    if first_violation is None:
        print(f"m={m}, n={n}: no violation for any window base degree up to {n_max}")
    else:
        print(f"m={m}, n={n}: first violation at base degree N={first_violation}")
    report = _report(
        {"command": "impossibility", "m": m, "n": n, "N_max": n_max,
         "first_violation": first_violation},
        _environment("exact", window=n_max + 2),
        checks,
    )
    return _finish(report, args.out)


# ---------------------------------------------------------------------------
# the suite


def cmd_suite(args) -> int:
    names = args.configs.split(",") if args.configs else list(presets.SUITE_CONFIGS)
    unknown = [n for n in names if n not in presets.CONFIG_NAMES]
    if unknown:
        raise InputError(f"unknown configurations: {', '.join(unknown)}")

    def run_one(name: str):
        config = presets.configuration(name)
        return name, run_configuration_checks(config, seed=args.seed, composite_tol=args.tol)

    results: dict[str, list[CheckResult]] = {}
    if args.parallelism > 1:
        with ThreadPoolExecutor(max_workers=args.parallelism) as pool:
            for name, checks in pool.map(run_one, names):
                results[name] = checks
    else:
        for name in names:
            key, checks = run_one(name)
            results[key] = checks
    all_checks: list[CheckResult] = []
    for name in names:
        for check in results[name]:
            all_checks.append(
                CheckResult(f"{name}/{check.name}", check.verdict, check.residual, check.exact, check.elapsed)
            )
    if not args.configs:
        all_checks.append(presets.run_alignment_check(seed=args.seed))
        all_checks.extend(presets.run_coincidence_checks(seed=args.seed))
    passed = sum(1 for c in all_checks if c.verdict == "pass")
    failed = sum(1 for c in all_checks if c.verdict == "fail")
    report = _report(
        {"command": "suite", "configurations": names, "passed": passed, "failed": failed},
        _environment("float", seed=args.seed, parallelism=args.parallelism),
        all_checks,
    )
    code = _finish(report, args.out)
    print(f"suite: {passed} passed, {failed} failed")
    return code


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cnpchar",
        description="characteristic functions for unit-ball kernels with a CNP factor",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    kernel = sub.add_parser("kernel", help="coefficient certificates for kernel spec files")
    ksub = kernel.add_subparsers(dest="kernel_cmd", required=True)
    for name in ("info", "cnp"):
        p = ksub.add_parser(name)
        p.add_argument("--spec", required=True, help="kernel spec JSON file")
        _common_flags(p)
    pq = ksub.add_parser("quotient")
    pq.add_argument("--num", required=True, help="numerator kernel spec")
    pq.add_argument("--den", required=True, help="denominator kernel spec")
    pq.set_defaults(spec=None)
    _common_flags(pq)
    pf = ksub.add_parser("factor")
    pf.add_argument("--spec", required=True)
    pf.add_argument("--cnp-factor", required=True, dest="cnp_factor")
    _common_flags(pf)
    kernel.set_defaults(func=cmd_kernel)

    charfn = sub.add_parser("charfn", help="build or verify the characteristic function")
    charfn.add_argument("charfn_cmd", choices=["build", "verify"])
    charfn.add_argument("--preset", help=f"one of: {', '.join(presets.CONFIG_NAMES)}")
    charfn.add_argument("--kernel", help="kernel spec JSON (with --cnp-factor, --d, --model-degree)")
    charfn.add_argument("--cnp-factor", dest="cnp_factor")
    charfn.add_argument("--tuple", dest="tuple_spec", help="operator tuple spec JSON")
    charfn.add_argument("--d", type=int)
    charfn.add_argument("--model-degree", type=int, dest="model_degree")
    charfn.add_argument("--degree-cap", type=int, dest="degree_cap")
    charfn.add_argument("--mode", choices=["exact", "float"], default="float")
    charfn.add_argument("--dump-theta", dest="dump_theta")
    _common_flags(charfn)
    charfn.set_defaults(func=cmd_charfn)

    imp = sub.add_parser("impossibility", help="sweep the obstruction for k_m through k_n")
    imp.add_argument("--m", type=int, required=True)
    imp.add_argument("--n", type=int, required=True)
    imp.add_argument("--N-max", type=int, default=20, dest="N_max")
    _common_flags(imp)
    imp.set_defaults(func=cmd_impossibility)

    suite = sub.add_parser("suite", help="run the full verification matrix")
    suite.add_argument("--configs", help="comma-separated configuration names (default: all)")
    suite.add_argument("--parallelism", type=int, default=1)
    _common_flags(suite)
    suite.set_defaults(func=cmd_suite)
    return parser


def _common_flags(p: argparse.ArgumentParser):
    p.add_argument("--N", type=int, default=None, help="series truncation override")
    p.add_argument("--tol", type=float, default=presets.TOL_COMPOSITE)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the JSON run report here")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
