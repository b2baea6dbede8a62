"""Command-line entry point: ``pgrad {constants,family,verify,classify}``.

Exit codes: 0 success, 2 input error, 3 domain or numerical error (including a
failed verification), 4 inconclusive classification.

Options may also come from ``--config FILE``, a flat ``key = value`` file with
dotted section names (``params.n = 3``, ``grid.lo = 1e-6``).  Command-line flags
override the file; unknown keys are rejected.  ``PGRAD_LOG`` sets the log level
(DEBUG, INFO, WARNING; default WARNING).

All JSON documents carry ``schema_version``; floats are written in shortest
round-trip form so identical runs produce identical bytes.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (bernstein_residual_euclidean, calibrate_lambda, gradient_bound_check,
                     gradient_constant, harnack_ratio, liouville_check)
from .errors import (ConflictingFits, DomainError, InsufficientSamples, InvalidParams,
                     NumericalError, PgradError, RegimeError)
from .manifold import CurvatureBounds, calibrate_manifold_barrier
from .numerics import geometric_grid
from .params import (ProblemParams, beta_q, classify_regime, coefficient_b, lambda_singular,
                     lambda_tilde, q_star)
from .radial_families import (SCHEMA_VERSION, FamilyDescriptor, FamilyKind, ProfileFormatError,
                              family_du, evaluate_family, profile_from_csv)
from .singularity import Verdict, classify, verify_constant_sphere_solution

EXIT_OK, EXIT_INPUT, EXIT_DOMAIN, EXIT_INCONCLUSIVE = 0, 2, 3, 4

log = logging.getLogger("pgrad")

CONFIG_KEYS = {
    "params.n": "n", "params.p": "p", "params.q": "q",
    "family.kind": "family", "family.k": "k", "family.M": "M", "family.eps": "eps",
    "grid.lo": "grid_lo", "grid.hi": "grid_hi", "grid.per_decade": "grid_per_decade",
    "window.lo": "window_lo", "window.hi": "window_hi", "classify.tol": "tol",
    "geometry.R": "R", "geometry.center": "center",
    "curvature.B": "B", "curvature.Btilde": "Btilde",
    "io.out": "out", "io.input": "input", "run.seed": "seed",
}

VERIFY_CHECKS = ("gradient-bound", "supersolution", "supersolution-manifold", "harnack",
                 "liouville", "sphere-constant")


class InputError(Exception):
    """Bad command-line or configuration input (exit code 2)."""


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps(record: dict) -> str:
    return json.dumps(record, indent=1, default=_json_default) + "\n"


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the same directory, then rename over ``path``."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def read_config(path: str) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    values: dict = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise InputError(f"{path}:{lineno}: unknown key {key!r}")
        values[CONFIG_KEYS[key]] = value
    return values


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--n", type=int)
    parser.add_argument("--p", type=float)
    parser.add_argument("--q", type=float)
    parser.add_argument("--out", help="output path (default: standard output)")
    parser.add_argument("--seed", type=int, help="reserved; all pipelines are deterministic")


def _add_family(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--family", choices=[kind.value for kind in FamilyKind])
    parser.add_argument("--k", type=float)
    parser.add_argument("--M", type=float)
    parser.add_argument("--eps", type=float)
    parser.add_argument("--grid-lo", type=float)
    parser.add_argument("--grid-hi", type=float)
    parser.add_argument("--grid-per-decade", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pgrad", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"pgrad {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    constants = sub.add_parser("constants", help="exponents, constants and regime")
    _add_common(constants)

    family = sub.add_parser("family", help="sample a radial solution family to CSV")
    _add_common(family)
    _add_family(family)

    verify = sub.add_parser("verify", help="run a numerical verification")
    verify.add_argument("check", choices=VERIFY_CHECKS)
    _add_common(verify)
    _add_family(verify)
    verify.add_argument("--R", type=float)
    verify.add_argument("--center", type=float)
    verify.add_argument("--B", type=float)
    verify.add_argument("--Btilde", type=float)

    cls = sub.add_parser("classify", help="classify a CSV profile near r = 0")
    _add_common(cls)
    cls.add_argument("--input", help="profile CSV")
    cls.add_argument("--window-lo", type=float)
    cls.add_argument("--window-hi", type=float)
    cls.add_argument("--tol", type=float)
    return parser


_CASTS = {"n": int, "p": float, "q": float, "k": float, "M": float, "eps": float,
          "grid_lo": float, "grid_hi": float, "grid_per_decade": int, "window_lo": float,
          "window_hi": float, "tol": float, "R": float, "center": float, "B": float,
          "Btilde": float, "seed": int, "family": str, "out": str, "input": str}


def merge_config(args: argparse.Namespace) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    for dest, raw in read_config(args.config).items():
        if getattr(args, dest, None) is not None:
            continue
        if not hasattr(args, dest):
            raise InputError(f"config key for {dest!r} does not apply to '{args.command}'")
        try:
            setattr(args, dest, _CASTS[dest](raw))
        except ValueError:
            raise InputError(f"config value {raw!r} for {dest} is not a valid {_CASTS[dest].__name__}") from None
    return args


def _params(args, defaults: tuple | None = None) -> ProblemParams:
    n, p, q = args.n, args.p, args.q
    if defaults is not None:
        n = defaults[0] if n is None else n
        p = defaults[1] if p is None else p
        q = defaults[2] if q is None else q
    if None in (n, p, q):
        raise InputError("--n, --p and --q are required")
    return ProblemParams(n, p, q)


def _descriptor(args, params: ProblemParams, default_kind: FamilyKind) -> FamilyDescriptor:
    kind = FamilyKind(args.family) if args.family else default_kind
    return FamilyDescriptor(kind, params, k=args.k, M=args.M, eps=args.eps)


def _grid(args, lo: float, hi: float, per_decade: int = 64) -> np.ndarray:
    lo = args.grid_lo if args.grid_lo is not None else lo
    hi = args.grid_hi if args.grid_hi is not None else hi
    per_decade = args.grid_per_decade if args.grid_per_decade is not None else per_decade
    if not 0 < lo < hi or per_decade < 1:
        raise InputError("grid needs 0 < grid-lo < grid-hi and a positive density")
    return geometric_grid(lo, hi, per_decade)


def _optional(func, params):
    try:
        return func(params)
    except RegimeError:
        return None


def cmd_constants(args) -> int:
    params = _params(args)
    regime = classify_regime(params)
    record = {
        "schema_version": SCHEMA_VERSION, "kind": "constants",
        "n": params.n, "p": params.p, "q": params.q,
        "q_c": regime.q_c, "q_tilde": regime.q_tilde, "q_star": q_star(params),
        "beta_q": beta_q(params), "b": coefficient_b(params),
        "lambda": _optional(lambda_singular, params), "lambda_tilde": _optional(lambda_tilde, params),
        "regime": regime.tag.value, "critical": regime.critical,
        "above_q_tilde": regime.above_q_tilde,
    }
    emit(dumps(record), args.out)
    return EXIT_OK


def cmd_family(args) -> int:
    params = _params(args)
    if not args.family:
        raise InputError("--family is required")
    desc = _descriptor(args, params, FamilyKind.STRONG_SINGULAR)
    profile = evaluate_family(desc, _grid(args, 1e-6, 1.0))
    emit(profile.to_csv(), args.out)
    if args.out:
        meta = {"schema_version": SCHEMA_VERSION, "kind": "profile_metadata",
                "metadata": profile.header(), "domain": [str(x) if math.isinf(x) else x
                                                         for x in profile.domain],
                "samples": int(profile.r.size), "csv": Path(args.out).name}
        write_atomic(Path(args.out).with_suffix(".json"), dumps(meta))
    return EXIT_OK


def _verify_record(check: str, failures: list[str], **data) -> dict:
    return {"schema_version": SCHEMA_VERSION, "kind": "verification", "check": check,
            "passed": not failures, "failures": failures, **data}


def _verify_gradient_bound(args, params):
    desc = _descriptor(args, params, FamilyKind.STRONG_SINGULAR)
    profile = evaluate_family(desc, _grid(args, 1e-4, 1.0))
    report = gradient_bound_check(profile, params, R=args.R, puncture=True)
    saturation = abs(coefficient_b(params)) ** (1.0 / params.gap)
    c = gradient_constant(params)
    failures = []
    if report.sup_product > saturation * (1 + 1e-9):
        failures.append(f"sup_product {report.sup_product!r} exceeds |b|^(1/(q+1-p)) = {saturation!r}")
    if report.sup_product > c:
        failures.append(f"sup_product {report.sup_product!r} exceeds the barrier constant {c!r}")
    return failures, {"family": desc.kind.value, "sup_product": report.sup_product,
                      "argmax_r": report.argmax_r, "saturation": saturation,
                      "barrier_constant": c}


def _verify_supersolution(args, params):
    R = args.R if args.R is not None else 1.0
    lam = calibrate_lambda(params, R)
    report = bernstein_residual_euclidean(params, R, lam)
    failures = [] if report.ok else [f"residual_min {report.residual_min!r} < 0"]
    return failures, {"R": R, "lambda": lam, "residual_min": report.residual_min,
                      "endpoint_residual": report.endpoint_residual}


def _verify_supersolution_manifold(args, params):
    R = args.R if args.R is not None else 1.0
    B = args.B if args.B is not None else 1.0
    curv = CurvatureBounds(B, args.Btilde if args.Btilde is not None else B, params.p)
    barrier = calibrate_manifold_barrier(params, curv, R)
    failures = [] if barrier.report.ok else [f"residual_min {barrier.report.residual_min!r} < 0"]
    return failures, {"R": R, "B": curv.B, "Btilde": curv.Btilde, "c": barrier.c,
                      "lambda": barrier.lam, "mu": barrier.mu,
                      "residual_min": barrier.report.residual_min}


def _verify_harnack(args, params):
    desc = _descriptor(args, params, FamilyKind.STRONG_SINGULAR)
    center = args.center if args.center is not None else 0.5
    R = args.R if args.R is not None else 0.25
    grid = np.linspace(max(center - R, 1e-12), center + R, 2001)
    profile = evaluate_family(desc, grid)
    ratio = harnack_ratio(profile, center, R, domain=profile.domain)
    failures = [] if math.isfinite(ratio) and ratio >= 1.0 else [f"ratio {ratio!r} is not finite"]
    return failures, {"family": desc.kind.value, "center": center, "R": R, "ratio": ratio}


def _verify_liouville(args, params):
    k = args.k if args.k is not None else 1.0
    desc = FamilyDescriptor(FamilyKind.GLOBAL_KM, params, k=k, M=args.M or 0.0)
    report = liouville_check(params, family_du(desc))
    failures = []
    if not report.ok:
        failures.append(f"gradient exceeds the bound by factor {report.max_bound_ratio!r}")
    expected = report.expected_exponent
    if report.fitted_exponent is None or abs(report.fitted_exponent - expected) > 0.01 * abs(expected):
        failures.append(f"decay exponent {report.fitted_exponent!r} is not {expected!r} within 1%")
    data = json.loads(report.to_json())
    del data["schema_version"], data["kind"]
    return failures, data


def _verify_sphere_constant(args, params):
    residual = verify_constant_sphere_solution(params)
    failures = [] if residual < 1e-12 else [f"residual {residual!r} >= 1e-12"]
    return failures, {"lambda_tilde": lambda_tilde(params), "residual": residual}


_VERIFIERS = {
    "gradient-bound": (_verify_gradient_bound, (3, 2.0, 4.0 / 3.0)),
    "supersolution": (_verify_supersolution, (3, 2.0, 4.0 / 3.0)),
    "supersolution-manifold": (_verify_supersolution_manifold, (3, 2.0, 4.0 / 3.0)),
    "harnack": (_verify_harnack, (3, 2.0, 4.0 / 3.0)),
    "liouville": (_verify_liouville, (3, 2.0, 4.0 / 3.0)),
    "sphere-constant": (_verify_sphere_constant, (4, 2.0, 1.5)),
}


def cmd_verify(args) -> int:
    func, defaults = _VERIFIERS[args.check]
    params = _params(args, defaults)
    failures, data = func(args, params)
    record = _verify_record(args.check, failures, n=params.n, p=params.p, q=params.q, **data)
    emit(dumps(record), args.out)
    for failure in failures:
        log.error("verification failed: %s", failure)
    return EXIT_OK if not failures else EXIT_DOMAIN


def cmd_classify(args) -> int:
    if not args.input:
        raise InputError("--input is required")
    try:
        text = Path(args.input).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {args.input}: {exc}") from None
    profile = profile_from_csv(text)
    meta = profile.metadata
    try:
        defaults = (int(meta["n"]), float(meta["p"]), float(meta["q"])) if {"n", "p", "q"} <= meta.keys() else None
    except ValueError:
        raise InputError("CSV header carries non-numeric n, p or q") from None
    params = _params(args, defaults)
    window = (args.window_lo if args.window_lo is not None else 1e-6,
              args.window_hi if args.window_hi is not None else 1e-3)
    tol = args.tol if args.tol is not None else 1e-2
    result = classify(profile, params, window=window, tol=tol)
    emit(result.to_json() + "\n", args.out)
    return EXIT_INCONCLUSIVE if result.verdict is Verdict.UNCLASSIFIED else EXIT_OK


_COMMANDS = {"constants": cmd_constants, "family": cmd_family, "verify": cmd_verify,
             "classify": cmd_classify}


def _configure_logging() -> None:
    level = os.environ.get("PGRAD_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="pgrad %(levelname)s: %(message)s")


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args = merge_config(args)
        log.debug("running %s", args.command)
        return _COMMANDS[args.command](args)
    except (InputError, InvalidParams, ProfileFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConflictingFits, InsufficientSamples) as exc:
        print(f"inconclusive: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except (DomainError, RegimeError, NumericalError, PgradError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
