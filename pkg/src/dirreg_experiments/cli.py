"""``dirreg``: decide, reconstruct and stress direction sets from the command line.

Exit codes: 0 determining / admissible / counterexample confirmed, 1 usage error,
2 input error, 3 not determining / not admissible / sweep not confirmed,
4 no counterexample exists.
"""
from __future__ import annotations

import argparse
import logging
import logging.config
import math
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import yaml
from omegaconf import DictConfig, OmegaConf

from dirreg_algorithms import __version__
from dirreg_algorithms.determine import (
    Determining,
    DeterminingVerdict,
    NotDetermining,
    greedy_select,
    is_determining,
    select_well_conditioned,
)
from dirreg_algorithms.errors import DomainError, PolynomialSyntaxError
from dirreg_algorithms.momentmatrix import MODES, DirectionSet, Mode, Scalar, to_scalar
from dirreg_algorithms.polynomial import parse_polynomial_map
from dirreg_algorithms.rank1 import (
    NotDetermining1,
    WeightSequence,
    epsilon_constant,
    is_rank1_determining,
    minimal_determining_subset,
    parse_weight_values,
    validate_weight_sequence,
)
from dirreg_algorithms.reconstruct import (
    DerivativeTensor,
    partials_from_directionals,
    reconstruct_partials,
)
from dirreg_algorithms.sharpness import (
    HomogeneousMap,
    make_profile,
    verify_blowup,
    verify_directional_tameness,
    verify_ridge_counterexample,
)

from .documents import (
    InputError,
    LambdaDocument,
    ReportDocument,
    decode_homogeneous_map,
    encode_annihilator,
    form_key,
    format_scalar,
    format_vector,
    input_digest,
    load_data,
    load_lambda,
    load_phi,
    load_report,
    load_uv,
    load_weight_values,
    mode_override,
    parse_scalar,
    write_atomic,
)

logger = logging.getLogger("dirreg_experiments.cli")

CONFIG_DIR = Path(__file__).parent / "configs"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NEGATIVE = 3
EXIT_NO_COUNTEREXAMPLE = 4
EXIT_NUMERIC = 5

NO_COUNTEREXAMPLE = "no counterexample exists for this Λ at this k"


class UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def configure_logging(verbosity: int) -> None:
    with (CONFIG_DIR / "logging" / "cli.yaml").open(encoding="utf-8") as f:
        logging_config = yaml.safe_load(f)
    level = "DEBUG" if verbosity > 0 else "WARNING" if verbosity < 0 else "INFO"
    for name in logging_config.get("loggers", {}):
        logging_config["loggers"][name]["level"] = level
    logging.config.dictConfig(logging_config)


def load_config(args: argparse.Namespace) -> DictConfig:
    """cli.yaml < DIRREG_MODE < flags."""
    config = OmegaConf.load(CONFIG_DIR / "cli.yaml")
    env_mode = mode_override()
    if env_mode is not None:
        config.mode = env_mode
    if args.mode is not None:
        config.mode = args.mode
    return config  # type: ignore[return-value]


def _number(value: Any) -> Any:
    """Scalars as JSON values; non-finite floats become strings."""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, (bool, int, str)) or value is None:
        return value
    return format_scalar(value)


def _records(frame) -> list[dict[str, Any]]:
    return [
        {key: _number(value) for key, value in row.items()}
        for row in frame.to_dict(orient="records")
    ]


def _arguments(args: argparse.Namespace) -> dict[str, Any]:
    hidden = {"handler", "verbose", "quiet"}
    return {key: value for key, value in sorted(vars(args).items()) if key not in hidden}


def _emit(report: ReportDocument, out: str | None) -> None:
    text = report.dumps()
    if out:
        write_atomic(out, text)
        logger.info(f"Report written to {out}")
    else:
        sys.stdout.write(text)


def _parse_csv(text: str, mode: Mode, field: str) -> list[Scalar]:
    try:
        return [to_scalar(part.strip(), mode) for part in text.split(",")]
    except DomainError as e:
        raise InputError(str(e), field=field) from e


def _select(lam: DirectionSet, select: str) -> DeterminingVerdict:
    if select == "first":
        return greedy_select(lam)
    if select == "maxvol":
        return select_well_conditioned(lam)
    raise UsageError(f"unknown selection {select!r}")


def _verdict_result(lam: DirectionSet, verdict: DeterminingVerdict) -> dict[str, Any]:
    if isinstance(verdict, Determining):
        det = verdict.determinant
        determinant: dict[str, Any] = {"sign": det.sign, "logabs": _number(det.logabs)}
        if lam.mode == "rational":
            determinant["value"] = format_scalar(det.value)
        return {
            "verdict": "determining",
            "dimension": lam.dimension,
            "selection": [lam.original_id(i) for i in verdict.selection],
            "stability_B": _number(verdict.stability_B),
            "determinant": determinant,
            "swaps": verdict.swaps,
        }
    return {
        "verdict": "not_determining",
        "dimension": lam.dimension,
        "size": len(lam),
        "certificate": encode_annihilator(verdict.certificate),
        "residual": _number(verdict.residual),
    }


def cmd_analyze(args: argparse.Namespace, config: DictConfig) -> int:
    document = load_lambda(args.lambda_path, config.mode)
    lam = document.to_direction_set()
    tested = is_determining(lam)
    verdict = _select(lam, args.select or config.select)
    if verdict.determining != tested.determining:
        raise ArithmeticError("rank test and selection disagree on the verdict")
    if isinstance(verdict, NotDetermining):
        # the rank test's kernel vector is the canonical certificate
        verdict = tested
    report = ReportDocument(
        command="analyze",
        arguments=_arguments(args),
        result=_verdict_result(lam, verdict),
        input_digest=input_digest(args.lambda_path),
        extra={"input": document.to_dict()},
    )
    _emit(report, args.out)
    return EXIT_OK if verdict.determining else EXIT_NEGATIVE


def _tensor_result(tensor: DerivativeTensor) -> dict[str, Any]:
    error_bound = tensor.error_bound if tensor.is_exact else _number(tensor.error_bound)
    return {
        "k": tensor.k,
        "point": [_number(v) for v in tensor.point],
        "partials": {
            form_key(alpha, j): _number(value)
            for (alpha, j), value in sorted(tensor.values.items())
        },
        "error_bound": error_bound,
    }


def cmd_reconstruct(args: argparse.Namespace, config: DictConfig) -> int:
    document = load_lambda(args.lambda_path, config.mode)
    lam = document.to_direction_set()
    verdict = _select(lam, args.select or config.select)
    result = _verdict_result(lam, verdict)
    h_text = args.h if args.h is not None else config.reconstruct.h
    h = None if h_text is None else _parse_csv(str(h_text), lam.mode, "--h")[0]
    if args.point is not None:
        point = _parse_csv(args.point, lam.mode, "--point")
        if len(point) != lam.n:
            raise InputError(
                f"expected {lam.n} coordinates, got {len(point)}", field="--point"
            )
    elif args.poly is not None:
        raise UsageError("--poly needs --point")
    else:
        point = [to_scalar(0, lam.mode)] * lam.n

    if isinstance(verdict, Determining):
        if args.poly is not None:
            poly = parse_polynomial_map(args.poly, lam.n)
            if poly.m != lam.m:
                raise InputError(
                    f"map has {poly.m} components, expected {lam.m}", field="--poly"
                )
            exact = h is None and lam.mode == "rational"
            oracle = poly.as_oracle(exact=exact)
            tensor = reconstruct_partials(
                oracle, point, verdict, h=h, n_jobs=config.n_jobs
            )
        else:
            values, tolerance = load_data(args.data, lam.mode)
            ids = [lam.original_id(i) for i in verdict.selection]
            missing = [i for i in ids if i not in values]
            if missing:
                raise InputError(
                    f"missing directional values for point ids {missing}",
                    args.data,
                    "values",
                )
            tensor = partials_from_directionals(
                verdict, [values[i] for i in ids], point, [tolerance] * len(ids)
            )
        result.update(_tensor_result(tensor))

    report = ReportDocument(
        command="reconstruct",
        arguments=_arguments(args),
        result=result,
        input_digest=input_digest(args.lambda_path, args.data, text=args.poly),
        extra={"input": document.to_dict()},
    )
    _emit(report, args.out)
    return EXIT_OK if verdict.determining else EXIT_NEGATIVE


def _radii(text: str | None, default: Sequence[float], field: str) -> list[float]:
    if text is None:
        return [float(r) for r in default]
    return [float(r) for r in _parse_csv(text, "float", field)]


def _order_k_sweeps(
    phi: HomogeneousMap,
    lam: DirectionSet | None,
    args: argparse.Namespace,
    config: DictConfig,
) -> dict[str, Any]:
    settings = config.counterexample
    blowup = verify_blowup(
        phi, _radii(args.radii, settings.blowup_radii, "--radii"), settings.relative_step
    )
    result: dict[str, Any] = {
        "kind": "order_k",
        "phi": encode_annihilator(phi.to_annihilator()),
        "blowup": {
            "alpha": str(blowup.alpha),
            "j": blowup.j,
            "increasing": blowup.increasing,
            "envelope_ok": blowup.envelope_ok,
            "passed": blowup.passed,
            "table": _records(blowup.to_frame()),
        },
    }
    passed = blowup.passed
    if lam is None:
        logger.warning("No direction set given; directional tameness not checked")
    else:
        if lam.k != phi.k:
            raise InputError(f"direction set has order {lam.k}, phi has degree {phi.k}")
        tameness = verify_directional_tameness(
            phi,
            lam,
            _radii(args.tameness_radii, settings.tameness_radii, "--tameness-radii"),
            settings.relative_step,
        )
        result["tameness"] = {
            "passed": tameness.passed,
            "table": _records(tameness.to_frame()),
        }
        passed = passed and tameness.passed
    result["passed"] = passed
    return result


def _rank1_sweeps(
    u: Sequence[Scalar],
    v: Sequence[Scalar],
    profile_spec: dict[str, Any],
    lam: DirectionSet | None,
) -> dict[str, Any]:
    if lam is None:
        raise UsageError("a rank-one witness needs the direction set (--lambda)")
    params = {key: value for key, value in profile_spec.items() if key != "name"}
    profile = make_profile(profile_spec["name"], **params)
    report = verify_ridge_counterexample(u, v, lam, profile)
    return {
        "kind": "rank_one",
        "u": format_vector(u),
        "v": format_vector(v),
        "profile": dict(profile_spec),
        "directional_vanishing": report.directional_vanishing,
        "spread_ratio": _number(report.sweep.spread_ratio),
        "one_sided_mismatch": _number(report.sweep.one_sided_mismatch),
        "non_convergent": report.sweep.non_convergent,
        "passed": report.passed,
        "pairs": _records(report.to_frame()),
        "sweep": _records(report.sweep.to_frame()),
    }


def _witness_vector(raw: Any, field: str, path: str) -> list[Scalar]:
    if not isinstance(raw, list) or not raw:
        raise InputError("expected a nonempty list", path, field)
    return [
        parse_scalar(
            c, "float" if isinstance(c, float) else "rational", f"{field}[{i}]", path
        )
        for i, c in enumerate(raw)
    ]


def cmd_counterexample(args: argparse.Namespace, config: DictConfig) -> int:
    lam = None
    if args.lambda_path is not None:
        lam = load_lambda(args.lambda_path, config.mode).to_direction_set()
    profile_spec: dict[str, Any] = {"name": args.profile or config.counterexample.profile}
    if args.profile == "custom" and args.uv is None:
        raise UsageError("--profile custom reads its knots from a --uv witness file")

    if args.from_report is not None:
        source = load_report(args.from_report)
        verdict = source.result.get("verdict")
        if verdict in ("determining", "determining1"):
            print(f"dirreg counterexample: {NO_COUNTEREXAMPLE}", file=sys.stderr)
            return EXIT_NO_COUNTEREXAMPLE
        if lam is None and "input" in source.extra:
            embedded = LambdaDocument.from_dict(source.extra["input"], args.from_report)
            lam = embedded.to_direction_set()
        if verdict == "not_determining":
            phi = decode_homogeneous_map(
                source.result.get("certificate"), args.from_report
            )
            result = _order_k_sweeps(phi, lam, args, config)
        elif verdict == "not_determining1":
            witness = source.result.get("witness") or {}
            u = _witness_vector(witness.get("u"), "witness.u", args.from_report)
            v = _witness_vector(witness.get("v"), "witness.v", args.from_report)
            result = _rank1_sweeps(u, v, profile_spec, lam)
        else:
            raise InputError(
                f"report verdict {verdict!r} carries no certificate",
                args.from_report,
                "result.verdict",
            )
    elif args.phi is not None:
        result = _order_k_sweeps(load_phi(args.phi), lam, args, config)
    else:
        witness_document = load_uv(args.uv)
        if args.profile in (None, witness_document.profile.get("name")):
            profile_spec = dict(witness_document.profile)
        elif args.profile == "custom":
            raise UsageError("--profile custom needs a custom profile with knots in --uv")
        result = _rank1_sweeps(witness_document.u, witness_document.v, profile_spec, lam)

    report = ReportDocument(
        command="counterexample",
        arguments=_arguments(args),
        result=result,
        input_digest=input_digest(args.from_report, args.phi, args.uv, args.lambda_path),
    )
    _emit(report, args.out)
    return EXIT_OK if result["passed"] else EXIT_NEGATIVE


def cmd_rank1(args: argparse.Namespace, config: DictConfig) -> int:
    document = load_lambda(args.lambda_path, config.mode)
    lam = document.to_direction_set()
    verdict = is_rank1_determining(lam)
    result: dict[str, Any]
    if isinstance(verdict, NotDetermining1):
        result = {
            "verdict": "not_determining1",
            "witness": {"u": format_vector(verdict.u), "v": format_vector(verdict.v)},
        }
    else:
        subset = minimal_determining_subset(lam)
        result = {
            "verdict": "determining1",
            "minimal_subset": [subset.original_id(i) for i in range(len(subset))],
        }
        if args.epsilon_l is not None:
            estimate = epsilon_constant(
                lam, args.epsilon_l, grid=args.grid or config.rank1.grid
            )
            result["epsilon"] = {
                "l": args.epsilon_l,
                "value": _number(estimate.epsilon),
                "gap": _number(estimate.gap),
                "grid_minimum": _number(estimate.grid_minimum),
                "u": [_number(c) for c in estimate.u],
                "v": [_number(c) for c in estimate.v],
                "evaluations": estimate.evaluations,
            }
    report = ReportDocument(
        command="rank1",
        arguments=_arguments(args),
        result=result,
        input_digest=input_digest(args.lambda_path),
        extra={"input": document.to_dict()},
    )
    _emit(report, args.out)
    return EXIT_OK if verdict.determining else EXIT_NEGATIVE


def cmd_weights(args: argparse.Namespace, config: DictConfig) -> int:
    K = args.K if args.K is not None else config.weights.K
    if args.values is not None:
        values = load_weight_values(args.values)
        if args.K is not None:
            values = values[: K + 1]
        try:
            sequence = parse_weight_values(values)
        except (ValueError, ZeroDivisionError) as e:
            raise InputError(str(e), args.values, "values") from e
    elif args.family == "gevrey":
        nu = args.nu if args.nu is not None else config.weights.nu
        sequence = WeightSequence.gevrey(nu, K)
    else:
        sequence = WeightSequence.factorial(K)
    weights = validate_weight_sequence(sequence)
    result = {
        "sequence": weights.sequence,
        "K": weights.K,
        "admissible": weights.admissible,
        "C": _number(weights.C),
        "conditions": {
            name: {"passed": c.passed, "first_failure": c.first_failure}
            for name, c in weights.conditions.items()
        },
        "notes": list(weights.notes),
    }
    report = ReportDocument(
        command="weights",
        arguments=_arguments(args),
        result=result,
        input_digest=input_digest(args.values, text=args.family),
    )
    _emit(report, args.out)
    return EXIT_OK if weights.admissible else EXIT_NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="dirreg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("-q", "--quiet", action="count", default=0)
    parser.add_argument(
        "--mode", choices=MODES, default=None, help="force the scalar mode"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler: Callable, help: str) -> argparse.ArgumentParser:
        command = commands.add_parser(name, help=help)
        command.add_argument(
            "--out", default=None, help="report file (stdout when absent)"
        )
        command.set_defaults(handler=handler)
        return command

    analyze = add("analyze", cmd_analyze, "decide whether a direction set is determining")
    analyze.add_argument("--lambda", dest="lambda_path", required=True)
    analyze.add_argument("--select", choices=["first", "maxvol"], default=None)

    reconstruct = add("reconstruct", cmd_reconstruct, "recover all k-th order partials")
    reconstruct.add_argument("--lambda", dest="lambda_path", required=True)
    source = reconstruct.add_mutually_exclusive_group(required=True)
    source.add_argument(
        "--data", default=None, help="directional values keyed by point id"
    )
    source.add_argument("--poly", default=None, help="polynomial map, e.g. 'x1*x2; x1^2'")
    reconstruct.add_argument("--point", default=None, help="comma separated coordinates")
    reconstruct.add_argument("--h", default=None, help="finite-difference step")
    reconstruct.add_argument("--select", choices=["first", "maxvol"], default=None)

    counterexample = add("counterexample", cmd_counterexample, "run the sharpness sweeps")
    certificate = counterexample.add_mutually_exclusive_group(required=True)
    certificate.add_argument("--from-report", dest="from_report", default=None)
    certificate.add_argument("--phi", default=None)
    certificate.add_argument("--uv", default=None)
    counterexample.add_argument("--lambda", dest="lambda_path", default=None)
    counterexample.add_argument("--radii", default=None, help="blow-up radii, decreasing")
    counterexample.add_argument("--tameness-radii", dest="tameness_radii", default=None)
    counterexample.add_argument(
        "--profile", choices=["weierstrass", "abs", "custom"], default=None
    )

    rank1 = add("rank1", cmd_rank1, "decide rank-one determination and estimate epsilon")
    rank1.add_argument("--lambda", dest="lambda_path", required=True)
    rank1.add_argument("--epsilon-l", dest="epsilon_l", type=int, default=None)
    rank1.add_argument("--grid", type=int, default=None)

    weights = add("weights", cmd_weights, "check a weight sequence M_k")
    family = weights.add_mutually_exclusive_group(required=True)
    family.add_argument("--family", choices=["gevrey", "factorial"], default=None)
    family.add_argument("--values", default=None, help="JSON file with explicit M_0..M_K")
    weights.add_argument("--nu", type=float, default=None)
    weights.add_argument("--K", type=int, default=None)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose - args.quiet)
    try:
        config = load_config(args)
        return args.handler(args, config)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"dirreg {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, PolynomialSyntaxError, DomainError) as e:
        logger.debug("Input rejected", exc_info=True)
        print(f"dirreg {args.command}: error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ArithmeticError as e:
        logger.error("Numeric failure", exc_info=True)
        print(f"dirreg {args.command}: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
