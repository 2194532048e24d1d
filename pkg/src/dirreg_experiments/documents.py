"""JSON documents read and written by the ``dirreg`` command line.

Every document carries ``"schema": 1``. Rationals travel as ``"p/q"`` strings since JSON
numbers are binary floats; reports are written with sorted keys so identical rational inputs
give byte-identical files.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence

from dirreg_algorithms import __version__
from dirreg_algorithms.determine import AnnihilatorForm
from dirreg_algorithms.errors import DomainError
from dirreg_algorithms.momentmatrix import MODES, DirectionSet, Mode, Scalar, infer_mode
from dirreg_algorithms.multiindex import MultiIndex
from dirreg_algorithms.sharpness import HomogeneousMap

SCHEMA_VERSION = 1
FRACTION_PATTERN = re.compile(r"^-?\d+/\d+$")
MODE_ENV = "DIRREG_MODE"


class InputError(ValueError):
    """A malformed input document; ``field`` is a dotted/indexed path like ``points[3].xi[1]``."""

    def __init__(
        self,
        message: str,
        path: str | os.PathLike | None = None,
        field: str | None = None,
        line: int | None = None,
    ):
        self.message = message
        self.path = None if path is None else str(path)
        self.field = field
        self.line = line
        super().__init__(str(self))

    def __str__(self) -> str:
        location = self.path or "<input>"
        if self.line is not None:
            location += f":{self.line}"
        if self.field:
            location += f": {self.field}"
        return f"{location}: {self.message}"


def mode_override() -> Mode | None:
    value = os.environ.get(MODE_ENV)
    if not value:
        return None
    if value not in MODES:
        raise InputError(f"{MODE_ENV} must be one of {MODES}, got {value!r}")
    return value  # type: ignore[return-value]


def parse_scalar(value: Any, mode: Mode, field: str, path: Any = None) -> Scalar:
    """A JSON number or ``"p/q"`` string as a Fraction (rational) or float."""
    if isinstance(value, bool):
        raise InputError(f"expected a number, got {value!r}", path, field)
    if isinstance(value, str):
        if not FRACTION_PATTERN.match(value):
            raise InputError(
                f"fraction strings must look like 'p/q', got {value!r}", path, field
            )
        numerator, denominator = value.split("/")
        if int(denominator) == 0:
            raise InputError("zero denominator", path, field)
        exact = Fraction(int(numerator), int(denominator))
        return exact if mode == "rational" else float(exact)
    if isinstance(value, int):
        return Fraction(value) if mode == "rational" else float(value)
    if isinstance(value, float):
        if mode == "rational":
            raise InputError(
                "mode 'rational' requires integers or fraction strings", path, field
            )
        return value
    raise InputError(f"expected a number, got {type(value).__name__}", path, field)


def format_scalar(value: Any) -> Any:
    """Fractions (and ints) as ``"p/q"``; floats stay JSON numbers."""
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, int):
        return f"{value}/1"
    return float(value)


def format_vector(values: Sequence[Any]) -> list[Any]:
    return [format_scalar(v) for v in values]


def _raw_mode(raw: Any) -> Mode:
    # floats in the file force float mode unless the document says otherwise
    return infer_mode([raw] if not isinstance(raw, list) else raw)


def _require(data: Mapping[str, Any], key: str, path: Any, kind: type) -> Any:
    if key not in data:
        raise InputError(f"missing field {key!r}", path, key)
    value = data[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise InputError(f"expected an integer, got {value!r}", path, key)
    if kind is not int and not isinstance(value, kind):
        raise InputError(
            f"expected {kind.__name__}, got {type(value).__name__}", path, key
        )
    return value


def _check_schema(data: Any, path: Any) -> None:
    if not isinstance(data, dict):
        raise InputError("top level must be a JSON object", path)
    schema = data.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise InputError(f"unsupported schema {schema!r}", path, "schema")


def read_json(path: str | os.PathLike) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read file: {e.strerror}", path) from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"invalid JSON: {e.msg}", path, line=e.lineno) from e


@dataclass(frozen=True)
class LambdaDocument:
    n: int
    m: int
    k: int
    mode: Mode
    points: tuple[tuple[tuple[Scalar, ...], tuple[Scalar, ...]], ...]

    @classmethod
    def from_dict(
        cls, data: Any, path: Any = None, mode: Mode | None = None
    ) -> LambdaDocument:
        _check_schema(data, path)
        n = _require(data, "n", path, int)
        m = _require(data, "m", path, int)
        k = _require(data, "k", path, int)
        if n < 1 or m < 1 or k < 1:
            raise InputError(f"n, m, k must be positive, got {n}, {m}, {k}", path)
        points = _require(data, "points", path, list)
        declared = data.get("mode")
        if declared is not None and declared not in MODES:
            raise InputError(f"mode must be one of {MODES}", path, "mode")
        raw = [
            v
            for p in points
            if isinstance(p, dict)
            for key in ("xi", "eta")
            if isinstance(p.get(key), list)
            for v in p[key]
        ]
        chosen: Mode = mode or declared or _raw_mode(raw)
        if chosen == "rational" and mode == "rational":
            # forced rational mode reads binary floats exactly
            raw_mode: Mode = "float" if _raw_mode(raw) == "float" else "rational"
        else:
            raw_mode = chosen
        parsed = []
        for i, point in enumerate(points):
            if not isinstance(point, dict):
                raise InputError("each point must be an object", path, f"points[{i}]")
            xi = _vector(point, "xi", n, raw_mode, path, i)
            eta = _vector(point, "eta", m, raw_mode, path, i)
            if chosen == "rational" and raw_mode == "float":
                xi = tuple(Fraction(v) for v in xi)
                eta = tuple(Fraction(v) for v in eta)
            parsed.append((xi, eta))
        return cls(n, m, k, chosen, tuple(parsed))

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "n": self.n,
            "m": self.m,
            "k": self.k,
            "mode": self.mode,
            "points": [
                {"xi": format_vector(xi), "eta": format_vector(eta)}
                for xi, eta in self.points
            ],
        }

    def to_direction_set(self) -> DirectionSet:
        xis = [xi for xi, _ in self.points]
        etas = [eta for _, eta in self.points]
        try:
            return DirectionSet.from_vectors(xis, etas, self.k, self.mode, self.n, self.m)
        except DomainError as e:
            raise InputError(str(e)) from e


def _vector(
    point: Mapping[str, Any], key: str, size: int, mode: Mode, path: Any, index: int
) -> tuple[Scalar, ...]:
    where = f"points[{index}].{key}"
    values = point.get(key)
    if not isinstance(values, list):
        raise InputError("expected a list", path, where)
    if len(values) != size:
        raise InputError(f"expected {size} entries, got {len(values)}", path, where)
    return tuple(
        parse_scalar(v, mode, f"{where}[{i}]", path) for i, v in enumerate(values)
    )


def load_lambda(path: str | os.PathLike, mode: Mode | None = None) -> LambdaDocument:
    return LambdaDocument.from_dict(read_json(path), path, mode or mode_override())


@dataclass(frozen=True)
class ReportDocument:
    command: str
    arguments: Mapping[str, Any]
    result: Mapping[str, Any]
    input_digest: str
    version: str = __version__
    schema: int = SCHEMA_VERSION
    extra: Mapping[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": self.schema,
            "command": self.command,
            "arguments": dict(self.arguments),
            "result": dict(self.result),
            "input_digest": self.input_digest,
            "version": self.version,
            **dict(self.extra),
        }

    @classmethod
    def from_dict(cls, data: Any, path: Any = None) -> ReportDocument:
        _check_schema(data, path)
        known = {"schema", "command", "arguments", "result", "input_digest", "version"}
        return cls(
            command=_require(data, "command", path, str),
            arguments=_require(data, "arguments", path, dict),
            result=_require(data, "result", path, dict),
            input_digest=_require(data, "input_digest", path, str),
            version=data.get("version", __version__),
            schema=data.get("schema", SCHEMA_VERSION),
            extra={k: v for k, v in data.items() if k not in known},
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def load_report(path: str | os.PathLike) -> ReportDocument:
    return ReportDocument.from_dict(read_json(path), path)


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write through a temporary file in the target directory and rename it into place."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(
        dir=target.parent, prefix=f".{target.name}.", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def input_digest(*paths: str | os.PathLike | None, text: str | None = None) -> str:
    """sha256 over the bytes of every input file (and inline text such as ``--poly``)."""
    digest = hashlib.sha256()
    for path in paths:
        if path is None:
            continue
        try:
            digest.update(Path(path).read_bytes())
        except OSError as e:
            raise InputError(f"cannot read file: {e.strerror}", path) from e
    if text is not None:
        digest.update(text.encode("utf-8"))
    return f"sha256:{digest.hexdigest()}"


def form_key(alpha: MultiIndex, j: int) -> str:
    """``"0,1|1"`` for alpha = (0, 1), j = 1."""
    return f"{alpha}|{j}"


def parse_form_key(key: str, path: Any = None) -> tuple[MultiIndex, int]:
    try:
        alpha_text, j_text = key.split("|")
        return MultiIndex.parse(alpha_text), int(j_text)
    except (ValueError, DomainError) as e:
        raise InputError(
            f"malformed coefficient key {key!r}", path, "coefficients"
        ) from e


def encode_annihilator(phi: AnnihilatorForm) -> dict[str, Any]:
    return {
        "n": phi.n,
        "m": phi.m,
        "k": phi.k,
        "mode": phi.mode,
        "coefficients": {
            form_key(alpha, j): format_scalar(c)
            for (alpha, j), c in sorted(phi.coeffs.items())
        },
    }


def decode_homogeneous_map(data: Any, path: Any = None) -> HomogeneousMap:
    """phi.json, or the ``certificate`` of an analyze report."""
    if not isinstance(data, dict):
        raise InputError("expected an object", path)
    n = _require(data, "n", path, int)
    m = _require(data, "m", path, int)
    k = _require(data, "k", path, int)
    coefficients = _require(data, "coefficients", path, dict)
    mode: Mode = data.get("mode") or _raw_mode(list(coefficients.values()))
    components: list[dict[MultiIndex, Scalar]] = [{} for _ in range(m)]
    for key, value in coefficients.items():
        alpha, j = parse_form_key(key, path)
        if not 1 <= j <= m:
            raise InputError(f"component {j} outside 1..{m}", path, f"coefficients.{key}")
        components[j - 1][alpha] = parse_scalar(value, mode, f"coefficients.{key}", path)
    try:
        return HomogeneousMap(n, k, tuple(components))
    except DomainError as e:
        raise InputError(str(e), path, "coefficients") from e


def load_phi(path: str | os.PathLike) -> HomogeneousMap:
    data = read_json(path)
    _check_schema(data, path)
    return decode_homogeneous_map(data, path)


@dataclass(frozen=True)
class WitnessDocument:
    u: tuple[Scalar, ...]
    v: tuple[Scalar, ...]
    profile: Mapping[str, Any]


def load_uv(path: str | os.PathLike) -> WitnessDocument:
    data = read_json(path)
    _check_schema(data, path)
    u_raw = _require(data, "u", path, list)
    v_raw = _require(data, "v", path, list)
    mode = _raw_mode(u_raw + v_raw)
    u = tuple(parse_scalar(c, mode, f"u[{i}]", path) for i, c in enumerate(u_raw))
    v = tuple(parse_scalar(c, mode, f"v[{i}]", path) for i, c in enumerate(v_raw))
    profile = data.get("profile", {"name": "weierstrass"})
    if not isinstance(profile, dict) or "name" not in profile:
        raise InputError("profile must be an object with a name", path, "profile")
    return WitnessDocument(u, v, profile)


def load_data(path: str | os.PathLike, mode: Mode) -> tuple[dict[int, Scalar], Scalar]:
    """data.json: ``{"values": {"<point id>": value, ...}, "tolerance": value}``."""
    data = read_json(path)
    _check_schema(data, path)
    values = _require(data, "values", path, dict)
    raw_mode: Mode = "float" if mode == "float" else _raw_mode(list(values.values()))
    parsed = {}
    for key, value in values.items():
        try:
            point_id = int(key)
        except ValueError as e:
            raise InputError(
                f"point ids must be integers, got {key!r}", path, "values"
            ) from e
        parsed[point_id] = parse_scalar(value, raw_mode, f"values.{key}", path)
    tolerance = parse_scalar(data.get("tolerance", 0), "float", "tolerance", path)
    if tolerance < 0:
        raise InputError("tolerance must be nonnegative", path, "tolerance")
    return parsed, tolerance


def load_weight_values(path: str | os.PathLike) -> list[Any]:
    data = read_json(path)
    _check_schema(data, path)
    values = _require(data, "values", path, list)
    for i, value in enumerate(values):
        if isinstance(value, str):
            parse_scalar(value, "rational", f"values[{i}]", path)
    return values
