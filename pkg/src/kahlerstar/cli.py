"""Command-line front end: ``kahlerstar <command> --manifold <name|path> --order N``."""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import engine, oracles
from .exactalg import FieldMatrix
from .kahler import (
    BUILTIN_NAMES,
    CurvatureTensor2,
    Geometry,
    GeometryError,
    HermitianMetric2,
    PotentialJet,
    builtin_jet,
    check_curvature_symmetries,
    geometry_from_jet,
)
from .render import ParseError, format_gaussian_rational, parse_gaussian_rational
from .starcalc import FLAT_METRIC, PhaseSpacePolynomial, required_order, star_product, voros_star

MAX_ORDER_ENV = "KAHLERSTAR_MAX_ORDER"
DEFAULT_MAX_ORDER = 12
DEFAULT_VERIFY_ORDER = 6
DEFAULT_DEMO_ORDER = 4

_CURVATURE_KEY = re.compile(r"^R\^\{([12])([12])\}_\{([12])([12])\}$")
_JET_KEY = re.compile(r"^\((\d+),(\d+)\|(\d+),(\d+)\)$")


class ManifoldSpecError(ValueError):
    """Invalid manifold description; the message starts with the offending field."""


def curvature_key(k: int, l: int, i: int, c: int) -> str:
    """JSON key for R^{k̄ l̄}_{ī c̄}, indices 0-based."""
    return f"R^{{{k + 1}{l + 1}}}_{{{i + 1}{c + 1}}}"


def jet_key(alpha, beta) -> str:
    return f"({alpha[0]},{alpha[1]}|{beta[0]},{beta[1]})"


def _canonical(value, where: str) -> str:
    try:
        return format_gaussian_rational(parse_gaussian_rational(value))
    except (ParseError, ZeroDivisionError, TypeError) as exc:
        raise ManifoldSpecError(f"{where}: malformed complex rational {value!r} ({exc})") from None


@dataclass(frozen=True)
class ManifoldSpec:
    """Serializable description of the pointwise geometry.

    Exactly one of (metric, curvature) or potential_jet is set.  Values are
    stored in canonical text form so emit/parse round-trips exactly.
    """

    name: str
    metric: tuple[tuple[str, str], tuple[str, str]] | None = None
    curvature: tuple[tuple[str, str], ...] | None = None
    potential_jet: tuple[tuple[str, str], ...] | None = None
    base_point_note: str = ""

    def to_geometry(self) -> Geometry:
        if self.potential_jet is not None:
            values = {}
            for key, val in self.potential_jet:
                m = _JET_KEY.match(key)
                values[((int(m[1]), int(m[2])), (int(m[3]), int(m[4])))] = parse_gaussian_rational(val)
            try:
                return geometry_from_jet(PotentialJet(values), self.name)
            except (GeometryError, ArithmeticError) as exc:
                raise ManifoldSpecError(f"potential_jet: {exc}") from None
        try:
            metric = HermitianMetric2([[parse_gaussian_rational(x) for x in row] for row in self.metric])
        except GeometryError as exc:
            raise ManifoldSpecError(f"metric: {exc}") from None
        comps = {}
        for key, val in self.curvature:
            m = _CURVATURE_KEY.match(key)
            comps[tuple(int(m[j]) - 1 for j in range(1, 5))] = parse_gaussian_rational(val)
        R = CurvatureTensor2(comps)
        report = check_curvature_symmetries(R)
        if not report.ok:
            raise ManifoldSpecError(f"curvature: missing symmetry, {report.violations[0]}")
        return Geometry(None, metric, R, self.name)

    def to_dict(self) -> dict:
        out: dict = {"name": self.name}
        if self.potential_jet is not None:
            out["potential_jet"] = dict(self.potential_jet)
        else:
            out["metric"] = [list(row) for row in self.metric]
            out["curvature"] = dict(self.curvature)
        if self.base_point_note:
            out["base_point_note"] = self.base_point_note
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def spec_from_dict(data) -> ManifoldSpec:
    if not isinstance(data, dict):
        raise ManifoldSpecError("<root>: expected a JSON object")
    name = data.get("name", "")
    if not isinstance(name, str):
        raise ManifoldSpecError("name: expected a string")
    note = data.get("base_point_note", "")
    if not isinstance(note, str):
        raise ManifoldSpecError("base_point_note: expected a string")
    unknown = set(data) - {"name", "metric", "curvature", "potential_jet", "base_point_note"}
    if unknown:
        raise ManifoldSpecError(f"{sorted(unknown)[0]}: unknown field")
    has_direct = "metric" in data or "curvature" in data
    has_jet = "potential_jet" in data
    if has_direct == has_jet:
        raise ManifoldSpecError("<root>: give either metric and curvature, or potential_jet (exactly one)")
    if has_jet:
        jet = data["potential_jet"]
        if not isinstance(jet, dict):
            raise ManifoldSpecError("potential_jet: expected an object")
        entries = []
        for key, val in jet.items():
            m = _JET_KEY.match(key.replace(" ", ""))
            if not m:
                raise ManifoldSpecError(f"potential_jet.{key}: key must look like (a1,a2|b1,b2)")
            idx = tuple(int(m[j]) for j in range(1, 5))
            entries.append((jet_key(idx[:2], idx[2:]), _canonical(val, f"potential_jet.{key}")))
        entries.sort(key=lambda kv: (sum(int(x) for x in re.findall(r"\d+", kv[0])), kv[0]))
        spec = ManifoldSpec(name, potential_jet=tuple(entries), base_point_note=note)
    else:
        if "metric" not in data or "curvature" not in data:
            raise ManifoldSpecError("<root>: metric and curvature must be given together")
        grid = data["metric"]
        if not (isinstance(grid, list) and len(grid) == 2 and all(isinstance(r, list) and len(r) == 2 for r in grid)):
            raise ManifoldSpecError("metric: expected a 2x2 array of strings")
        metric = tuple(
            tuple(_canonical(grid[k][l], f"metric[{k}][{l}]") for l in range(2)) for k in range(2)
        )
        curv = data["curvature"]
        if not isinstance(curv, dict):
            raise ManifoldSpecError("curvature: expected an object")
        expected = [curvature_key(*idx) for idx in sorted(_all_indices())]
        for key in curv:
            if key not in expected:
                raise ManifoldSpecError(f"curvature.{key}: unknown component name")
        missing = [k for k in expected if k not in curv]
        if missing:
            raise ManifoldSpecError(f"curvature.{missing[0]}: missing component")
        entries = tuple((k, _canonical(curv[k], f"curvature.{k}")) for k in expected)
        spec = ManifoldSpec(name, metric=metric, curvature=entries, base_point_note=note)
    spec.to_geometry()
    return spec


def _all_indices():
    return [(k, l, i, c) for k in range(2) for l in range(2) for i in range(2) for c in range(2)]


def parse_manifold_spec(source: str | Path) -> ManifoldSpec:
    """Read a JSON manifold description from a path (or a built-in alias)."""
    text = str(source)
    if text.lower() in BUILTIN_NAMES and not Path(text).exists():
        return builtin_spec(text.lower())
    path = Path(source)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifoldSpecError(f"{path}: cannot read ({exc.strerror})") from None
    return parse_manifold_text(raw)


def parse_manifold_text(raw: str) -> ManifoldSpec:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ManifoldSpecError(f"<root>: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return spec_from_dict(data)


def builtin_spec(name: str) -> ManifoldSpec:
    jet = builtin_jet(name)
    data = {
        "name": name,
        "potential_jet": {jet_key(a, b): format_gaussian_rational(v) for (a, b), v in jet.values.items()},
        "base_point_note": "origin",
    }
    return spec_from_dict(data)


def spec_from_geometry(geometry: Geometry, note: str = "") -> ManifoldSpec:
    data = {
        "name": geometry.name,
        "metric": [[format_gaussian_rational(x) for x in row] for row in geometry.metric.g],
        "curvature": {curvature_key(*idx): format_gaussian_rational(geometry.curvature[idx]) for idx in _all_indices()},
        "base_point_note": note,
    }
    return spec_from_dict(data)


# Reports ----------------------------------------------------------------------


@dataclass
class RunReport:
    command: str
    manifold: str
    orders: tuple[int, int]
    checks: list[engine.CheckResult] = field(default_factory=list)
    tables: dict[int, FieldMatrix] = field(default_factory=dict)
    products: list[tuple[str, str, str]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1


def _table_rows(M: FieldMatrix) -> list[list[str]]:
    return [[str(x) for x in row] for row in M.rows]


def emit_report(report: RunReport, fmt: str = "json") -> bytes:
    if fmt == "json":
        doc = {
            "command": report.command,
            "manifold": report.manifold,
            "orders": {"from": report.orders[0], "to": report.orders[1]},
            "passed": report.passed,
            "checks": [
                {
                    "check": c.name,
                    "order": c.order,
                    "passed": c.passed,
                    **(
                        {"entry": list(c.mismatch[0]), "lhs": c.mismatch[1], "rhs": c.mismatch[2]}
                        if not c.passed
                        else {}
                    ),
                }
                for c in report.checks
            ],
        }
        if report.tables:
            doc["tables"] = {f"T_{n}": _table_rows(M) for n, M in sorted(report.tables.items())}
        if report.products:
            doc["products"] = [{"f": f, "g": g, "f*g": p} for f, g, p in report.products]
        return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    lines = [
        f"command: {report.command}",
        f"manifold: {report.manifold}",
        f"orders: {report.orders[0]}..{report.orders[1]}",
    ]
    for n, M in sorted(report.tables.items()):
        lines.append(f"T_{n}:")
        for i, row in enumerate(_table_rows(M), start=1):
            for j, x in enumerate(row, start=1):
                lines.append(f"  ({i},{j}) {x}")
    for f, g, p in report.products:
        lines.append(f"({f}) * ({g}) = {p}")
    if report.checks:
        lines.append("checks:")
        for c in report.checks:
            if c.passed:
                lines.append(f"  PASS {c.name} [n={c.order}]")
            else:
                (i, j), lhs, rhs = c.mismatch
                lines.append(f"  FAIL {c.name} [n={c.order}] at entry ({i},{j}): {lhs} != {rhs}")
        ok = sum(c.passed for c in report.checks)
        lines.append(f"summary: {ok}/{len(report.checks)} checks passed")
    return ("\n".join(lines) + "\n").encode("utf-8")


# Commands ---------------------------------------------------------------------


def _identity_checks(coeffs: engine.StarCoefficients, order: int) -> list[engine.CheckResult]:
    out = []
    for n in range(1, order + 1):
        out += engine.verify_dual_identity(coeffs, n)
        out += engine.verify_raw_recurrence(coeffs, n)
        out.append(engine.verify_hermiticity(coeffs, n))
        out.append(engine.verify_denominators(coeffs, n))
    return out


def _oracle_checks(geometry: Geometry, coeffs: engine.StarCoefficients, order: int) -> list[engine.CheckResult]:
    out = []
    flat = geometry.metric == FLAT_METRIC and geometry.curvature.is_zero()
    for n in range(order + 1):
        if flat:
            out.append(engine.compare_matrices("flat closed form", n, coeffs[n], oracles.c2_closed_form(n)))
        if geometry.name == "cp2":
            out.append(engine.compare_matrices("projective closed form", n, coeffs[n], oracles.cp2_closed_form(n, geometry.metric)))
    if order >= 2:
        out.append(
            engine.compare_matrices("direct second-order solution", 2, coeffs[2], oracles.hs_n2_closed_form(geometry.metric, geometry.curvature))
        )
    for n, M in enumerate(engine.compute_via_factorization(geometry, order)):
        out.append(engine.compare_matrices("factorized formula", n, coeffs[n], M))
    return out


def max_order_cap() -> int:
    raw = os.environ.get(MAX_ORDER_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_MAX_ORDER
    try:
        cap = int(raw)
    except ValueError:
        raise ManifoldSpecError(f"{MAX_ORDER_ENV}: expected an integer, got {raw!r}") from None
    if cap < 0:
        raise ManifoldSpecError(f"{MAX_ORDER_ENV}: must be nonnegative")
    return cap


class OrderLimitError(ValueError):
    pass


def run_command(command: str, manifold: str, order: int | None = None, *, tables: bool = False,
                f_expr: Sequence[str] = (), g_expr: Sequence[str] = ()) -> RunReport:
    if order is None:
        order = DEFAULT_DEMO_ORDER if command == "demo" else DEFAULT_VERIFY_ORDER
    if order < 0:
        raise OrderLimitError("order must be nonnegative")
    cap = max_order_cap()
    if order > cap:
        raise OrderLimitError(f"order {order} exceeds the limit {cap} set by {MAX_ORDER_ENV}")
    spec = parse_manifold_spec(manifold)
    geometry = spec.to_geometry()
    coeffs = engine.compute_sequence(geometry, order)
    report = RunReport(command, spec.name, (0, order))
    if command == "compute":
        report.tables = dict(enumerate(coeffs.tables))
    elif command == "verify":
        report.checks = _identity_checks(coeffs, order)
    elif command == "oracle":
        report.checks = _oracle_checks(geometry, coeffs, order)
    elif command == "demo":
        report.tables = dict(enumerate(coeffs.tables))
        report.checks = _identity_checks(coeffs, order) + [
            engine.compare_matrices("factorized formula", n, coeffs[n], M)
            for n, M in enumerate(engine.compute_via_factorization(geometry, order))
        ]
    elif command == "star":
        if len(f_expr) != len(g_expr) or not f_expr:
            raise ManifoldSpecError("star: give matching --f and --g expressions")
        for ftext, gtext in zip(f_expr, g_expr):
            f = PhaseSpacePolynomial.parse(ftext)
            g = PhaseSpacePolynomial.parse(gtext)
            need = required_order(f, g)
            if need > order:
                raise OrderLimitError(f"star: ({ftext}) * ({gtext}) needs --order {need} or more")
            product = star_product(f, g, coeffs)
            report.products.append((str(f), str(g), str(product)))
            if geometry.metric == FLAT_METRIC:
                ref = voros_star(f, g)
                ok = product == ref
                report.checks.append(
                    engine.CheckResult("matches exponential product", need, ok, None if ok else ((1, 1), str(product), str(ref)))
                )
    else:
        raise ValueError(f"unknown command {command!r}")
    if tables:
        report.tables = dict(enumerate(coeffs.tables))
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kahlerstar", description="Exact star-product coefficients on Kähler surfaces.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("compute", "print the coefficient tables T_0..T_N"),
        ("verify", "check the structural identities order by order"),
        ("oracle", "compare against closed forms and the factorized formula"),
        ("star", "star-multiply polynomials on flat space"),
        ("demo", "tables and identity checks for the quadric"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--manifold", default="q2" if name == "demo" else None, required=name != "demo",
                       help=f"built-in name ({', '.join(BUILTIN_NAMES)}) or path to a JSON description")
        p.add_argument("--order", type=int, default=None, help="highest order N")
        p.add_argument("--out", type=Path, default=None, help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "text"), default="json")
        if name in ("verify", "oracle"):
            p.add_argument("--tables", action="store_true", help="include the coefficient tables")
        if name == "star":
            p.add_argument("--f", action="append", default=[], help="left factor (repeatable)")
            p.add_argument("--g", action="append", default=[], help="right factor (repeatable)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    order = args.order
    if order is None and args.command in ("compute", "star"):
        order = DEFAULT_VERIFY_ORDER
    try:
        report = run_command(
            args.command,
            args.manifold,
            order,
            tables=getattr(args, "tables", False),
            f_expr=getattr(args, "f", ()),
            g_expr=getattr(args, "g", ()),
        )
    except (ManifoldSpecError, OrderLimitError, GeometryError, ParseError, ArithmeticError) as exc:
        print(f"kahlerstar: error: {exc}", file=sys.stderr)
        return 2
    payload = emit_report(report, args.format)
    if args.out is not None:
        args.out.write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
