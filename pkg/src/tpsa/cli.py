"""Command-line driver: grid diagnostics and convergence runs.

Config files are flat ``key = value`` lines; ``#`` starts a comment. Keys:

    model         elastic | cosserat | stokes | poromech
    grid          gt1 | gt2 | gt3 | gt4 | file:<path>
    levels        refinement levels, e.g. ``8, 16, 32, 64``
    param_name    swept parameter: lambda, lambda_inv, ell, theta, kappa, eta_w
    param_values  values of the swept parameter (``inf`` allowed for lambda)
    mu, lambda, lambda_inv, ell, theta, kappa, eta_w
                  fixed material parameters (``lambda_inv = 0`` is λ = ∞)
    solution      elastic_stream | poromech_smooth | zero
    seed, amplitude
                  perturbation seed and amplitude for gt2/gt4
    bc.<f>, bc.<f>.<side>
                  Robin weight for field f in {u, r, w}, all sides or one of
                  left/right/bottom/top/front/back; ``inf`` is Neumann
    timing        true to fill the wall_ms column (output then varies per run)
    csv           output file name inside --out (default convergence.csv)

Exit codes: 0 success, 1 configuration (or admissibility) error, 2 I/O or
mesh format error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

from .errors import DegenerateGridError, InvalidArgumentError, MeshFormatError, SolverError
from .geometry import check_admissibility, check_face_orthogonality
from .verification import ExperimentConfig, make_grid, run_convergence
from .vtk import write_vtk

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SOLVER = 0, 1, 2, 3

CSV_COLUMNS = (
    "model",
    "grid",
    "n",
    "delta",
    "cells",
    "param_name",
    "param_value",
    "rel_err_total",
    "rel_err_u",
    "rel_err_r",
    "rel_err_p",
    "rel_err_w",
    "order",
    "wall_ms",
)

FLOAT_KEYS = ("mu", "lambda", "lambda_inv", "ell", "theta", "kappa", "eta_w", "amplitude")
PLAIN_KEYS = ("model", "grid", "levels", "param_name", "param_values", "solution", "seed", "timing", "csv")


class ConfigError(InvalidArgumentError):
    pass


def _float(key: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {text!r}") from None


def _list(key: str, text: str, conv) -> tuple:
    items = [t for t in text.replace(",", " ").split() if t]
    if not items:
        raise ConfigError(f"{key}: empty list")
    return tuple(conv(key, t) for t in items)


def _int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: not an integer: {text!r}") from None


def parse_config(text: str) -> tuple[ExperimentConfig, str]:
    """Parse a config file into an experiment and the CSV file name.

    Raises:
        ConfigError: Syntax errors, unknown or repeated keys, invalid values;
            messages start with the offending key.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (t.strip() for t in s.split("=", 1))
        known = key in FLOAT_KEYS or key in PLAIN_KEYS or key.startswith("bc.")
        if not known:
            raise ConfigError(f"{key}: unknown key (line {lineno})")
        if key in raw:
            raise ConfigError(f"{key}: given twice (line {lineno})")
        raw[key] = value

    kw: dict = {}
    bc: dict = {}
    for key, value in raw.items():
        if key in FLOAT_KEYS:
            kw[key] = _float(key, value)
        elif key == "levels":
            kw["levels"] = _list(key, value, _int)
        elif key == "param_values":
            kw["param_values"] = _list(key, value, _float)
        elif key == "seed":
            kw["seed"] = _int(key, value)
        elif key == "timing":
            if value.lower() not in ("true", "false", "yes", "no", "1", "0"):
                raise ConfigError(f"timing: expected true or false, got {value!r}")
            kw["timing"] = value.lower() in ("true", "yes", "1")
        elif key.startswith("bc."):
            parts = key.split(".")
            if len(parts) not in (2, 3):
                raise ConfigError(f"{key}: expected bc.<field> or bc.<field>.<side>")
            b = _float(key, value)
            sides = [parts[2]] if len(parts) == 3 else ["left", "right", "bottom", "top", "front", "back"]
            entry = bc.setdefault(parts[1], {})
            for side in sides:
                # a side-specific entry overrides the all-sides one
                if len(parts) == 3 or side not in entry:
                    entry[side] = b
        elif key != "csv":
            kw[key] = value

    if "lambda" in kw:
        if "lambda_inv" in kw:
            raise ConfigError("lambda: give either lambda or lambda_inv, not both")
        lam = kw.pop("lambda")
        if not lam > 0:
            raise ConfigError("lambda: must be positive")
        kw["lambda_inv"] = 0.0 if math.isinf(lam) else 1.0 / lam
    kw["bc"] = bc
    try:
        config = ExperimentConfig(**kw)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from None
    return config, raw.get("csv", "convergence.csv")


def _num(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def format_csv(report) -> str:
    """CSV text with the fixed column order; rows as produced by the report."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in report.rows:
        e = r.errors
        writer.writerow(
            [
                r.model,
                r.grid,
                r.n,
                _num(r.delta),
                r.cells,
                r.param_name,
                _num(r.param_value),
                _num(e.total),
                _num(e.u),
                _num(e.r),
                _num(e.p),
                _num(e.w),
                _num(r.order),
                _num(r.wall_ms),
            ]
        )
    return buf.getvalue()


def _sci(x: float) -> str:
    """Compact scientific notation: 0.0e0, 8.2e-1."""
    if not math.isfinite(x):
        return str(x)
    mant, exp = f"{x:.1e}".split("e")
    return f"{mant}e{int(exp)}"


def _grid_from_spec(tokens: list):
    source = tokens[0]
    opts = {}
    for t in tokens[1:]:
        if "=" not in t:
            raise ConfigError(f"expected key=value, got {t!r}")
        k, v = t.split("=", 1)
        if k not in ("n", "seed", "amplitude"):
            raise ConfigError(f"{k}: unknown grid option")
        opts[k] = _float(k, v) if k == "amplitude" else _int(k, v)
    if source.startswith("gt"):
        if "n" not in opts:
            raise ConfigError("n: required for generated grids")
        return make_grid(source, opts["n"], opts.get("seed", 1), opts.get("amplitude", 0.3))
    if opts:
        raise ConfigError("grid options only apply to generated grids")
    path = source[len("file:") :] if source.startswith("file:") else source
    return make_grid("file:" + path, 0)


def cmd_check_grid(args) -> int:
    try:
        grid = _grid_from_spec(args.spec)
    except (OSError, MeshFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DegenerateGridError as exc:
        print(f"admissible: no ({exc})")
        return EXIT_CONFIG
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = check_admissibility(grid)
    defect = check_face_orthogonality(grid).max_defect
    status = "yes" if report.ok else f"no ({report.message})"
    print(f"admissible: {status}, orthogonality defect: {_sci(defect)}")
    return EXIT_OK if report.ok else EXIT_CONFIG


def cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        config, csv_name = parse_config(text)
    except InvalidArgumentError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        report = run_convergence(config, keep_solutions=args.vtk)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (OSError, MeshFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InvalidArgumentError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / csv_name).write_text(format_csv(report))
        if args.vtk:
            for value, n, grid, sol in report.solutions:
                name = f"{config.model}_{config.grid.replace(':', '_').replace('/', '_')}_{config.param_name}{value:g}_n{n}.vtk"
                write_vtk(out / name, grid, sol, title=f"{config.model} {config.param_name}={value:g} n={n}")
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(report.rows)} rows to {out / csv_name}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tpsa", description="Two-point stress approximation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("check-grid", help="check grid admissibility and face orthogonality")
    p.add_argument("spec", nargs="+", help="gt1..gt4 with n=<int> [seed=<int>] [amplitude=<float>], or a mesh file")
    p.set_defaults(func=cmd_check_grid)
    p = sub.add_parser("run", help="run a convergence study from a config file")
    p.add_argument("config", help="flat key = value config file")
    p.add_argument("--vtk", action="store_true", help="write one legacy VTK file per solve")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
