"""Command-line interface: run presets, emit stage tables and field dumps.

Configuration is a flat ``key = value`` text file mirroring the solver
parameters; compiled-in preset defaults reproduce the reference runs, so
``collobasis solve --problem NAME`` alone is a complete experiment.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .basis import BasisSet
from .metrics import evaluation_grid
from .problems import builtin, preset_names
from .solver import SolveResult, SolverConfig, solve, solve_nonlinear_ac

_EXIT_OK = 0
_EXIT_USAGE = 1
_EXIT_NUMERICAL = 2

_CONFIG_FIELDS = [f.name for f in dataclasses.fields(SolverConfig)]

# short names matching the usual parameter notation
_KEY_ALIASES = {
    "S": "stages",
    "lambda": "penalty",
    "N_opt": "n_opt",
    "alpha": "learning_rate",
    "lr": "learning_rate",
    "N1": "width_stage1",
    "M1": "m_interior_uniform",
    "M2": "m_interior_adaptive",
    "Mb": "m_boundary",
}


class UsageError(Exception):
    pass


def _parse_scalar(text: str):
    s = text.strip()
    low = s.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        pass
    return s


def _parse_config_text(text: str) -> dict:
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "widths":
            out[key] = tuple(int(v) for v in value.split(",")) if value else None
        else:
            out[key] = _parse_scalar(value)
    return out


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


def _resolve(args) -> tuple[str, SolverConfig, bool]:
    file_opts: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        file_opts = _parse_config_text(path.read_text())

    problem_name = args.problem or file_opts.pop("problem", None)
    if not problem_name:
        raise UsageError("no problem selected (use --problem or a config file)")
    if problem_name not in preset_names():
        raise UsageError(
            f"unknown problem {problem_name!r}; available: {', '.join(preset_names())}"
        )

    emit_fields = bool(file_opts.pop("emit_fields", False)) or args.emit_fields
    overrides = {}
    for key, value in file_opts.items():
        key = _KEY_ALIASES.get(key, key)
        if key not in _CONFIG_FIELDS:
            raise UsageError(f"unknown config key {key!r}")
        overrides[key] = value
    for pair in args.set or []:
        if "=" not in pair:
            raise UsageError(f"--set expects key=value, got {pair!r}")
        key, value = (part.strip() for part in pair.split("=", 1))
        if key == "problem":
            raise UsageError("select the problem with --problem, not --set")
        if key == "emit_fields":
            emit_fields = bool(_parse_scalar(value))
            continue
        key = _KEY_ALIASES.get(key, key)
        if key not in _CONFIG_FIELDS:
            raise UsageError(f"unknown config key {key!r}")
        overrides[key] = (
            tuple(int(v) for v in value.split(",")) if key == "widths" else _parse_scalar(value)
        )
    if args.seed is not None:
        overrides["seed"] = args.seed

    config = builtin(problem_name).config(**overrides)
    return problem_name, config, emit_fields


def _fmt_cell(v: float | None) -> str:
    return "" if v is None else f"{v:.12e}"


def emit_outputs(result: SolveResult, problem, out_dir: Path, emit_fields: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)

    lines = ["stage,width,estimator,residual_interior,residual_boundary,E_Linf,E_L2,wall_ms"]
    for rep in result.reports:
        lines.append(
            ",".join(
                [
                    str(rep.stage),
                    str(rep.width),
                    _fmt_cell(rep.estimator),
                    _fmt_cell(rep.residual_interior),
                    _fmt_cell(rep.residual_boundary),
                    _fmt_cell(rep.e_linf),
                    _fmt_cell(rep.e_l2),
                    _fmt_cell(rep.wall_ms),
                ]
            )
        )
    (out_dir / "stages.csv").write_text("\n".join(lines) + "\n")

    cfg_lines = [f"problem = {problem.name}"]
    for f in dataclasses.fields(SolverConfig):
        value = getattr(result.config, f.name)
        if value is None:
            continue
        cfg_lines.append(f"{f.name} = {_format_value(value)}")
    cfg_lines.append(f"emit_fields = {_format_value(emit_fields)}")
    (out_dir / "config_resolved.txt").write_text("\n".join(cfg_lines) + "\n")

    if not emit_fields:
        return

    grid = evaluation_grid(problem.domain, problem.error_grid)
    members = result.basis.members
    values = np.column_stack([m.value(grid) for m in members]) if members else None
    exact_vals = (
        np.asarray(problem.exact(grid), dtype=np.float64) if problem.exact is not None else None
    )
    n_initial = 1 if problem.initial_guess is not None else 0
    prev = (
        values[:, 0] * 1.0
        if n_initial
        else np.zeros(grid.shape[0])
    )
    header = ("x,y" if grid.shape[1] == 2 else "x") + ",u_s,abs_err,posteriori_err"
    for rep in result.reports:
        coef = np.asarray(rep.coefficients)
        u_s = values[:, : coef.size] @ coef
        post = np.abs(u_s - prev)
        rows = [header]
        for i in range(grid.shape[0]):
            coords = ",".join(f"{c:.12e}" for c in grid[i])
            err_cell = "" if exact_vals is None else f"{abs(exact_vals[i] - u_s[i]):.12e}"
            rows.append(f"{coords},{u_s[i]:.12e},{err_cell},{post[i]:.12e}")
        (out_dir / f"field_stage_{rep.stage}.csv").write_text("\n".join(rows) + "\n")
        prev = u_s


def _cmd_list() -> int:
    for name in preset_names():
        cfg = builtin(name).default_config
        parts = [
            f"S={cfg.stages}",
            f"N1={cfg.width_stage1}",
            f"R_s={cfg.weight_scale_slope:g}*s{cfg.weight_scale_intercept:+g}",
            f"M1={cfg.m_interior_uniform}",
            f"M2={cfg.m_interior_adaptive}",
            f"Mb={cfg.m_boundary}",
            f"lambda={cfg.penalty:g}",
            f"N_opt={cfg.n_opt}",
            f"lr={cfg.learning_rate:g}",
        ]
        if cfg.localized_stages:
            parts.append(
                f"localized=S2:{cfg.localized_stages},N_L:{cfg.localized_width},"
                f"R_L:{cfg.localized_shape_scale:g}"
            )
        if cfg.knowledge_neurons:
            parts.append(f"knowledge_neurons=true,N_k:{cfg.n_knowledge}")
        if name == "rapid_source_eps500":
            parts.append("long-running preset, not covered by the test gate")
        print(f"{name}: " + " ".join(parts))
    return _EXIT_OK


def _cmd_solve(args) -> int:
    problem_name, config, emit_fields = _resolve(args)
    problem = builtin(problem_name)
    out_dir = Path(args.out or f"runs/{problem_name}")
    try:
        if problem.nonlinear_source is not None:
            result = solve_nonlinear_ac(problem, config)
        else:
            result = solve(problem, config)
    except (RuntimeError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return _EXIT_NUMERICAL
    emit_outputs(result, problem, out_dir, emit_fields)
    last = result.reports[-1] if result.reports else None
    if last is not None:
        msg = f"{problem_name}: {len(result.reports)} stages, estimator {last.estimator:.3e}"
        if last.e_linf is not None:
            msg += f", E_Linf {last.e_linf:.3e}, E_L2 {last.e_l2:.3e}"
        print(msg)
    print(f"outputs written to {out_dir}")
    return _EXIT_OK


def _cmd_check() -> int:
    from . import selfcheck

    return _EXIT_OK if selfcheck.run(print) else _EXIT_NUMERICAL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="collobasis",
        description="Adaptive collocation solver with stagewise network basis growth.",
    )
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("list", help="print preset names and their default parameters")
    p_solve = sub.add_parser("solve", help="run a preset and write stage/field CSVs")
    p_solve.add_argument("--problem", help="preset name (see 'list')")
    p_solve.add_argument("--config", help="flat key=value config file")
    p_solve.add_argument("--seed", type=int, default=None)
    p_solve.add_argument("--out", help="output directory (default runs/<problem>)")
    p_solve.add_argument("--set", action="append", metavar="KEY=VALUE",
                         help="override one config entry (repeatable)")
    p_solve.add_argument("--emit-fields", action="store_true",
                         help="also write per-stage field CSVs on the evaluation grid")
    sub.add_parser("check", help="run the quick invariant/oracle suite")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return _EXIT_USAGE if exc.code not in (0, None) else _EXIT_OK

    try:
        if args.command == "list":
            return _cmd_list()
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "check":
            return _cmd_check()
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return _EXIT_USAGE
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_USAGE
    parser.print_help()
    return _EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
