"""Command line: certify, reduce and trace from a JSON config.

Four subcommands share one config schema (see config.py):

* ls-certify    kernel-split certification at a singular equilibrium
* imft-certify  generic split-variable certification at a regular point
* reduce        tabulate the reduced map g on an (alpha, lambda) grid
* trace         march lambda and follow the zero branches of g

Exit codes: 0 when the command succeeded (for the certify commands: at least
one radius pair certified), 2 when a certify run completed but nothing was
certified, 1 on any error. Reports go to --out as JSON (stdout when --out is
omitted); --csv adds a flat export next to it.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import expr as _expr
from . import ls_bounds, reduction, report
from .config import (
    ConfigError,
    ImftSection,
    ModelConfig,
    RunConfig,
    build_estimator,
    build_system,
    load_config,
)
from .errors import LscertError
from .imft import SplitFunction, certify_grid, imft_quantities
from .system import builtin_model, evaluation_point

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CERTIFIED = 2


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _emit_report(args, doc: dict, region, csv_names) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    _write_text(args.out, text)
    if args.csv is not None:
        _write_text(args.csv, report.region_csv(region, csv_names))


def _require(section, name: str):
    if section is None:
        raise ConfigError(name, "section is required by this command")
    return section


def _base_point(cfg: RunConfig):
    bp = _require(cfg.base_point, "base_point")
    if not bp.x0:
        raise ConfigError("base_point.x0", "missing required key")
    return bp


def _split_system_from(cfg: RunConfig) -> ls_bounds.SplitSystem:
    bp = _base_point(cfg)
    sys_ = build_system(cfg.model)
    if len(bp.x0) != sys_.n:
        raise ConfigError("base_point.x0", f"expected {sys_.n} component(s), got {len(bp.x0)}")
    if len(bp.lambda0) != sys_.m:
        raise ConfigError("base_point.lambda0",
                          f"expected {sys_.m} component(s), got {len(bp.lambda0)}")
    point = evaluation_point(sys_, bp.x0, bp.lambda0)
    return ls_bounds.build_split_system(sys_, point, cfg.rank_tol, cfg.equilibrium_tol)


def _par_weights(cfg: RunConfig, ss: ls_bounds.SplitSystem) -> np.ndarray | None:
    if cfg.parallel_weights is None:
        return None
    expected = ss.q + ss.m
    if len(cfg.parallel_weights) != expected:
        raise ConfigError("parallel_weights",
                          f"expected q + m = {expected} weight(s), got {len(cfg.parallel_weights)}")
    return np.asarray(cfg.parallel_weights, dtype=float)


def _cmd_ls_certify(args) -> int:
    cfg = load_config(args.config)
    section = _require(cfg.certify, "certify")
    ss = _split_system_from(cfg)
    estimator = build_estimator(cfg.estimator, ("rpar", "rperp"))
    weights = _par_weights(cfg, ss)
    region, quantities = ls_bounds.certify_ls_region(
        ss, section.r_par_grid, section.r_perp_grid, estimator, cfg.norm, weights)
    meta = report.make_meta("ls-certify", cfg.raw, cfg.norm, estimator.mode, region.rigorous)
    doc = report.certification_report(
        meta,
        report.decomposition_dict(ss.decomp),
        report.quantities_dict(
            quantities.M_par, quantities.M_perp, quantities.L_par, quantities.L_perp,
            section.r_par_grid, section.r_perp_grid, cfg.norm,
            quantities.L_par_rigorous, quantities.L_perp_rigorous),
        report.region_rows(region),
        report.frontier_rows(region),
    )
    _emit_report(args, doc, region, ("r_par", "r_perp"))
    if args.out is not None:
        total = len(region.entries)
        good = sum(1 for e in region.entries if e.certified)
        best = region.max_certified_r_par()
        print(f"certified {good} of {total} radius pairs"
              + (f"; max certified r_par = {best:.6g}" if best is not None else "")
              + f"; rigorous = {str(region.rigorous).lower()}")
    return EXIT_OK if region.any_certified else EXIT_NOT_CERTIFIED


def _combined_split(model: ModelConfig, section: ImftSection, bp) -> SplitFunction:
    """Build f(x, y) over the combined (state ++ parameter) vector."""
    if model.kind == "builtin":
        sys_ = builtin_model(model.name, model.params)
        n, m, k = sys_.n, sys_.m, sys_.n

        def full_value(u):
            return sys_.phi(u[:n], u[n:])

        def full_jac(u):
            return np.hstack([sys_.dphi_dx(u[:n], u[n:]), sys_.dphi_dlambda(u[:n], u[n:])])
    else:
        n, m = model.n, model.m
        k = len(section.y_indices)
        names = _expr.default_names(n, m)
        try:
            asts = _expr.parse_components(model.source, k, *names)
        except LscertError as exc:
            raise ConfigError("model.source", str(exc)) from exc

        def full_value(u):
            return _expr.eval_values(asts, u[:n], u[n:], names=names)

        def full_jac(u):
            _, jx, jl = _expr.eval_dual(asts, u[:n], u[n:], n_state=n, names=names)
            return np.hstack([jx, jl])

    total = n + m
    x_idx = np.asarray(section.x_indices, dtype=int)
    y_idx = np.asarray(section.y_indices, dtype=int)
    if sorted(list(section.x_indices) + list(section.y_indices)) != list(range(total)):
        raise ConfigError("imft.x_indices",
                          f"x_indices and y_indices must partition 0..{total - 1} "
                          "of the combined (state ++ parameter) vector")
    if k != len(section.y_indices):
        raise ConfigError("imft.y_indices",
                          f"model has {k} component(s); y_indices must have that length, "
                          f"got {len(section.y_indices)}")
    if len(bp.x0) != len(section.x_indices):
        raise ConfigError("base_point.x0",
                          f"expected {len(section.x_indices)} component(s), got {len(bp.x0)}")
    if len(bp.y0) != len(section.y_indices):
        raise ConfigError("base_point.y0",
                          f"expected {len(section.y_indices)} component(s), got {len(bp.y0)}")

    def assemble(x, y):
        u = np.empty(total)
        u[x_idx] = x
        u[y_idx] = y
        return u

    return SplitFunction(
        n_x=len(x_idx),
        n_y=len(y_idx),
        fun=lambda x, y: full_value(assemble(x, y)),
        jac_x=lambda x, y: full_jac(assemble(x, y))[:, x_idx],
        jac_y=lambda x, y: full_jac(assemble(x, y))[:, y_idx],
    )


def _cmd_imft_certify(args) -> int:
    cfg = load_config(args.config)
    section = _require(cfg.imft, "imft")
    bp = _require(cfg.base_point, "base_point")
    if not bp.y0:
        raise ConfigError("base_point.y0", "missing required key")
    f = _combined_split(cfg.model, section, bp)
    x0 = np.asarray(bp.x0, dtype=float)
    y0 = np.asarray(bp.y0, dtype=float)
    estimator = build_estimator(cfg.estimator, ("rx", "ry"))
    x_weights = None
    if cfg.parallel_weights is not None:
        if len(cfg.parallel_weights) != f.n_x:
            raise ConfigError("parallel_weights",
                              f"expected {f.n_x} weight(s), got {len(cfg.parallel_weights)}")
        x_weights = np.asarray(cfg.parallel_weights, dtype=float)
    quantities = imft_quantities(f, x0, y0, estimator, cfg.norm, x_weights)
    region = certify_grid(quantities, section.r_x_grid, section.r_y_grid)
    meta = report.make_meta("imft-certify", cfg.raw, cfg.norm, estimator.mode, region.rigorous)
    doc = report.certification_report(
        meta,
        None,
        report.quantities_dict(
            quantities.M_x, quantities.M_y, quantities.L_x, quantities.L_y,
            section.r_x_grid, section.r_y_grid, cfg.norm,
            quantities.L_x_rigorous, quantities.L_y_rigorous,
            names=("r_x", "r_y"), m_names=("M_x", "M_y"), l_names=("L_x", "L_y")),
        report.region_rows(region, ("r_x", "r_y")),
        report.frontier_rows(region, ("r_x", "r_y")),
    )
    _emit_report(args, doc, region, ("r_x", "r_y"))
    if args.out is not None:
        total = len(region.entries)
        good = sum(1 for e in region.entries if e.certified)
        print(f"certified {good} of {total} radius pairs; "
              f"rigorous = {str(region.rigorous).lower()}")
    return EXIT_OK if region.any_certified else EXIT_NOT_CERTIFIED


def _print_series(rm: reduction.ReducedMap) -> None:
    c = reduction.series_coefficients(rm)
    print("reduced map series at base point:")
    print(f"  g_alpha             = {c.g_alpha!r}")
    print(f"  g_lambda            = {c.g_lambda!r}")
    print(f"  g_alpha_alpha       = {c.g_alpha_alpha!r}")
    print(f"  g_alpha_alpha_alpha = {c.g_alpha_alpha_alpha!r}")
    print(f"  g_alpha_lambda      = {c.g_alpha_lambda!r}")
    print(f"classification: {reduction.classify_series(c)}")


def _frontier_for_warnings(cfg: RunConfig, ss: ls_bounds.SplitSystem):
    """Certified frontier for out-of-region warnings, when config allows it."""
    if cfg.certify is None:
        return None
    estimator = build_estimator(cfg.estimator, ("rpar", "rperp"))
    region, _ = ls_bounds.certify_ls_region(
        ss, cfg.certify.r_par_grid, cfg.certify.r_perp_grid,
        estimator, cfg.norm, _par_weights(cfg, ss))
    return region.frontier


def _cmd_reduce(args) -> int:
    cfg = load_config(args.config)
    section = _require(cfg.reduce, "reduce")
    ss = _split_system_from(cfg)
    nt = cfg.newton
    rm = reduction.ReducedMap(ss, nt.tol, nt.max_iters, nt.max_backtracks)
    _print_series(rm)
    frontier = _frontier_for_warnings(cfg, ss)
    alphas = np.linspace(section.alpha_min, section.alpha_max, section.alpha_samples)
    rows = []
    for lam in section.lambda_values:
        rm.reset_warm_start()
        for alpha in alphas:
            point = rm.evaluate(alpha, lam)
            warning = None
            if frontier is not None:
                warning = reduction.region_note(
                    ss, frontier, point.alpha, point.lam, point.beta, cfg.norm)
            rows.append((point, warning))
    if args.out is not None:
        _write_text(args.out, report.reduce_csv(rows, ss.q, ss.m, ss.n_perp))
        print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_trace(args) -> int:
    cfg = load_config(args.config)
    section = _require(cfg.trace, "trace")
    ss = _split_system_from(cfg)
    nt = cfg.newton
    rm = reduction.ReducedMap(ss, nt.tol, nt.max_iters, nt.max_backtracks)
    _print_series(rm)
    count = int(np.floor((section.lambda_max - section.lambda_min) / section.lambda_step + 1e-9)) + 1
    lambda_values = [section.lambda_min + i * section.lambda_step for i in range(count)]
    result = reduction.trace_branches(
        rm, lambda_values, (section.alpha_min, section.alpha_max),
        alpha_samples=section.alpha_samples)
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    print(f"traced {result.n_branches} branch(es) over {count} parameter value(s)")
    if args.out is not None:
        _write_text(args.out, report.trace_csv(result, ss.decomp.n))
        total = sum(len(b) for b in result.branches)
        print(f"wrote {total} points to {args.out}")
    return EXIT_OK


def _add_common(sub: argparse.ArgumentParser, with_csv: bool) -> None:
    sub.add_argument("--config", required=True, help="path to the JSON run config")
    sub.add_argument("--out", default=None,
                     help="output file (JSON report for certify commands, CSV otherwise); "
                          "certify reports print to stdout when omitted")
    if with_csv:
        sub.add_argument("--csv", default=None, help="also write the region table as CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lscert",
        description="certified reduction of parameterised equilibrium systems")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("ls-certify",
                            help="certify the kernel-split reduction at a singular equilibrium")
    _add_common(p, with_csv=True)
    p.set_defaults(func=_cmd_ls_certify)

    p = commands.add_parser("imft-certify",
                            help="certify a generic split-variable implicit map")
    _add_common(p, with_csv=True)
    p.set_defaults(func=_cmd_imft_certify)

    p = commands.add_parser("reduce",
                            help="tabulate the reduced map on an (alpha, lambda) grid")
    _add_common(p, with_csv=False)
    p.set_defaults(func=_cmd_reduce)

    p = commands.add_parser("trace", help="follow zero branches of the reduced map")
    _add_common(p, with_csv=False)
    p.set_defaults(func=_cmd_trace)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LscertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main_ls_certify(argv=None) -> int:
    return main(["ls-certify"] + (sys.argv[1:] if argv is None else list(argv)))


def main_imft_certify(argv=None) -> int:
    return main(["imft-certify"] + (sys.argv[1:] if argv is None else list(argv)))
