"""Batch experiment driver.

Subcommands: measure, entropy, metric-entropy, brin-katok, dimension,
volume, heatmap, all.  Exit codes: 0 success (warnings allowed), 2 config
error, 3 numerical failure (clamped-mass fraction over threshold), 4 I/O
error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config_file, resolve_config
from .entropy import (
    brin_katok_sample,
    estimate_h_bif,
    estimate_h_metric,
    graph_volume_growth,
    pointwise_dimension,
    UndefinedDimensionError,
)
from .families import family_from_id
from .heatmap import render_heatmap
from .measure import build_measure_grid, save_measure_grid
from .orbits import orbit_table
from .reports import write_csv, write_entropy_report, write_json


class NumericalFailure(RuntimeError):
    pass


class _RunContext:
    """Lazily built shared artifacts (family, measure grid, orbit table)."""

    def __init__(self, cfg, workers, quiet):
        self.cfg = cfg
        self.workers = workers
        self.quiet = quiet
        self.warnings = []
        self._fam = None
        self._grid = None
        self._table = None

    def log(self, msg):
        if not self.quiet:
            print(msg, flush=True)

    @property
    def fam(self):
        if self._fam is None:
            self._fam = family_from_id(self.cfg.family_id)
        return self._fam

    @property
    def grid(self):
        if self._grid is None:
            cfg = self.cfg
            self.log(f"building measure grid {cfg.grid_resolution}x{cfg.grid_resolution} ...")
            self._grid = build_measure_grid(
                self.fam,
                cfg.window,
                cfg.grid_resolution,
                tol=cfg.tol,
                max_iter=cfg.green_max_iter,
            )
            self.warnings.extend(self._grid.warnings)
            if self._grid.clamped_fraction >= cfg.clamp_fail_fraction:
                raise NumericalFailure(
                    f"clamped negative mass fraction {self._grid.clamped_fraction:.4f} "
                    f">= {cfg.clamp_fail_fraction}"
                )
        return self._grid

    @property
    def table(self):
        if self._table is None:
            self.log(f"building depth-{self.cfg.depth} orbit table over the grid ...")
            self._table = orbit_table(self.fam, self.grid.params, self.cfg.depth)
        return self._table


def _stage_measure(ctx, out):
    cfg, grid = ctx.cfg, ctx.grid
    save_measure_grid(
        grid,
        out / "measure_grid.csv",
        out / "measure_grid_header.json",
        meta={"config_hash": cfg.config_hash, "seed": cfg.seed},
    )
    render_heatmap(
        grid.potential, cfg.window, out / "heatmap_potential.png",
        palette=cfg.heatmap_palette, title="Lyapunov potential L",
    )
    render_heatmap(
        grid.cell_mass, cfg.window, out / "heatmap_mass.png",
        palette=cfg.heatmap_palette, log_scale=cfg.heatmap_log_mass,
        title="bifurcation measure cell mass",
    )
    return {
        "total_mass": grid.total_mass,
        "clamped_fraction": grid.clamped_fraction,
        "low_conf_fraction": grid.low_conf_fraction,
    }


def _stage_entropy(ctx, out):
    cfg = ctx.cfg
    ctx.log("packing entropy on K ...")
    report, cloud = estimate_h_bif(
        ctx.fam,
        cfg.entropy_region,
        cfg.entropy_cloud,
        cfg.entropy_n_list,
        cfg.entropy_eps_list,
        metric=cfg.entropy_metric,
        workers=ctx.workers,
    )
    if report.inconclusive:
        ctx.warnings.append("entropy: all packing cells saturated; raise cloud resolution")
    if report.discordant:
        ctx.warnings.append("entropy: the two limit orders disagree by more than 0.1")
    write_entropy_report(
        out / "entropy_report.csv",
        out / "entropy_summary.json",
        cfg,
        report,
        extra={"region": cfg.raw["entropy"]["region"], "cloud_points": cloud.masked_count},
    )
    return {"extrapolated_h": report.extrapolated_h, "h_alt": report.h_alt}


def _stage_metric_entropy(ctx, out):
    cfg = ctx.cfg
    shape = cfg.me_region if cfg.me_region is not None else cfg.window
    k_mask = np.asarray(shape.contains(ctx.grid.centers), dtype=bool)
    ctx.log("metric entropy over kappa-trimmed masks ...")
    result = estimate_h_metric(
        ctx.grid,
        ctx.table,
        k_mask,
        cfg.me_kappa_list,
        cfg.me_n_list,
        cfg.me_eps_list,
        metric=cfg.me_metric,
        workers=ctx.workers,
    )
    for kappa, rep in zip(result.kappa_list, result.reports):
        write_csv(
            out / f"metric_entropy_kappa_{kappa:g}.csv",
            cfg,
            ["n", "epsilon", "count", "saturated"],
            rep.rows(),
        )
    write_json(
        out / "metric_entropy_summary.json",
        cfg,
        {
            "kappa_list": list(result.kappa_list),
            "h_metric": result.h_metric,
            "plateau_spread": result.plateau_spread,
            "per_kappa_h": [rep.extrapolated_h for rep in result.reports],
        },
    )
    return {"h_metric": result.h_metric}


def _stage_brin_katok(ctx, out):
    cfg = ctx.cfg
    ctx.log("Brin-Katok local-entropy sampling ...")
    result = brin_katok_sample(
        ctx.grid, ctx.table, cfg.bk_samples, cfg.bk_n_list, cfg.bk_epsilon, seed=cfg.seed
    )
    centers = ctx.grid.centers.ravel()
    rows = [
        (i, int(flat), centers[flat].real, centers[flat].imag, slope)
        for i, (flat, slope) in enumerate(zip(result.sample_indices, result.slopes))
    ]
    write_csv(
        out / "brin_katok_samples.csv",
        cfg,
        ["sample", "cell_index", "re", "im", "slope"],
        rows,
    )
    write_json(
        out / "brin_katok_summary.json",
        cfg,
        {
            "median_slope": result.median,
            "iqr": result.iqr,
            "samples": len(result.slopes),
            "skipped": result.skipped,
            "epsilon": result.epsilon,
            "n_list": list(result.n_list),
        },
    )
    field = np.full(ctx.grid.cell_mass.shape, np.nan)
    flat_field = field.ravel()
    flat_field[result.sample_indices[: len(result.slopes)]] = result.slopes
    render_heatmap(
        flat_field.reshape(field.shape),
        cfg.window,
        out / "heatmap_local_slope.png",
        palette=cfg.heatmap_palette,
        title="local-entropy slope at sampled parameters",
    )
    return {"bk_median": result.median, "bk_iqr": result.iqr}


def _stage_dimension(ctx, out):
    cfg = ctx.cfg
    results = []
    for pt in cfg.dim_points:
        try:
            dim = pointwise_dimension(ctx.grid, pt, cfg.dim_r_list)
            results.append({"point": [pt.real, pt.imag], "dimension": dim})
        except UndefinedDimensionError as exc:
            results.append({"point": [pt.real, pt.imag], "error": str(exc)})
            ctx.warnings.append(f"dimension at {pt}: {exc}")
    write_json(out / "dimension_report.json", cfg, {"r_list": list(cfg.dim_r_list), "points": results})
    return {"dimension_points": len(results)}


def _stage_volume(ctx, out):
    cfg = ctx.cfg
    ctx.log("graph-volume growth ...")
    rep = graph_volume_growth(
        ctx.fam, cfg.volume_region, cfg.volume_n_max, resolution=cfg.volume_resolution
    )
    rows = [
        (int(n), v, r, bool(res))
        for n, v, r, res in zip(rep.n_values, rep.volumes, rep.rates, rep.resolved)
    ]
    write_csv(out / "volume_report.csv", cfg, ["n", "volume", "rate", "resolved"], rows)
    write_json(
        out / "volume_summary.json",
        cfg,
        {
            "fitted_rate": rep.fitted_rate,
            "window": list(rep.window),
            "frozen_cells": rep.frozen_cells,
            "resolution": rep.resolution,
        },
    )
    return {"volume_rate": rep.fitted_rate}


def _stage_heatmap(ctx, out):
    cfg, grid = ctx.cfg, ctx.grid
    render_heatmap(
        grid.potential, cfg.window, out / "heatmap_potential.png",
        palette=cfg.heatmap_palette, title="Lyapunov potential L",
    )
    render_heatmap(
        grid.cell_mass, cfg.window, out / "heatmap_mass.png",
        palette=cfg.heatmap_palette, log_scale=cfg.heatmap_log_mass,
        title="bifurcation measure cell mass",
    )
    return {"heatmaps": 2}


_STAGES = {
    "measure": (_stage_measure,),
    "entropy": (_stage_entropy,),
    "metric-entropy": (_stage_metric_entropy,),
    "brin-katok": (_stage_brin_katok,),
    "dimension": (_stage_dimension,),
    "volume": (_stage_volume,),
    "heatmap": (_stage_heatmap,),
    "all": (
        _stage_measure,
        _stage_entropy,
        _stage_metric_entropy,
        _stage_brin_katok,
        _stage_dimension,
        _stage_volume,
    ),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bifentropy",
        description="bifurcation-entropy experiments on critically marked families",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _STAGES:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="JSON config file")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--quiet", action="store_true")
        p.add_argument(
            "--region",
            type=str,
            default=None,
            help="override the entropy region (preset name or inline JSON)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        user_cfg = load_config_file(args.config) if args.config else {}
    except (OSError, json.JSONDecodeError) as exc:
        _emit_error(f"cannot read config: {exc}", 2)
        return 2

    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = str(args.out)
    if args.region is not None:
        region = args.region
        if region.strip().startswith("{"):
            try:
                region = json.loads(region)
            except json.JSONDecodeError as exc:
                _emit_error(f"--region: {exc}", 2)
                return 2
        overrides["entropy"] = {"region": region}

    try:
        cfg = resolve_config(user_cfg, overrides)
    except ConfigError as exc:
        _emit_error(exc.problems, 2)
        return 2

    ctx = _RunContext(cfg, max(args.workers, 1), args.quiet)
    out = Path(cfg.out_dir)
    summary = {"command": args.command, "stages": {}, "warnings": []}
    try:
        out.mkdir(parents=True, exist_ok=True)
        for stage in _STAGES[args.command]:
            name = stage.__name__.removeprefix("_stage_")
            summary["stages"][name] = stage(ctx, out)
        summary["warnings"] = ctx.warnings
        write_json(out / "summary.json", cfg, summary)
    except NumericalFailure as exc:
        _emit_error(str(exc), 3)
        return 3
    except OSError as exc:
        _emit_error(f"I/O failure: {exc}", 4)
        return 4
    if ctx.warnings and not args.quiet:
        for w in ctx.warnings:
            print(f"warning: {w}", file=sys.stderr)
    return 0


def _emit_error(problems, code):
    if isinstance(problems, str):
        problems = [problems]
    json.dump({"error": problems, "exit_code": code}, sys.stderr, indent=2)
    sys.stderr.write("\n")


if __name__ == "__main__":
    sys.exit(main())
