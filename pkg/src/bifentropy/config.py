"""Experiment configuration: one JSON document drives every run.

The resolved config (defaults filled in, CLI overrides applied) is hashed
and the hash is stamped into every output file, so identical configs are
checkable for byte-identical reruns.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

from .entropy import CloudSpec
from .families import InvalidFamilyError, family_from_id
from .geometry import Annulus, Disk, Rect


class ConfigError(ValueError):
    """Invalid experiment configuration; collects every complaint at once."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


REGION_PRESETS = {
    # a disk deep inside the quadratic family's main cardioid
    "cardioid-disk": {"type": "disk", "center": [0.0, 0.0], "radius": 0.05},
    # covers the whole boundary of the connectedness locus for z^2 + lambda
    "boundary-annulus": {
        "type": "annulus",
        "center": [-0.25, 0.0],
        "r_inner": 0.3,
        "r_outer": 1.9,
    },
    # a rectangle across the tip of the real needle
    "tip-rect": {"type": "rect", "re_min": -2.1, "re_max": -1.5, "im_min": -0.3, "im_max": 0.3},
    # a rectangle containing the whole boundary of the connectedness locus
    "boundary-box": {"type": "rect", "re_min": -2.15, "re_max": 1.65, "im_min": -1.9, "im_max": 1.9},
    # a rectangle strictly inside the main cardioid
    "cardioid-rect": {
        "type": "rect",
        "re_min": -0.05,
        "re_max": 0.05,
        "im_min": -0.05,
        "im_max": 0.05,
    },
}


DEFAULT_CONFIG = {
    "family": "unicritical:2",
    "region": {"re_min": -2.5, "re_max": 1.5, "im_min": -1.5, "im_max": 1.5},
    "grid_resolution": 400,
    "tol": 1e-10,
    "green_max_iter": 2000,
    "depth": 14,
    "seed": 20260808,
    "entropy": {
        "region": "boundary-annulus",
        "cloud": {
            "kind": "band",
            "resolution": 800,
            "max_points": 40000,
            "band_cells": 2,
            "escape_cap": 600,
        },
        "n_list": [2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12],
        "eps_list": [0.1, 0.05, 0.025],
        "metric": "plain",
    },
    "metric_entropy": {
        "region": None,  # null = the whole ambient window
        "kappa_list": [0.01, 0.001],
        "n_list": [2, 3, 4, 5, 6, 7, 8, 9, 10],
        "eps_list": [0.1, 0.05],
        "metric": "plain",
    },
    "brin_katok": {
        "samples": 100,
        "n_list": [4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14],
        "epsilon": 0.05,
    },
    "dimension": {"points": [[-2.0, 0.0]], "r_list": [0.4, 0.2, 0.1, 0.05]},
    "volume": {"region": "boundary-box", "n_max": 14, "resolution": 1600},
    "thresholds": {"support_factor": 10.0, "clamp_fail_fraction": 0.01},
    "heatmap": {"palette": "viridis", "log_mass": True},
    "out_dir": "out",
}


def parse_shape(spec, problems, where):
    """Region spec: preset name or a typed dict; returns a geometry shape."""
    if isinstance(spec, str):
        if spec not in REGION_PRESETS:
            problems.append(f"{where}: unknown region preset {spec!r}")
            return None
        spec = REGION_PRESETS[spec]
    try:
        kind = spec.get("type", "rect")
        if kind == "rect":
            return Rect(spec["re_min"], spec["re_max"], spec["im_min"], spec["im_max"])
        if kind == "disk":
            return Disk(complex(*spec["center"]), spec["radius"])
        if kind == "annulus":
            return Annulus(complex(*spec["center"]), spec["r_inner"], spec["r_outer"])
        problems.append(f"{where}: unknown region type {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        problems.append(f"{where}: bad region spec ({exc})")
    return None


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    family_id: str
    window: Rect
    grid_resolution: int
    tol: float
    green_max_iter: int
    depth: int
    seed: int
    entropy_region: object
    entropy_cloud: CloudSpec
    entropy_n_list: tuple
    entropy_eps_list: tuple
    entropy_metric: str
    me_region: object
    me_kappa_list: tuple
    me_n_list: tuple
    me_eps_list: tuple
    me_metric: str
    bk_samples: int
    bk_n_list: tuple
    bk_epsilon: float
    dim_points: tuple
    dim_r_list: tuple
    volume_region: Rect
    volume_n_max: int
    volume_resolution: int
    support_factor: float
    clamp_fail_fraction: float
    heatmap_palette: str
    heatmap_log_mass: bool
    out_dir: str

    @property
    def config_hash(self):
        # the hash identifies the experiment; where it is written does not count
        payload = {k: v for k, v in self.raw.items() if k != "out_dir"}
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def resolve_config(user_cfg=None, overrides=None) -> ExperimentConfig:
    """Merge defaults <- user config <- CLI overrides, then validate fully."""
    raw = _merge(DEFAULT_CONFIG, user_cfg or {})
    if overrides:
        raw = _merge(raw, overrides)
    problems = []

    try:
        family_from_id(raw["family"])
    except InvalidFamilyError as exc:
        problems.append(str(exc))

    window = parse_shape(raw["region"], problems, "region")
    if window is not None and not isinstance(window, Rect):
        problems.append("region: the ambient window must be a rectangle")
        window = None

    res = raw["grid_resolution"]
    if not isinstance(res, int) or res < 64:
        problems.append(f"grid_resolution must be an integer >= 64, got {res!r}")

    depth = raw["depth"]
    if not isinstance(depth, int) or not 1 <= depth <= 60:
        problems.append(f"depth must be in 1..60, got {depth!r}")

    if raw["tol"] <= 0:
        problems.append("tol must be positive")
    if not isinstance(raw["seed"], int) or raw["seed"] < 0:
        problems.append("seed must be a nonnegative integer")

    ent = raw["entropy"]
    ent_region = parse_shape(ent["region"], problems, "entropy.region")
    try:
        ent_cloud = CloudSpec(**ent["cloud"])
        if ent_cloud.kind not in ("grid", "band"):
            problems.append(f"entropy.cloud.kind must be grid|band, got {ent_cloud.kind!r}")
        if ent_cloud.resolution < 8:
            problems.append("entropy.cloud.resolution must be >= 8")
    except TypeError as exc:
        problems.append(f"entropy.cloud: {exc}")
        ent_cloud = CloudSpec()
    _check_lists(ent["n_list"], ent["eps_list"], depth, problems, "entropy")
    if ent["metric"] not in ("plain", "tilde"):
        problems.append("entropy.metric must be plain|tilde")

    me = raw["metric_entropy"]
    me_region = (
        parse_shape(me["region"], problems, "metric_entropy.region")
        if me.get("region") is not None
        else None
    )
    _check_lists(me["n_list"], me["eps_list"], depth, problems, "metric_entropy")
    if me["metric"] not in ("plain", "tilde"):
        problems.append("metric_entropy.metric must be plain|tilde")
    if not me["kappa_list"] or any(not 0 < k < 1 for k in me["kappa_list"]):
        problems.append("metric_entropy.kappa_list entries must lie in (0, 1)")

    bk = raw["brin_katok"]
    _check_lists(bk["n_list"], [bk["epsilon"]], depth, problems, "brin_katok")
    if not isinstance(bk["samples"], int) or bk["samples"] < 1:
        problems.append("brin_katok.samples must be a positive integer")
    if window is not None and isinstance(res, int) and res >= 64:
        cell = max(window.width, window.height) / res
        if bk["epsilon"] < 4 * cell:
            problems.append(
                f"brin_katok.epsilon={bk['epsilon']} is below the 4-cell guard {4 * cell:.4g}"
            )
        for r in raw["dimension"]["r_list"]:
            if r < 2 * cell:
                problems.append(f"dimension.r_list radius {r} is below the 2-cell guard {2 * cell:.4g}")

    dim = raw["dimension"]
    if not dim["points"]:
        problems.append("dimension.points must be nonempty")
    if not dim["r_list"] or any(r <= 0 for r in dim["r_list"]):
        problems.append("dimension.r_list radii must be positive")

    vol = raw["volume"]
    vol_region = parse_shape(vol["region"], problems, "volume.region")
    if vol_region is not None and not isinstance(vol_region, Rect):
        problems.append("volume.region must be a rectangle")
        vol_region = None
    if not isinstance(vol["n_max"], int) or vol["n_max"] < 1:
        problems.append("volume.n_max must be a positive integer")
    if not isinstance(vol["resolution"], int) or vol["resolution"] < 32:
        problems.append("volume.resolution must be an integer >= 32")

    thr = raw["thresholds"]
    if thr["support_factor"] <= 0:
        problems.append("thresholds.support_factor must be positive")
    if not 0 < thr["clamp_fail_fraction"] <= 1:
        problems.append("thresholds.clamp_fail_fraction must be in (0, 1]")

    if problems:
        raise ConfigError(problems)

    return ExperimentConfig(
        raw=raw,
        family_id=raw["family"],
        window=window,
        grid_resolution=res,
        tol=float(raw["tol"]),
        green_max_iter=int(raw["green_max_iter"]),
        depth=depth,
        seed=raw["seed"],
        entropy_region=ent_region,
        entropy_cloud=ent_cloud,
        entropy_n_list=tuple(ent["n_list"]),
        entropy_eps_list=tuple(ent["eps_list"]),
        entropy_metric=ent["metric"],
        me_region=me_region,
        me_kappa_list=tuple(me["kappa_list"]),
        me_n_list=tuple(me["n_list"]),
        me_eps_list=tuple(me["eps_list"]),
        me_metric=me["metric"],
        bk_samples=bk["samples"],
        bk_n_list=tuple(bk["n_list"]),
        bk_epsilon=float(bk["epsilon"]),
        dim_points=tuple(complex(p[0], p[1]) for p in dim["points"]),
        dim_r_list=tuple(float(r) for r in dim["r_list"]),
        volume_region=vol_region,
        volume_n_max=vol["n_max"],
        volume_resolution=vol["resolution"],
        support_factor=float(thr["support_factor"]),
        clamp_fail_fraction=float(thr["clamp_fail_fraction"]),
        heatmap_palette=raw["heatmap"]["palette"],
        heatmap_log_mass=bool(raw["heatmap"]["log_mass"]),
        out_dir=raw["out_dir"],
    )


def _check_lists(n_list, eps_list, depth, problems, where):
    if not n_list or any(not isinstance(n, int) or n < 1 for n in n_list):
        problems.append(f"{where}.n_list must be positive integers")
    elif isinstance(depth, int) and max(n_list) > depth:
        problems.append(f"{where}.n_list exceeds depth={depth}")
    if not eps_list or any(e <= 0 for e in eps_list):
        problems.append(f"{where}.eps_list entries must be positive")


def load_config_file(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
