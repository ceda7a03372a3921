"""CSV/JSON report writers with provenance stamping.

Every file starts with (or embeds) the config hash, artifact version, and
seed, and all floats are written with %.17g so reruns of the same config
are byte-identical.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from . import __version__


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return x


def provenance_line(cfg):
    return f"# config_hash={cfg.config_hash} version={__version__} seed={cfg.seed}"


def write_csv(path, cfg, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(provenance_line(cfg) + "\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def write_json(path, cfg, payload):
    doc = {
        "config_hash": cfg.config_hash,
        "version": __version__,
        "seed": cfg.seed,
    }
    doc.update(payload)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def entropy_report_payload(report):
    return {
        "n_list": list(report.n_list),
        "eps_list": list(report.eps_list),
        "cloud_size": report.cloud_size,
        "metric": report.metric,
        "extrapolated_h": report.extrapolated_h,
        "h_alt": report.h_alt,
        "discordant": report.discordant,
        "inconclusive": report.inconclusive,
        "saturated_cells": int(report.saturated.sum()),
        "exhausted_cells": int(report.exhausted.sum()),
        "slope_per_epsilon": [
            {
                "epsilon": f.epsilon,
                "slope": f.slope,
                "n_window": [f.n_lo, f.n_hi],
                "residual": f.residual,
            }
            for f in report.slope_per_epsilon
        ],
    }


def write_entropy_report(csv_path, json_path, cfg, report, extra=None):
    write_csv(csv_path, cfg, ["n", "epsilon", "count", "saturated"], report.rows())
    payload = entropy_report_payload(report)
    if extra:
        payload.update(extra)
    write_json(json_path, cfg, payload)
