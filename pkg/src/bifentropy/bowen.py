"""Orbit pseudometrics on parameter space and greedy separated-set packing.

The depth-n pseudometric between parameters is the max over marked points
and iterates 0..n-1 of the chordal distance between corresponding critical
orbit points; its "tilde" variant additionally takes the max with the
Euclidean parameter distance.  Separated sets are extracted greedily
(lowest admissible index first), which yields a maximal packing: a lower
bound for the maximum separated cardinality and an upper bound for the
minimal covering number, so growth rates are bracketed.

Candidate rejection is accelerated by hashing one orbit iterate into R^3
(where the chordal metric is Euclidean): any pair within eps in the full
pseudometric is within eps at every single iterate, so only hash neighbors
need exact distances.  The result is identical to the naive scan.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .families import MarkedFamily
from .geometry import Rect, cell_centers, param_dist
from .orbits import OrbitTable, escape_time_grid


@dataclass(frozen=True)
class SampleCloud:
    """A finite, deterministically ordered parameter sample of a compact set.

    ``params`` enumerates the cloud (row-major grid or fixed-seed order);
    ``mask`` restricts packing to a Borel subset of it.
    """

    params: np.ndarray  # (N, dim) complex
    region: Rect
    mask: np.ndarray  # (N,) bool
    spacing: float = 0.0  # grid pitch, 0 when not grid-derived

    def __post_init__(self):
        if self.params.ndim != 2 or self.mask.shape != (self.params.shape[0],):
            raise ValueError("cloud params must be (N, dim) with an (N,) mask")

    @property
    def size(self):
        return self.params.shape[0]

    @property
    def masked_count(self):
        return int(self.mask.sum())

    def restrict(self, keep):
        return SampleCloud(self.params, self.region, self.mask & keep, self.spacing)


@dataclass(frozen=True)
class PackingResult:
    n: int
    epsilon: float
    metric: str
    selected: np.ndarray  # indices into the cloud/table, ascending
    count: int


def _subsample(flat_mask, max_points):
    """Thin a boolean selection to at most max_points, keeping every k-th hit."""
    count = int(flat_mask.sum())
    if max_points is None or count <= max_points:
        return flat_mask
    hits = np.flatnonzero(flat_mask)
    stride = int(np.ceil(count / max_points))
    keep = np.zeros_like(flat_mask)
    keep[hits[::stride]] = True
    return keep


def grid_cloud(shape, resolution: int, max_points: int | None = None) -> SampleCloud:
    """Row-major grid of cell centers of the shape's bounding box, clipped to it."""
    bbox = shape.bounding_box()
    re, im = cell_centers(bbox, resolution, resolution)
    pts = (re[np.newaxis, :] + 1j * im[:, np.newaxis]).ravel()
    inside = np.asarray(shape.contains(pts), dtype=bool)
    inside = _subsample(inside, max_points)
    params = pts[inside][:, np.newaxis]
    spacing = max(bbox.width, bbox.height) / resolution
    return SampleCloud(params, bbox, np.ones(params.shape[0], dtype=bool), spacing)


def band_cloud(
    fam: MarkedFamily,
    shape,
    resolution: int,
    max_points: int | None = None,
    band_cells: int = 2,
    escape_cap: int = 600,
) -> SampleCloud:
    """Grid cloud thinned to a band around the connectedness-locus boundary.

    A cell is in the band when, within ``band_cells`` cells, some marked orbit
    escapes and some does not (escape-time proxy for dist(., boundary)).
    Concentrating the cloud there is where separated sets actually grow.
    """
    bbox = shape.bounding_box()
    times = escape_time_grid(fam, bbox, resolution, resolution, max_iter=escape_cap)
    bounded = times < 0
    near_b = _dilate(bounded, band_cells)
    near_e = _dilate(~bounded, band_cells)
    band = near_b & near_e
    re, im = cell_centers(bbox, resolution, resolution)
    pts = (re[np.newaxis, :] + 1j * im[:, np.newaxis]).ravel()
    inside = band.ravel() & np.asarray(shape.contains(pts), dtype=bool)
    inside = _subsample(inside, max_points)
    params = pts[inside][:, np.newaxis]
    spacing = max(bbox.width, bbox.height) / resolution
    return SampleCloud(params, bbox, np.ones(params.shape[0], dtype=bool), spacing)


def _dilate(mask, w):
    out = mask.copy()
    for dy in range(-w, w + 1):
        for dx in range(-w, w + 1):
            if dx == 0 and dy == 0:
                continue
            out |= np.roll(np.roll(mask, dy, axis=0), dx, axis=1)
    return out


# ---------------------------------------------------------------------------
# Pseudometrics


def _dist_to_many(table: OrbitTable, p: int, idxs, n: int, tilde: bool):
    """Pseudometric from table row p to table rows idxs at depth n."""
    xp = table.points[p, :, :n]
    rp = table.point_norms[p, :, :n]
    xq = table.points[idxs, :, :n]
    rq = table.point_norms[idxs, :, :n]
    finp = np.isfinite(xp)
    finq = np.isfinite(xq)
    both = finp & finq
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        d = np.abs(np.where(both, xq - xp, 0.0)) / (rq * rp)
        d_one = np.where(finq, 1.0 / rq, 1.0 / rp + np.zeros_like(rq))
    d = np.where(both, d, np.where(finp ^ finq, d_one, 0.0))
    dmax = d.max(axis=(1, 2))
    if tilde:
        dmax = np.maximum(dmax, param_dist(table.params[idxs], table.params[p]))
    return dmax


def query_dist_profile(table: OrbitTable, q_points, q_norms, q_param, n_max: int, tilde: bool = True):
    """Running-max orbit distances from one external orbit to every table row.

    ``q_points``/``q_norms`` hold a single orbit, shape (k, >= n_max); the
    result has shape (N, n_max) and its column n-1 is the depth-n
    pseudometric from the query to each table parameter.  Used by the
    Bowen-ball mass queries, which need all depths at once.
    """
    if n_max > table.depth:
        raise ValueError(f"n_max={n_max} exceeds table depth {table.depth}")
    xq = table.points[:, :, :n_max]
    rq = table.point_norms[:, :, :n_max]
    xp = np.asarray(q_points)[np.newaxis, :, :n_max]
    rp = np.asarray(q_norms)[np.newaxis, :, :n_max]
    finp = np.isfinite(xp)
    finq = np.isfinite(xq)
    both = finp & finq
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        d = np.abs(np.where(both, xq - xp, 0.0)) / (rq * rp)
        d_one = np.where(finq, 1.0 / rq, 1.0 / rp + np.zeros_like(rq))
    d = np.where(both, d, np.where(finp ^ finq, d_one, 0.0))
    prof = np.maximum.accumulate(d.max(axis=1), axis=1)
    if tilde:
        pd = param_dist(table.params, np.asarray(q_param))
        prof = np.maximum(prof, np.asarray(pd)[:, np.newaxis])
    return prof


def bif_dist(table: OrbitTable, p: int, q: int, n: int) -> float:
    """Depth-n orbit distance between parameters p and q of the table."""
    if not 1 <= n <= table.depth:
        raise ValueError(f"n={n} outside 1..{table.depth}")
    return float(_dist_to_many(table, p, np.asarray([q]), n, tilde=False)[0])


def bif_dist_tilde(table: OrbitTable, p: int, q: int, n: int) -> float:
    """max(bif_dist, parameter distance): the packing metric of the measure side."""
    if not 1 <= n <= table.depth:
        raise ValueError(f"n={n} outside 1..{table.depth}")
    return float(_dist_to_many(table, p, np.asarray([q]), n, tilde=True)[0])


# ---------------------------------------------------------------------------
# Greedy packing


def _embed(z):
    """Stereographic embedding into R^3; chordal distance becomes Euclidean."""
    z = np.asarray(z, dtype=np.complex128)
    fin = np.isfinite(z)
    zf = np.where(fin, z, 0.0)
    t = zf.real**2 + zf.imag**2
    denom = 1.0 + t
    out = np.empty(z.shape + (3,))
    out[..., 0] = np.where(fin, zf.real / denom, 0.0)
    out[..., 1] = np.where(fin, zf.imag / denom, 0.0)
    out[..., 2] = np.where(fin, t / denom, 1.0)
    return out


def _hash_buckets(emb, eps):
    cells = np.floor(emb / eps).astype(np.int64)
    buckets = {}
    for pos, key in enumerate(map(tuple, cells)):
        buckets.setdefault(key, []).append(pos)
    return {k: np.asarray(v, dtype=np.int64) for k, v in buckets.items()}, cells


_NEIGHBOR_OFFSETS = [
    (dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
]


def greedy_separated(
    table: OrbitTable,
    cloud: SampleCloud,
    n: int,
    eps: float,
    metric: str = "plain",
    prune: bool = True,
) -> PackingResult:
    """Maximal eps-separated subset of the masked cloud, greedily.

    Always picks the lowest-index admissible point, then discards every
    masked point strictly within eps of it; the selection is therefore
    pairwise >= eps apart and every masked point is within eps of a
    selected one.  ``prune=False`` forces the naive full scan (the hash
    pruning is an internal optimization with identical output).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not 1 <= n <= table.depth:
        raise ValueError(f"n={n} outside 1..{table.depth}")
    if metric not in ("plain", "tilde"):
        raise ValueError(f"metric must be 'plain' or 'tilde', got {metric!r}")
    if cloud.size != table.num_params:
        raise ValueError("cloud and orbit table enumerate different parameters")
    tilde = metric == "tilde"

    idxs = np.flatnonzero(cloud.mask)
    m = idxs.size
    if m == 0:
        return PackingResult(n, eps, metric, np.empty(0, dtype=np.int64), 0)

    use_hash = prune and m > 256
    if use_hash:
        key_i = 1 if n >= 2 else 0
        emb = _embed(table.points[idxs, 0, key_i])
        buckets, cells = _hash_buckets(emb, eps)

    alive = np.ones(m, dtype=bool)
    selected = []
    for pos in range(m):
        if not alive[pos]:
            continue
        selected.append(int(idxs[pos]))
        if use_hash:
            cx, cy, cz = cells[pos]
            cand = [
                buckets[key]
                for off in _NEIGHBOR_OFFSETS
                if (key := (cx + off[0], cy + off[1], cz + off[2])) in buckets
            ]
            cand = np.concatenate(cand)
            cand = cand[alive[cand]]
        else:
            cand = np.flatnonzero(alive)
        d = _dist_to_many(table, idxs[pos], idxs[cand], n, tilde)
        alive[cand[d < eps]] = False
        alive[pos] = False
    sel = np.asarray(selected, dtype=np.int64)
    return PackingResult(n, eps, metric, sel, sel.size)


def _selection_exhausted(table, selected, spacing):
    """True when the selected points already pack at the cloud's own pitch.

    Counts limited by the sample resolution (median nearest-neighbor
    parameter distance at the grid pitch) say nothing about d_n growth and
    must be excluded from slope fits.
    """
    if spacing <= 0 or selected.size < 10:
        return False
    probe = selected[:500]
    pp = table.params[probe]
    qq = table.params[selected]
    d = np.sqrt(np.sum(np.abs(pp[:, np.newaxis, :] - qq[np.newaxis, :, :]) ** 2, axis=-1))
    d[d == 0] = np.inf
    nn = d.min(axis=1)
    return bool(np.median(nn) <= 2.1 * spacing)


def packing_curve(
    table: OrbitTable,
    cloud: SampleCloud,
    n_list,
    eps_list,
    metric: str = "plain",
    workers: int = 1,
    with_exhaustion: bool = False,
):
    """Separated-set counts N(n, eps) for every pair, shape (len(n), len(eps)).

    Counts are nonincreasing in eps; monotone nondecreasing in n for the true
    maximum and, up to a small bracket slack, for the greedy packing as well
    (greedy maximal sets are not maximum sets, so counts may wiggle by a few
    units; the test suite bounds the slack on every configuration it runs).
    With ``with_exhaustion`` also returns the per-cell resolution-exhaustion
    flags used to gate growth-rate fits.
    """
    n_list = list(n_list)
    eps_list = list(eps_list)
    if max(n_list) > table.depth:
        raise ValueError("n_list exceeds table depth")

    def cell(args):
        n, eps = args
        res = greedy_separated(table, cloud, n, eps, metric)
        return res.count, _selection_exhausted(table, res.selected, cloud.spacing)

    jobs = [(n, eps) for n in n_list for eps in eps_list]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            flat = list(ex.map(cell, jobs))
    else:
        flat = [cell(j) for j in jobs]
    shape = (len(n_list), len(eps_list))
    counts = np.asarray([c for c, _ in flat], dtype=np.int64).reshape(shape)
    if with_exhaustion:
        exhausted = np.asarray([e for _, e in flat], dtype=bool).reshape(shape)
        return counts, exhausted
    return counts
