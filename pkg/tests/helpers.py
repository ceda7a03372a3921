"""Brute-force oracles shared by the unit and acceptance suites."""

from itertools import combinations

import numpy as np

from bifentropy.bowen import bif_dist, bif_dist_tilde


def pairwise_dists(table, idxs, n, metric):
    fn = bif_dist_tilde if metric == "tilde" else bif_dist
    m = len(idxs)
    d = np.zeros((m, m))
    for a in range(m):
        for b in range(a + 1, m):
            d[a, b] = d[b, a] = fn(table, int(idxs[a]), int(idxs[b]), n)
    return d


def max_separated_bruteforce(dmat, eps):
    """Maximum eps-separated subset cardinality by exhaustive subset search."""
    m = dmat.shape[0]
    conflict = dmat < eps
    np.fill_diagonal(conflict, False)
    best = 0
    for size in range(m, 0, -1):
        if size <= best:
            break
        for sub in combinations(range(m), size):
            sub = list(sub)
            if not conflict[np.ix_(sub, sub)].any():
                best = size
                break
        if best:
            break
    return best


def min_cover_bruteforce(dmat, eps):
    """Minimum number of eps-balls (centered at points) covering all points."""
    m = dmat.shape[0]
    covers = [frozenset(np.flatnonzero(dmat[i] < eps)) | {i} for i in range(m)]
    allpts = frozenset(range(m))
    for size in range(1, m + 1):
        for centers in combinations(range(m), size):
            hit = frozenset()
            for c in centers:
                hit |= covers[c]
            if hit == allpts:
                return size
    return m
