"""Critical orbits, escape-rate Green functions, and Lyapunov data.

The Green function of a polynomial fiber is the escape rate
G_lambda(z) = lim d^-n log+|f_lambda^n(z)|, computed by iterating until the
orbit clears a freeze threshold and telescoping; once |z| > ~1e12 the tail
of the telescoping series is far below any practical tolerance.  The
Lyapunov potential uses the closed polynomial formula
L = log d + sum_j m_j G(c_j); a backward-orbit Monte Carlo integrator of
log|f'| against the fiber equilibrium measure is kept as an independent
cross-check.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .families import MarkedFamily
from .geometry import Rect, cell_centers, sphere_norm

# Error amplification along orbits goes like exp(n * chi); beyond this depth
# double precision says nothing about individual orbit points.
MAX_ORBIT_DEPTH = 60

_FREEZE = 1e12  # |z| beyond this pins the escape rate to full precision


@dataclass(frozen=True)
class OrbitTable:
    """Precomputed critical orbits for a list of parameters.

    points[p, j, i] is the i-th iterate (i = 0 is the marked point itself) of
    marked point j+1 at parameter p; escaped_at[p, j] is the first i with
    |point| beyond the escape radius, or -1 if the stored orbit never does.
    point_norms caches sqrt(1 + |z|^2) for the chordal-distance kernels.
    """

    family_id: str
    degree: int
    dim_lambda: int
    depth: int
    params: np.ndarray
    points: np.ndarray
    escaped_at: np.ndarray
    point_norms: np.ndarray

    @property
    def num_params(self):
        return self.params.shape[0]

    @property
    def num_marked(self):
        return self.points.shape[1]


def orbit_table(fam: MarkedFamily, params, n: int) -> OrbitTable:
    """Iterate all marked points of ``fam`` to depth ``n`` over ``params``."""
    if n < 1:
        raise ValueError("orbit depth must be >= 1")
    if n > MAX_ORBIT_DEPTH:
        raise ValueError(f"orbit depth {n} exceeds the double-precision cap {MAX_ORBIT_DEPTH}")
    lams = fam.params(params)
    if lams.ndim != 2:
        lams = lams.reshape(-1, fam.dim_lambda)
    npar = lams.shape[0]
    if npar == 0:
        raise ValueError("params must be nonempty")
    k = fam.num_marked

    points = np.empty((npar, k, n), dtype=np.complex128)
    escaped = np.full((npar, k), -1, dtype=np.int64)
    radius = np.asarray(fam.escape_radius(lams), dtype=float)

    for j in range(k):
        z = np.asarray(fam.marked_point(j + 1, lams), dtype=np.complex128)
        z = np.broadcast_to(z, (npar,)).copy()
        for i in range(n):
            points[:, j, i] = z
            with np.errstate(invalid="ignore"):
                az = np.where(np.isfinite(z), np.abs(z), np.inf)
            hit = (escaped[:, j] < 0) & (az > radius)
            escaped[hit, j] = i
            if i + 1 < n:
                z = np.asarray(fam.eval(lams, z), dtype=np.complex128)

    return OrbitTable(
        family_id=fam.family_id,
        degree=fam.degree,
        dim_lambda=fam.dim_lambda,
        depth=n,
        params=lams,
        points=points,
        escaped_at=escaped,
        point_norms=sphere_norm(points),
    )


def orbit_table_to_csv(table: OrbitTable, path):
    """Debug dump; columns: param_index, j, i, re, im, escaped."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["param_index", "j", "i", "re", "im", "escaped"])
        for p in range(table.num_params):
            for j in range(table.num_marked):
                esc = int(table.escaped_at[p, j])
                for i in range(table.depth):
                    z = table.points[p, j, i]
                    w.writerow([p, j + 1, i, "%.17g" % z.real, "%.17g" % z.imag, esc])


# ---------------------------------------------------------------------------
# Green functions


def green_field(fam: MarkedFamily, lams, z0, tol: float = 1e-10, max_iter: int = 2000):
    """Vectorized escape rates G_lambda(z0) with low-confidence flags.

    Returns (g, low_conf).  g >= 0; g == 0 exactly when the orbit stays below
    the freeze threshold within ``max_iter``.  low_conf marks orbits that were
    still near the escape boundary when the iteration cap hit (the returned
    value 0 may then be an underestimate).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not fam.is_polynomial:
        raise ValueError("escape-rate Green functions need a polynomial family")
    lams = fam.params(lams)
    if lams.ndim != 2:
        lams = lams.reshape(-1, fam.dim_lambda)
    npar = lams.shape[0]
    radius = np.asarray(fam.escape_radius(lams), dtype=float)
    freeze = np.maximum(_FREEZE, 2.0 * radius)
    d = float(fam.degree)

    z = np.asarray(z0, dtype=np.complex128)
    z = np.broadcast_to(z, (npar,)).copy()

    g = np.zeros(npar)
    active = np.arange(npar)
    z_act = z
    last_abs = np.zeros(npar)
    for m in range(max_iter + 1):
        with np.errstate(invalid="ignore"):
            az = np.where(np.isfinite(z_act), np.abs(z_act), np.inf)
        done = az > freeze[active]
        if done.any():
            idx = active[done]
            g[idx] = np.log(az[done]) * d ** (-float(m))
            keep = ~done
            active = active[keep]
            z_act = z_act[keep]
        if active.size == 0 or m == max_iter:
            last_abs[active] = az[~done] if done.any() else az
            break
        z_act = np.asarray(fam.eval(lams[active], z_act), dtype=np.complex128)

    low_conf = np.zeros(npar, dtype=bool)
    if active.size:
        low_conf[active] = last_abs[active] > 0.9 * radius[active]
    return g, low_conf


def green_function(fam: MarkedFamily, lam, z, tol: float = 1e-10, max_iter: int = 2000) -> float:
    """Escape rate G_lambda(z) of a single point (additive error << tol)."""
    g, _ = green_field(fam, fam.params(lam).reshape(1, -1), z, tol=tol, max_iter=max_iter)
    return float(g[0])


def lyapunov_field(fam: MarkedFamily, lams, tol: float = 1e-10, max_iter: int = 2000):
    """Lyapunov potential L = log d + sum_j m_j G(c_j), vectorized.

    Returns (L, low_conf) with low_conf the OR of the per-critical-point
    Green flags.
    """
    lams = fam.params(lams)
    if lams.ndim != 2:
        lams = lams.reshape(-1, fam.dim_lambda)
    L = np.full(lams.shape[0], np.log(fam.degree))
    low = np.zeros(lams.shape[0], dtype=bool)
    for j in range(fam.num_marked):
        c = fam.marked_point(j + 1, lams)
        g, flag = green_field(fam, lams, c, tol=tol, max_iter=max_iter)
        L = L + fam.multiplicities[j] * g
        low |= flag
    return L, low


def lyapunov_L(fam: MarkedFamily, lam, tol: float = 1e-10, max_iter: int = 2000) -> float:
    L, _ = lyapunov_field(fam, fam.params(lam).reshape(1, -1), tol=tol, max_iter=max_iter)
    return float(L[0])


# ---------------------------------------------------------------------------
# Lyapunov exponents along critical orbits


def critical_lyapunov_field(fam: MarkedFamily, lams, j: int, n: int):
    """(1/n) log |(f^n)'(f(c_j))| for every parameter, as a running log-sum.

    Orbits that hit a critical point exactly come back -inf (degenerate);
    escaped orbits accumulate +inf derivative factors and come back +inf.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    lams = fam.params(lams)
    if lams.ndim != 2:
        lams = lams.reshape(-1, fam.dim_lambda)
    npar = lams.shape[0]
    c = np.asarray(fam.marked_point(j, lams), dtype=np.complex128)
    w = np.asarray(fam.eval(lams, np.broadcast_to(c, (npar,))), dtype=np.complex128)
    s = np.zeros(npar)
    degenerate = np.zeros(npar, dtype=bool)
    for _ in range(n):
        dv = np.asarray(fam.deriv(lams, w), dtype=np.complex128)
        with np.errstate(invalid="ignore"):
            adv = np.where(np.isfinite(dv), np.abs(dv), np.inf)
        degenerate |= adv == 0.0
        with np.errstate(divide="ignore"):
            s = s + np.where(adv > 0.0, np.log(adv), 0.0)
        w = np.asarray(fam.eval(lams, w), dtype=np.complex128)
    out = np.where(degenerate, -np.inf, s / n)
    return out


def critical_lyapunov_exponent(fam: MarkedFamily, lam, j: int, n: int) -> float:
    return float(critical_lyapunov_field(fam, fam.params(lam).reshape(1, -1), j, n)[0])


def lyapunov_backward_mc(
    fam: MarkedFamily,
    lam,
    n_chains: int = 256,
    n_steps: int = 1000,
    burn_in: int = 100,
    seed: int = 0,
) -> float:
    """Monte Carlo Lyapunov exponent by backward orbits.

    Draws from the fiber equilibrium measure by pulling a generic point back
    through uniformly chosen preimages, then averages log|f'|.  Kept as an
    independent oracle for :func:`lyapunov_L`; converges like 1/sqrt(samples).
    """
    lams = fam.params(lam).reshape(1, -1)
    rng = np.random.default_rng(seed)
    d = fam.degree
    r0 = float(np.asarray(fam.escape_radius(lams))[0])
    total = 0.0
    count = 0

    if fam.family_id.startswith("unicritical:"):
        lam0 = complex(lams[0, 0])
        w = np.full(n_chains, r0 + 0.5, dtype=np.complex128)
        for step in range(n_steps):
            root = (w - lam0) ** (1.0 / d)
            k = rng.integers(0, d, size=n_chains)
            w = root * np.exp(2j * np.pi * k / d)
            if step >= burn_in:
                total += float(np.sum(np.log(np.abs(d * w ** (d - 1)))))
                count += n_chains
        return total / count

    # generic polynomial fallback: per-chain numpy root solves
    for _ in range(n_chains):
        w = complex(r0 + 0.5)
        for step in range(n_steps):
            coeffs = _preimage_coeffs(fam, lams, w)
            roots = np.roots(coeffs)
            w = complex(roots[rng.integers(0, len(roots))])
            if step >= burn_in:
                dv = fam.deriv(lams, np.asarray(w))
                total += float(np.log(np.abs(dv)))
                count += 1
    return total / count


def _preimage_coeffs(fam: MarkedFamily, lams, w):
    """Coefficients of f_lambda(z) - w for the built-in polynomial families."""
    if fam.family_id == "cubic2c":
        a, b = complex(lams[0, 0]), complex(lams[0, 1])
        return [1.0, 0.0, -3.0 * a**2, b - w]
    if fam.family_id.startswith("unicritical:"):
        lam0 = complex(lams[0, 0])
        coeffs = [1.0] + [0.0] * (fam.degree - 1) + [lam0 - w]
        return coeffs
    raise NotImplementedError(f"no preimage solver for {fam.family_id}")


# ---------------------------------------------------------------------------
# Escape-time membership (test oracle and boundary-band construction)


def escape_time_grid(fam: MarkedFamily, region: Rect, nx: int, ny: int, max_iter: int = 400):
    """First escape time of any marked orbit per grid cell; -1 if none within cap."""
    re, im = cell_centers(region, nx, ny)
    lam0 = (re[np.newaxis, :] + 1j * im[:, np.newaxis]).ravel()
    lams = fam.params(lam0)
    radius = np.asarray(fam.escape_radius(lams), dtype=float)
    times = np.full(lam0.size, -1, dtype=np.int64)

    for j in range(fam.num_marked):
        z = np.asarray(fam.marked_point(j + 1, lams), dtype=np.complex128).copy()
        active = np.arange(lam0.size)
        z_act = z
        for i in range(max_iter + 1):
            with np.errstate(invalid="ignore"):
                az = np.where(np.isfinite(z_act), np.abs(z_act), np.inf)
            esc = az > radius[active]
            if esc.any():
                idx = active[esc]
                hit = (times[idx] < 0) | (times[idx] > i)
                times[idx[hit]] = i
                active = active[~esc]
                z_act = z_act[~esc]
            if active.size == 0 or i == max_iter:
                break
            z_act = np.asarray(fam.eval(lams[active], z_act), dtype=np.complex128)

    return times.reshape(ny, nx)
