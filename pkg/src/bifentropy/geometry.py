"""Riemann-sphere and parameter-space geometry.

Points of the sphere are complex128 values; the point at infinity is the
marker ``AT_INFINITY`` (real part ``inf``).  All distances use the chordal
metric, normalized so the sphere has diameter 1:

    sigma(x, y) = |x - y| / sqrt((1 + |x|^2) (1 + |y|^2)),

with the usual limits at infinity (sigma(x, inf) = 1/sqrt(1+|x|^2)).
Parameters live in C^dim (dim 1 or 2) and carry the Euclidean metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

AT_INFINITY = complex(np.inf, 0.0)

# |z|^2 is capped below float overflow; families clamp orbits long before this.
_HUGE = 1e150


class DimensionMismatchError(ValueError):
    """Raised when two parameters do not live in the same parameter space."""


def sphere_norm(z):
    """sqrt(1 + |z|^2), elementwise; ``inf`` for points at infinity."""
    z = np.asarray(z, dtype=np.complex128)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.hypot(1.0, np.abs(z))
    out = np.where(np.isfinite(z), out, np.inf)
    if out.ndim == 0:
        return float(out)
    return out


def chordal_dist(x, y, xnorm=None, ynorm=None):
    """Chordal distance between sphere points, elementwise in [0, 1].

    ``xnorm``/``ynorm`` may pass precomputed ``sphere_norm`` values (the hot
    loops of the packing code reuse them).
    """
    x = np.asarray(x, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    if xnorm is None:
        xnorm = sphere_norm(x)
    if ynorm is None:
        ynorm = sphere_norm(y)
    xfin = np.isfinite(x)
    yfin = np.isfinite(y)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        both = np.abs(np.where(xfin & yfin, x - y, 0.0)) / (
            np.asarray(xnorm) * np.asarray(ynorm)
        )
        one_inf = np.where(xfin, 1.0 / np.asarray(xnorm), 1.0 / np.asarray(ynorm))
    d = np.where(xfin & yfin, both, np.where(xfin ^ yfin, one_inf, 0.0))
    d = np.minimum(d, 1.0)
    if d.ndim == 0:
        return float(d)
    return d


def as_params(lam, dim):
    """Normalize ``lam`` to a complex array of shape (..., dim).

    Scalars and bare 1-D arrays are accepted for dim-1 families.
    """
    arr = np.asarray(lam, dtype=np.complex128)
    if dim == 1:
        if arr.ndim == 0 or arr.shape[-1] != 1:
            arr = arr[..., np.newaxis]
        return arr
    if arr.ndim == 0 or arr.shape[-1] != dim:
        raise DimensionMismatchError(
            f"expected parameters with {dim} coordinates, got shape {arr.shape}"
        )
    return arr


def param_dist(lam1, lam2):
    """Euclidean distance on C^dim between two parameters (elementwise)."""
    a = np.asarray(lam1, dtype=np.complex128)
    b = np.asarray(lam2, dtype=np.complex128)
    if a.ndim == 0:
        a = a[np.newaxis]
    if b.ndim == 0:
        b = b[np.newaxis]
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatchError(
            f"parameter dimensions differ: {a.shape[-1]} vs {b.shape[-1]}"
        )
    d = np.sqrt(np.sum(np.abs(a - b) ** 2, axis=-1))
    if d.ndim == 0:
        return float(d)
    return d


# ---------------------------------------------------------------------------
# Parameter-space regions (dim 1).  Rectangles are the ambient windows; disks
# and annuli select the compact sets K the estimators run on.


@dataclass(frozen=True)
class Rect:
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError(f"degenerate rectangle {self}")

    @property
    def width(self):
        return self.re_max - self.re_min

    @property
    def height(self):
        return self.im_max - self.im_min

    @property
    def area(self):
        return self.width * self.height

    @property
    def center(self):
        return complex(
            0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max)
        )

    @property
    def diameter(self):
        return float(np.hypot(self.width, self.height))

    def contains(self, z):
        z = np.asarray(z, dtype=np.complex128)
        return (
            (z.real >= self.re_min)
            & (z.real <= self.re_max)
            & (z.imag >= self.im_min)
            & (z.imag <= self.im_max)
        )

    def bounding_box(self):
        return self


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("disk radius must be positive")

    def contains(self, z):
        z = np.asarray(z, dtype=np.complex128)
        return np.abs(z - self.center) <= self.radius

    def bounding_box(self):
        c, r = self.center, self.radius
        return Rect(c.real - r, c.real + r, c.imag - r, c.imag + r)


@dataclass(frozen=True)
class Annulus:
    center: complex
    r_inner: float
    r_outer: float

    def __post_init__(self):
        if not (0 <= self.r_inner < self.r_outer):
            raise ValueError("annulus needs 0 <= r_inner < r_outer")

    def contains(self, z):
        z = np.asarray(z, dtype=np.complex128)
        r = np.abs(z - self.center)
        return (r >= self.r_inner) & (r <= self.r_outer)

    def bounding_box(self):
        c, r = self.center, self.r_outer
        return Rect(c.real - r, c.real + r, c.imag - r, c.imag + r)


def cell_centers(region: Rect, nx: int, ny: int):
    """Midpoints of an nx-by-ny cell cover of ``region``.

    Returns (re (nx,), im (ny,)); the full mesh is im[:, None]*1j + re[None, :].
    """
    hx = region.width / nx
    hy = region.height / ny
    re = region.re_min + hx * (np.arange(nx) + 0.5)
    im = region.im_min + hy * (np.arange(ny) + 0.5)
    return re, im
