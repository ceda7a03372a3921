"""Built-in critically marked polynomial families.

A family packages the fiber map f_lambda, its z-derivative, the marked
critical points c_j(lambda) with multiplicities, and an escape radius
R(lambda) with |z| > R guaranteeing escape to infinity.  All callables are
vectorized: parameters are complex arrays of shape (..., dim) broadcasting
against point arrays of shape (...).

Evaluation is overflow-safe: inputs beyond a degree-dependent magnitude are
mapped to ``AT_INFINITY`` (all built-ins are polynomials fixing infinity),
so orbits clamp instead of producing NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import AT_INFINITY, as_params


class InvalidFamilyError(ValueError):
    """Unknown family identifier or invalid construction arguments."""


@dataclass(frozen=True)
class MarkedFamily:
    family_id: str
    degree: int
    dim_lambda: int
    num_marked: int
    multiplicities: tuple
    eval: Callable  # (lam (...,dim), z (...)) -> (...)
    deriv: Callable  # d f_lambda / dz, affine chart
    marked_point: Callable  # (j in 1..num_marked, lam) -> (...)
    escape_radius: Callable  # (lam) -> (...) real
    # dim-1 families expose the parameter derivatives used by the
    # graph-volume recursion; None otherwise.
    dlambda_eval: Optional[Callable] = None  # d f_lambda(z) / d lambda
    dlambda_marked: Optional[Callable] = None  # d c_j / d lambda
    is_polynomial: bool = True

    @property
    def clamp_magnitude(self):
        # |z|^degree must stay below float overflow
        return min(1e150, 10.0 ** (300.0 // self.degree))

    def params(self, lam):
        return as_params(lam, self.dim_lambda)


def _clamped(degree, fn):
    """Wrap a polynomial fiber map with infinity fixing and overflow clamping."""
    cap = min(1e150, 10.0 ** (300.0 // degree))

    def wrapped(lam, z):
        z = np.asarray(z, dtype=np.complex128)
        safe = np.isfinite(z) & (np.abs(z) <= cap)
        with np.errstate(over="ignore", invalid="ignore"):
            out = fn(lam, np.where(safe, z, 0.0))
        out = np.where(safe, out, AT_INFINITY)
        out = np.where(np.isfinite(out), out, AT_INFINITY)
        if out.ndim == 0:
            return complex(out)
        return out

    return wrapped


def make_unicritical(d: int) -> MarkedFamily:
    """The family f_lambda(z) = z^d + lambda with marked critical point 0.

    The single finite critical point has multiplicity d - 1.
    """
    if not isinstance(d, (int, np.integer)) or d < 2:
        raise InvalidFamilyError(f"unicritical degree must be an integer >= 2, got {d!r}")
    d = int(d)

    def _eval(lam, z):
        lam0 = np.asarray(lam, dtype=np.complex128)[..., 0]
        return z**d + lam0

    def _deriv(lam, z):
        z = np.asarray(z, dtype=np.complex128)
        with np.errstate(invalid="ignore", over="ignore"):
            out = d * z ** (d - 1)
        out = np.where(np.isfinite(z), out, AT_INFINITY)
        if out.ndim == 0:
            return complex(out)
        return out

    def _marked(j, lam):
        if j != 1:
            raise IndexError(f"unicritical family has one marked point, got j={j}")
        lam0 = np.asarray(lam, dtype=np.complex128)[..., 0]
        return np.zeros_like(lam0)

    def _escape_radius(lam):
        lam0 = np.asarray(lam, dtype=np.complex128)[..., 0]
        return np.maximum(2.0, np.abs(lam0) + 1.0)

    def _dlam_eval(lam, z):
        z = np.asarray(z, dtype=np.complex128)
        return np.ones_like(z)

    def _dlam_marked(j, lam):
        if j != 1:
            raise IndexError(f"unicritical family has one marked point, got j={j}")
        lam0 = np.asarray(lam, dtype=np.complex128)[..., 0]
        return np.zeros_like(lam0)

    return MarkedFamily(
        family_id=f"unicritical:{d}",
        degree=d,
        dim_lambda=1,
        num_marked=1,
        multiplicities=(d - 1,),
        eval=_clamped(d, _eval),
        deriv=_deriv,
        marked_point=_marked,
        escape_radius=_escape_radius,
        dlambda_eval=_dlam_eval,
        dlambda_marked=_dlam_marked,
    )


def make_cubic_two_critical() -> MarkedFamily:
    """The two-parameter cubics f_{(a,b)}(z) = z^3 - 3 a^2 z + b.

    Critical points are c_1 = a and c_2 = -a (both simple); dim Lambda = 2.
    """

    def _eval(lam, z):
        lam = np.asarray(lam, dtype=np.complex128)
        a, b = lam[..., 0], lam[..., 1]
        return z**3 - 3.0 * a**2 * z + b

    def _deriv(lam, z):
        lam = np.asarray(lam, dtype=np.complex128)
        a = lam[..., 0]
        z = np.asarray(z, dtype=np.complex128)
        with np.errstate(invalid="ignore", over="ignore"):
            out = 3.0 * z**2 - 3.0 * a**2
        out = np.where(np.isfinite(z), out, AT_INFINITY)
        if out.ndim == 0:
            return complex(out)
        return out

    def _marked(j, lam):
        lam = np.asarray(lam, dtype=np.complex128)
        if j == 1:
            return lam[..., 0]
        if j == 2:
            return -lam[..., 0]
        raise IndexError(f"cubic family has marked points j in {{1, 2}}, got j={j}")

    def _escape_radius(lam):
        lam = np.asarray(lam, dtype=np.complex128)
        a, b = lam[..., 0], lam[..., 1]
        return 2.0 + 2.0 * np.abs(a) + np.abs(b)

    return MarkedFamily(
        family_id="cubic2c",
        degree=3,
        dim_lambda=2,
        num_marked=2,
        multiplicities=(1, 1),
        eval=_clamped(3, _eval),
        deriv=_deriv,
        marked_point=_marked,
        escape_radius=_escape_radius,
    )


def family_from_id(family_id: str) -> MarkedFamily:
    """Resolve the string identifiers used in config files.

    ``"unicritical:d"`` (d an integer >= 2) or ``"cubic2c"``.
    """
    if family_id == "cubic2c":
        return make_cubic_two_critical()
    if family_id.startswith("unicritical:"):
        tail = family_id.split(":", 1)[1]
        try:
            d = int(tail)
        except ValueError:
            raise InvalidFamilyError(f"bad unicritical degree {tail!r}") from None
        return make_unicritical(d)
    raise InvalidFamilyError(f"unknown family identifier {family_id!r}")
