"""
Sphere-plane geometry under the proximity force approximation.

A plate with spherical curvature radius ``R`` faces a flat plate; both have
radius ``Rm``. Locally the gap at radial position ``r`` is

    gap(r; d) = d + r**2 / (2 R)

and each annulus contributes like a parallel-plate capacitor. The weight
densities used by the energy and force minimizers are

    energy:  w(r; d)  = r / gap
    force:   w2(r; d) = r / gap**2 = -dw/dd

All lengths are in meters, logarithms are natural.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

# relative slack on the r <= Rm check, for points generated as Rm*cos/sin
_R_SLACK = 1e-12


@dataclass(frozen=True)
class Geometry:
    """Sphere curvature radius ``R`` and plate radius ``Rm`` (meters)."""

    R: float
    Rm: float

    def __post_init__(self):
        if not (self.R > 0 and self.Rm > 0):
            raise DomainError(f"R and Rm must be positive, got R={self.R}, Rm={self.Rm}")
        if self.Rm > self.R:
            raise DomainError(f"Rm={self.Rm} exceeds R={self.R}; spherical cap does not cover the plate")

    @property
    def d2(self) -> float:
        """Sag of the sphere over the plate radius, Rm**2 / 2R."""
        return self.Rm**2 / (2.0 * self.R)

    def patch_scale(self, r0: float) -> float:
        """Sag over one patch radius, r0**2 / 2R."""
        return r0**2 / (2.0 * self.R)


def _check_d(d):
    d = np.asarray(d, dtype=float)
    if np.any(~(d > 0)):
        raise DomainError("separation d must be > 0")
    return d


def _check_r(geom: Geometry, r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > geom.Rm * (1 + _R_SLACK)):
        raise DomainError(f"radial position outside [0, Rm={geom.Rm}]")
    return r


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def gap(geom: Geometry, d, r):
    """Local plate separation d + r**2/2R."""
    d = _check_d(d)
    r = _check_r(geom, r)
    return _out(d + r * r / (2.0 * geom.R))


def energy_kernel(geom: Geometry, d, r):
    """Energy weight density r / gap(r; d). Peaks at r = sqrt(2 R d)."""
    g = gap(geom, d, r)
    return _out(np.asarray(r, dtype=float) / g)


def force_kernel(geom: Geometry, d, r):
    """Force weight density r / gap(r; d)**2, the negative d-derivative of the energy kernel."""
    g = np.asarray(gap(geom, d, r))
    return _out(np.asarray(r, dtype=float) / (g * g))


def kernel_norms(geom: Geometry, d) -> tuple[float, float]:
    """
    Closed-form integrals of the energy and force kernels over [0, Rm].

    Returns
    -------
    energy_norm : float
        R * ln(1 + Rm**2 / (2 R d)), in meters.
    force_norm : float
        R * (Rm**2/2R) / (d (d + Rm**2/2R)), in 1/m.
    """
    d = float(_check_d(d))
    d2 = geom.d2
    return geom.R * np.log1p(d2 / d), geom.R * d2 / (d * (d + d2))


def cell_weights(geom: Geometry, d: float, edges: np.ndarray, kind: str = "energy") -> np.ndarray:
    """
    Exact kernel integrals over the radial cells [edges[k], edges[k+1]].

    ``kind`` is ``"energy"``, ``"force"`` or ``"area"`` (plain r dr). The
    cell integrals telescope, so their sum reproduces :func:`kernel_norms`.
    """
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1], edges[1:]
    half_dr2 = 0.5 * (hi - lo) * (hi + lo)
    if kind == "area":
        return half_dr2
    d = float(_check_d(d))
    g_lo = d + lo * lo / (2.0 * geom.R)
    if kind == "energy":
        return geom.R * np.log1p(half_dr2 / (geom.R * g_lo))
    if kind == "force":
        g_hi = d + hi * hi / (2.0 * geom.R)
        return half_dr2 / (g_lo * g_hi)
    raise ValueError(f"unknown kernel kind {kind!r}")


@dataclass(frozen=True)
class Validity:
    """Advisory model-validity flags at one separation."""

    pfa_ok: bool
    patch_image_ok: bool

    def as_dict(self) -> dict:
        return {"pfa_ok": self.pfa_ok, "patch_image_ok": self.patch_image_ok}


def validity(geom: Geometry, d: float, r0: float) -> Validity:
    """
    Check the two conditions under which the PFA patch picture holds.

    ``pfa_ok`` requires d < Rm**2/2R; ``patch_image_ok`` requires
    r0 > sqrt(2 R d), i.e. each patch sees mainly its own image. Both are
    strict. A failed flag means reduced accuracy, never an error.
    """
    d = float(_check_d(d))
    if not r0 > 0:
        raise DomainError(f"patch radius r0 must be > 0, got {r0}")
    return Validity(pfa_ok=bool(d < geom.d2), patch_image_ok=bool(r0 > np.sqrt(2.0 * geom.R * d)))
