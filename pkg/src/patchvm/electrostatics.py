"""
PFA electrostatic energy, force and the minimizing (contact) voltage.

The free energy at applied voltage Va is

    U(Va) = (eps0 / 2) * int int (Va - V_p)**2 w(r; d) dphi dr

which is quadratic in Va, so the minimizing voltage is the kernel-weighted
mean of the ring-averaged potential. Three routes are provided:

* :func:`vm_energy` / :func:`vm_force`: weighted means (closed form);
* :func:`vm_analytic`: boundary terms plus the remainder Q(d) obtained by
  integrating the weighted mean by parts against dV_p/dr;
* :func:`vm_scan`: brute-force minimization of U over a voltage grid, kept
  as an independent check.

Radial integrals use exact kernel integrals over cells whose boundaries are
midpoints between profile nodes, so a step in the ring average placed between
a node pair is integrated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DomainError, NumericalError
from .geometry import Geometry, Validity, cell_weights, validity
from .patches import PatchMap, PolarSamples, RadialGrid, RadialProfile, profile_area_average

EPSILON_0 = 8.8541878128e-12  # F/m


@dataclass(frozen=True)
class QuadratureSpec:
    """
    Discretization of the polar integrals.

    ``n_phi=None`` selects the automatic angular rule (>= 8 samples per
    patch, >= 64 per ring). ``d_min`` fixes the radial grid; when None the
    grid is adapted to the separation of each call.
    """

    nodes_per_decade: int = 24
    n_phi: int | None = None
    d_min: float | None = None

    def __post_init__(self):
        if self.nodes_per_decade < 24:
            raise ConfigurationError("quadrature needs at least 24 radial nodes per decade")
        if self.n_phi is not None and self.n_phi < 64:
            raise ConfigurationError("quadrature needs at least 64 angular samples")
        if self.d_min is not None and not self.d_min > 0:
            raise ConfigurationError("d_min must be > 0")

    def grid(self, geom: Geometry, d: float, r0: float) -> RadialGrid:
        d_min = d if self.d_min is None else min(self.d_min, d)
        return RadialGrid.for_distance(geom, d_min, r0, self.nodes_per_decade)


def _check_d(d):
    if not d > 0:
        raise DomainError(f"separation d must be > 0, got {d}")
    return float(d)


class PolarGrid:
    """
    A patch map sampled once on a polar grid, reusable across separations.

    ``d_min`` is the smallest separation the grid must resolve.
    """

    def __init__(self, patch_map: PatchMap, d_min: float, quad: QuadratureSpec | None = None):
        quad = quad or QuadratureSpec()
        _check_d(d_min)
        self.quad = quad
        self.d_min = float(d_min)
        grid = quad.grid(patch_map.geometry, d_min, patch_map.r0)
        self.samples = PolarSamples(patch_map, grid, quad.n_phi)
        self.patch_map = patch_map
        self.geometry = patch_map.geometry

    @property
    def profile(self) -> RadialProfile:
        return self.samples.profile

    def vm(self, d: float, kind: str = "energy") -> float:
        return profile_vm(self.profile, self.geometry, d, kind)

    def area_average(self) -> float:
        """Surface average on the same samples; the d -> infinity limit of :meth:`vm`."""
        return profile_area_average(self.profile)

    def quadratic_form(self, d: float, va, kind: str = "energy"):
        """(eps0/2) * sum over samples of weight * (Va - V_p)**2 * 2 pi; ``va`` may be an array."""
        s = self.samples
        w = s.cell_weights(_check_d(d), kind)[s.owner] * s.fraction
        va = np.asarray(va, dtype=float)
        diff = va[..., None] - s.values
        out = EPSILON_0 * math.pi * (diff * diff) @ w
        return float(out) if out.ndim == 0 else out


def _grid_for(patch_map: PatchMap, d: float, quad: QuadratureSpec | None) -> PolarGrid:
    quad = quad or QuadratureSpec()
    return PolarGrid(patch_map, d if quad.d_min is None else min(quad.d_min, d), quad)


def free_energy(patch_map: PatchMap, d: float, va, quad: QuadratureSpec | None = None):
    """
    Electrostatic free energy (J) at separation ``d`` and applied voltage ``va``.

    ``va`` may be an array; the polar samples are evaluated once.
    """
    d = _check_d(d)
    return _grid_for(patch_map, d, quad).quadratic_form(d, va, "energy")


def force(patch_map: PatchMap, d: float, va, quad: QuadratureSpec | None = None):
    """Attractive electrostatic force magnitude (N), i.e. -dU/dd."""
    d = _check_d(d)
    return _grid_for(patch_map, d, quad).quadratic_form(d, va, "force")


def profile_vm(profile: RadialProfile, geom: Geometry, d: float, kind: str = "energy") -> float:
    """Kernel-weighted mean of a radial profile (``kind`` = energy or force)."""
    _check_profile(profile, geom)
    w = cell_weights(geom, _check_d(d), profile.edges, kind)
    # offset by the center value: exact for constant profiles
    v0 = profile.values[0]
    return float(v0 + np.dot(w, profile.values - v0) / w.sum())


def _source_vm(source, d, quad, kind):
    if isinstance(source, RadialProfile):
        raise TypeError("use profile_vm(profile, geom, d) for radial profiles")
    if isinstance(source, PolarGrid):
        return source.vm(_check_d(d), kind)
    d = _check_d(d)
    return _grid_for(source, d, quad).vm(d, kind)


def vm_energy(source: PatchMap | PolarGrid, d: float, quad: QuadratureSpec | None = None) -> float:
    """
    Applied voltage minimizing the free energy at separation ``d``.

    Equals the ring-averaged potential weighted by r / (d + r**2/2R).
    ``source`` may be a map or a pre-sampled :class:`PolarGrid`.
    """
    return _source_vm(source, d, quad, "energy")


def vm_force(source: PatchMap | PolarGrid, d: float, quad: QuadratureSpec | None = None) -> float:
    """Applied voltage minimizing the force; weights r / (d + r**2/2R)**2."""
    return _source_vm(source, d, quad, "force")


def vm_scan(
    patch_map: PatchMap,
    d: float,
    quad: QuadratureSpec | None = None,
    window: tuple[float, float] | None = None,
    steps: int = 1000,
) -> float:
    """
    Minimizing voltage by direct search: U on a uniform Va grid, then a
    parabola through the lowest sample and its neighbours.

    The default window is the map's potential range padded by 10%.

    Raises
    ------
    NumericalError
        If the grid minimum sits on a window edge (true minimum outside).
    """
    d = _check_d(d)
    if steps < 1000:
        raise ConfigurationError("vm_scan needs at least 1000 steps")
    if window is None:
        lo, hi = patch_map.potential_range()
        pad = 0.1 * (hi - lo) if hi > lo else max(abs(lo), 1.0)
        window = (lo - pad, hi + pad)
    lo, hi = map(float, window)
    if not hi > lo:
        raise ConfigurationError("scan window must have positive width")
    va = np.linspace(lo, hi, steps + 1)
    u = _grid_for(patch_map, d, quad).quadratic_form(d, va, "energy")
    i = int(np.argmin(u))
    if i == 0 or i == steps:
        raise NumericalError(f"scan minimum at window edge Va={va[i]:.6g}; widen the window")
    h = va[1] - va[0]
    um, u0, up = u[i - 1], u[i], u[i + 1]
    curv = um - 2 * u0 + up
    if not curv > 0:
        return float(va[i])
    return float(va[i] + 0.5 * h * (um - up) / curv)


# -- integration by parts ------------------------------------------------------------


def _check_profile(profile: RadialProfile, geom: Geometry):
    r = profile.r_nodes
    if r[0] != 0 or abs(r[-1] - geom.Rm) > 1e-12 * geom.Rm:
        raise DomainError("profile must span [0, Rm]")


def compute_Q(profile: RadialProfile, geom: Geometry, d: float) -> float:
    """
    Remainder of the integrated-by-parts minimizer condition.

    Q(d) = -sum_k ln(d + rbar_k**2/2R) * (V_{k+1} - V_k), with rbar_k the
    midpoint of nodes k and k+1. For a single step V1 -> V2 at radius a
    this is -(V2 - V1) ln(d + a**2/2R).
    """
    _check_profile(profile, geom)
    d = _check_d(d)
    mid = profile.edges[1:-1]
    return float(-np.dot(np.log(d + mid * mid / (2.0 * geom.R)), np.diff(profile.values)))


def vm_analytic(profile: RadialProfile, geom: Geometry, d: float) -> float:
    """
    Minimizing voltage from boundary values and Q(d)::

        V_m = [V(Rm) ln(d + Rm**2/2R) - V(0) ln d + Q(d)] / [ln(d + Rm**2/2R) - ln d]

    Works at separations far below what quadrature can resolve (e.g. 1e-30 m).
    """
    q = compute_Q(profile, geom, d)
    d = float(d)
    log_edge = math.log(d + geom.d2)
    log_d = math.log(d)
    num = profile.edge_value * log_edge - profile.center_value * log_d + q
    return num / math.log1p(geom.d2 / d)


# -- combined result ---------------------------------------------------------------------


@dataclass(frozen=True)
class VmResult:
    d: float
    vm_energy: float
    vm_force: float
    vm_analytic: float
    Q_of_d: float
    validity: Validity


def evaluate(source: PatchMap | PolarGrid, d: float, quad: QuadratureSpec | None = None) -> VmResult:
    """All three minimizing voltages and Q(d) at one separation."""
    d = _check_d(d)
    grid = source if isinstance(source, PolarGrid) else _grid_for(source, d, quad)
    prof, geom = grid.profile, grid.geometry
    return VmResult(
        d=d,
        vm_energy=grid.vm(d, "energy"),
        vm_force=grid.vm(d, "force"),
        vm_analytic=vm_analytic(prof, geom, d),
        Q_of_d=compute_Q(prof, geom, d),
        validity=validity(geom, d, grid.patch_map.r0),
    )
