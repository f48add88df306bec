"""
Surface patch maps: circular patches of fixed potential over a background.

A :class:`PatchMap` realizes the surface potential V_p(r, phi). Where disks
overlap, the disk whose center is nearest to the query point wins (ties go
to the lowest list index). Ring averages use uniform angular sampling, and
radial profiles sample ring averages on a log-spaced radial grid that also
resolves the kernel scale sqrt(2 R d).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import ConfigurationError, DomainError, ParseError
from .geometry import Geometry, _R_SLACK, cell_weights

FILE_FORMAT = "patchvm.patchmap"
FILE_VERSION = 1

# half-width (relative) of the node pair bracketing a radial step
_PIN = 1e-9
# radial nodes per patch radius in the default grid
RINGS_PER_PATCH = 8


@dataclass(frozen=True)
class Disk:
    """Circular patch: center (cx, cy), radius, potential. SI units."""

    cx: float
    cy: float
    radius: float
    potential: float

    @property
    def offset(self) -> float:
        return math.hypot(self.cx, self.cy)


@dataclass(frozen=True)
class PatchMap:
    """
    Surface potential of the plates as a background plus circular patches.

    ``r0_nominal`` and ``v0_nominal`` record the generator parameters and set
    the default angular sampling density; ``seed`` is None for maps built
    deterministically.
    """

    geometry: Geometry
    background: float = 0.0
    disks: tuple[Disk, ...] = ()
    r0_nominal: float | None = None
    v0_nominal: float | None = None
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "disks", tuple(self.disks))
        Rm = self.geometry.Rm
        for i, disk in enumerate(self.disks):
            if not disk.radius > 0:
                raise ConfigurationError(f"disk {i}: radius must be > 0")
            if disk.offset > Rm + disk.radius:
                raise ConfigurationError(f"disk {i}: does not intersect the plate")
        if self.r0_nominal is not None and not self.r0_nominal > 0:
            raise ConfigurationError("r0_nominal must be > 0")

    # -- vectorized lookup ---------------------------------------------------

    @cached_property
    def _arrays(self):
        if not self.disks:
            return np.zeros((0, 2)), np.zeros(0), np.zeros(0)
        a = np.array([(k.cx, k.cy, k.radius, k.potential) for k in self.disks], dtype=float)
        return a[:, :2], a[:, 2], a[:, 3]

    @cached_property
    def _tree(self):
        centers, _, _ = self._arrays
        return cKDTree(centers) if len(centers) else None

    @property
    def r0(self) -> float:
        """Patch scale used by the sampling rules."""
        if self.r0_nominal is not None:
            return self.r0_nominal
        if self.disks:
            return float(self._arrays[1].min())
        return self.geometry.Rm

    def potential_at(self, x, y):
        """Potential at plate coordinates (x, y); arrays broadcast."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        shape = x.shape
        x, y = x.ravel(), y.ravel()
        if np.any(np.hypot(x, y) > self.geometry.Rm * (1 + _R_SLACK)):
            raise DomainError("point outside the plate")
        out = np.full(x.shape, float(self.background))
        centers, radii, pots = self._arrays
        n = len(radii)
        if n and len(x):
            pts = np.column_stack([x, y])
            bound = radii.max() * (1 + 1e-9)
            k = min(n, 8)
            while True:
                dist, idx = self._tree.query(pts, k=k, distance_upper_bound=bound)
                dist, idx = dist.reshape(len(pts), k), idx.reshape(len(pts), k)
                if k == n or not np.isfinite(dist[:, -1]).any():
                    break
                k = min(n, 2 * k)
            valid = idx < n
            idx = np.where(valid, idx, 0)
            covered = valid & (dist <= radii[idx])
            key = np.where(covered, dist, np.inf)
            best = key.min(axis=1)
            hit = np.isfinite(best)
            tie = covered & (key == best[:, None])
            chosen = np.where(tie, idx, n).min(axis=1)
            out[hit] = pots[chosen[hit]]
        return float(out[0]) if shape == () else out.reshape(shape)

    # -- derived maps ----------------------------------------------------------

    def scaled(self, factor: float) -> "PatchMap":
        """Copy with every potential (background included) multiplied by ``factor``."""
        disks = tuple(Disk(k.cx, k.cy, k.radius, k.potential * factor) for k in self.disks)
        v0 = None if self.v0_nominal is None else self.v0_nominal * abs(factor)
        return PatchMap(self.geometry, self.background * factor, disks, self.r0_nominal, v0, self.seed)

    def potential_range(self) -> tuple[float, float]:
        vals = [self.background] + [k.potential for k in self.disks]
        return min(vals), max(vals)

    def step_radii(self) -> list[float]:
        """Radii where the ring average jumps: edges of disks centered on the axis."""
        Rm = self.geometry.Rm
        return sorted({k.radius for k in self.disks if k.offset <= 1e-12 * k.radius and k.radius < Rm})


def potential_at(patch_map: PatchMap, x, y):
    """Surface potential at (x, y). See :meth:`PatchMap.potential_at`."""
    return patch_map.potential_at(x, y)


# -- generators ------------------------------------------------------------------


def realization_seed(master_seed: int, index: int) -> int:
    """64-bit seed of realization ``index`` derived from ``master_seed``."""
    lo, hi = np.random.SeedSequence([int(master_seed), int(index)]).generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


def generate_homogeneous(
    geom: Geometry, r0: float, v0: float, jitter: float = 0.0, seed: int = 0
) -> PatchMap:
    """
    Homogeneous random patch map.

    Disks of radius ``r0`` sit on a hexagonal lattice of pitch ``2*r0``
    covering the plate (lattice sites with |site| <= Rm + r0/2, so rings
    near the rim are covered about as densely as interior ones while the
    patch count stays close to the area ratio). Each center is
    displaced uniformly within a circle of radius ``jitter*2*r0`` and each
    potential is +v0 or -v0 with equal probability. Background is 0.

    Raises
    ------
    ConfigurationError
        If r0 >= Rm, v0 < 0 or jitter outside [0, 0.5].
    """
    if not 0 < r0 < geom.Rm:
        raise ConfigurationError(f"r0={r0} must satisfy 0 < r0 < Rm={geom.Rm}")
    if v0 < 0:
        raise ConfigurationError("v0 must be >= 0")
    if not 0 <= jitter <= 0.5:
        raise ConfigurationError("jitter must lie in [0, 0.5]")

    pitch = 2.0 * r0
    row = pitch * math.sqrt(3.0) / 2.0
    reach = geom.Rm + 0.5 * r0
    nj = math.ceil(reach / row)
    ni = math.ceil(reach / pitch) + nj
    j, i = np.meshgrid(np.arange(-nj, nj + 1), np.arange(-ni, ni + 1), indexing="ij")
    x = ((i + 0.5 * j) * pitch).ravel()
    y = (j * row).ravel()
    keep = np.hypot(x, y) <= reach
    x, y = x[keep], y[keep]

    rng = np.random.default_rng(seed)
    n = len(x)
    signs = rng.integers(0, 2, size=n) * 2 - 1
    rho = jitter * pitch * np.sqrt(rng.random(n))
    theta = 2.0 * np.pi * rng.random(n)
    x = x + rho * np.cos(theta)
    y = y + rho * np.sin(theta)
    disks = tuple(Disk(float(a), float(b), float(r0), float(s * v0)) for a, b, s in zip(x, y, signs))
    return PatchMap(geom, 0.0, disks, float(r0), float(v0), int(seed))


def generate_single_patch(
    geom: Geometry, r0: float, v0: float, center: tuple[float, float] = (0.0, 0.0), background: float = 0.0
) -> PatchMap:
    """One disk of radius ``r0`` and potential ``v0`` at ``center`` (default: on axis)."""
    if not 0 < r0 <= geom.Rm:
        raise ConfigurationError(f"r0={r0} must satisfy 0 < r0 <= Rm={geom.Rm}")
    disk = Disk(float(center[0]), float(center[1]), float(r0), float(v0))
    return PatchMap(geom, float(background), (disk,), float(r0), abs(float(v0)), None)


# -- ring and radial averages ----------------------------------------------------


def default_n_phi(r: float, r0: float) -> int:
    """
    At least 8 angular samples per patch crossed by the ring, never fewer
    than 64; rounded up to a multiple of 4 so the samples are symmetric
    under reflections about both axes.
    """
    n = max(64, math.ceil(8.0 * 2.0 * math.pi * r / (2.0 * r0)))
    return -(-n // 4) * 4


def _mean(samples: np.ndarray) -> float:
    # exact for constant rings; samples take only a few distinct values
    u, c = np.unique(samples, return_counts=True)
    return float(np.dot(u, c / len(samples)))


def _ring_samples(patch_map: PatchMap, r: float, n_phi: int | None) -> np.ndarray:
    if r == 0:
        return np.array([patch_map.potential_at(0.0, 0.0)])
    n = default_n_phi(r, patch_map.r0) if n_phi is None else n_phi
    phi = 2.0 * np.pi * np.arange(n) / n
    return patch_map.potential_at(r * np.cos(phi), r * np.sin(phi))


def ring_average(patch_map: PatchMap, r: float, n_phi: int | None = None) -> float:
    """
    Mean of the potential over ``n_phi`` equally spaced points on the circle of radius r.

    At r = 0 this is the potential at the center.
    """
    if not 0 <= r <= patch_map.geometry.Rm * (1 + _R_SLACK):
        raise DomainError(f"ring radius {r} outside [0, Rm]")
    if n_phi is not None and n_phi < 8:
        raise ConfigurationError("n_phi must be >= 8")
    return _mean(_ring_samples(patch_map, r, n_phi))


@dataclass(frozen=True)
class RadialGrid:
    """
    Node 0 plus log-spaced nodes from ``r_min`` to Rm.

    Log spacing alone leaves rings far apart near the rim (about 0.1 r per
    node at 24 per decade), so intervals wider than ``max_step`` are split
    uniformly.
    """

    r_min: float
    nodes_per_decade: int = 24
    max_step: float | None = None

    @classmethod
    def for_distance(cls, geom: Geometry, d_min: float, r0: float, nodes_per_decade: int = 24) -> "RadialGrid":
        """
        Grid resolving both the kernel scale sqrt(2 R d_min) and the patch
        scale r0: log nodes start at a tenth of the smaller one and no two
        nodes are further apart than r0 / RINGS_PER_PATCH.
        """
        if not d_min > 0:
            raise DomainError("d_min must be > 0")
        r_min = min(math.sqrt(2.0 * geom.R * d_min), r0) / 10.0
        return cls(r_min, nodes_per_decade, r0 / RINGS_PER_PATCH)

    def nodes(self, geom: Geometry, steps=()) -> np.ndarray:
        """
        Radial nodes in [0, Rm].

        Each radius in ``steps`` is bracketed by a tight node pair so that a
        jump in the ring average there falls exactly on a cell boundary.
        """
        if self.nodes_per_decade < 4:
            raise ConfigurationError("radial grid needs at least 4 nodes per decade")
        if not 0 < self.r_min < geom.Rm:
            raise ConfigurationError(f"r_min={self.r_min} must lie in (0, Rm)")
        n = max(1, math.ceil(self.nodes_per_decade * math.log10(geom.Rm / self.r_min)))
        r = np.geomspace(self.r_min, geom.Rm, n + 1)
        r[-1] = geom.Rm
        if self.max_step is not None:
            if not self.max_step > 0:
                raise ConfigurationError("max_step must be > 0")
            parts = np.maximum(1, np.ceil(np.diff(r) / self.max_step).astype(int))
            r = np.concatenate(
                [np.linspace(a, b, k, endpoint=False) for a, b, k in zip(r[:-1], r[1:], parts)] + [[geom.Rm]]
            )
        for s in steps:
            lo, hi = s * (1 - _PIN), s * (1 + _PIN)
            if hi >= geom.Rm or lo <= 0:
                continue
            r = np.concatenate([r[(r < lo) | (r > hi)], [lo, hi]])
        return np.concatenate([[0.0], np.unique(r)])


@dataclass(frozen=True)
class RadialProfile:
    """Ring-averaged potential at increasing radial nodes spanning [0, Rm]."""

    r_nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r_nodes, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or len(r) < 2:
            raise ConfigurationError("profile needs matching 1-D node and value arrays (>= 2 nodes)")
        if np.any(np.diff(r) <= 0) or r[0] < 0:
            raise ConfigurationError("profile nodes must be non-negative and strictly increasing")
        object.__setattr__(self, "r_nodes", r)
        object.__setattr__(self, "values", v)

    @property
    def edges(self) -> np.ndarray:
        """Cell boundaries: 0, midpoints between nodes, last node."""
        r = self.r_nodes
        return np.concatenate([[0.0], 0.5 * (r[:-1] + r[1:]), [r[-1]]])

    @property
    def center_value(self) -> float:
        return float(self.values[0])

    @property
    def edge_value(self) -> float:
        return float(self.values[-1])


class PolarSamples:
    """
    Potential samples of a map on a polar grid, grouped per radial node.

    Holds the ring averages (as a :class:`RadialProfile`) and, for every
    node, the distinct sampled values with their angular fractions. The
    latter are needed for quantities quadratic in the potential.
    """

    def __init__(self, patch_map: PatchMap, grid: RadialGrid, n_phi: int | None = None):
        geom = patch_map.geometry
        nodes = grid.nodes(geom, patch_map.step_radii())
        means = np.empty(len(nodes))
        vals, owner, frac = [], [], []
        for k, r in enumerate(nodes):
            s = _ring_samples(patch_map, float(r), n_phi)
            u, c = np.unique(s, return_counts=True)
            means[k] = np.dot(u, c / len(s))
            vals.append(u)
            owner.append(np.full(len(u), k))
            frac.append(c / len(s))
        self.patch_map = patch_map
        self.geometry = geom
        self.profile = RadialProfile(nodes, means)
        self.values = np.concatenate(vals)
        self.owner = np.concatenate(owner)
        self.fraction = np.concatenate(frac)

    def cell_weights(self, d: float, kind: str = "energy") -> np.ndarray:
        return cell_weights(self.geometry, d, self.profile.edges, kind)


def radial_profile(patch_map: PatchMap, grid: RadialGrid | None = None, n_phi: int | None = None) -> RadialProfile:
    """
    Ring averages of ``patch_map`` on a radial grid.

    The default grid resolves separations down to 1 nm.
    """
    if grid is None:
        grid = RadialGrid.for_distance(patch_map.geometry, 1e-9, patch_map.r0)
    return PolarSamples(patch_map, grid, n_phi).profile


def area_average(patch_map: PatchMap, grid: RadialGrid | None = None, n_phi: int | None = None) -> float:
    """Surface average of the potential over the plate, by polar quadrature."""
    if grid is None:
        grid = RadialGrid.for_distance(patch_map.geometry, 1e-9, patch_map.r0)
    return profile_area_average(radial_profile(patch_map, grid, n_phi))


def profile_area_average(profile: RadialProfile) -> float:
    """Area-weighted (r dr) mean of a radial profile over its span."""
    w = 0.5 * np.diff(profile.edges**2)
    v0 = profile.values[0]
    return float(v0 + np.dot(w, profile.values - v0) / w.sum())


def area_average_analytic(patch_map: PatchMap) -> float:
    """
    Exact surface average for disjoint disks lying wholly inside the plate.

    Raises DomainError when any disk overlaps another or crosses the rim.
    """
    Rm = patch_map.geometry.Rm
    disks = patch_map.disks
    for i, a in enumerate(disks):
        if a.offset + a.radius > Rm:
            raise DomainError(f"disk {i} is not inside the plate")
        for j in range(i):
            b = disks[j]
            if math.hypot(a.cx - b.cx, a.cy - b.cy) < a.radius + b.radius:
                raise DomainError(f"disks {j} and {i} overlap")
    bg = patch_map.background
    return bg + sum((k.potential - bg) * (k.radius / Rm) ** 2 for k in disks)


# -- ensemble ring statistics ----------------------------------------------------


@dataclass(frozen=True)
class RingRmsTable:
    """RMS ring average S(r) over an ensemble and its fitted log-log slope."""

    r: np.ndarray
    rms: np.ndarray
    slope: float
    n_real: int


def ring_rms_ensemble(
    geom: Geometry,
    r0: float,
    v0: float,
    jitter: float,
    n_real: int,
    r_nodes,
    master_seed: int = 0,
    n_phi: int | None = None,
) -> RingRmsTable:
    """
    RMS over homogeneous realizations of the ring average at each radius.

    For r >> r0 a ring crosses ~ pi r / r0 patches of random sign, so S(r)
    falls like (r / r0) ** -0.5. The slope is fitted over r in [5 r0, Rm].
    """
    if n_real < 50:
        raise ConfigurationError("ring_rms_ensemble needs at least 50 realizations")
    r_nodes = np.asarray(r_nodes, dtype=float)
    if np.any(r_nodes < 2 * r0) or np.any(r_nodes > geom.Rm):
        raise DomainError("ring radii must lie in [2 r0, Rm]")
    acc = np.zeros(len(r_nodes))
    for i in range(n_real):
        m = generate_homogeneous(geom, r0, v0, jitter, realization_seed(master_seed, i))
        acc += np.array([ring_average(m, float(r), n_phi) for r in r_nodes]) ** 2
    rms = np.sqrt(acc / n_real)
    sel = (r_nodes >= 5 * r0) & (rms > 0)
    slope = float(np.polyfit(np.log(r_nodes[sel]), np.log(rms[sel]), 1)[0]) if sel.sum() >= 2 else float("nan")
    return RingRmsTable(r_nodes, rms, slope, n_real)


# -- file format -------------------------------------------------------------------


def patch_map_to_dict(patch_map: PatchMap) -> dict:
    g = patch_map.geometry
    return {
        "format": FILE_FORMAT,
        "version": FILE_VERSION,
        "geometry": {"R": g.R, "Rm": g.Rm},
        "background": patch_map.background,
        "r0_nominal": patch_map.r0_nominal,
        "v0_nominal": patch_map.v0_nominal,
        "seed": patch_map.seed,
        "disks": {
            "columns": ["cx", "cy", "radius", "potential"],
            "rows": [[k.cx, k.cy, k.radius, k.potential] for k in patch_map.disks],
        },
    }


def patch_map_from_dict(data: dict) -> PatchMap:
    if data.get("format") != FILE_FORMAT:
        raise ParseError(f"not a {FILE_FORMAT} document")
    try:
        geom = Geometry(float(data["geometry"]["R"]), float(data["geometry"]["Rm"]))
        cols = data["disks"]["columns"]
        if cols != ["cx", "cy", "radius", "potential"]:
            raise ParseError(f"unexpected disk columns {cols}")
        disks = tuple(Disk(*(float(v) for v in row)) for row in data["disks"]["rows"])
        opt = lambda key: None if data.get(key) is None else float(data[key])  # noqa: E731
        seed = data.get("seed")
        return PatchMap(
            geom, float(data["background"]), disks, opt("r0_nominal"), opt("v0_nominal"),
            None if seed is None else int(seed),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed patch map: {exc}") from exc


def save_patch_map(patch_map: PatchMap, path) -> None:
    """Write ``patch_map`` as JSON. Floats use shortest round-trip repr, so reading back is lossless."""
    text = json.dumps(patch_map_to_dict(patch_map), indent=1)
    Path(path).write_text(text + "\n")


def load_patch_map(path) -> PatchMap:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from exc
    return patch_map_from_dict(data)
