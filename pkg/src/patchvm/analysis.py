"""
Distance sweeps of the minimizing voltage and the a + b ln d fit.

Regimes, with d1 = r0**2/2R and d2 = Rm**2/2R:

* close: d < d1 and |ln d| > |ln d2|; the central patch dominates;
* far: d > d2; V_m tends to the surface-averaged potential;
* intermediate: everything else; V_m is close to a + b ln d.

The close/intermediate split depends on the unit of d (meters here).
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .electrostatics import PolarGrid, QuadratureSpec, compute_Q, vm_analytic
from .exceptions import ConfigurationError, DomainError, FitError, ParseError
from .geometry import Geometry, validity
from .patches import PatchMap, RadialProfile, generate_homogeneous, realization_seed

VARIANTS = ("energy", "force", "analytic")

CONTACT_POTENTIAL_CAVEAT = (
    "intercept a may include a constant offset from contact potentials in the external circuit"
)


def log_grid(d_min: float, d_max: float, per_decade: int = 8) -> np.ndarray:
    """Log-spaced separations from d_min to d_max with ``per_decade`` points per decade."""
    if not 0 < d_min < d_max:
        raise ConfigurationError("need 0 < d_min < d_max")
    n = max(1, math.ceil(per_decade * math.log10(d_max / d_min)))
    return np.geomspace(d_min, d_max, n + 1)


def default_window(geom: Geometry, r0: float) -> tuple[float, float]:
    """[10 d1, d2/10], well inside the intermediate regime."""
    return 10.0 * geom.patch_scale(r0), geom.d2 / 10.0


def classify_regime(geom: Geometry, r0: float, d: float) -> str:
    if not d > 0:
        raise DomainError("separation d must be > 0")
    d1, d2 = geom.patch_scale(r0), geom.d2
    if d > d2:
        return "far"
    if d < d1 and abs(math.log(d)) > abs(math.log(d2)):
        return "close"
    return "intermediate"


@dataclass
class VmCurve:
    """Minimizing voltages over a separation sweep for one patch map."""

    d: np.ndarray
    vm_energy: np.ndarray
    vm_force: np.ndarray
    vm_analytic: np.ndarray
    geometry: Geometry
    r0: float
    regime: list[str] = field(default_factory=list)
    pfa_ok: np.ndarray | None = None
    patch_image_ok: np.ndarray | None = None
    seed: int | None = None

    def variant(self, name: str) -> np.ndarray:
        if name not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        return getattr(self, f"vm_{name}")

    @property
    def entries(self):
        return list(zip(self.d, self.vm_energy, self.vm_force, self.vm_analytic))


def _check_d_grid(d_grid) -> np.ndarray:
    d = np.asarray(d_grid, dtype=float)
    if d.ndim != 1 or len(d) == 0:
        raise ConfigurationError("d_grid must be a non-empty 1-D sequence")
    if np.any(~(d > 0)):
        raise DomainError("all separations must be > 0")
    if np.any(np.diff(d) <= 0):
        raise ConfigurationError("d_grid must be strictly increasing")
    if len(d) > 1:
        density = (len(d) - 1) / math.log10(d[-1] / d[0])
        if density < 8 - 1e-9:
            raise ConfigurationError(f"d_grid has {density:.2f} points per decade, need >= 8")
    return d


def sweep(patch_map: PatchMap, d_grid, quad: QuadratureSpec | None = None) -> VmCurve:
    """
    Energy, force and integrated-by-parts minimizing voltages over ``d_grid``.

    The map is sampled once on a grid resolving the smallest separation.
    """
    d = _check_d_grid(d_grid)
    grid = PolarGrid(patch_map, float(d[0]), quad)
    return _curve_from_grid(grid, d)


def _curve_from_grid(grid: PolarGrid, d: np.ndarray) -> VmCurve:
    geom, prof, r0 = grid.geometry, grid.profile, grid.patch_map.r0
    flags = [validity(geom, float(x), r0) for x in d]
    return VmCurve(
        d=d,
        vm_energy=np.array([grid.vm(float(x), "energy") for x in d]),
        vm_force=np.array([grid.vm(float(x), "force") for x in d]),
        vm_analytic=np.array([vm_analytic(prof, geom, float(x)) for x in d]),
        geometry=geom,
        r0=r0,
        regime=[classify_regime(geom, r0, float(x)) for x in d],
        pfa_ok=np.array([f.pfa_ok for f in flags]),
        patch_image_ok=np.array([f.patch_image_ok for f in flags]),
        seed=grid.patch_map.seed,
    )


# -- fitting ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogFit:
    """Least-squares fit V_m = a + b ln d (d in meters)."""

    a: float
    b: float
    window: tuple[float, float]
    residual_rms: float
    r_squared: float
    b_stderr: float
    n_points: int
    caveat: str | None = None

    @property
    def b_per_decade(self) -> float:
        return self.b * math.log(10.0)

    def report(self) -> dict:
        return {
            "a_V": self.a,
            "b_V_per_efold": self.b,
            "b_V_per_decade": self.b_per_decade,
            "b_stderr_V_per_efold": self.b_stderr,
            "window": list(self.window),
            "n_points": self.n_points,
            "residual_rms_V": self.residual_rms,
            "r_squared": self.r_squared,
            "caveat": self.caveat,
        }


def fit_points(d, vm, window: tuple[float, float] | None = None, min_points: int = 6) -> LogFit:
    """Ordinary least squares of ``vm`` against ln ``d`` over the closed ``window``."""
    d = np.asarray(d, dtype=float)
    vm = np.asarray(vm, dtype=float)
    if window is None:
        window = (float(d.min()), float(d.max()))
    lo, hi = map(float, window)
    if not lo < hi:
        raise FitError("fit window needs d_lo < d_hi")
    sel = (d >= lo) & (d <= hi)
    x, y = np.log(d[sel]), vm[sel]
    n = len(x)
    if n < min_points:
        raise FitError(f"fit window [{lo:.4g}, {hi:.4g}] holds {n} points, need >= {min_points}")
    if len(np.unique(x)) < 2:
        raise FitError("fit window needs at least 2 distinct separations")
    A = np.column_stack([np.ones(n), x])
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (a + b * x)
    ss_res = float(res @ res)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if np.ptp(y) == 0:
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    sxx = float(((x - x.mean()) ** 2).sum())
    b_se = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 else float("nan")
    return LogFit(float(a), float(b), (lo, hi), math.sqrt(ss_res / n), r2, b_se, n)


def fit_log(curve: VmCurve, window: tuple[float, float] | None = None, variant: str = "energy") -> LogFit:
    """Fit a + b ln d to one variant of ``curve``; default window is [10 d1, d2/10]."""
    if window is None:
        window = default_window(curve.geometry, curve.r0)
    return fit_points(curve.d, curve.variant(variant), window)


def read_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    """
    Read an external ``d_m,vm_V`` CSV. Lines starting with '#' are ignored.

    Raises ParseError naming the offending line.
    """
    ds, vs = [], []
    with open(path, newline="") as fh:
        header_seen = False
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            row = next(csv.reader([line]))
            if not header_seen:
                if [c.strip() for c in row] != ["d_m", "vm_V"]:
                    raise ParseError(f"expected header 'd_m,vm_V', got {line.strip()!r}", lineno)
                header_seen = True
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", lineno)
            try:
                d, v = float(row[0]), float(row[1])
            except ValueError:
                raise ParseError(f"non-numeric value in {line.strip()!r}", lineno) from None
            if not (d > 0 and math.isfinite(d) and math.isfinite(v)):
                raise ParseError(f"invalid values in {line.strip()!r}", lineno)
            ds.append(d)
            vs.append(v)
    if not header_seen:
        raise ParseError("empty dataset")
    return np.array(ds), np.array(vs)


def fit_external(dataset, window: tuple[float, float] | None = None) -> LogFit:
    """
    Fit a + b ln d to measured data: a CSV path or a sequence of (d, V_m)
    pairs. Duplicate separations are kept.
    """
    if isinstance(dataset, (str, os.PathLike)):
        d, v = read_dataset(dataset)
    else:
        pairs = np.asarray(dataset, dtype=float).reshape(-1, 2)
        d, v = pairs[:, 0], pairs[:, 1]
    fit = fit_points(d, v, window)
    return LogFit(**{**fit.__dict__, "caveat": CONTACT_POTENTIAL_CAVEAT})


# -- intermediate-regime prediction ---------------------------------------------------------


@dataclass(frozen=True)
class RegimePrediction:
    d1: float
    d2: float
    L: float
    Q0: float
    a_pred: float
    b_pred: float
    # Q0 re-evaluated at the edges of the default window, as a sensitivity diagnostic
    Q0_range: tuple[float, float]


def predict_intermediate(profile: RadialProfile, geom: Geometry, r0: float) -> RegimePrediction:
    """
    First-order intermediate-regime coefficients of V_m = a + b ln d.

    With L = ln(d2) and Q(d) ~ Q0 L evaluated at sqrt(d1 d2),
    a = V(Rm) + Q0 and b = (V(Rm) + Q0 - V(0)) / L.
    """
    if not 0 < r0 < geom.Rm:
        raise ConfigurationError("r0 must satisfy 0 < r0 < Rm")
    d1, d2 = geom.patch_scale(r0), geom.d2
    L = math.log(d2)
    if abs(d2 - 1.0) < 0.01:
        raise ConfigurationError("ln(Rm^2/2R) is close to zero; prediction is ill-conditioned")
    Q0 = compute_Q(profile, geom, math.sqrt(d1 * d2)) / L
    edge, center = profile.edge_value, profile.center_value
    lo, hi = default_window(geom, r0)
    q_lo, q_hi = (compute_Q(profile, geom, x) / L for x in (lo, hi))
    return RegimePrediction(
        d1=d1, d2=d2, L=L, Q0=Q0,
        a_pred=edge + Q0,
        b_pred=(edge + Q0 - center) / L,
        Q0_range=(min(q_lo, q_hi), max(q_lo, q_hi)),
    )


# -- ensembles ----------------------------------------------------------------------------


@dataclass
class EnsembleResult:
    """Per-separation statistics over random homogeneous realizations."""

    d: np.ndarray
    n_real: int
    seeds: list[int]
    vm_energy: np.ndarray  # (n_real, n_d)
    vm_force: np.ndarray
    fits: list[LogFit | None]
    window: tuple[float, float]

    @property
    def energy_mean(self):
        return self.vm_energy.mean(axis=0)

    @property
    def energy_std(self):
        return self.vm_energy.std(axis=0, ddof=1) if self.n_real > 1 else np.full(len(self.d), np.nan)

    @property
    def force_mean(self):
        return self.vm_force.mean(axis=0)

    @property
    def force_std(self):
        return self.vm_force.std(axis=0, ddof=1) if self.n_real > 1 else np.full(len(self.d), np.nan)

    @property
    def diff(self):
        return self.vm_force - self.vm_energy

    @property
    def diff_mean(self):
        return self.diff.mean(axis=0)

    @property
    def diff_stderr(self):
        if self.n_real < 2:
            return np.full(len(self.d), np.nan)
        return self.diff.std(axis=0, ddof=1) / math.sqrt(self.n_real)

    @property
    def b_values(self) -> np.ndarray:
        return np.array([f.b if f is not None else np.nan for f in self.fits])

    def window_paired(self) -> tuple[float, float]:
        """
        Mean and standard error over realizations of (vm_force - vm_energy)
        averaged across the separations in the fit window.
        """
        sel = (self.d >= self.window[0]) & (self.d <= self.window[1])
        if not sel.any():
            raise FitError("no separations inside the ensemble window")
        per_real = self.diff[:, sel].mean(axis=1)
        se = per_real.std(ddof=1) / math.sqrt(self.n_real) if self.n_real > 1 else float("nan")
        return float(per_real.mean()), float(se)


def ensemble_vm(
    geom: Geometry,
    r0: float,
    v0: float,
    n_real: int,
    d_grid,
    quad: QuadratureSpec | None = None,
    jitter: float = 0.25,
    master_seed: int = 0,
    window: tuple[float, float] | None = None,
    threads: int = 1,
    min_realizations: int = 30,
) -> EnsembleResult:
    """
    Sweep ``n_real`` homogeneous realizations and fit each one.

    Realization i uses seed ``realization_seed(master_seed, i)``, so results
    do not depend on ``threads``. Fits that fail (window too sparse) are
    stored as None.
    """
    if n_real < min_realizations:
        raise ConfigurationError(f"need at least {min_realizations} realizations, got {n_real}")
    d = _check_d_grid(d_grid)
    if window is None:
        window = default_window(geom, r0)
    seeds = [realization_seed(master_seed, i) for i in range(n_real)]

    def one(seed):
        m = generate_homogeneous(geom, r0, v0, jitter, seed)
        curve = _curve_from_grid(PolarGrid(m, float(d[0]), quad), d)
        try:
            fit = fit_log(curve, window)
        except FitError:
            fit = None
        return curve.vm_energy, curve.vm_force, fit

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(s) for s in seeds]
    return EnsembleResult(
        d=d,
        n_real=n_real,
        seeds=seeds,
        vm_energy=np.array([r[0] for r in results]),
        vm_force=np.array([r[1] for r in results]),
        fits=[r[2] for r in results],
        window=tuple(window),
    )


# -- CSV output ------------------------------------------------------------------------------

CURVE_HEADER = ["d_m", "vm_energy_V", "vm_force_V", "vm_analytic_V", "regime"]


def fmt(x) -> str:
    """17 significant digits; empty string for NaN/None."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".17g")


def write_curve_csv(curve: VmCurve, path, config_hash: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for i, d in enumerate(curve.d):
            w.writerow([fmt(d), fmt(curve.vm_energy[i]), fmt(curve.vm_force[i]), fmt(curve.vm_analytic[i]),
                        curve.regime[i]])


def read_curve_csv(path) -> dict[str, np.ndarray]:
    """Read a curve CSV back into columns (regime stays a string array)."""
    rows = []
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader, None)
    if header != CURVE_HEADER:
        raise ParseError(f"unexpected curve header {header}", 1)
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(CURVE_HEADER):
            raise ParseError("wrong number of fields", lineno)
        rows.append(row)
    try:
        cols = {name: np.array([float(r[i]) for r in rows]) for i, name in enumerate(CURVE_HEADER[:-1])}
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    cols["regime"] = np.array([r[-1] for r in rows])
    return cols
