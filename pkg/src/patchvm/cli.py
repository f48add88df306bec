"""
Command-line front end.

    patchvm gen       write a patch map file
    patchvm sweep     V_m(d) curve CSV for a map
    patchvm ensemble  statistics over random realizations
    patchvm fit       a + b ln d fit of a curve or measured CSV
    patchvm validate  PFA / patch-image validity and regime per d

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
All flags are SI numbers without unit suffixes.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    CURVE_HEADER,
    classify_regime,
    default_window,
    ensemble_vm,
    fit_external,
    fit_points,
    fmt,
    log_grid,
    read_curve_csv,
    sweep,
    write_curve_csv,
)
from .electrostatics import QuadratureSpec
from .exceptions import ConfigurationError, ParseError, PatchVmError
from .geometry import Geometry, validity
from .patches import (
    generate_homogeneous,
    generate_single_patch,
    load_patch_map,
    patch_map_to_dict,
)

LAYOUTS = ("homogeneous", "single")


@dataclasses.dataclass
class RunConfig:
    """Everything needed to reproduce a run. ``out`` and thread count are not hashed."""

    R: float = 0.15
    Rm: float = 0.015
    r0: float = 5e-4
    v0: float = 0.1
    jitter: float = 0.25
    layout: str = "homogeneous"
    d_min: float = 1e-8
    d_max: float = 1e-2
    points_per_decade: int = 8
    nodes_per_decade: int = 24
    n_phi: int | None = None
    seed: int = 0
    n_real: int = 100
    out: str = "out"

    def validate(self) -> "RunConfig":
        def need(ok, name, msg):
            if not ok:
                raise ConfigurationError(f"config field {name!r}: {msg}")

        for name in ("R", "Rm", "r0", "d_min", "d_max"):
            need(getattr(self, name) > 0, name, "must be > 0")
        need(self.Rm <= self.R, "Rm", "must not exceed R")
        need(self.v0 >= 0, "v0", "must be >= 0")
        need(0 <= self.jitter <= 0.5, "jitter", "must lie in [0, 0.5]")
        need(self.layout in LAYOUTS, "layout", f"must be one of {LAYOUTS}")
        if self.layout == "homogeneous":
            need(self.r0 < self.Rm, "r0", "must be < Rm")
        else:
            need(self.r0 <= self.Rm, "r0", "must be <= Rm")
        need(self.d_min < self.d_max, "d_min", "must be < d_max")
        need(self.points_per_decade >= 8, "points_per_decade", "must be >= 8")
        need(self.nodes_per_decade >= 24, "nodes_per_decade", "must be >= 24")
        need(self.n_phi is None or self.n_phi >= 64, "n_phi", "must be >= 64 or null")
        need(self.n_real >= 1, "n_real", "must be >= 1")
        need(0 <= self.seed < 2**64, "seed", "must be a 64-bit unsigned integer")
        return self

    # nested file layout
    def to_dict(self) -> dict:
        return {
            "geometry": {"R": self.R, "Rm": self.Rm},
            "patches": {"r0": self.r0, "v0": self.v0, "jitter": self.jitter, "layout": self.layout},
            "d_grid": {"d_min": self.d_min, "d_max": self.d_max, "points_per_decade": self.points_per_decade},
            "quadrature": {"nodes_per_decade": self.nodes_per_decade, "n_phi": self.n_phi},
            "seed": self.seed,
            "n_real": self.n_real,
            "out": self.out,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        flat = {}
        known = {f.name for f in dataclasses.fields(cls)}
        for key, value in data.items():
            if isinstance(value, dict):
                flat.update(value)
            else:
                flat[key] = value
        unknown = set(flat) - known
        if unknown:
            raise ConfigurationError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        cfg = cls(**flat)
        for f in dataclasses.fields(cls):
            v = getattr(cfg, f.name)
            if v is None:
                continue
            try:
                if f.name in ("points_per_decade", "nodes_per_decade", "n_phi", "seed", "n_real"):
                    if isinstance(v, float) and not v.is_integer():
                        raise ValueError
                    setattr(cfg, f.name, int(v))
                elif f.name in ("layout", "out"):
                    setattr(cfg, f.name, str(v))
                else:
                    setattr(cfg, f.name, float(v))
            except (TypeError, ValueError):
                raise ConfigurationError(f"config field {f.name!r}: bad value {v!r}") from None
        return cfg.validate()

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @property
    def geometry(self) -> Geometry:
        return Geometry(self.R, self.Rm)

    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(self.nodes_per_decade, self.n_phi)

    def d_grid(self) -> np.ndarray:
        return log_grid(self.d_min, self.d_max, self.points_per_decade)

    def build_map(self):
        if self.layout == "single":
            return generate_single_patch(self.geometry, self.r0, self.v0)
        return generate_homogeneous(self.geometry, self.r0, self.v0, self.jitter, self.seed)


# -- helpers --------------------------------------------------------------------------------


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if getattr(args, "n_real", None) is not None:
        cfg.n_real = args.n_real
    return cfg.validate()


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _validity_rows(geom, r0, d_grid):
    rows = []
    for d in d_grid:
        v = validity(geom, float(d), r0)
        rows.append({"d_m": float(d), "pfa_ok": v.pfa_ok, "patch_image_ok": v.patch_image_ok,
                     "regime": classify_regime(geom, r0, float(d))})
    return rows


def _manifest(out: Path, name: str, cfg: RunConfig, config_hash: str, outputs, **extra) -> None:
    doc = {
        "tool": "patchvm",
        "version": __version__,
        "command": name,
        "config_hash": config_hash,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "outputs": outputs,
        "created": datetime.now(timezone.utc).isoformat(),
        **extra,
    }
    (out / f"manifest_{name}.json").write_text(json.dumps(doc, indent=1) + "\n")


def _write_rows(path: Path, header, rows, config_hash: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


# -- commands ---------------------------------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = _config(args)
    h = cfg.config_hash()
    m = cfg.build_map()
    out = _outdir(cfg)
    doc = patch_map_to_dict(m)
    doc["config_hash"] = h
    path = out / "patchmap.json"
    path.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {path}: {len(m.disks)} patches (config {h})")
    for d in (cfg.d_min, cfg.d_max):
        v = validity(m.geometry, d, m.r0)
        print(f"d={fmt(d)}: pfa_ok={v.pfa_ok} patch_image_ok={v.patch_image_ok}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    if args.map:
        map_path = Path(args.map)
        if not map_path.is_file():
            raise FileNotFoundError(f"map file not found: {map_path}")
        m = load_patch_map(map_path)
        digest = hashlib.sha256(map_path.read_bytes()).hexdigest()
        h = hashlib.sha256((cfg.config_hash() + digest).encode()).hexdigest()[:16]
    else:
        m = cfg.build_map()
        h = cfg.config_hash()
    curve = sweep(m, cfg.d_grid(), cfg.quad)
    out = _outdir(cfg)
    write_curve_csv(curve, out / "curve.csv", h)
    _manifest(out, "sweep", cfg, h, ["curve.csv"], map_file=args.map,
              validity=_validity_rows(m.geometry, m.r0, curve.d))
    print(f"wrote {out / 'curve.csv'} ({len(curve.d)} separations, config {h})")
    return 0


def cmd_ensemble(args) -> int:
    cfg = _config(args)
    h = cfg.config_hash()
    geom = cfg.geometry
    res = ensemble_vm(geom, cfg.r0, cfg.v0, cfg.n_real, cfg.d_grid(), cfg.quad, jitter=cfg.jitter,
                      master_seed=cfg.seed, threads=args.threads, min_realizations=1)
    out = _outdir(cfg)

    header = ["d_m", "n_real", "vm_energy_mean_V", "vm_energy_std_V", "vm_force_mean_V", "vm_force_std_V",
              "diff_mean_V", "diff_stderr_V"]
    cols = [res.energy_mean, res.energy_std, res.force_mean, res.force_std, res.diff_mean, res.diff_stderr]
    rows = [[fmt(d), str(res.n_real)] + [fmt(c[i]) for c in cols] for i, d in enumerate(res.d)]
    _write_rows(out / "ensemble.csv", header, rows, h)

    header = ["realization", "seed", "a_V", "b_V_per_efold", "b_stderr_V_per_efold", "residual_rms_V", "r_squared"]
    rows = []
    for i, (seed, f) in enumerate(zip(res.seeds, res.fits)):
        vals = [None] * 5 if f is None else [f.a, f.b, f.b_stderr, f.residual_rms, f.r_squared]
        rows.append([str(i), str(seed)] + [fmt(v) for v in vals])
    _write_rows(out / "ensemble_fits.csv", header, rows, h)

    b = res.b_values
    b = b[np.isfinite(b)]
    nb = len(b)
    pm, pse = res.window_paired() if res.n_real > 1 else (float(res.diff_mean.mean()), float("nan"))
    summary = [
        ("n_real", res.n_real),
        ("window_lo_m", res.window[0]),
        ("window_hi_m", res.window[1]),
        ("b_mean_V_per_efold", b.mean() if nb else None),
        ("b_std_V_per_efold", b.std(ddof=1) if nb > 1 else None),
        ("b_stderr_V_per_efold", b.std(ddof=1) / np.sqrt(nb) if nb > 1 else None),
        ("paired_diff_mean_V", pm),
        ("paired_diff_stderr_V", pse),
    ]
    rows = [[k, str(v) if isinstance(v, int) else fmt(v)] for k, v in summary]
    _write_rows(out / "ensemble_summary.csv", ["quantity", "value"], rows, h)
    outputs = ["ensemble.csv", "ensemble_fits.csv", "ensemble_summary.csv"]
    _manifest(out, "ensemble", cfg, h, outputs, validity=_validity_rows(geom, cfg.r0, res.d))
    print(f"wrote ensemble statistics for {res.n_real} realizations to {out} (config {h})")
    return 0


def _read_fit_input(path: Path, variant: str):
    with open(path) as fh:
        first = next((ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")), "")
    if first == ",".join(CURVE_HEADER):
        cols = read_curve_csv(path)
        return cols["d_m"], cols[f"vm_{variant}_V"], False
    if [c.strip() for c in first.split(",")] == ["d_m", "vm_V"]:
        return None, None, True
    raise ParseError(f"{path}: unrecognized header {first!r}", None)


def cmd_fit(args) -> int:
    path = Path(args.input)
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    window = None
    if args.config:
        cfg = _config(args)
        window = default_window(cfg.geometry, cfg.r0)
    if args.d_lo is not None or args.d_hi is not None:
        if args.d_lo is None or args.d_hi is None:
            raise ConfigurationError("--d-lo and --d-hi must be given together")
        window = (args.d_lo, args.d_hi)
    d, v, external = _read_fit_input(path, args.variant)
    fit = fit_external(str(path), window) if external else fit_points(d, v, window)
    rep = fit.report()
    rep["input"] = str(path)
    rep["input_sha256"] = hashlib.sha256(path.read_bytes()).hexdigest()[:16]
    lines = []
    for k, val in rep.items():
        if isinstance(val, float):
            val = fmt(val)
        elif isinstance(val, list):
            val = "[" + ", ".join(fmt(x) for x in val) + "]"
        lines.append(f"{k}: {val}")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "fit_report.txt").write_text(text)
    return 0


def cmd_validate(args) -> int:
    cfg = _config(args)
    h = cfg.config_hash()
    rows = _validity_rows(cfg.geometry, cfg.r0, cfg.d_grid())
    header = ["d_m", "pfa_ok", "patch_image_ok", "regime"]
    text = [[fmt(r["d_m"]), str(r["pfa_ok"]).lower(), str(r["patch_image_ok"]).lower(), r["regime"]] for r in rows]
    print(",".join(header))
    for row in text:
        print(",".join(row))
    if args.out:
        _write_rows(_outdir(cfg) / "validity.csv", header, text, h)
    return 0


# -- entry point ---------------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="run configuration (JSON)")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    common.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads")

    parser = _Parser(prog="patchvm", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"patchvm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", parents=[common], help="generate a patch map file")
    p.set_defaults(func=cmd_gen)
    p = sub.add_parser("sweep", parents=[common], help="V_m over the configured distance grid")
    p.add_argument("--map", metavar="FILE", help="patch map file (default: generate from config)")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("ensemble", parents=[common], help="ensemble statistics")
    p.add_argument("--n-real", type=int, help="number of realizations (overrides config)")
    p.set_defaults(func=cmd_ensemble)
    p = sub.add_parser("fit", parents=[common], help="fit V_m = a + b ln d")
    p.add_argument("input", help="curve CSV or external d_m,vm_V CSV")
    p.add_argument("--d-lo", type=float)
    p.add_argument("--d-hi", type=float)
    p.add_argument("--variant", choices=("energy", "force", "analytic"), default="energy")
    p.set_defaults(func=cmd_fit)
    p = sub.add_parser("validate", parents=[common], help="validity table over the distance grid")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("patchvm: error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ConfigurationError, ParseError, FileNotFoundError) as exc:
        print(f"patchvm: error: {exc}", file=sys.stderr)
        return 1
    except (PatchVmError, OSError, ArithmeticError) as exc:
        print(f"patchvm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
