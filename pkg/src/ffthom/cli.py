"""Configuration-driven command line front end.

A run is described by one JSON file: grid, microstructure, per-phase
materials, loading, solver settings and requested outputs. ``run`` executes
the pipeline and writes the macroscopic curve, field maps and a report;
``gen`` only generates the microstructure; ``ensemble`` repeats a run over a
seed list and aggregates the statistics. All outputs are deterministic for a
fixed config and seed; files are written atomically (temp + rename).

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from .analysis import (
    OverallCurve,
    ensemble,
    flow_stress,
    hardening_modulus,
    write_curve_csv,
    young_modulus,
)
from .green_operator import IsotropicModuli
from .material import PERFECT, HardeningCurve, MaterialLaw
from .microstructure import (
    FiberSpec,
    PhaseMap,
    hexagonal_lattice,
    load_phase_image,
    random_fibers,
    save_phase_map,
    square_lattice,
    write_gray_image,
)
from .solver import (
    ConvergenceError,
    LoadingProgram,
    SolverConfig,
    run_program,
    strain_ramp_program,
    uniaxial_stress_program,
)
from .tensor_field import GridSpec, ScalarField, equivalent_strain, von_mises

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

MATERIAL_PRESETS = {
    "demo-matrix": {"young": 68900.0, "poisson": 0.35, "yield_stress": 68.9,
                    "hardening": 0.0},
    "demo-fiber": {"young": 400000.0, "poisson": 0.23},
}

MAP_FIELDS = ("phase", "p", "stress_eq", "strain_eq")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    _require(isinstance(cfg, dict), "config root must be an object")
    return cfg


def _build_grid(cfg) -> GridSpec:
    d = cfg.get("grid")
    _require(isinstance(d, dict), "missing 'grid' section")
    try:
        return GridSpec(int(d["n1"]), int(d["n2"]),
                        float(d.get("t1", 1.0)), float(d.get("t2", 1.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid: {exc}") from exc


def _build_laws(cfg) -> tuple:
    items = cfg.get("phases")
    _require(isinstance(items, list) and items, "missing 'phases' list")
    laws = []
    for i, item in enumerate(items):
        _require(isinstance(item, dict), f"phase {i} must be an object")
        merged = dict(MATERIAL_PRESETS.get(item.get("preset", ""), {}))
        merged.update(item)
        try:
            elastic = IsotropicModuli.from_young_poisson(
                float(merged["young"]), float(merged["poisson"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"phase {i}: bad elastic constants: {exc}") from exc
        plastic = None
        if "hardening_table" in merged:
            table_path = merged["hardening_table"]
            try:
                knots = np.loadtxt(table_path, delimiter=",", ndmin=2)
            except OSError as exc:
                raise ConfigError(f"phase {i}: cannot read hardening table: {exc}") from exc
            try:
                plastic = HardeningCurve.tabulated(knots[:, 0], knots[:, 1])
            except ValueError as exc:
                raise ConfigError(f"phase {i}: bad hardening table: {exc}") from exc
        elif "yield_stress" in merged and merged["yield_stress"] is not None:
            try:
                plastic = HardeningCurve.linear(float(merged["yield_stress"]),
                                                float(merged.get("hardening", 0.0)))
            except ValueError as exc:
                raise ConfigError(f"phase {i}: bad yield data: {exc}") from exc
        laws.append(MaterialLaw(elastic=elastic, plastic=plastic))
    return tuple(laws)


def _build_microstructure(cfg, grid: GridSpec, seed_override=None) -> PhaseMap:
    d = cfg.get("microstructure")
    _require(isinstance(d, dict), "missing 'microstructure' section")
    kind = d.get("kind")
    try:
        if kind == "square_lattice":
            return square_lattice(grid, float(d["volume_fraction"]))
        if kind == "hexagonal_lattice":
            return hexagonal_lattice(grid, float(d["volume_fraction"]))
        if kind == "random_fibers":
            seed = int(d.get("seed", 0)) if seed_override is None else int(seed_override)
            spec = FiberSpec(
                shape=d.get("shape", "circle"),
                count=int(d["count"]),
                volume_fraction=float(d["volume_fraction"]),
                penetrable=bool(d.get("penetrable", False)),
                min_spacing_px=float(d.get("min_spacing_px", 0.0)),
                rng_seed=seed,
                aspect_ratio=float(d.get("aspect_ratio", 3.333)),
            )
            return random_fibers(grid, spec)
        if kind == "image":
            pm = load_phase_image(d["path"], d["thresholds"], grid.t1, grid.t2)
            _require((pm.grid.n1, pm.grid.n2) == (grid.n1, grid.n2),
                     f"image is {pm.grid.n1}x{pm.grid.n2} but grid says {grid.n1}x{grid.n2}")
            return pm
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad microstructure: {exc}") from exc
    raise ConfigError(f"unknown microstructure kind {kind!r}")


def _build_program(cfg, laws) -> LoadingProgram:
    d = cfg.get("loading", {})
    _require(isinstance(d, dict), "'loading' must be an object")
    any_plastic = any(law.plastic is not None for law in laws)
    mode = d.get("mode", "uniaxial_stress")
    steps = int(d.get("steps", 20 if any_plastic else 1))
    final = float(d.get("final", 0.01))
    try:
        if mode == "uniaxial_stress":
            return uniaxial_stress_program(float(d.get("angle_deg", 0.0)), final, steps)
        if mode == "strain":
            tensor = np.asarray(d["tensor"], dtype=float)
            _require(tensor.shape == (4,), "strain tensor needs 4 components")
            return strain_ramp_program(tensor, steps)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad loading: {exc}") from exc
    raise ConfigError(f"unknown loading mode {mode!r}")


def _build_solver(cfg) -> SolverConfig:
    d = cfg.get("solver", {})
    _require(isinstance(d, dict), "'solver' must be an object")
    override = None
    if "reference" in d:
        try:
            override = IsotropicModuli(float(d["reference"]["lam"]),
                                       float(d["reference"]["mu"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad reference override: {exc}") from exc
    try:
        return SolverConfig(tol=float(d.get("tol", 1e-4)),
                            max_iter=int(d.get("max_iter", 5000)),
                            reference_override=override,
                            half_spectrum=bool(d.get("half_spectrum", True)))
    except ValueError as exc:
        raise ConfigError(f"bad solver settings: {exc}") from exc


def effective_config(cfg, seed_override=None) -> dict:
    """The configuration actually used, with defaults filled in."""
    grid = _build_grid(cfg)
    laws = _build_laws(cfg)
    any_plastic = any(law.plastic is not None for law in laws)
    out = {
        "grid": {"n1": grid.n1, "n2": grid.n2, "t1": grid.t1, "t2": grid.t2},
        "microstructure": dict(cfg.get("microstructure", {})),
        "phases": [],
        "loading": {"mode": "uniaxial_stress", "angle_deg": 0.0, "final": 0.01,
                    "steps": 20 if any_plastic else 1},
        "solver": {"tol": 1e-4, "max_iter": 5000, "half_spectrum": True},
        "output": dict(cfg.get("output", {})),
    }
    micro = out["microstructure"]
    if micro.get("kind") == "random_fibers":
        micro["seed"] = int(micro.get("seed", 0)) if seed_override is None else int(seed_override)
    for item in cfg.get("phases", []):
        merged = dict(MATERIAL_PRESETS.get(item.get("preset", ""), {}))
        merged.update(item)
        merged.pop("preset", None)
        out["phases"].append(merged)
    out["loading"].update(cfg.get("loading", {}))
    out["solver"].update(cfg.get("solver", {}))
    if "ensemble" in cfg:
        out["ensemble"] = dict(cfg["ensemble"])
    return out


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def _atomic_write(path, write_fn):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    os.close(fd)
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def map_export(data, path, scale=None) -> None:
    """Write a scalar field as a grayscale map with clamping at the bounds.

    ``scale`` is (min, max) or None for the data range; the bounds go to a
    sidecar next to the image. A degenerate range maps to a single mid-gray.
    """
    if isinstance(data, ScalarField):
        data = data.data
    data = np.asarray(data, dtype=float)
    if not np.all(np.isfinite(data)):
        bad = np.argwhere(~np.isfinite(data))[:5]
        raise ValueError(f"non-finite field values at pixels {bad.tolist()}")
    lo, hi = (float(data.min()), float(data.max())) if scale is None else map(float, scale)
    if hi <= lo:
        gray = np.full(data.shape, 128, dtype=np.uint8)
    else:
        gray = np.clip((data - lo) / (hi - lo) * 255.0, 0.0, 255.0).astype(np.uint8)
    _atomic_write(path, lambda tmp: _write_gray_named(tmp, gray, Path(path).suffix))
    Path(str(path) + ".txt").write_text(f"min {lo:.12g}\nmax {hi:.12g}\n")


def _write_gray_named(tmp_path, gray, suffix):
    # The temp file carries a .tmp suffix; pick the encoder from the real name.
    if suffix.lower() == ".png":
        Image.fromarray(np.ascontiguousarray(gray.T), mode="L").save(tmp_path, format="PNG")
    else:
        with open(tmp_path, "wb") as fh:
            fh.write(f"P5\n{gray.shape[0]} {gray.shape[1]}\n255\n".encode())
            fh.write(np.ascontiguousarray(gray.T).tobytes())


def _write_report(path, pm, laws, cfg_solver, curve, state, results):
    lines = ["effective properties", "--------------------"]
    for key in ("young_modulus", "initial_slope", "flow_stress", "hardening_modulus"):
        if key in results:
            lines.append(f"{key} = {results[key]:.6g}")
    lines.append(f"final E33 = {state.macro_strain[2]:.6g}")
    lines.append("")
    fractions = pm.volume_fractions()
    lines.append("phases")
    lines.append("------")
    for i, law in enumerate(laws[: pm.n_phases]):
        kind = "elastic" if law.is_elastic else f"plastic ({law.plastic.kind})"
        lines.append(f"phase {i}: fraction {fractions[i]:.4f}, young {law.elastic.young:.6g}, "
                     f"poisson {law.elastic.poisson:.4f}, {kind}")
    lines.append("")
    lines.append("convergence")
    lines.append("-----------")
    lines.append(f"tolerance {cfg_solver.tol:g}, iteration cap {cfg_solver.max_iter}")
    for i, rec in enumerate(state.history):
        lines.append(f"step {i + 1}: t = {rec.time:.6g}, iterations {rec.iterations}, "
                     f"error {rec.error:.3e}, max p {rec.max_p:.4g}")
    _atomic_write(path, lambda tmp: Path(tmp).write_text("\n".join(lines) + "\n"))


def extract_results(curve: OverallCurve, laws) -> dict:
    """Pull the extractable moduli from a macroscopic curve."""
    results = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            results["young_modulus"] = young_modulus(curve)
        except ValueError:
            results["initial_slope"] = float(curve.axial_stress()[0] / curve.axial_strain()[0])
        plastic = [law.plastic for law in laws if law.plastic is not None]
        if plastic and curve.max_p[-1] > 0.0 and curve.times.size >= 2:
            if all(c.kind == PERFECT for c in plastic):
                results["flow_stress"] = flow_stress(curve)
            else:
                try:
                    results["hardening_modulus"] = hardening_modulus(curve)
                except ValueError:
                    pass
    return results


def run_pipeline(cfg: dict, out_dir: Path, seed_override=None) -> dict:
    """Execute one configured run and write its artifacts."""
    grid = _build_grid(cfg)
    laws = _build_laws(cfg)
    pm = _build_microstructure(cfg, grid, seed_override)
    _require(len(laws) == pm.n_phases,
             f"{pm.n_phases} phases in microstructure but {len(laws)} materials declared")
    program = _build_program(cfg, laws)
    solver_cfg = _build_solver(cfg)

    out_dir.mkdir(parents=True, exist_ok=True)
    echo = effective_config(cfg, seed_override)
    _atomic_write(out_dir / "config_used.json",
                  lambda tmp: Path(tmp).write_text(json.dumps(echo, indent=2) + "\n"))

    state = run_program(pm, laws, program, solver_cfg)
    curve = OverallCurve.from_state(state, program)
    results = extract_results(curve, laws)

    _atomic_write(out_dir / "curve.csv", lambda tmp: write_curve_csv(curve, tmp))
    _write_report(out_dir / "report.txt", pm, laws, solver_cfg, curve, state, results)

    output = cfg.get("output", {})
    maps = output.get("maps", [])
    scales = output.get("scales", {})
    fmt = output.get("format", "pgm")
    _require(fmt in ("pgm", "png"), f"unknown map format {fmt!r}")
    for name in maps:
        _require(name in MAP_FIELDS, f"unknown map field {name!r}")
        path = out_dir / f"{name}.{fmt}"
        if name == "phase":
            save_phase_map(pm, path)
        else:
            field = {"p": lambda: state.p.data,
                     "stress_eq": lambda: von_mises(state.stress.data),
                     "strain_eq": lambda: equivalent_strain(state.strain.data)}[name]()
            map_export(field, path, scale=scales.get(name))
    return {"results": results, "curve": curve, "state": state, "phase_map": pm}


def _ensemble_worker(cfg, out_dir_str, seed):
    try:
        out = run_pipeline(cfg, Path(out_dir_str) / f"sample_{seed}", seed_override=seed)
        results = out["results"]
        value = results.get("flow_stress", results.get("young_modulus",
                            results.get("hardening_modulus", results.get("initial_slope"))))
        return seed, value, ""
    except Exception as exc:  # per-sample failures are recorded, not fatal
        return seed, None, f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = run_pipeline(cfg, Path(args.out), seed_override=args.seed)
    for key, value in out["results"].items():
        print(f"{key} = {value:.6g}")
    return EXIT_OK


def cmd_gen(args) -> int:
    cfg = load_config(args.config)
    grid = _build_grid(cfg)
    pm = _build_microstructure(cfg, grid, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_phase_map(pm, out_dir / "microstructure.pgm")
    fractions = pm.volume_fractions()
    print(f"phases: {pm.n_phases}, fractions: {[round(f, 4) for f in fractions]}")
    return EXIT_OK


def cmd_ensemble(args) -> int:
    cfg = load_config(args.config)
    ens = cfg.get("ensemble")
    _require(isinstance(ens, dict), "missing 'ensemble' section")
    if "seeds" in ens:
        seeds = [int(s) for s in ens["seeds"]]
    else:
        n = int(ens.get("n_samples", 0))
        _require(n >= 2, "ensemble needs 'seeds' or 'n_samples' >= 2")
        seeds = list(range(int(ens.get("base_seed", 0)), int(ens.get("base_seed", 0)) + n))
    _require(cfg.get("microstructure", {}).get("kind") == "random_fibers",
             "ensemble runs need a random_fibers microstructure")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(_ensemble_worker, [cfg] * len(seeds),
                                 [str(out_dir)] * len(seeds), seeds))
    else:
        rows = [_ensemble_worker(cfg, str(out_dir), s) for s in seeds]

    def write_samples(tmp):
        with open(tmp, "w") as fh:
            fh.write("sample,seed,value,status\n")
            for i, (seed, value, err) in enumerate(rows):
                val = "" if value is None else f"{value:.12g}"
                fh.write(f"{i},{seed},{val},{'ok' if not err else err}\n")

    _atomic_write(out_dir / "samples.csv", write_samples)

    values = [v for _, v, err in rows if not err]
    failed = [(s, err) for s, _, err in rows if err]
    lines = [f"n_samples {len(values)}"]
    if len(values) >= 2:
        stats = ensemble(values)
        lines += [f"mean {stats.mean:.12g}", f"std_dev {stats.std_dev:.12g}",
                  f"error_on_mean {stats.error_on_mean:.12g}"]
    for seed, err in failed:
        lines.append(f"failed seed {seed}: {err}")
    _atomic_write(out_dir / "stats.txt",
                  lambda tmp: Path(tmp).write_text("\n".join(lines) + "\n"))
    print("\n".join(lines))
    return EXIT_OK if not failed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ffthom",
        description="Periodic cell solver for pixelized composites (FFT fixed point)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("run", cmd_run), ("ensemble", cmd_ensemble), ("gen", cmd_gen)):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to the JSON run configuration")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the microstructure seed")
        p.add_argument("--threads", type=int, default=1,
                       help="parallel workers for ensemble samples")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        try:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "diagnostic.txt").write_text(str(exc) + "\n")
        except OSError:
            pass
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
