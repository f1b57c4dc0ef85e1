"""Configuration parsing, command-line entry points, and bit-stable CSV
serialization for every experiment.

Config is a single TOML document; all values have defaults matching the
standard preset (kappa=11, tau=0.953, c=2.966, dt=1e-3, window=200).
Floats are serialized with 17 significant digits so every binary64 value
round-trips losslessly; reruns with the same config and seed produce
byte-identical files regardless of --threads.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

import numpy as np

from . import experiments as xp
from .errors import (NonFiniteState, TorustipError, ValidationError)
from .observables import AttractorClass
from .sdde_core import (ConstantHistory, IntegratorConfig, ModelParams,
                        integrate, Constant)

__version__ = "0.1.0"

_KINDS = ("simulate", "hysteresis", "tongue", "intermittency", "multistability")

# Per-experiment option names, their types, and defaults. Defaults follow
# the calibrated presets; see README for the schema of each output file.
_OPTION_SPECS: Dict[str, Dict[str, tuple]] = {
    "simulate": {
        "c_start": (float, 2.966), "c_stop": (float, 2.966),
        "rate": (float, 0.0), "t_end": (float, 5000.0),
        "h0": (float, 1.0), "dt": (float, 1e-3),
        "sample_dt": (float, 0.01), "window": (float, 200.0),
    },
    "hysteresis": {
        "c_min": (float, 2.55), "c_max": (float, 3.15),
        "rate": (float, 1e-6), "seeds": (list, [0]),
        "dt": (float, 1e-3), "settle": (float, 2000.0), "h0": (float, 1.0),
        "window": (float, 200.0), "sample_dt": (float, 0.01),
        "class_window": (float, 400.0), "class_tol": (float, 9e-2),
        "q_max": (int, 40), "min_drop_frac": (float, 0.05),
    },
    "tongue": {
        "c_grid": (list, [2.95, 2.96, 2.97, 2.98, 2.99, 3.0]),
        "tau_grid": (list, [0.953]),
        "rate": (float, 1e-5), "dt": (float, 1e-3),
        "settle": (float, 2000.0), "h0": (float, 1.0),
        "window": (float, 200.0), "sample_dt": (float, 0.01),
        "class_window": (float, 400.0), "class_tol": (float, 9e-2),
        "q_max": (int, 40),
    },
    "intermittency": {
        "deltas": (list, [0.003, 0.0045, 0.006]),
        "t_unperturbed": (float, 1.5e4), "t_total": (float, 2.5e4),
        "seeds": (list, list(range(10))),
        "dt": (float, 2.5e-4), "window": (float, 100.0),
        "sample_dt": (float, 0.02), "h0": (float, 1.0),
    },
    "multistability": {
        "c_values": (list, [2.968, 2.969, 2.970, 2.971, 2.972, 2.973]),
        "trials": (int, 30), "h0_min": (float, 0.0), "h0_max": (float, 2.0),
        "seeds": (list, [0]), "dt": (float, 2.5e-4),
        "explore_eps": (float, 1e-3), "explore_time": (float, 3000.0),
        "settle_time": (float, 2500.0), "observe_time": (float, 800.0),
        "window": (float, 200.0), "merge_tol": (float, 0.05),
        "tol": (float, 1e-3), "q_max": (int, 40),
    },
}

_PARAM_SPEC = {
    "kappa": (float, 11.0), "c_base": (float, 2.966),
    "tau": (float, 0.953),
    # eps defaults differ per experiment preset
}
_EPS_DEFAULTS = {"simulate": 0.0, "hysteresis": 0.0005, "tongue": 0.0,
                 "intermittency": 0.001, "multistability": 0.0}


@dataclass(frozen=True)
class RunConfig:
    kind: str
    params: ModelParams
    options: Dict[str, object]
    seed: int = 0
    threads: int = 1

    def resolved(self) -> dict:
        return {
            "kind": self.kind,
            "params": asdict(self.params),
            "options": dict(self.options),
            "seed": self.seed,
            "threads": self.threads,
        }


def _coerce(key: str, want, value):
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"key '{key}' must be a number, got {value!r}")
        return float(value)
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"key '{key}' must be an integer, got {value!r}")
        return int(value)
    if want is list:
        if not isinstance(value, list) or len(value) == 0:
            raise ValidationError(f"key '{key}' must be a nonempty list")
        return list(value)
    raise ValidationError(f"key '{key}' has unsupported type")


def parse_config(text: str, kind: Optional[str] = None) -> RunConfig:
    """Parse and fully resolve a TOML config document.

    Unknown keys are rejected; an empty document yields the full default
    preset. The experiment kind comes from the document's `experiment`
    key or the `kind` argument (the CLI subcommand); if both are given
    they must agree.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config syntax error: {exc}") from exc

    doc_kind = doc.pop("experiment", None)
    if doc_kind is not None and doc_kind not in _KINDS:
        raise ValidationError(f"unknown experiment kind '{doc_kind}'")
    if kind is not None and doc_kind is not None and kind != doc_kind:
        raise ValidationError(
            f"config experiment '{doc_kind}' conflicts with subcommand '{kind}'")
    use_kind = kind or doc_kind or "simulate"

    seed = doc.pop("seed", 0)
    seed = _coerce("seed", int, seed)
    if seed < 0:
        raise ValidationError("seed must be >= 0")
    threads = doc.pop("threads", 1)
    threads = _coerce("threads", int, threads)
    if threads < 1:
        raise ValidationError("threads must be >= 1")

    pdoc = doc.pop("params", {})
    if not isinstance(pdoc, dict):
        raise ValidationError("[params] must be a table")
    pvals = {}
    for key, (want, default) in _PARAM_SPEC.items():
        pvals[key] = _coerce(key, want, pdoc.pop(key, default))
    pvals["eps"] = _coerce("eps", float, pdoc.pop("eps", _EPS_DEFAULTS[use_kind]))
    if pdoc:
        raise ValidationError(f"unknown key '{next(iter(pdoc))}' in [params]")
    try:
        params = ModelParams(**pvals)
    except ValidationError:
        raise

    spec = _OPTION_SPECS[use_kind]
    odoc = doc.pop(use_kind, {})
    if not isinstance(odoc, dict):
        raise ValidationError(f"[{use_kind}] must be a table")
    for other in _KINDS:
        doc.pop(other, None)  # sections for other experiments are inert
    if doc:
        raise ValidationError(f"unknown key '{next(iter(doc))}'")
    options = {}
    for key, (want, default) in spec.items():
        options[key] = _coerce(key, want, odoc.pop(key, default))
    if odoc:
        raise ValidationError(f"unknown key '{next(iter(odoc))}' in [{use_kind}]")

    _validate_options(use_kind, params, options)
    return RunConfig(kind=use_kind, params=params, options=options,
                     seed=seed, threads=threads)


def _validate_options(kind: str, params: ModelParams, o: Dict[str, object]):
    dt = o.get("dt")
    if dt is not None:
        if dt <= 0:
            raise ValidationError("dt must be > 0")
        if params.tau < dt:
            raise ValidationError(
                f"InvalidDelay: tau={params.tau} shorter than dt={dt}")
        ratio = params.tau / dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ValidationError(
                f"tau/dt = {ratio} is not an integer within 1e-9")
    if kind == "hysteresis" and not o["c_min"] < o["c_max"]:
        raise ValidationError("c_min must be below c_max")
    if kind in ("hysteresis", "tongue") and o["rate"] <= 0:
        raise ValidationError("rate must be > 0")
    if kind == "simulate":
        dur = (o["t_end"] if o["rate"] == 0
               else abs(o["c_stop"] - o["c_start"]) / abs(o["rate"]))
        if dur < o["window"]:
            raise ValidationError(
                f"run of {dur} units cannot fill a {o['window']}-unit window")
    if kind == "intermittency":
        if not o["t_total"] > o["t_unperturbed"]:
            raise ValidationError("t_total must exceed t_unperturbed")
        # residence stats need enough non-overlapping windows to calibrate
        if (o["t_total"] - o["t_unperturbed"]) / o["window"] < 20:
            raise ValidationError(
                "post-perturbation span must cover at least 20 windows")
    if kind == "multistability" and o["trials"] < 10:
        raise ValidationError("trials must be >= 10")
    for k in ("seeds", "deltas", "c_grid", "tau_grid", "c_values"):
        if k in o and len(o[k]) == 0:
            raise ValidationError(f"{k} must be nonempty")


def _fmt(x) -> str:
    """17-significant-digit decimal: lossless binary64 round-trip."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    v = float(x)
    if np.isnan(v):
        return "nan"
    return format(v, ".17g")


def _class_cols(cls: AttractorClass) -> List[str]:
    if cls.kind == "Locked" and cls.ratio is not None:
        return [cls.kind, str(cls.ratio.p), str(cls.ratio.q)]
    return [cls.kind, "", ""]


def _write_rows(path: Path, header: Sequence[str],
                rows: Sequence[Sequence[str]]):
    text = ",".join(header) + "\n" + "".join(
        ",".join(row) + "\n" for row in rows)
    path.write_text(text, encoding="ascii", newline="")


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Outputs:
    """Collects written files; removes them all if a write fails."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: List[Path] = []

    def write(self, name: str, header: Sequence[str],
              rows: Sequence[Sequence[str]]):
        path = self.out_dir / name
        try:
            _write_rows(path, header, rows)
        except OSError:
            self.cleanup()
            raise
        self.files.append(path)

    def cleanup(self):
        for p in self.files:
            try:
                p.unlink()
            except OSError:
                pass


def _run_simulate(cfg: RunConfig, out: _Outputs):
    o = cfg.options
    rec = max(1, int(round(o["sample_dt"] / o["dt"])))
    icfg = IntegratorConfig(dt=o["dt"], t_end=o["t_end"], seed=cfg.seed,
                            record_stride=rec)
    series, env = xp.ramp_run(cfg.params, o["c_start"], o["c_stop"],
                              o["rate"], ConstantHistory(o["h0"]), icfg,
                              window=o["window"])
    t = series.t
    out.write("trajectory.csv", ("t", "h"),
              [( _fmt(t[i]), _fmt(series.values[i]) ) for i in range(len(series))])
    out.write("envelope.csv", ("t_center", "c", "amp"),
              [(_fmt(env.centers[i]), _fmt(env.tags[i]), _fmt(env.amps[i]))
               for i in range(len(env.amps))])


def _sweep_rows(res: xp.SweepResult) -> List[List[str]]:
    rows = []
    for i in range(len(res.amps)):
        rows.append([_fmt(res.c_values[i]), _fmt(res.amps[i]),
                     *_class_cols(res.classes[i])])
    return rows


def _run_hysteresis(cfg: RunConfig, out: _Outputs):
    o = cfg.options
    # master seed shifts the whole per-run seed list
    seeds = [int(s) + cfg.seed for s in o["seeds"]]
    up, down = xp.hysteresis_sweep(
        cfg.params, o["c_min"], o["c_max"], o["rate"], seeds,
        dt=o["dt"], settle=o["settle"], h0=o["h0"], window=o["window"],
        sample_dt=o["sample_dt"], class_window=o["class_window"],
        class_tol=o["class_tol"], q_max=o["q_max"],
        min_drop_frac=o["min_drop_frac"], threads=cfg.threads)
    out.write("sweep_up.csv", ("c", "amp", "class", "p", "q"), _sweep_rows(up))
    out.write("sweep_down.csv", ("c", "amp", "class", "p", "q"),
              _sweep_rows(down))
    events = list(up.events) + list(down.events)
    out.write("events.csv", ("c", "drop"),
              [(_fmt(e.c), _fmt(e.size)) for e in events])


def _run_tongue(cfg: RunConfig, out: _Outputs):
    o = cfg.options
    tm = xp.tongue_scan(cfg.params, o["c_grid"], o["tau_grid"], o["rate"],
                        dt=o["dt"], settle=o["settle"], h0=o["h0"],
                        window=o["window"], sample_dt=o["sample_dt"],
                        class_window=o["class_window"],
                        class_tol=o["class_tol"], q_max=o["q_max"],
                        seed=cfg.seed, threads=cfg.threads)
    rows = []
    for i, tau in enumerate(tm.tau_grid):
        for j, c in enumerate(tm.c_grid):
            rows.append([_fmt(c), _fmt(tau), _fmt(tm.amp_matrix[i, j]),
                         *_class_cols(tm.class_matrix[i][j])])
    out.write("tongue.csv", ("c", "tau", "amp", "class", "p", "q"), rows)


def _run_intermittency(cfg: RunConfig, out: _Outputs):
    o = cfg.options
    seeds = [int(s) + cfg.seed for s in o["seeds"]]
    results = xp.intermittency_protocol(
        cfg.params, o["deltas"], o["t_unperturbed"], o["t_total"], seeds,
        dt=o["dt"], window=o["window"], sample_dt=o["sample_dt"],
        h0=o["h0"], threads=cfg.threads)
    rows = []
    for r in results:
        rows.append([_fmt(r.delta_c), str(r.seed), _fmt(r.stats.fraction_lower),
                     str(r.stats.visits_upper), str(r.stats.visits_lower)])
    out.write("residence.csv",
              ("delta_c", "seed", "fraction_lower", "visits_upper",
               "visits_lower"), rows)


def _run_multistability(cfg: RunConfig, out: _Outputs):
    o = cfg.options
    seeds = [int(s) + cfg.seed for s in o["seeds"]]
    rows = []
    for c in o["c_values"]:
        report = xp.multistability_probe(
            cfg.params, float(c), trials=o["trials"],
            h0_range=(o["h0_min"], o["h0_max"]), seeds=seeds,
            dt=o["dt"], explore_eps=o["explore_eps"],
            explore_time=o["explore_time"], settle_time=o["settle_time"],
            observe_time=o["observe_time"], window=o["window"],
            merge_tol=o["merge_tol"], tol=o["tol"], q_max=o["q_max"],
            threads=cfg.threads)
        for g in report.found_states:
            rows.append([_fmt(report.c), _fmt(g.amp),
                         *_class_cols(g.attractor), str(g.basin_count)])
    out.write("states.csv", ("c", "amp", "class", "p", "q", "basin_count"),
              rows)


_RUNNERS = {
    "simulate": _run_simulate,
    "hysteresis": _run_hysteresis,
    "tongue": _run_tongue,
    "intermittency": _run_intermittency,
    "multistability": _run_multistability,
}


def _write_manifest(cfg: RunConfig, out: _Outputs, started: float):
    manifest = {
        "version": __version__,
        "config": cfg.resolved(),
        "started": started,
        "finished": time.time(),
        "outputs": {
            p.name: {"sha256": _digest(p), "bytes": p.stat().st_size}
            for p in out.files
        },
    }
    (out.out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def run_cli(argv: Sequence[str]) -> int:
    """Entry point; exit 0 on success, 1 on validation error, 2 on
    numerical or I/O failure."""
    parser = argparse.ArgumentParser(
        prog="torustip",
        description="Delay-oscillator tipping experiments")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in _KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", default="default",
                       help="TOML config path, or 'default' for the preset")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed override")
        p.add_argument("--threads", type=int, default=None,
                       help="parallel work items")
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0

    try:
        if args.config == "default":
            text = ""
        else:
            path = Path(args.config)
            if not path.is_file():
                print(f"error: config file not found: {path}", file=sys.stderr)
                return 1
            text = path.read_text()
        cfg = parse_config(text, kind=args.kind)
        if args.seed is not None:
            if args.seed < 0:
                raise ValidationError("seed must be >= 0")
            cfg = RunConfig(kind=cfg.kind, params=cfg.params,
                            options=cfg.options, seed=args.seed,
                            threads=cfg.threads)
        if args.threads is not None:
            if args.threads < 1:
                raise ValidationError("threads must be >= 1")
            cfg = RunConfig(kind=cfg.kind, params=cfg.params,
                            options=cfg.options, seed=cfg.seed,
                            threads=args.threads)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out_dir = Path(args.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return 2

    out = _Outputs(out_dir)
    started = time.time()
    try:
        _RUNNERS[cfg.kind](cfg, out)
        _write_manifest(cfg, out, started)
    except ValidationError as exc:
        out.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NonFiniteState, OSError) as exc:
        out.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TorustipError as exc:
        out.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:  # console-script entry point
    sys.exit(run_cli(sys.argv[1:]))
