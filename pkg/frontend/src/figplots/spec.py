"""Plot specifications and CSV table loading.

A spec is a TOML document naming the figure kind, the input CSV files,
optional axis cosmetics, and the output raster path with its pixel
dimensions. Input tables are validated against the column set each
figure actually reads; extra columns are always allowed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

import numpy as np


class FigplotsError(Exception):
    """Base class for all package errors."""


class SpecError(FigplotsError):
    """The spec document is malformed or references a missing file."""


class SchemaMismatch(FigplotsError):
    """An input CSV lacks a column the figure needs."""


KINDS = ("hysteresis", "tongue", "intermittency", "ramp")

# input name -> columns the renderer reads from it
REQUIRED_INPUTS: Dict[str, Dict[str, Tuple[str, ...]]] = {
    "hysteresis": {
        "sweep_up": ("c", "amp"),
        "sweep_down": ("c", "amp"),
        "events": ("c", "drop"),
    },
    "tongue": {"tongue": ("c", "tau", "amp")},
    "intermittency": {
        "trajectory": ("t", "h"),
        "envelope": ("t_center", "amp"),
    },
    "ramp": {"trajectory": ("t", "h")},
}

_DPI = 100


@dataclass
class PlotSpec:
    kind: str
    inputs: Dict[str, str]
    out_path: str
    width_px: int = 1000
    height_px: int = 700
    xlabel: Optional[str] = None
    ylabel: Optional[str] = None
    xlim: Optional[Tuple[float, float]] = None
    ylim: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown figure kind {self.kind!r}; "
                            f"expected one of {', '.join(KINDS)}")
        if self.width_px <= 0 or self.height_px <= 0:
            raise SpecError("pixel dimensions must be positive")
        need = REQUIRED_INPUTS[self.kind]
        for name in need:
            if name not in self.inputs:
                raise SpecError(
                    f"{self.kind} figure needs input {name!r}")
        for name in self.inputs:
            if name not in need:
                raise SpecError(
                    f"input {name!r} is not used by a {self.kind} figure")
        for name, path in self.inputs.items():
            if not Path(path).is_file():
                raise SpecError(f"input {name!r}: no such file: {path}")
        if not self.out_path:
            raise SpecError("output path must be set")

    @property
    def figsize(self) -> Tuple[float, float]:
        return (self.width_px / _DPI, self.height_px / _DPI)

    @property
    def dpi(self) -> int:
        return _DPI


def _reject_unknown(table: dict, allowed: Tuple[str, ...], where: str):
    for key in table:
        if key not in allowed:
            raise SpecError(f"unknown key {key!r} in {where}")


def _pair(val, name: str) -> Tuple[float, float]:
    if (not isinstance(val, (list, tuple)) or len(val) != 2
            or not all(isinstance(v, (int, float)) for v in val)):
        raise SpecError(f"{name} must be a two-number list")
    return (float(val[0]), float(val[1]))


def load_spec(path: str, default_kind: Optional[str] = None) -> PlotSpec:
    """Parse a TOML spec file; unknown keys are rejected by name."""
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except OSError as e:
        raise SpecError(f"cannot read spec: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise SpecError(f"spec is not valid TOML: {e}") from e

    _reject_unknown(doc, ("kind", "inputs", "axes", "output"), "spec")
    kind = doc.get("kind", default_kind)
    if kind is None:
        raise SpecError("spec does not name a figure kind")

    inputs = doc.get("inputs")
    if not isinstance(inputs, dict) or not inputs:
        raise SpecError("spec needs an [inputs] table")
    for name, p in inputs.items():
        if not isinstance(p, str):
            raise SpecError(f"inputs.{name} must be a path string")

    axes = doc.get("axes", {})
    if not isinstance(axes, dict):
        raise SpecError("[axes] must be a table")
    _reject_unknown(axes, ("xlabel", "ylabel", "xlim", "ylim"), "[axes]")

    output = doc.get("output")
    if not isinstance(output, dict) or "path" not in output:
        raise SpecError("spec needs an [output] table with a path")
    _reject_unknown(output, ("path", "width_px", "height_px"), "[output]")

    base = Path(path).parent

    def resolve(p: str) -> str:
        q = Path(p)
        return str(q if q.is_absolute() else base / q)

    return PlotSpec(
        kind=str(kind),
        inputs={k: resolve(v) for k, v in inputs.items()},
        out_path=resolve(str(output["path"])),
        width_px=int(output.get("width_px", 1000)),
        height_px=int(output.get("height_px", 700)),
        xlabel=axes.get("xlabel"),
        ylabel=axes.get("ylabel"),
        xlim=_pair(axes["xlim"], "axes.xlim") if "xlim" in axes else None,
        ylim=_pair(axes["ylim"], "axes.ylim") if "ylim" in axes else None,
    )


def read_table(path: str, required: Tuple[str, ...],
               label: str) -> Dict[str, np.ndarray]:
    """Read the required columns of a CSV as float arrays.

    A header-only file yields empty arrays. A header missing any required
    column raises SchemaMismatch naming that column.
    """
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{label} ({path}): file has no header")
        for col in required:
            if col not in header:
                raise SchemaMismatch(
                    f"{label} ({path}): missing column {col!r}")
        idx = {col: header.index(col) for col in required}
        data = {col: [] for col in required}
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            for col, i in idx.items():
                try:
                    data[col].append(float(row[i]))
                except (IndexError, ValueError):
                    raise SchemaMismatch(
                        f"{label} ({path}): bad value for {col!r} "
                        f"on line {line}")
    return {col: np.asarray(vals, dtype=float)
            for col, vals in data.items()}
