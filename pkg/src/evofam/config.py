"""Config ingestion: JSON schema validation and object construction."""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .assumptions import SamplePlan
from .errors import ConfigurationError
from .evolution import PropagatorEngine
from .perturbation import (Mollifier, MultiplierFamily, SmoothingComposite,
                           VolterraSolver)
from .spectral import (Grid, GridFunction, gaussian_bump, indicator,
                       load_function, mode, random_band_limited)
from .symbols import CoefficientFunction, SymbolSpec
from .transport import (TimeSpaceCoefficient, TransportProblem, box_initial,
                        constant_field, gaussian_initial)


def load_schema() -> dict:
    text = resources.files("evofam.data").joinpath("config.schema.json").read_text()
    return json.loads(text)


def validate_config(config: dict) -> None:
    """Schema-check; raises ConfigurationError with a field-path diagnostic."""
    validator = jsonschema.Draft7Validator(load_schema())
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigurationError(f"config invalid at {path}: {err.message}")


def load_config(path) -> dict:
    path = Path(path)
    try:
        config = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"malformed JSON in {path} at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}") from exc
    validate_config(config)
    return config


def _complexish(value, default=0.0) -> complex:
    if value is None:
        return complex(default)
    if isinstance(value, (int, float)):
        return complex(value)
    return complex(value[0], value[1])


def build_coefficient(entry: dict | None) -> CoefficientFunction:
    entry = entry or {}
    poly = tuple((int(k), complex(re, im)) for k, re, im in entry.get("poly", []))
    trig = tuple((float(w), complex(cr, ci), complex(sr, si))
                 for w, cr, ci, sr, si in entry.get("trig", []))
    steps = tuple((float(t0), complex(re, im))
                  for t0, re, im in entry.get("steps", []))
    return CoefficientFunction(const=_complexish(entry.get("const")),
                               poly=poly, trig=trig, steps=steps)


def build_symbol(entry: dict) -> SymbolSpec:
    coeffs = {}
    for item in entry["coefficients"]:
        alpha = tuple(int(a) for a in item["alpha"])
        coeffs[alpha] = build_coefficient(item)
    return SymbolSpec(dim=int(entry["dim"]), order=int(entry["order"]),
                      horizon=float(entry["horizon"]), coefficients=coeffs)


def build_grid(entry: dict) -> Grid:
    return Grid(int(entry["dim"]), int(entry["n"]), float(entry["box"]))


def build_plan(entry: dict | None, seed: int) -> SamplePlan:
    entry = dict(entry or {})
    return SamplePlan(seed=seed, **entry)


def build_engine(entry: dict | None, spec: SymbolSpec, grid: Grid) -> PropagatorEngine:
    entry = entry or {}
    return PropagatorEngine(
        spec, grid,
        method=entry.get("method", "exact"),
        gl_nodes=int(entry.get("gl_nodes", 12)),
        panel_width=float(entry.get("panel_width", 0.25)),
        steps=int(entry.get("steps", 64)),
        rule=entry.get("rule", "left"),
    )


def build_perturbation(entry: dict | None, dim: int):
    entry = entry or {"kind": "mollifier"}
    kind = entry["kind"]
    if kind == "mollifier":
        return Mollifier(dim)
    if kind == "multiplier":
        return MultiplierFamily(
            coefficient=build_coefficient(entry.get("coefficient")),
            profile_num=tuple(entry.get("profile_num", (1.0,))),
            profile_den=tuple(entry.get("profile_den", (1.0, 1.0))),
        )
    if kind == "smoothing":
        coeff = entry.get("coefficient")
        return SmoothingComposite(
            order=int(entry.get("order", 2)),
            coefficient=build_coefficient(coeff) if coeff else None,
        )
    raise ConfigurationError(f"unknown perturbation kind {kind!r}")


def build_solver(entry: dict | None) -> VolterraSolver:
    entry = entry or {}
    return VolterraSolver(steps=int(entry.get("steps", 1024)),
                          tolerance=float(entry.get("tolerance", 1e-12)),
                          max_sweeps=int(entry.get("max_sweeps", 20)))


def build_initial(entry: dict, grid: Grid, rng: np.random.Generator,
                  base_dir: Path | None = None) -> GridFunction:
    kind = entry["kind"]
    if kind == "mode":
        return mode(grid, entry.get("k", 1))
    if kind == "random_band":
        return random_band_limited(grid, rng, band=int(entry.get("band", 4)))
    if kind == "indicator":
        return indicator(grid, float(entry.get("lo", 0.0)), float(entry.get("hi", 1.0)))
    if kind == "gaussian":
        return gaussian_bump(grid, entry.get("center"), entry.get("width"))
    if kind == "file":
        stem = Path(entry["stem"])
        if base_dir is not None and not stem.is_absolute():
            stem = base_dir / stem
        return load_function(stem)
    raise ConfigurationError(f"unknown initial kind {kind!r} for grid functions")


def build_field(entry: dict) -> TimeSpaceCoefficient:
    if "const" in entry and "time" not in entry:
        return constant_field(float(entry["const"]))
    time_part = build_coefficient(entry.get("time"))
    return TimeSpaceCoefficient(time_part,
                                w0=float(entry.get("w0", 1.0)),
                                w1=float(entry.get("w1", 0.0)))


def build_transport(entry: dict) -> TransportProblem:
    return TransportProblem(
        horizon=float(entry["T"]),
        x_max=float(entry["xmax"]),
        cells=int(entry["cells"]),
        velocity=build_field(entry["g"]),
        decay=build_field(entry["mu"]),
    )


def build_transport_initial(entry: dict):
    kind = entry["kind"]
    if kind == "box":
        return box_initial(float(entry.get("lo", 1.0)), float(entry.get("hi", 2.0)))
    if kind == "gaussian":
        return gaussian_initial(float(entry.get("center", 1.5)),
                                float(entry.get("width", 0.25)))
    raise ConfigurationError(f"unknown initial kind {kind!r} for transport")
