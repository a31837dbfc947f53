"""Run configuration files.

Configs are YAML (plain JSON is valid YAML too). Example::

    plant: {num: [1], den: [1, 1], delay: 1}
    target: {kind: fotd, Tcl: 2, L: 1}
    controller: {lo: [0, 0, 0], hi: [inf, inf, 0]}
    optimizer: {max_evals: 3000, tol: 1.0e-8, seed: 0, n_starts: 1}
    simulation: {t_final: 25, n_samples: 2000}

Target kinds: ``second_order`` with ``PO``/``Ts`` or ``zeta``/``wn``;
``fotd`` with ``Tcl``/``L``; ``custom_tf`` with ``num``/``den``/``delay``;
``trajectory`` with ``t_final`` and uniformly spaced ``y`` samples, or a
``csv`` file (columns ``t,y``, path relative to the config). Upper gain
bounds accept ``inf``. Unknown keys are errors.
"""
from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .errors import ConfigError, DomainError
from .lti import DEFAULT_SAMPLES, SimGrid, TimeSeries, TransferFunction
from .reference import DesiredSpec
from .tuner import DEFAULT_MAX_EVALS, DEFAULT_TOL, HORIZON_FACTOR, TuneProblem

_TOP = {"plant", "target", "controller", "optimizer", "simulation"}
_TARGET_KEYS = {
    "second_order": {"PO", "Ts", "zeta", "wn"},
    "fotd": {"Tcl", "L"},
    "custom_tf": {"num", "den", "delay"},
    "trajectory": {"t_final", "y", "csv"},
}


def _number(value: Any, key: str, allow_inf: bool = False) -> float:
    if isinstance(value, str) and allow_inf and value.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    if isinstance(value, str):
        # YAML 1.1 reads exponents without a dot ("1e-8") as strings
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(key, f"expected a number, got {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    v = float(value)
    if math.isnan(v) or (math.isinf(v) and not (allow_inf and v > 0)):
        raise ConfigError(key, f"expected a finite number, got {value!r}")
    return v


def _integer(value: Any, key: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(key, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(key, f"must be >= {minimum}, got {value}")
    return value


def _coeffs(value: Any, key: str) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ConfigError(key, "expected a non-empty list of numbers")
    return [_number(v, f"{key}[{i}]") for i, v in enumerate(value)]


def _mapping(value: Any, key: str, allowed: set[str]) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(key, "expected a mapping")
    for k in value:
        if k not in allowed:
            prefix = f"{key}." if key else ""
            raise ConfigError(f"{prefix}{k}", "unknown key")
    return value


def _bound_out(v: float) -> Any:
    return "inf" if math.isinf(v) else v


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Validated configuration with every default filled in."""

    data: dict
    base_dir: Path = Path(".")

    def as_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def plant(self) -> TransferFunction:
        p = self.data["plant"]
        return TransferFunction(p["num"], p["den"], p["delay"])

    def spec(self) -> DesiredSpec:
        return _build_spec(self.data["target"], self.base_dir)

    def grid(self) -> SimGrid:
        s = self.data["simulation"]
        return SimGrid(s["t_final"], s["n_samples"])

    def bounds(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        c = self.data["controller"]
        hi = tuple(math.inf if h == "inf" else h for h in c["hi"])
        return tuple(c["lo"]), hi

    def problem(self, seed: Optional[int] = None) -> TuneProblem:
        o = self.data["optimizer"]
        lo, hi = self.bounds()
        try:
            return TuneProblem(self.plant(), self.spec(), self.grid(), lo, hi,
                               max_evals=o["max_evals"], tol=o["tol"],
                               seed=o["seed"] if seed is None else seed, n_starts=o["n_starts"])
        except DomainError as exc:
            raise ConfigError("target", str(exc)) from exc

    def with_seed(self, seed: int) -> "RunConfig":
        data = self.as_dict()
        data["optimizer"]["seed"] = seed
        return RunConfig(data, self.base_dir)


def _read_trajectory_csv(path: Path, key: str) -> tuple[float, list[float]]:
    try:
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(key, f"cannot read {path}: {exc}") from exc
    try:
        t = np.array([float(r["t"]) for r in rows])
        y = [float(r["y"]) for r in rows]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(key, "trajectory CSV needs numeric columns t,y") from exc
    if len(t) < 2 or t[0] != 0.0:
        raise ConfigError(key, "trajectory must start at t=0 with at least two samples")
    steps = np.diff(t)
    if np.any(np.abs(steps - steps.mean()) > 1e-6 * steps.mean()):
        raise ConfigError(key, "trajectory samples must be uniformly spaced")
    return float(t[-1]), y


def _build_spec(target: dict, base_dir: Path) -> DesiredSpec:
    kind = target["kind"]
    try:
        if kind == "second_order":
            if "PO" in target:
                return DesiredSpec.second_order(target["PO"], target["Ts"])
            return DesiredSpec.damped(target["zeta"], target["wn"])
        if kind == "fotd":
            return DesiredSpec.fotd(target["Tcl"], target["L"])
        if kind == "custom_tf":
            return DesiredSpec.custom(TransferFunction(target["num"], target["den"], target["delay"]))
        if "csv" in target:
            t_final, y = _read_trajectory_csv(base_dir / target["csv"], "target.csv")
        else:
            t_final, y = target["t_final"], target["y"]
        return DesiredSpec.trajectory(TimeSeries(SimGrid(t_final, len(y)), y))
    except DomainError as exc:
        raise ConfigError("target", str(exc)) from exc


def _validate_target(raw: Any) -> dict:
    t = _mapping(raw, "target", {"kind"} | set().union(*_TARGET_KEYS.values()))
    kind = t.get("kind")
    if kind not in _TARGET_KEYS:
        raise ConfigError("target.kind", f"expected one of {sorted(_TARGET_KEYS)}, got {kind!r}")
    _mapping(t, "target", {"kind"} | _TARGET_KEYS[kind])
    out: dict = {"kind": kind}
    if kind == "second_order":
        has_po = "PO" in t or "Ts" in t
        has_zw = "zeta" in t or "wn" in t
        if has_po == has_zw:
            raise ConfigError("target", "second_order needs either PO and Ts, or zeta and wn")
        names = ("PO", "Ts") if has_po else ("zeta", "wn")
        for n in names:
            if n not in t:
                raise ConfigError(f"target.{n}", "missing key")
            out[n] = _number(t[n], f"target.{n}")
    elif kind == "fotd":
        for n in ("Tcl", "L"):
            if n not in t:
                raise ConfigError(f"target.{n}", "missing key")
            out[n] = _number(t[n], f"target.{n}")
    elif kind == "custom_tf":
        for n in ("num", "den"):
            if n not in t:
                raise ConfigError(f"target.{n}", "missing key")
            out[n] = _coeffs(t[n], f"target.{n}")
        out["delay"] = _number(t.get("delay", 0.0), "target.delay")
        if out["delay"] < 0:
            raise ConfigError("target.delay", "must be >= 0")
    else:
        if "csv" in t:
            if "y" in t or "t_final" in t:
                raise ConfigError("target", "give either csv or t_final/y, not both")
            if not isinstance(t["csv"], str):
                raise ConfigError("target.csv", "expected a file path")
            out["csv"] = t["csv"]
        else:
            for n in ("t_final", "y"):
                if n not in t:
                    raise ConfigError(f"target.{n}", "missing key")
            out["t_final"] = _number(t["t_final"], "target.t_final")
            out["y"] = _coeffs(t["y"], "target.y")
    return out


def validate(raw: Any, base_dir: Path = Path(".")) -> RunConfig:
    """Validate a parsed config mapping and fill defaults."""
    top = _mapping(raw, "", _TOP)
    for k in ("plant", "target"):
        if k not in top:
            raise ConfigError(k, "missing section")

    p = _mapping(top["plant"], "plant", {"num", "den", "delay"})
    for n in ("num", "den"):
        if n not in p:
            raise ConfigError(f"plant.{n}", "missing key")
    plant = {"num": _coeffs(p["num"], "plant.num"), "den": _coeffs(p["den"], "plant.den"),
             "delay": _number(p.get("delay", 0.0), "plant.delay")}
    if plant["delay"] < 0:
        raise ConfigError("plant.delay", f"must be >= 0, got {plant['delay']}")

    target = _validate_target(top["target"])

    c = _mapping(top.get("controller", {}), "controller", {"lo", "hi"})
    lo = c.get("lo", [0.0, 0.0, 0.0])
    hi = c.get("hi", ["inf", "inf", "inf"])
    for key, vals in (("controller.lo", lo), ("controller.hi", hi)):
        if not isinstance(vals, list) or len(vals) != 3:
            raise ConfigError(key, "expected a list of three values (kp, ki, kd)")
    lo = [_number(v, f"controller.lo[{i}]") for i, v in enumerate(lo)]
    hi = [_number(v, f"controller.hi[{i}]", allow_inf=True) for i, v in enumerate(hi)]
    for i, (l, h) in enumerate(zip(lo, hi)):
        if l < 0:
            raise ConfigError(f"controller.lo[{i}]", "must be >= 0")
        if h < l:
            raise ConfigError(f"controller.hi[{i}]", "must be >= the lower bound")

    o = _mapping(top.get("optimizer", {}), "optimizer", {"max_evals", "tol", "seed", "n_starts"})
    optimizer = {
        "max_evals": _integer(o.get("max_evals", DEFAULT_MAX_EVALS), "optimizer.max_evals", 1),
        "tol": _number(o.get("tol", DEFAULT_TOL), "optimizer.tol"),
        "seed": _integer(o.get("seed", 0), "optimizer.seed", 0),
        "n_starts": _integer(o.get("n_starts", 1), "optimizer.n_starts", 1),
    }
    if optimizer["tol"] <= 0:
        raise ConfigError("optimizer.tol", "must be > 0")

    s = _mapping(top.get("simulation", {}), "simulation", {"t_final", "n_samples"})
    simulation = {"t_final": s.get("t_final"),
                  "n_samples": _integer(s.get("n_samples", DEFAULT_SAMPLES), "simulation.n_samples", 2)}

    data = {"plant": plant, "target": target,
            "controller": {"lo": lo, "hi": [_bound_out(h) for h in hi]},
            "optimizer": optimizer, "simulation": simulation}
    cfg = RunConfig(data, base_dir)
    try:
        cfg.plant()
    except DomainError as exc:
        raise ConfigError("plant", str(exc)) from exc
    spec = cfg.spec()
    if simulation["t_final"] is None:
        if spec.kind == "trajectory":
            simulation["t_final"] = spec.series.grid.t_final
        else:
            simulation["t_final"] = HORIZON_FACTOR * spec.predicted_settling_time()
    else:
        simulation["t_final"] = _number(simulation["t_final"], "simulation.t_final")
        if simulation["t_final"] <= 0:
            raise ConfigError("simulation.t_final", "must be > 0")
    return cfg


def parse_config(path: Path | str) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"invalid YAML: {exc}") from exc
    return validate(raw, path.parent)
