"""Desired closed-loop responses: second-order, FOTD, custom or sampled."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .lti import SimGrid, TimeSeries, TransferFunction, step_response

KINDS = ("second_order", "fotd", "custom_tf", "trajectory")

_FIELDS = {
    "second_order": ("Ts", "PO", "zeta", "wn"),
    "fotd": ("Tcl", "L"),
    "custom_tf": ("tf",),
    "trajectory": ("series",),
}


def damping_from_overshoot(po: float) -> float:
    """Damping ratio giving ``po`` percent overshoot; PO = 0 means critical."""
    if not 0.0 <= po < 100.0:
        raise DomainError(f"PO must satisfy 0 <= PO < 100, got {po}")
    if po == 0.0:
        return 1.0
    lnp = math.log(po / 100.0)
    return -lnp / math.sqrt(math.pi ** 2 + lnp ** 2)


def natural_frequency(zeta: float, ts: float, critically_damped: bool) -> float:
    """2% settling-time natural frequency: 6/(zeta Ts) critical, 4/(zeta Ts) otherwise."""
    if not ts > 0:
        raise DomainError(f"Ts must be > 0, got {ts}")
    if not 0.0 < zeta <= 1.0:
        raise DomainError(f"zeta must lie in (0, 1], got {zeta}")
    return (6.0 if critically_damped else 4.0) / (zeta * ts)


def second_order(zeta: float, wn: float) -> TransferFunction:
    """wn^2 / (s^2 + 2 zeta wn s + wn^2)."""
    if not zeta > 0 or not wn > 0:
        raise DomainError(f"zeta and wn must be positive, got zeta={zeta}, wn={wn}")
    return TransferFunction([wn ** 2], [1.0, 2.0 * zeta * wn, wn ** 2])


def make_second_order(po: float, ts: float) -> TransferFunction:
    zeta = damping_from_overshoot(po)
    critical = po == 0.0
    if 0.0 < po < 0.01:
        warnings.warn(f"PO={po} is nearly zero; the underdamped settling rule is "
                      "inconsistent with the critically damped one here", stacklevel=2)
    return second_order(zeta, natural_frequency(zeta, ts, critical))


def make_fotd(tcl: float, delay: float) -> TransferFunction:
    """1/(1 + s Tcl) e^{-s L}."""
    if not tcl > 0:
        raise DomainError(f"Tcl must be > 0, got {tcl}")
    if not delay >= 0:
        raise DomainError(f"L must be >= 0, got {delay}")
    return TransferFunction([1.0], [tcl, 1.0], delay)


@dataclass(frozen=True, eq=False)
class DesiredSpec:
    """Target response definition.

    ``second_order`` takes either (PO, Ts) or a direct (zeta, wn) pair.
    """

    kind: str
    Ts: Optional[float] = None
    PO: Optional[float] = None
    zeta: Optional[float] = None
    wn: Optional[float] = None
    Tcl: Optional[float] = None
    L: Optional[float] = None
    tf: Optional[TransferFunction] = None
    series: Optional[TimeSeries] = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise DomainError(f"unknown target kind {self.kind!r}; expected one of {KINDS}")
        allowed = set(_FIELDS[self.kind])
        for name in ("Ts", "PO", "zeta", "wn", "Tcl", "L", "tf", "series"):
            if name not in allowed and getattr(self, name) is not None:
                raise DomainError(f"field {name!r} is not valid for kind {self.kind!r}")
        if self.kind == "second_order":
            by_po = self.PO is not None or self.Ts is not None
            by_zw = self.zeta is not None or self.wn is not None
            if by_po == by_zw:
                raise DomainError("second_order needs exactly one of (PO, Ts) or (zeta, wn)")
            if by_po and (self.PO is None or self.Ts is None):
                raise DomainError("second_order needs both PO and Ts")
            if by_zw and (self.zeta is None or self.wn is None):
                raise DomainError("second_order needs both zeta and wn")
        elif self.kind == "fotd":
            if self.Tcl is None or self.L is None:
                raise DomainError("fotd needs Tcl and L")
        elif self.kind == "custom_tf":
            if self.tf is None:
                raise DomainError("custom_tf needs tf")
        elif self.series is None:
            raise DomainError("trajectory needs series")
        if self.kind != "trajectory":
            self.system()  # validates numeric ranges

    @classmethod
    def second_order(cls, po: float, ts: float) -> "DesiredSpec":
        return cls("second_order", Ts=ts, PO=po)

    @classmethod
    def damped(cls, zeta: float, wn: float) -> "DesiredSpec":
        return cls("second_order", zeta=zeta, wn=wn)

    @classmethod
    def fotd(cls, tcl: float, delay: float = 0.0) -> "DesiredSpec":
        return cls("fotd", Tcl=tcl, L=delay)

    @classmethod
    def custom(cls, tf: TransferFunction) -> "DesiredSpec":
        return cls("custom_tf", tf=tf)

    @classmethod
    def trajectory(cls, series: TimeSeries) -> "DesiredSpec":
        return cls("trajectory", series=series)

    def system(self) -> Optional[TransferFunction]:
        """The desired closed-loop transfer function (None for trajectories)."""
        if self.kind == "second_order":
            if self.PO is not None:
                return make_second_order(self.PO, self.Ts)
            return second_order(self.zeta, self.wn)
        if self.kind == "fotd":
            return make_fotd(self.Tcl, self.L)
        if self.kind == "custom_tf":
            return self.tf
        return None

    def predicted_settling_time(self) -> float:
        """Rough 2% settling time used to size the default horizon."""
        if self.kind == "second_order":
            if self.PO is not None:
                return float(self.Ts)
            if self.zeta >= 1.0:
                return 6.0 / (self.zeta * self.wn)
            return 4.0 / (self.zeta * self.wn)
        if self.kind == "fotd":
            return fotd_settling_estimates(self.Tcl, self.L)["with_delay"]
        if self.kind == "custom_tf":
            return _custom_settling_estimate(self.tf)
        return self.series.grid.t_final / 4.0


def fotd_settling_estimates(tcl: float, delay: float) -> dict:
    """The plain 4*Tcl rule and the delay-shifted L + 4*Tcl variant."""
    return {"rule": 4.0 * tcl, "with_delay": delay + 4.0 * tcl}


def _custom_settling_estimate(tf: TransferFunction) -> float:
    poles = tf.poles()
    stable = poles[poles.real < 0]
    slowest = 1.0 / np.min(-stable.real) if stable.size else 1.0
    return tf.delay + 4.0 * slowest


def desired_response(spec: DesiredSpec, grid: SimGrid) -> TimeSeries:
    """Desired step response on ``grid``; trajectories are linearly resampled."""
    if spec.kind != "trajectory":
        return step_response(spec.system(), grid)
    src = spec.series
    if src.grid == grid:
        return src
    if src.grid.t_final < grid.t_final * (1 - 1e-12):
        raise DomainError(
            f"trajectory ends at t={src.grid.t_final:g} s but the grid needs "
            f"t={grid.t_final:g} s; refusing to extrapolate")
    return TimeSeries(grid, np.interp(grid.times, src.t, src.values))
