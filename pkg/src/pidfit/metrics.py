"""Step-response performance, sensitivity peak and stability checks."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

from .errors import DomainError, NotSettledError, StructuralError
from .lti import TimeSeries, TransferFunction, freq_response

SETTLING_BAND = 0.02
POLE_MARGIN = 1e-9
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class MetricsReport:
    """Performance summary of one closed loop.

    ``settling_time`` and ``decay_ratio`` are None when undefined (unstable,
    never settled, fewer than two peaks); ``iae`` is None for diverged
    responses and ``ms`` is None if not computed.
    """

    settling_time: Optional[float]
    overshoot_pct: float
    iae: Optional[float]
    ms: Optional[float]
    decay_ratio: Optional[float]
    stable: bool
    final_value: float
    ms_omega: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def _check_series(y: TimeSeries) -> None:
    if y.diverged:
        raise DomainError("response diverged; time-domain metrics are undefined")


def settling_time_2pct(y: TimeSeries, final_value: float) -> float:
    """Time after which y stays within 2% of ``final_value``.

    The band-entry time is linearly interpolated between the last sample
    outside the band and the first one inside it.
    """
    _check_series(y)
    if final_value == 0:
        raise DomainError("settling time needs a nonzero final value")
    v = y.values
    band = SETTLING_BAND * abs(final_value)
    dev = np.abs(v - final_value)
    outside = np.flatnonzero(dev > band)
    if outside.size == 0:
        return 0.0
    i = int(outside[-1])
    if i == len(v) - 1:
        raise NotSettledError("response has not settled within the horizon")
    t = y.t
    # crossing of |y - f| = band between samples i and i+1
    d0, d1 = dev[i], dev[i + 1]
    frac = (d0 - band) / (d0 - d1) if d0 != d1 else 1.0
    return float(t[i] + frac * (t[i + 1] - t[i]))


def percent_overshoot(y: TimeSeries, final_value: float) -> float:
    _check_series(y)
    if final_value == 0:
        raise DomainError("overshoot needs a nonzero final value")
    return max(0.0, (float(np.max(y.values)) - final_value) / final_value * 100.0)


def iae(y: TimeSeries, reference: float = 1.0) -> float:
    """Trapezoidal integral of |reference - y|."""
    _check_series(y)
    err = np.abs(reference - y.values)
    return float(np.sum(0.5 * (err[1:] + err[:-1])) * y.grid.dt)


def _peak_heights(v: np.ndarray) -> list[float]:
    """Local maxima refined with a 3-point parabola."""
    heights = []
    for i in range(1, len(v) - 1):
        if v[i - 1] < v[i] >= v[i + 1]:
            a, b, c = v[i - 1], v[i], v[i + 1]
            curv = a - 2 * b + c
            heights.append(b - (a - c) ** 2 / (8 * curv) if curv < 0 else b)
    return heights


def decay_ratio(y: TimeSeries, final_value: float) -> Optional[float]:
    """Second overshoot excess over the first; None without two overshoots."""
    _check_series(y)
    excess = [h - final_value for h in _peak_heights(y.values)]
    excess = [e for e in excess if e > 0]
    if len(excess) < 2:
        return None
    return float(excess[1] / excess[0])


def _sensitivity(loop: TransferFunction, w: np.ndarray) -> np.ndarray:
    return np.abs(1.0 / (1.0 + freq_response(loop, w).complex))


def max_sensitivity(loop: TransferFunction, omega_lo: float = 1e-3, omega_hi: float = 1e3,
                    n_points: int = 4000, tol: float = 1e-6) -> tuple[float, float]:
    """Peak of |1/(1+L(jw))| on a log sweep, refined by golden-section search."""
    if not loop.is_proper:
        raise StructuralError("max_sensitivity needs a proper loop")
    if not 0 < omega_lo < omega_hi:
        raise DomainError("need 0 < omega_lo < omega_hi")
    w = np.logspace(math.log10(omega_lo), math.log10(omega_hi), n_points)
    s = _sensitivity(loop, w)
    i = int(np.argmax(s))
    best_w, best = float(w[i]), float(s[i])
    lo = math.log(w[max(i - 1, 0)])
    hi = math.log(w[min(i + 1, n_points - 1)])

    def f(x: float) -> float:
        return float(_sensitivity(loop, np.array([math.exp(x)]))[0])

    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    for x, fx in ((c, fc), (d, fd)):
        if fx > best:
            best, best_w = fx, math.exp(x)
    return best, best_w


def is_stable(evidence: Union[TransferFunction, TimeSeries], final_value: Optional[float] = None) -> bool:
    """Pole test for rational closed loops, simulation test otherwise.

    For a TimeSeries the response must be finite and its last 10% must stay
    within 2% of ``final_value``.
    """
    if isinstance(evidence, TransferFunction):
        if evidence.delay != 0.0:
            raise DomainError("delayed systems need simulation evidence")
        poles = evidence.poles()
        return bool(np.all(poles.real < -POLE_MARGIN))
    if evidence.diverged or final_value is None or not math.isfinite(final_value):
        return False
    v = evidence.values
    tail = v[int(math.floor(0.9 * len(v))):]
    return bool(np.all(np.abs(tail - final_value) <= SETTLING_BAND * abs(final_value) + 1e-12))


def step_metrics(y: TimeSeries, final_value: float, stable: bool, reference: float = 1.0) -> dict:
    """Time-domain fields of a MetricsReport, tolerant of degenerate traces."""
    if y.diverged or not stable:
        return {"settling_time": None, "overshoot_pct": 0.0, "iae": None if y.diverged else iae(y, reference),
                "decay_ratio": None}
    if final_value == 0:
        return {"settling_time": None, "overshoot_pct": 0.0, "iae": iae(y, reference), "decay_ratio": None}
    try:
        ts = settling_time_2pct(y, final_value)
    except NotSettledError:
        ts = None
    return {
        "settling_time": ts,
        "overshoot_pct": percent_overshoot(y, final_value),
        "iae": iae(y, reference),
        "decay_ratio": decay_ratio(y, final_value),
    }
