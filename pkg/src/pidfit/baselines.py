"""Classical tuning rules and the plant tests they need."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfeasibleTargetError, NotFoundError
from .lti import PidGains, SimGrid, TransferFunction, freq_response, step_response
from .reference import damping_from_overshoot, natural_frequency

STRUCTURES = ("P", "PI", "PID")


@dataclass(frozen=True)
class UltimatePoint:
    ku: float
    tu: float
    omega180: float


@dataclass(frozen=True)
class ReactionCurve:
    lag: float
    rate: float
    t_inflection: float


def ultimate_point(plant: TransferFunction, omega_lo: float = 1e-3, omega_hi: float = 1e3,
                   n_points: int = 4000, rtol: float = 1e-9) -> UltimatePoint:
    """First -180 degree phase crossover, located by bisection."""
    w = np.logspace(math.log10(omega_lo), math.log10(omega_hi), n_points)
    excess = freq_response(plant, w).phases_rad + math.pi
    crossing = np.flatnonzero((excess[:-1] > 0) & (excess[1:] <= 0))
    if crossing.size == 0:
        raise NotFoundError("phase never crosses -180 degrees in the sweep range")
    i = int(crossing[0])
    if excess[i + 1] == 0.0:
        w180 = float(w[i + 1])
    else:
        a, b = float(w[i]), float(w[i + 1])

        def phase_excess(x: float) -> float:
            return float(freq_response(plant, [x]).phases_rad[0] + math.pi)

        while b - a > rtol * a:
            mid = 0.5 * (a + b)
            if phase_excess(mid) > 0:
                a = mid
            else:
                b = mid
        w180 = 0.5 * (a + b)
    mag = float(freq_response(plant, [w180]).magnitudes[0])
    return UltimatePoint(ku=1.0 / mag, tu=2.0 * math.pi / w180, omega180=w180)


def _dominant_time_constant(plant: TransferFunction) -> float:
    poles = plant.poles()
    stable = poles[poles.real < 0]
    if stable.size == 0:
        return 1.0
    return float(1.0 / np.min(-stable.real))


def reaction_curve(plant: TransferFunction, grid: SimGrid | None = None) -> ReactionCurve:
    """Tangent at the inflection point of the open-loop step response.

    The default grid spans the delay plus 10 dominant time constants.
    """
    if grid is None:
        grid = SimGrid(plant.delay + 10.0 * _dominant_time_constant(plant), 2000)
    y = step_response(plant, grid)
    t, v = y.t, y.values
    slope = np.gradient(v, t)
    i = int(np.argmax(slope))
    if i == 0 or i == len(v) - 1:
        raise NotFoundError("open-loop step response is not S-shaped (slope is largest at an end)")
    s0, s1, s2 = slope[i - 1], slope[i], slope[i + 1]
    curv = s0 - 2 * s1 + s2
    offset = 0.5 * (s0 - s2) / curv if curv < 0 else 0.0
    rate = s1 - 0.25 * (s0 - s2) * offset
    dt = grid.dt
    t_infl = t[i] + offset * dt
    # quadratic interpolation of y through samples i-1, i, i+1
    y0, y1, y2 = v[i - 1], v[i], v[i + 1]
    y_infl = y1 + 0.5 * offset * (y2 - y0) + 0.5 * offset ** 2 * (y2 - 2 * y1 + y0)
    if rate <= 0:
        raise NotFoundError("step response never rises")
    lag = t_infl - y_infl / rate
    if lag <= 0:
        raise NotFoundError("tangent does not intercept the time axis after t=0")
    return ReactionCurve(lag=float(lag), rate=float(rate), t_inflection=float(t_infl))


def zn_reaction_pid(rc: ReactionCurve) -> PidGains:
    """Ziegler-Nichols open-loop PID: Kp=1.2/(R L), Ti=2L, Td=L/2."""
    kp = 1.2 / (rc.rate * rc.lag)
    ti = 2.0 * rc.lag
    td = 0.5 * rc.lag
    return PidGains(kp, kp / ti, kp * td)


def zn_ultimate(up: UltimatePoint, structure: str = "PID") -> PidGains:
    """Ziegler-Nichols closed-loop table."""
    if structure == "P":
        return PidGains(0.5 * up.ku)
    if structure == "PI":
        kp = 0.45 * up.ku
        return PidGains(kp, kp / (up.tu / 1.2))
    if structure == "PID":
        kp = 0.6 * up.ku
        return PidGains(kp, kp / (up.tu / 2.0), kp * up.tu / 8.0)
    raise DomainError(f"structure must be one of {STRUCTURES}, got {structure!r}")


def lambda_pi(K: float, T: float, L: float, Tcl: float) -> PidGains:
    """Pole-cancelling PI for K e^{-sL}/(1+sT) with closed-loop time constant Tcl."""
    if not (K > 0 and T > 0 and Tcl > 0):
        raise DomainError("K, T and Tcl must be positive")
    if L < 0:
        raise DomainError("L must be >= 0")
    if not T < Tcl < 3 * T:
        warnings.warn(f"Tcl={Tcl:g} is outside the recommended range ({T:g}, {3 * T:g})", stacklevel=2)
    kp = T / (K * (L + Tcl))
    return PidGains(kp, kp / T)


def pole_placement_pi_first_order(T: float, PO: float, Ts: float, K: float = 1.0) -> PidGains:
    """PI placing the closed-loop poles of K/(1+sT) at the second-order target.

    Matching T s^2 + (1 + K Kp) s + K Ki to T (s^2 + 2 zeta wn s + wn^2).
    """
    if not (T > 0 and K > 0):
        raise DomainError("T and K must be positive")
    zeta = damping_from_overshoot(PO)
    wn = natural_frequency(zeta, Ts, PO == 0.0)
    kp = (2.0 * zeta * wn * T - 1.0) / K
    if kp < 0:
        raise InfeasibleTargetError(
            f"target is slower than the open-loop plant (Kp would be {kp:.4g})")
    return PidGains(kp, wn ** 2 * T / K)


def fotd_parameters(plant: TransferFunction) -> tuple[float, float, float]:
    """(K, T, L) if the plant is exactly K e^{-sL}/(1+sT) with T > 0."""
    if plant.num.degree != 0 or plant.den.degree != 1:
        raise DomainError("plant is not first-order-plus-delay")
    a1, a0 = plant.den.coeffs
    if a0 == 0 or a1 / a0 <= 0:
        raise DomainError("plant is not first-order-plus-delay")
    K = plant.num.coeffs[0] / a0
    return K, a1 / a0, plant.delay
