"""Step-response curve fitting of PID gains.

The gains minimize the 2-norm of the sample-wise difference between the
desired step response and the simulated unity-feedback response, subject
to box bounds with non-negative lower limits. The search starts at the
lower bounds (zero gains by default) and is a bounded Powell direction-set
method, so no gradients are needed and unstable regions are crossed via a
finite divergence penalty.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import DomainError, IndeterminateError
from .lti import (PidGains, SimGrid, TimeSeries, TransferFunction, closed_loop, dc_gain,
                  pid_tf, simulate_closed_loop, DEFAULT_SAMPLES)
from .metrics import MetricsReport, is_stable, max_sensitivity, step_metrics
from .reference import DesiredSpec, desired_response

DEFAULT_MAX_EVALS = 3000
DEFAULT_TOL = 1e-8
BOUND_CAP = 1e6
PENALTY = 1e6
HORIZON_FACTOR = 4.0

STATUS_OK = "ok"
STATUS_UNSTABLE = "unstable"

Bounds = tuple[float, float, float]


def _as_bounds(b: Sequence[float], name: str) -> Bounds:
    if isinstance(b, PidGains):
        b = b.as_tuple()
    vals = tuple(float(x) for x in b)
    if len(vals) != 3 or any(math.isnan(v) for v in vals):
        raise DomainError(f"{name} must be three numbers (kp, ki, kd)")
    return vals  # type: ignore[return-value]


@dataclass(frozen=True, eq=False)
class TuneProblem:
    """A curve-fitting problem. ``grid`` defaults to 4x the target's settling time."""

    plant: TransferFunction
    spec: DesiredSpec
    grid: Optional[SimGrid] = None
    bounds_lo: Bounds = (0.0, 0.0, 0.0)
    bounds_hi: Bounds = (math.inf, math.inf, math.inf)
    max_evals: int = DEFAULT_MAX_EVALS
    tol: float = DEFAULT_TOL
    seed: int = 0
    n_starts: int = 1
    desired: TimeSeries = field(init=False, repr=False)

    def __post_init__(self) -> None:
        lo = _as_bounds(self.bounds_lo, "bounds_lo")
        hi = _as_bounds(self.bounds_hi, "bounds_hi")
        if any(l < 0 or not math.isfinite(l) for l in lo):
            raise DomainError("lower bounds must be finite and >= 0")
        if any(h < l for l, h in zip(lo, hi)):
            raise DomainError("bounds_lo must not exceed bounds_hi")
        object.__setattr__(self, "bounds_lo", lo)
        object.__setattr__(self, "bounds_hi", hi)
        if int(self.max_evals) != self.max_evals or self.max_evals < 1:
            raise DomainError("max_evals must be a positive integer")
        if not self.tol > 0:
            raise DomainError("tol must be > 0")
        if int(self.n_starts) != self.n_starts or self.n_starts < 1:
            raise DomainError("n_starts must be a positive integer")
        if not self.plant.is_proper:
            raise DomainError("plant must be proper")

        spec = self.spec
        if spec.kind == "fotd" and abs(spec.L - self.plant.delay) > 1e-12 * max(1.0, spec.L):
            raise DomainError(f"target delay L={spec.L} must equal the plant delay {self.plant.delay}")
        predicted = spec.predicted_settling_time()
        grid = self.grid
        if grid is None:
            if spec.kind == "trajectory":
                grid = SimGrid(spec.series.grid.t_final, DEFAULT_SAMPLES)
            else:
                grid = SimGrid(HORIZON_FACTOR * predicted, DEFAULT_SAMPLES)
        elif spec.kind != "trajectory" and grid.t_final < 2.0 * predicted:
            warnings.warn(f"horizon {grid.t_final:g} s is shorter than twice the target's "
                          f"predicted settling time ({predicted:g} s)", stacklevel=3)
        grid = grid.aligned_to(self.plant.delay)
        target = spec.system()
        if target is not None and not grid.divides(target.delay):
            raise DomainError("target delay is not a whole number of samples on the plant-aligned grid")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "desired", desired_response(spec, grid))

    @property
    def free(self) -> np.ndarray:
        return np.array([h > l for l, h in zip(self.bounds_lo, self.bounds_hi)])


@dataclass(frozen=True, eq=False)
class TuneResult:
    gains: PidGains
    objective: float
    evals_used: int
    converged: bool
    metrics: MetricsReport
    response: TimeSeries
    desired: TimeSeries
    problem: TuneProblem = field(repr=False)
    status: str = STATUS_OK

    @property
    def stable(self) -> bool:
        return self.metrics.stable


def _penalty(y: np.ndarray) -> float:
    finite = np.abs(y[np.isfinite(y)])
    worst = float(finite.max()) if finite.size else 0.0
    if not np.all(np.isfinite(y)):
        worst = np.finfo(float).max
    return PENALTY + math.log1p(worst)


def objective_of(desired: TimeSeries, response: TimeSeries) -> float:
    if response.diverged:
        return _penalty(response.values)
    with np.errstate(over="ignore"):
        value = float(np.linalg.norm(desired.values - response.values))
    if not value < PENALTY:
        return _penalty(response.values)
    return value


def l2_objective(problem: TuneProblem, gains: PidGains) -> float:
    """2-norm of desired minus achieved samples, or a finite divergence penalty."""
    y = simulate_closed_loop(problem.plant, gains, problem.grid)
    return objective_of(problem.desired, y)


class _BudgetExhausted(Exception):
    pass


class _CountedObjective:
    """Objective over the free gains that enforces the evaluation budget."""

    def __init__(self, problem: TuneProblem, budget: int):
        self.problem = problem
        self.budget = budget
        self.calls = 0
        self.free = problem.free
        self.base = np.array(problem.bounds_lo)
        self.best_x: Optional[np.ndarray] = None
        self.best_f = math.inf

    def gains(self, x: np.ndarray) -> PidGains:
        full = self.base.copy()
        full[self.free] = x
        lo = np.array(self.problem.bounds_lo)
        hi = np.minimum(self.problem.bounds_hi, BOUND_CAP)
        return PidGains(*np.clip(full, lo, hi))

    def __call__(self, x: np.ndarray) -> float:
        if self.calls >= self.budget:
            raise _BudgetExhausted
        self.calls += 1
        f = l2_objective(self.problem, self.gains(x))
        if f < self.best_f:
            self.best_f, self.best_x = f, np.array(x, dtype=float)
        return f


def _starts(problem: TuneProblem) -> list[np.ndarray]:
    free = problem.free
    lo = np.array(problem.bounds_lo)[free]
    hi = np.minimum(np.array(problem.bounds_hi)[free], BOUND_CAP)
    starts = [lo.copy()]
    rng = np.random.default_rng(problem.seed)
    for _ in range(problem.n_starts - 1):
        span = np.minimum(hi - lo, 10.0)
        starts.append(lo + rng.random(lo.size) * span)
    return starts


def _search(problem: TuneProblem, x0: np.ndarray):
    fun = _CountedObjective(problem, problem.max_evals)
    lo = np.array(problem.bounds_lo)[problem.free]
    # Infinite upper bounds stay infinite here (Powell then searches lines
    # through an arctan map); the cap is applied as a projection in gains().
    hi = np.array(problem.bounds_hi)[problem.free]
    converged = False
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = optimize.minimize(
                fun, x0, method="Powell", bounds=list(zip(lo, hi)),
                options={"maxfev": problem.max_evals, "xtol": problem.tol, "ftol": problem.tol})
        converged = bool(res.success)
    except _BudgetExhausted:
        pass
    if fun.best_x is None:
        fun.best_x, fun.best_f = x0, l2_objective(problem, fun.gains(x0))
    return fun.gains(fun.best_x), fun.best_f, fun.calls, converged


def tune(problem: TuneProblem) -> TuneResult:
    """Fit PID gains to the desired response starting from the lower bounds.

    Each start gets the full ``max_evals`` budget; with ``n_starts > 1`` the
    extra starts come from ``numpy.random.default_rng(seed)`` and the best
    objective wins (earlier starts win ties).
    """
    if not problem.free.any():
        return evaluate(problem, PidGains(*problem.bounds_lo))
    best = None
    total = 0
    for x0 in _starts(problem):
        gains, f, calls, converged = _search(problem, x0)
        total += calls
        if best is None or f < best[1]:
            best = (gains, f, converged)
    gains, f, converged = best
    return evaluate(problem, gains, evals_used=total, converged=converged)


def evaluate(problem: TuneProblem, gains: PidGains, evals_used: int = 1,
             converged: bool = True) -> TuneResult:
    """Simulate fixed gains and build the full result; no optimization."""
    response = simulate_closed_loop(problem.plant, gains, problem.grid)
    objective = objective_of(problem.desired, response)
    draft = TuneResult(gains, objective, evals_used, converged, None, response,  # type: ignore[arg-type]
                       problem.desired, problem)
    metrics = check_stability_and_report(draft)
    status = STATUS_OK if metrics.stable else STATUS_UNSTABLE
    return TuneResult(gains, objective, evals_used, converged, metrics, response,
                      problem.desired, problem, status)


def closed_loop_final_value(plant: TransferFunction, gains: PidGains) -> float:
    cl = closed_loop(plant, gains)
    if cl.num.is_zero:
        return 0.0
    try:
        return dc_gain(cl)
    except IndeterminateError:
        return math.nan


def check_stability_and_report(result: TuneResult) -> MetricsReport:
    """Stability verdict, step metrics and sensitivity peak of a result's loop."""
    plant = result.problem.plant
    gains = result.gains
    final = closed_loop_final_value(plant, gains)
    if plant.delay == 0.0:
        stable = is_stable(closed_loop(plant, gains))
    else:
        stable = is_stable(result.response, final)
    fields = step_metrics(result.response, final, stable)
    ms, ms_omega = max_sensitivity(pid_tf(gains) * plant)
    return MetricsReport(ms=ms, ms_omega=ms_omega, stable=stable,
                         final_value=final, **fields)
