"""Polynomial and transfer-function algebra plus step/frequency response.

Simulation uses an exact zero-order-hold discretization of a controllable
canonical realization. Dead time is an integer-sample shift on a grid whose
step divides the delay; delayed PID loops are closed sample by sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np
from scipy import linalg

from .errors import DomainError, IndeterminateError, SingularityError, StructuralError

TRIM_RTOL = 1e-12
DEFAULT_SAMPLES = 2000

# Block length for the vectorized state recursion.
_BLOCK = 64
# Chunk cap for the delayed loop closure (size of the Toeplitz block).
_MAX_CHUNK = 256


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial, coefficients highest degree first."""

    coeffs: tuple[float, ...]

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1:
            raise DomainError("polynomial coefficients must be one-dimensional")
        if not np.all(np.isfinite(c)):
            raise DomainError("polynomial coefficients must be finite")
        scale = float(np.max(np.abs(c))) if c.size else 0.0
        if scale == 0.0:
            c = np.zeros(1)
        else:
            nz = np.flatnonzero(np.abs(c) > TRIM_RTOL * scale)
            c = c[nz[0]:]
        object.__setattr__(self, "coeffs", tuple(float(x) for x in c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.coeffs == (0.0,)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coeffs)

    def __call__(self, s):
        return np.polyval(self.coeffs, s)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return poly_mul(self, other)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return Polynomial(np.polyadd(self.array, other.array))

    def scale(self, k: float) -> "Polynomial":
        return Polynomial(self.array * k)


PolyLike = Union[Polynomial, Sequence[float], np.ndarray, float]


def as_poly(p: PolyLike) -> Polynomial:
    return p if isinstance(p, Polynomial) else Polynomial(p)


def poly_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    return Polynomial(np.convolve(a.coeffs, b.coeffs))


def poly_roots(p: Polynomial) -> np.ndarray:
    """Roots as eigenvalues of the companion matrix."""
    if p.is_zero:
        raise DomainError("roots of the zero polynomial are undefined")
    if p.degree < 1:
        raise DomainError("polynomial must have degree >= 1")
    return np.roots(p.coeffs).astype(complex)


@dataclass(frozen=True)
class PidGains:
    """Parallel-form PID gains; all must be non-negative."""

    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0

    def __post_init__(self) -> None:
        for name in ("kp", "ki", "kd"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v}")
            if v < 0:
                raise DomainError(f"{name} must be non-negative, got {v}")
            object.__setattr__(self, name, v)

    def __iter__(self) -> Iterator[float]:
        return iter((self.kp, self.ki, self.kd))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.kp, self.ki, self.kd)


@dataclass(frozen=True)
class TransferFunction:
    """SISO rational transfer function with optional input dead time."""

    num: Polynomial
    den: Polynomial
    delay: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "num", as_poly(self.num))
        object.__setattr__(self, "den", as_poly(self.den))
        delay = float(self.delay)
        if self.den.is_zero:
            raise DomainError("denominator is identically zero")
        if not math.isfinite(delay) or delay < 0:
            raise DomainError(f"delay must be finite and >= 0, got {delay}")
        object.__setattr__(self, "delay", delay)

    @classmethod
    def gain(cls, k: float) -> "TransferFunction":
        return cls([k], [1.0])

    @property
    def is_proper(self) -> bool:
        return self.num.is_zero or self.num.degree <= self.den.degree

    @property
    def is_strictly_proper(self) -> bool:
        return self.num.is_zero or self.num.degree < self.den.degree

    @property
    def order(self) -> int:
        return self.den.degree

    def poles(self) -> np.ndarray:
        if self.den.degree < 1:
            return np.array([], dtype=complex)
        return poly_roots(self.den)

    def zeros(self) -> np.ndarray:
        if self.num.is_zero or self.num.degree < 1:
            return np.array([], dtype=complex)
        return poly_roots(self.num)

    def without_delay(self) -> "TransferFunction":
        return TransferFunction(self.num, self.den, 0.0)

    def __mul__(self, other: "TransferFunction") -> "TransferFunction":
        if not isinstance(other, TransferFunction):
            return NotImplemented
        return TransferFunction(self.num * other.num, self.den * other.den,
                                self.delay + other.delay)

    def __call__(self, s):
        s = np.asarray(s, dtype=complex)
        return self.num(s) / self.den(s) * np.exp(-s * self.delay)


def pid_tf(g: PidGains) -> TransferFunction:
    """Controller Kp + Ki/s + Kd*s, reduced when Ki = 0."""
    if g.ki == 0.0 and g.kd == 0.0:
        return TransferFunction.gain(g.kp)
    if g.ki == 0.0:
        return TransferFunction([g.kd, g.kp], [1.0])
    return TransferFunction([g.kd, g.kp, g.ki], [1.0, 0.0])


def tf_feedback_unity(loop: TransferFunction) -> TransferFunction:
    """Close ``loop`` with unity negative feedback: L/(1+L)."""
    if loop.delay != 0.0:
        raise StructuralError("delayed loops are not rational; simulate them with simulate_closed_loop")
    closed = TransferFunction(loop.num, loop.den + loop.num)
    if not closed.is_proper:
        raise StructuralError(
            "closed loop is improper: the controller/plant pairing is unrealizable "
            f"(numerator degree {closed.num.degree} > denominator degree {closed.den.degree})")
    return closed


def closed_loop(plant: TransferFunction, gains: PidGains) -> TransferFunction:
    """Rational part of the unity-feedback PID loop (plant delay dropped)."""
    return tf_feedback_unity(pid_tf(gains) * plant.without_delay())


def dc_gain(sys: TransferFunction) -> float:
    """num(0)/den(0); ``math.inf`` for integrating systems."""
    n0 = sys.num.coeffs[-1]
    d0 = sys.den.coeffs[-1]
    d_scale = max(abs(c) for c in sys.den.coeffs)
    if abs(d0) <= TRIM_RTOL * d_scale:
        if n0 == 0.0:
            raise IndeterminateError("DC gain is 0/0")
        return math.inf
    return n0 / d0


# --------------------------------------------------------------------------
# Simulation grid and signals


@dataclass(frozen=True)
class SimGrid:
    """Uniform sample grid on [0, t_final] inclusive."""

    t_final: float
    n_samples: int = DEFAULT_SAMPLES

    def __post_init__(self) -> None:
        t_final = float(self.t_final)
        if not math.isfinite(t_final) or t_final <= 0:
            raise DomainError(f"t_final must be > 0, got {self.t_final}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise DomainError(f"n_samples must be an integer >= 2, got {self.n_samples}")
        object.__setattr__(self, "t_final", t_final)
        object.__setattr__(self, "n_samples", int(self.n_samples))

    @property
    def dt(self) -> float:
        return self.t_final / (self.n_samples - 1)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_samples)

    def delay_samples(self, delay: float) -> int:
        return int(round(delay / self.dt))

    def divides(self, delay: float) -> bool:
        if delay == 0.0:
            return True
        ratio = delay / self.dt
        return abs(ratio - round(ratio)) <= 1e-9 * max(ratio, 1.0)

    def aligned_to(self, delay: float, max_growth: int = 20) -> "SimGrid":
        """Smallest denser grid whose step divides ``delay`` exactly.

        Falls back to a slightly longer horizon if no sample count up to
        ``max_growth`` times the current one works (irrational ratios).
        """
        if self.divides(delay):
            return self
        intervals = np.arange(self.n_samples - 1, max_growth * (self.n_samples - 1) + 1)
        ratio = delay * intervals / self.t_final
        ok = np.abs(ratio - np.round(ratio)) <= 1e-9 * np.maximum(ratio, 1.0)
        if ok.any():
            return SimGrid(self.t_final, int(intervals[np.argmax(ok)]) + 1)
        steps = math.ceil(delay / self.dt)
        dt = delay / steps
        n_intervals = math.ceil(self.t_final / dt - 1e-9)
        return SimGrid(n_intervals * dt, n_intervals + 1)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Signal sampled on a SimGrid."""

    grid: SimGrid
    values: np.ndarray
    diverged: bool = False

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_samples,):
            raise DomainError(f"expected {self.grid.n_samples} values, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if not self.diverged and not np.all(np.isfinite(v)):
            object.__setattr__(self, "diverged", True)

    @property
    def t(self) -> np.ndarray:
        return self.grid.times

    def at(self, t: float) -> float:
        return float(np.interp(t, self.t, self.values))

    def __len__(self) -> int:
        return self.grid.n_samples


@dataclass(frozen=True, eq=False)
class FrequencyResponse:
    omegas: np.ndarray
    magnitudes: np.ndarray
    phases_rad: np.ndarray

    @property
    def complex(self) -> np.ndarray:
        return self.magnitudes * np.exp(1j * self.phases_rad)


# --------------------------------------------------------------------------
# State-space machinery


def _realize(sys: TransferFunction):
    """Controllable canonical (A, B, C, D) of the rational part."""
    den = sys.den.array
    num = sys.num.array
    lead = den[0]
    den = den / lead
    num = num / lead
    n = len(den) - 1
    b = np.concatenate([np.zeros(n + 1 - len(num)), num])
    d = b[0]
    A = np.zeros((n, n))
    if n:
        A[0, :] = -den[1:]
        A[1:, :-1] = np.eye(n - 1)
    B = np.zeros(n)
    if n:
        B[0] = 1.0
    C = b[1:] - d * den[1:]
    return A, B, C, float(d)


def _discretize(A: np.ndarray, B: np.ndarray, dt: float):
    """Exact ZOH discretization via the augmented matrix exponential."""
    n = A.shape[0]
    if n == 0:
        return A, B
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A
    M[:n, n] = B
    E = linalg.expm(M * dt)
    return E[:n, :n], E[:n, n]


def _step_samples(sys: TransferFunction, dt: float, n_samples: int) -> np.ndarray:
    """Unit-step response of the rational part at k*dt, k = 0..n_samples-1."""
    A, B, C, D = _realize(sys)
    n = A.shape[0]
    if n == 0:
        return np.full(n_samples, D)
    Ad, Bd = _discretize(A, B, dt)
    m = min(_BLOCK, n_samples)
    # powers[j] = Ad^j, offsets[j] = sum_{i<j} Ad^i Bd
    powers = np.empty((m, n, n))
    offsets = np.empty((m, n))
    powers[0] = np.eye(n)
    offsets[0] = 0.0
    for j in range(1, m):
        powers[j] = Ad @ powers[j - 1]
        offsets[j] = Ad @ offsets[j - 1] + Bd
    states = np.empty((n_samples, n))
    x = np.zeros(n)
    with np.errstate(all="ignore"):
        for start in range(0, n_samples, m):
            k = min(m, n_samples - start)
            states[start:start + k] = powers[:k] @ x + offsets[:k]
            x = Ad @ states[start + k - 1] + Bd
        return states @ C + D


def _check_proper(sys: TransferFunction) -> None:
    if not sys.is_proper:
        raise StructuralError(
            f"system is improper (numerator degree {sys.num.degree} > "
            f"denominator degree {sys.den.degree}); cannot simulate")


def step_response(sys: TransferFunction, grid: SimGrid) -> TimeSeries:
    """Unit-step response; the grid is refined so the delay is whole samples."""
    _check_proper(sys)
    grid = grid.aligned_to(sys.delay)
    y = _step_samples(sys, grid.dt, grid.n_samples)
    d = grid.delay_samples(sys.delay)
    if d:
        y = np.concatenate([np.zeros(min(d, len(y))), y[:max(len(y) - d, 0)]])
    return TimeSeries(grid, y)


def simulate_closed_loop(plant: TransferFunction, gains: PidGains, grid: SimGrid,
                         force_discrete: bool = False) -> TimeSeries:
    """Unity-feedback step response of the PID loop around ``plant``.

    Delay-free plants use the exact rational closed loop unless
    ``force_discrete`` is set; delayed plants are closed sample by sample.
    """
    _check_proper(plant)
    if plant.delay == 0.0 and not force_discrete:
        return step_response(closed_loop(plant, gains), grid)
    return _discrete_loop(plant, gains, grid.aligned_to(plant.delay))


def _discrete_loop(plant: TransferFunction, gains: PidGains, grid: SimGrid) -> TimeSeries:
    """Sampled PID loop: trapezoidal integral, backward-difference derivative.

    At sample k the controller reads the latest plant output y_k (which
    depends on controller outputs up to k-1-d only), forms e_k = 1 - y_k and
    holds u_k over [t_k, t_k+dt). The plant is advanced in chunks no longer
    than the loop's transport lag so every chunk is computed in one shot.
    """
    dt = grid.dt
    N = grid.n_samples
    d = grid.delay_samples(plant.delay)
    A, B, C, D = _realize(plant)
    n = A.shape[0]
    if d == 0 and D != 0.0:
        raise StructuralError("algebraic loop: biproper plant without delay in a sampled loop")
    Ad, Bd = _discretize(A, B, dt)
    m = min(d + (1 if D == 0.0 else 0), _MAX_CHUNK, N)

    # y_chunk = obs @ x0 + toe @ v_chunk ; x_next = power @ x0 + ctrl @ v_chunk
    obs = np.empty((m, n))
    markov = np.empty(m)
    pw = np.eye(n)
    for j in range(m):
        obs[j] = C @ pw
        markov[j] = C @ np.linalg.matrix_power(Ad, j - 1) @ Bd if j >= 1 else D
        pw = Ad @ pw
    power_m = pw
    toe = linalg.toeplitz(markov, np.r_[markov[0], np.zeros(m - 1)])
    ctrl = np.empty((n, m))
    col = Bd.copy()
    for i in range(m - 1, -1, -1):
        ctrl[:, i] = col
        col = Ad @ col

    kp, ki, kd = gains
    u = np.zeros(N)
    y = np.empty(N)
    x = np.zeros(n)
    e_prev = 0.0
    integ = 0.0
    with np.errstate(all="ignore"):
        for s in range(0, N, m):
            k = min(m, N - s)
            y[s:s + k] = obs[:k] @ x + toe[:k, :k] @ _shifted(u, s - d, k)
            e = 1.0 - y[s:s + k]
            e_ext = np.concatenate([[e_prev], e])
            trap = np.cumsum(0.5 * dt * (e_ext[1:] + e_ext[:-1]))
            u[s:s + k] = kp * e + ki * (integ + trap) + kd * np.diff(e_ext) / dt
            integ += trap[-1]
            e_prev = e[-1]
            if k == m:
                # the last plant input of a D == 0 chunk is this chunk's first u
                x = power_m @ x + ctrl @ _shifted(u, s - d, k)
            if not np.isfinite(y[s + k - 1]):
                y[s + k:] = np.nan
                break
    return TimeSeries(grid, y)


def _shifted(u: np.ndarray, lo: int, k: int) -> np.ndarray:
    """u[lo:lo+k] with zeros for negative indices."""
    v = np.zeros(k)
    if lo + k > 0:
        v[max(0, -lo):] = u[max(lo, 0):lo + k]
    return v


def reference_discrete_loop(plant: TransferFunction, gains: PidGains, grid: SimGrid) -> np.ndarray:
    """Plain per-sample loop with an explicit delay buffer (slow; used for checks)."""
    grid = grid.aligned_to(plant.delay)
    dt = grid.dt
    d = grid.delay_samples(plant.delay)
    A, B, C, D = _realize(plant)
    Ad, Bd = _discretize(A, B, dt)
    buffer = [0.0] * d
    x = np.zeros(A.shape[0])
    e_prev = integ = 0.0
    out = np.empty(grid.n_samples)
    for k in range(grid.n_samples):
        v = buffer[0] if d else None
        if d:
            y_k = C @ x + D * v
        else:
            if D != 0.0:
                raise StructuralError("algebraic loop")
            y_k = C @ x
        out[k] = y_k
        e = 1.0 - y_k
        integ += 0.5 * dt * (e + e_prev)
        u_k = gains.kp * e + gains.ki * integ + gains.kd * (e - e_prev) / dt
        e_prev = e
        if d:
            buffer.pop(0)
            buffer.append(u_k)
            x = Ad @ x + Bd * v
        else:
            x = Ad @ x + Bd * u_k
    return out


# --------------------------------------------------------------------------
# Frequency domain


def _root_phase(roots: np.ndarray, s: np.ndarray) -> np.ndarray:
    if roots.size == 0:
        return np.zeros(s.shape)
    return np.sum(np.angle(s[:, None] - roots[None, :]), axis=1)


def freq_response(sys: TransferFunction, omegas: Sequence[float]) -> FrequencyResponse:
    """Magnitude and continuous (unwrapped) phase of sys(jw)."""
    w = np.asarray(omegas, dtype=float)
    if w.ndim != 1 or w.size == 0 or np.any(w <= 0) or np.any(np.diff(w) <= 0):
        raise DomainError("omegas must be strictly positive and increasing")
    s = 1j * w
    den = sys.den(s)
    scale = np.polyval(np.abs(sys.den.array), w)
    bad = np.abs(den) <= 1e-13 * scale
    if bad.any():
        raise SingularityError(float(w[np.argmax(bad)]))
    mag = np.abs(sys.num(s)) / np.abs(den)
    if sys.num.is_zero:
        phase = np.zeros_like(w)
    else:
        lead = sys.num.coeffs[0] / sys.den.coeffs[0]
        phase = (np.angle(lead) + _root_phase(sys.zeros(), s)
                 - _root_phase(sys.poles(), s) - w * sys.delay)
    return FrequencyResponse(w, mag, phase)
