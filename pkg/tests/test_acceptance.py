"""Acceptance criteria, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line with the measured
numbers, then asserts. Run directly (``python tests/test_acceptance.py``) for
the summary lines alone.
"""
import math
from functools import lru_cache

import numpy as np
import pytest

from pidfit.baselines import (lambda_pi, pole_placement_pi_first_order, reaction_curve, ultimate_point,
                              zn_reaction_pid)
from pidfit.cli import dump_json, report_dict
from pidfit.lti import (PidGains, Polynomial, SimGrid, TransferFunction, poly_mul,
                        poly_roots, step_response, tf_feedback_unity)
from pidfit.metrics import decay_ratio, max_sensitivity
from pidfit.reference import DesiredSpec, damping_from_overshoot, natural_frequency, second_order
from pidfit.tuner import TuneProblem, evaluate, l2_objective, tune

PLANT3 = TransferFunction([1.0], [1.0, 3.0, 3.0, 1.0])
FIRST = TransferFunction([1.0], [1.0, 1.0])
FOTD = TransferFunction([1.0], [1.0, 1.0], delay=1.0)
PI_ONLY = (math.inf, math.inf, 0.0)


def close(x, target, rel=None, abs_=None):
    if rel is not None:
        return abs(x - target) <= rel * abs(target)
    return abs(x - target) <= abs_


def report(n, checks, capsys=None):
    """Print one line for criterion ``n`` and fail if any check failed."""
    ok = all(passed for _, passed in checks)
    detail = "; ".join(f"{label}{'' if passed else ' (FAIL)'}" for label, passed in checks)
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    assert ok, line


@lru_cache(maxsize=None)
def table1():
    # the pinned 20 s horizon is under twice the predicted settling time
    with pytest.warns(UserWarning, match="horizon"):
        problem = TuneProblem(PLANT3, DesiredSpec.damped(0.215, 1.7309), SimGrid(20.0, 2000))
    return problem, tune(problem)


@lru_cache(maxsize=None)
def table2():
    problem = TuneProblem(FOTD, DesiredSpec.fotd(2.0, 1.0), SimGrid(25.0, 2000), bounds_hi=PI_ONLY)
    return problem, tune(problem)


@lru_cache(maxsize=None)
def table3():
    problem = TuneProblem(FIRST, DesiredSpec.second_order(0.0, 1.0), bounds_hi=PI_ONLY)
    return problem, tune(problem)


@lru_cache(maxsize=None)
def table4():
    problem = TuneProblem(PLANT3, DesiredSpec.custom(TransferFunction([1.0], [3.0, 1.0])),
                          SimGrid(40.0, 2000), bounds_hi=PI_ONLY)
    return problem, tune(problem)


def criterion_1():
    problem, r = table1()
    published = PidGains(6.7358, 3.9912, 3.0012)
    g, m = r.gains, r.metrics
    f_ref = l2_objective(problem, published)
    return [
        (f"gains ({g.kp:.4f}, {g.ki:.4f}, {g.kd:.4f})",
         all(close(a, b, rel=0.05) for a, b in zip(g, published))),
        (f"PO {m.overshoot_pct:.2f}", close(m.overshoot_pct, 49.99, abs_=2.0)),
        (f"Ms {m.ms:.4f}", close(m.ms, 2.5656, rel=0.05)),
        (f"objective {r.objective:.5f} <= {f_ref:.5f}+1e-3", r.objective <= f_ref + 1e-3),
    ]


def criterion_2():
    problem, _ = table1()
    rc = reaction_curve(PLANT3)
    g = zn_reaction_pid(rc)
    m = evaluate(problem, g).metrics
    lag = 2 - (1 - 5 * math.exp(-2)) / (2 * math.exp(-2))
    return [
        (f"gains ({g.kp:.4f}, {g.ki:.4f}, {g.kd:.4f})",
         all(close(a, b, rel=0.02) for a, b in zip(g, (5.5, 3.42, 2.2)))),
        (f"Ts {m.settling_time:.3f}", m.settling_time is not None and close(m.settling_time, 12.97, rel=0.10)),
        (f"PO {m.overshoot_pct:.2f}", close(m.overshoot_pct, 51.40, abs_=2.0)),
        (f"Ms {m.ms:.4f}", close(m.ms, 2.7529, rel=0.05)),
        (f"lag {rc.lag:.6f}", close(rc.lag, lag, rel=0.005)),
        (f"R {rc.rate:.6f}", close(rc.rate, 2 * math.exp(-2), rel=0.005)),
    ]


def criterion_3():
    up = ultimate_point(PLANT3)
    return [
        (f"ku {up.ku:.9f}", close(up.ku, 8.0, abs_=1e-6)),
        (f"w180 {up.omega180:.9f}", close(up.omega180, math.sqrt(3), abs_=1e-6)),
        (f"tu {up.tu:.7f}", close(up.tu, 3.627599, abs_=1e-5)),
    ]


def criterion_4():
    problem, r = table2()
    lam_gains = lambda_pi(1.0, 1.0, 1.0, 2.0)
    lam = evaluate(problem, lam_gains)
    g, m, lm = r.gains, r.metrics, lam.metrics
    return [
        (f"srcf ({g.kp:.4f}, {g.ki:.4f}, {g.kd:.4f})",
         close(g.kp, 0.3955, rel=0.05) and close(g.ki, 0.3282, rel=0.05) and g.kd == 0.0),
        (f"lambda {lam_gains.as_tuple()}", lam_gains == PidGains(1 / 3, 1 / 3, 0.0)),
        (f"PO {m.overshoot_pct:.3f}/{lm.overshoot_pct:.3f}", m.overshoot_pct <= 0.1 and lm.overshoot_pct <= 0.1),
        (f"IAE {m.iae:.4f}/{lm.iae:.4f}", close(m.iae, 3.0447, rel=0.03) and close(lm.iae, 3.0303, rel=0.03)),
        (f"Ms {m.ms:.4f}/{lm.ms:.4f}", close(m.ms, 1.3568, rel=0.05) and close(lm.ms, 1.3444, rel=0.05)),
    ]


def criterion_5():
    problem, r = table3()
    pp_gains = pole_placement_pi_first_order(1.0, 0.0, 1.0)
    pp = evaluate(problem, pp_gains)
    published = PidGains(2.5575, 3.4360)
    f_ref = l2_objective(problem, published)
    g = r.gains
    return [
        (f"pole placement {pp_gains.as_tuple()}", pp_gains == PidGains(11.0, 36.0, 0.0)),
        (f"its PO {pp.metrics.overshoot_pct:.3f}", close(pp.metrics.overshoot_pct, 9.23, abs_=0.5)),
        (f"srcf ({g.kp:.4f}, {g.ki:.4f}, {g.kd:.4f})",
         close(g.kp, published.kp, rel=0.10) and close(g.ki, published.ki, rel=0.10) and g.kd == 0.0),
        (f"srcf PO {r.metrics.overshoot_pct:.3f}", r.metrics.overshoot_pct <= 4.0),
        (f"objective {r.objective:.5f} <= {f_ref:.5f}+1e-3", r.objective <= f_ref + 1e-3),
    ]


def criterion_6():
    _, r = table4()
    g, m = r.gains, r.metrics
    return [
        (f"gains ({g.kp:.4f}, {g.ki:.4f}, {g.kd:.4f})",
         close(g.kp, 0.9248, rel=0.02) and close(g.ki, 0.2829, rel=0.02) and g.kd == 0.0),
        (f"Ts {m.settling_time:.3f}", m.settling_time is not None and close(m.settling_time, 16.33, rel=0.05)),
        (f"PO {m.overshoot_pct:.3f}", m.overshoot_pct <= 0.5),
        (f"Ms {m.ms:.4f}", close(m.ms, 1.4063, rel=0.05)),
        ("benchmark (0.9242, 0.2828)", close(g.kp, 0.9242, rel=0.02) and close(g.ki, 0.2828, rel=0.02)),
    ]


def criterion_7():
    ms1, _ = max_sensitivity(TransferFunction([1.0], [2.0, 0.0]))
    wn = 1.5
    ms2, w2 = max_sensitivity(TransferFunction([wn ** 2], [1.0, 2 * wn, 0.0]))
    return [
        (f"first-order Ms {ms1:.5f}", close(ms1, 1.0, abs_=1e-3)),
        (f"critically damped Ms {ms2:.5f} (sqrt(5)/2 = {math.sqrt(5) / 2:.5f})",
         close(ms2, math.sqrt(5) / 2, abs_=1e-3)),
        (f"peak at w/wn = {w2 / wn:.4f}", close(w2, wn, rel=0.01)),
    ]


def criterion_8():
    zeta = 0.215
    d_exact = math.exp(-2 * math.pi * zeta / math.sqrt(1 - zeta ** 2))
    d_meas = decay_ratio(step_response(second_order(zeta, 1.7309), SimGrid(25.0, 2000)), 1.0)
    z10 = damping_from_overshoot(10.0)
    return [
        ("zeta(PO=0) = 1", damping_from_overshoot(0.0) == 1.0),
        (f"zeta(PO=10) {z10:.7f}", close(z10, 0.591155, abs_=1e-6)),
        ("wn plug-ins", natural_frequency(1.0, 1.0, True) == 6.0 and natural_frequency(0.5, 8.0, False) == 1.0
         and close(natural_frequency(z10, 4.0, False), 4.0 / (z10 * 4.0), abs_=1e-15)),
        (f"d analytic {d_exact:.6f}", close(d_exact, 0.25082, abs_=1e-5)),
        (f"d measured {d_meas:.4f}", d_meas is not None and close(d_meas, 0.25, abs_=0.01)),
    ]


def _algebra_residuals(seed=0, trials=200):
    rng = np.random.default_rng(seed)
    worst_root = worst_fb = 0.0
    for _ in range(trials):
        deg = int(rng.integers(1, 7))
        roots = rng.uniform(-3, 3, deg)
        p = Polynomial(np.poly(roots))
        found = poly_roots(p)
        scale = np.maximum(np.polyval(np.abs(p.array), np.abs(found)), 1.0)
        worst_root = max(worst_root, float(np.max(np.abs(p(found)) / scale)))
        num = rng.uniform(-2, 2, int(rng.integers(1, deg + 1)))
        den = Polynomial(np.poly(rng.uniform(-3, -0.1, deg)))
        loop = TransferFunction(num, den)
        cl = tf_feedback_unity(loop)
        s = 0.4 + 1.3j
        L = loop(s)
        worst_fb = max(worst_fb, abs(cl(s) - L / (1 + L)) / (1 + abs(L / (1 + L))))
        q = poly_mul(p, den)
        worst_fb = max(worst_fb, abs(q(s) - p(s) * den(s)) / (1 + abs(p(s) * den(s))))
    return worst_root, worst_fb


def criterion_9():
    checks = []
    for name, (_, r) in (("T2", table2()), ("T4", table4())):
        prod = r.metrics.iae * r.gains.ki
        checks.append((f"{name} IAE*Ki {prod:.4f}", r.metrics.overshoot_pct == 0.0 and close(prod, 1.0, rel=0.03)))
    grid = SimGrid(10.0, 2000)
    zoh = float(np.max(np.abs(step_response(FIRST, grid).values - (1 - np.exp(-grid.times)))))
    checks.append((f"ZOH error {zoh:.1e}", zoh <= 1e-9))
    problem, r = table4()
    fresh = tune(TuneProblem(problem.plant, problem.spec, SimGrid(40.0, 2000), bounds_hi=PI_ONLY))
    same = dump_json(report_dict("srcf", r)) == dump_json(report_dict("srcf", fresh))
    checks.append(("bit-identical reports", same and np.array_equal(r.response.values, fresh.response.values)))
    roots, fb = _algebra_residuals()
    checks.append((f"root residual {roots:.1e}, feedback algebra {fb:.1e} (deg<=6)", roots <= 1e-7 and fb <= 1e-9))
    return checks


def criterion_10():
    checks = []
    for name, (_, r) in (("T2", table2()), ("T4", table4())):
        checks.append((f"{name} Ms {r.metrics.ms:.4f}", 1.0 < r.metrics.ms < 2.0))
    return checks


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("n", range(1, 11))
def test_criterion(n, capsys):
    report(n, CRITERIA[n - 1](), capsys)


if __name__ == "__main__":
    for i, crit in enumerate(CRITERIA, 1):
        try:
            report(i, crit())
        except AssertionError:
            pass
