"""Independent reference implementations used only by the tests.

Written as plain loops over subjects and event times so they share no code
path with the vectorized package internals.
"""
from __future__ import annotations

import math


def efron_loglik(beta, time, event, x, entry=None):
    """Efron partial log-likelihood for one covariate, by direct enumeration."""
    n = len(time)
    entry = entry if entry is not None else [-math.inf] * n
    total = 0.0
    for t in sorted({time[i] for i in range(n) if event[i]}):
        dead = [i for i in range(n) if event[i] and time[i] == t]
        # closed entry: a subject entering at t is already at risk at t
        risk = [i for i in range(n) if entry[i] <= t <= time[i]]
        s_risk = sum(math.exp(beta * x[i]) for i in risk)
        s_dead = sum(math.exp(beta * x[i]) for i in dead)
        d = len(dead)
        for k in range(d):
            total += beta * x[dead[k]] - math.log(s_risk - (k / d) * s_dead)
    return total


def breslow_loglik(beta, time, event, x):
    n = len(time)
    total = 0.0
    for t in sorted({time[i] for i in range(n) if event[i]}):
        dead = [i for i in range(n) if event[i] and time[i] == t]
        s_risk = sum(math.exp(beta * x[i]) for i in range(n) if time[i] >= t)
        for i in dead:
            total += beta * x[i] - math.log(s_risk)
    return total


def grid_argmax(fn, lo=-5.0, hi=5.0):
    """Maximize a concave function of one variable by successively finer grids."""
    best = lo
    step = (hi - lo) / 1000
    a, b = lo, hi
    for _ in range(6):
        k = 0
        best_val = -math.inf
        while a + k * step <= b + 1e-15:
            v = a + k * step
            f = fn(v)
            if f > best_val:
                best, best_val = v, f
            k += 1
        a, b = best - step, best + step
        step /= 100
    return best


def stretch_control_oracle(arm, s, d, x, r, lam):
    """Counterfactual doublet for Effect 1 (control stretched by ``lam``)."""
    if arm != "C" or x is None:
        return s, d
    if d == 0:
        # censored control subjects keep their observation
        return s, 0
    y = s - x
    t_new = x + lam * y
    if t_new <= r:
        return t_new, 1
    return r, 0


def shrink_experimental_oracle(arm, s, d, x, y, lam):
    """Counterfactual doublet for Effect 2 (experimental maintenance shrunk by ``lam``).

    ``y`` is the observed maintenance duration for events and the imputed
    one for censored records; ``r = s`` when censored.
    """
    if arm != "E" or x is None:
        return s, d
    if d == 1:
        return x + lam * (s - x), 1
    r = s
    if lam * y <= r - x:
        return x + lam * y, 1
    return r, 0


def logrank_by_hand():
    """Four distinct event times, two per arm; values worked by hand.

    E: 1 (event), 3 (event), 5 (censored); C: 2 (event), 4 (event).
    Risk sets (E, C): (3,2), (2,2), (2,1), (1,1).
    """
    data = {
        "time": [1.0, 3.0, 5.0, 2.0, 4.0],
        "event": [1, 1, 0, 1, 1],
        "experimental": [True, True, True, False, False],
    }
    expected_e = 3 / 5 + 2 / 4 + 2 / 3 + 1 / 2
    variance = (3 / 5) * (2 / 5) + (1 / 2) * (1 / 2) + (2 / 3) * (1 / 3) + (1 / 2) * (1 / 2)
    z = (2 - expected_e) / math.sqrt(variance)
    return data, expected_e, variance, z


def normal_quantile_975():
    # two-sided 5% critical value, bisection on erf so no library quantile is used
    lo, hi = 1.0, 3.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if 0.5 * (1 + math.erf(mid / math.sqrt(2))) < 0.975:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def mdd_by_hand(n_events, alloc):
    return math.exp(-normal_quantile_975() / math.sqrt(n_events * alloc * (1 - alloc)))
