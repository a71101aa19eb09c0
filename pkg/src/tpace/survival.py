"""Kaplan-Meier curves, the two-group log-rank test and the minimum detectable difference."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.stats import norm

from .data import TimeDoublet, TrialDataset
from .errors import DegenerateDataError, ParameterError


@dataclass(frozen=True)
class KMStep:
    time: float
    survival: float
    at_risk: int
    events: int


@dataclass(frozen=True)
class KMCurve:
    """Product-limit estimate, one step per distinct observed time."""

    steps: tuple[KMStep, ...]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.steps])

    @property
    def survival(self) -> np.ndarray:
        return np.array([s.survival for s in self.steps])

    def survival_at(self, t: float) -> float:
        value = 1.0
        for step in self.steps:
            if step.time > t:
                break
            value = step.survival
        return value

    def median(self) -> float:
        """Smallest time with survival <= 0.5, or ``inf`` if never reached."""
        for step in self.steps:
            if step.survival <= 0.5:
                return step.time
        return float("inf")


def km_estimate(doublets: Iterable[TimeDoublet]) -> KMCurve:
    doublets = list(doublets)
    if not doublets:
        raise DegenerateDataError("no observations")
    time = np.array([d.s for d in doublets], dtype=float)
    event = np.array([d.delta for d in doublets], dtype=int)
    if (time < 0).any():
        raise ParameterError("times must be >= 0")

    uniq, inverse = np.unique(time, return_inverse=True)
    d = np.bincount(inverse, weights=event, minlength=len(uniq)).astype(int)
    leaving = np.bincount(inverse, minlength=len(uniq))
    at_risk = len(time) - np.concatenate(([0], np.cumsum(leaving)[:-1]))
    surv = np.cumprod(1.0 - d / at_risk)
    return KMCurve(tuple(
        KMStep(float(t), float(s), int(n), int(e))
        for t, s, n, e in zip(uniq, surv, at_risk, d)
    ))


@dataclass(frozen=True)
class LogRankResult:
    chi_square: float
    z: float
    p_two_sided: float
    p_one_sided: float
    observed_experimental: float
    expected_experimental: float
    observed_control: float
    expected_control: float
    variance: float


def one_sided_p(z: float) -> float:
    """P-value against the alternative that the experimental arm has lower hazard."""
    return float(norm.cdf(z))


def logrank_test(dataset: TrialDataset) -> LogRankResult:
    """Unstratified two-group log-rank test.

    ``z`` is negative when the experimental arm has fewer events than expected.
    Tied events use the hypergeometric variance.
    """
    return logrank_arrays(dataset.time, dataset.event, dataset.experimental)


def logrank_arrays(time, event, experimental) -> LogRankResult:
    time = np.asarray(time, dtype=float)
    event = np.asarray(event).astype(bool)
    exp = np.asarray(experimental).astype(bool)
    if not event.any():
        raise DegenerateDataError("degenerate: no events")

    order = np.argsort(time, kind="stable")
    t, ev, ex = time[order], event[order], exp[order]
    uniq, first = np.unique(t, return_index=True)
    # at risk at u_k = subjects with time >= u_k
    n_all = len(t) - first
    n_exp = (ex.sum() - np.concatenate(([0], np.cumsum(ex)))[first]).astype(float)
    d_all = np.add.reduceat(ev.astype(float), first)
    d_exp = np.add.reduceat((ev & ex).astype(float), first)

    keep = d_all > 0
    n_all, n_exp, d_all, d_exp = n_all[keep].astype(float), n_exp[keep], d_all[keep], d_exp[keep]
    expected = d_all * n_exp / n_all
    with np.errstate(invalid="ignore", divide="ignore"):
        ties = np.where(n_all > 1, (n_all - d_all) / (n_all - 1), 0.0)
    var = float(np.sum(d_all * (n_exp / n_all) * (1 - n_exp / n_all) * ties))

    o_e, e_e = float(d_exp.sum()), float(expected.sum())
    diff = o_e - e_e
    z = diff / np.sqrt(var) if var > 0 else 0.0
    return LogRankResult(
        chi_square=float(z * z),
        z=float(z),
        p_two_sided=float(2 * norm.sf(abs(z))),
        p_one_sided=one_sided_p(z),
        observed_experimental=o_e,
        expected_experimental=e_e,
        observed_control=float(d_all.sum()) - o_e,
        expected_control=float(d_all.sum()) - e_e,
        variance=var,
    )


def mdd(n_events: float, alloc_experimental: float, alpha_two_sided: float = 0.05) -> float:
    """Hazard ratio at which a trial with ``n_events`` exactly meets the two-sided boundary."""
    if not n_events > 0:
        raise ParameterError(f"n_events must be > 0, got {n_events}")
    if not 0 < alloc_experimental < 1:
        raise ParameterError(f"allocation must lie in (0, 1), got {alloc_experimental}")
    if not 0 < alpha_two_sided <= 1:
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha_two_sided}")
    z = norm.isf(alpha_two_sided / 2)
    return float(np.exp(-z / np.sqrt(n_events * alloc_experimental * (1 - alloc_experimental))))
