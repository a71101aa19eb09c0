"""Cox proportional-hazards regression by Newton iteration.

The engine handles delayed entry and strata so that one code path serves both
the plain arm model and the phase model. A record is at risk at time ``t`` when
``entry <= t <= stop``; the closed left end lets a subject whose event falls at
the instant of maintenance onset count as a phase-B event.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .data import TrialDataset
from .errors import DegenerateDataError, ParameterError

MAX_ITER = 50
SCORE_TOL = 1e-9
STEP_TOL = 1e-9
_DIVERGED = 50.0


@dataclass(frozen=True)
class CoxFit:
    """One arm coefficient: log hazard ratio, experimental vs control."""

    log_hr: float
    se: float
    wald_z: float
    score_z: float
    p_two_sided: float
    p_one_sided: float
    n_events: int
    converged: bool
    iterations: int = 0
    loglik: float = float("nan")
    message: str = ""

    @property
    def hr(self) -> float:
        return math.exp(self.log_hr)


@dataclass(frozen=True)
class PhaseCoxFit:
    """Arm effects during the combination phase (A) and the maintenance phase (B).

    ``phase_b`` is None when no maintenance episode carries information about
    the arm effect.
    """

    phase_a: CoxFit
    phase_b: CoxFit | None
    message: str = ""

    @property
    def theta1(self) -> float:
        return self.phase_a.hr

    @property
    def theta2(self) -> float | None:
        return None if self.phase_b is None else self.phase_b.hr

    @property
    def phase_b_estimable(self) -> bool:
        return self.phase_b is not None

    @property
    def converged(self) -> bool:
        return self.phase_a.converged and (self.phase_b is None or self.phase_b.converged)


@dataclass(frozen=True)
class CoxResult:
    """Raw multi-coefficient result from :func:`cox_ph`."""

    coef: np.ndarray
    cov: np.ndarray
    score0: np.ndarray
    info0: np.ndarray
    loglik: float
    iterations: int
    converged: np.ndarray
    n_events: int
    message: str


class _Stratum:
    """Sorting and index bookkeeping for one stratum, independent of the coefficients."""

    def __init__(self, entry, stop, event, X):
        ev = event.astype(bool)
        self.X = X
        self.stop_order = np.argsort(stop, kind="stable")
        self.entry_order = np.argsort(entry, kind="stable")
        stop_sorted = stop[self.stop_order]
        entry_sorted = entry[self.entry_order]

        ev_idx = np.flatnonzero(ev)
        ev_idx = ev_idx[np.argsort(stop[ev_idx], kind="stable")]
        self.ev_idx = ev_idx
        ev_t = stop[ev_idx]
        self.u, first, counts = np.unique(ev_t, return_index=True, return_counts=True)
        self.first = first
        # risk set at u: stop >= u, minus entry > u
        self.stop_pos = np.searchsorted(stop_sorted, self.u, side="left")
        self.entry_pos = np.searchsorted(entry_sorted, self.u, side="right")
        self.k_of_event = np.repeat(np.arange(len(self.u)), counts)
        rank_in_tie = np.arange(len(ev_idx)) - np.repeat(first, counts)
        self.frac = rank_in_tie / np.repeat(counts, counts)
        self.n = len(stop)

    @staticmethod
    def _tail_sums(values, order, pos):
        # sums over order[pos:], for each pos
        v = values[order]
        csum = np.concatenate((np.cumsum(v[::-1], axis=0)[::-1], np.zeros((1,) + v.shape[1:])), axis=0)
        return csum[pos]

    def terms(self, beta, ties):
        X = self.X
        p = X.shape[1]
        if len(self.ev_idx) == 0:
            return 0.0, np.zeros(p), np.zeros((p, p))
        eta = X @ beta
        shift = eta.max()
        w = np.exp(eta - shift)
        wX = w[:, None] * X
        wXX = wX[:, :, None] * X[:, None, :]

        S0 = self._tail_sums(w, self.stop_order, self.stop_pos) - self._tail_sums(w, self.entry_order, self.entry_pos)
        S1 = self._tail_sums(wX, self.stop_order, self.stop_pos) - self._tail_sums(wX, self.entry_order, self.entry_pos)
        S2 = self._tail_sums(wXX, self.stop_order, self.stop_pos) - self._tail_sums(wXX, self.entry_order, self.entry_pos)

        e = self.ev_idx
        E0 = np.add.reduceat(w[e], self.first)
        E1 = np.add.reduceat(wX[e], self.first, axis=0)
        E2 = np.add.reduceat(wXX[e], self.first, axis=0)

        k = self.k_of_event
        f = self.frac if ties == "efron" else np.zeros_like(self.frac)
        den = S0[k] - f * E0[k]
        num1 = S1[k] - f[:, None] * E1[k]
        num2 = S2[k] - f[:, None, None] * E2[k]

        loglik = float(eta[e].sum() - np.sum(np.log(den) + shift))
        mean = num1 / den[:, None]
        grad = X[e].sum(axis=0) - mean.sum(axis=0)
        hess = -(np.sum(num2 / den[:, None, None], axis=0) - np.einsum("ri,rj->ij", mean, mean))
        return loglik, grad, hess


def cox_ph(time, event, X, entry=None, strata=None, ties: str = "efron") -> CoxResult:
    """Maximize the (stratified, left-truncated) partial likelihood.

    Newton steps start at zero and are halved while the log-likelihood
    decreases. A coefficient counts as converged when both its score and its
    last step are below ``1e-9`` in absolute value.
    """
    if ties not in ("efron", "breslow"):
        raise ParameterError(f"ties must be 'efron' or 'breslow', got {ties!r}")
    stop = np.asarray(time, dtype=float)
    event = np.asarray(event).astype(np.int8)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    entry = np.zeros_like(stop) if entry is None else np.asarray(entry, dtype=float)
    strata = np.zeros(len(stop), dtype=int) if strata is None else np.asarray(strata)
    n_events = int(event.sum())
    if n_events == 0:
        raise DegenerateDataError("degenerate: no events")

    parts = [
        _Stratum(entry[m], stop[m], event[m], X[m])
        for m in (strata == s for s in np.unique(strata))
    ]

    def evaluate(beta):
        ll, g, h = 0.0, np.zeros(X.shape[1]), np.zeros((X.shape[1],) * 2)
        for part in parts:
            a, b, c = part.terms(beta, ties)
            ll, g, h = ll + a, g + b, h + c
        return ll, g, h

    p = X.shape[1]
    beta = np.zeros(p)
    ll, g, h = evaluate(beta)
    score0, info0 = g.copy(), -h.copy()
    if np.any(np.diag(info0) <= 1e-12):
        raise DegenerateDataError("a coefficient carries no information (constant covariate within risk sets)")

    converged = np.zeros(p, dtype=bool)
    message = ""
    it = 0
    for it in range(1, MAX_ITER + 1):
        try:
            step = np.linalg.solve(-h, g)
        except np.linalg.LinAlgError:
            message = "singular information matrix"
            break
        converged = (np.abs(g) < SCORE_TOL) & (np.abs(step) < STEP_TOL)
        if converged.all():
            break
        for _ in range(60):
            cand = beta + step
            ll_new, g_new, h_new = evaluate(cand)
            if np.isfinite(ll_new) and ll_new >= ll - 1e-12 * max(1.0, abs(ll)):
                break
            step = step / 2
        beta, ll, g, h = cand, ll_new, g_new, h_new
        if np.any(np.abs(beta) > _DIVERGED):
            message = "coefficient diverging: monotone likelihood (complete separation suspected)"
            converged = np.abs(beta) <= _DIVERGED
            break
    else:
        message = f"no convergence after {MAX_ITER} Newton iterations"

    if not converged.all() and not message:
        message = f"no convergence after {it} Newton iterations"
    if not converged.all() and np.any(np.abs(beta) > 10) and "monotone" not in message:
        message += "; coefficient diverging: monotone likelihood suspected"

    try:
        cov = np.linalg.inv(-h)
    except np.linalg.LinAlgError:
        cov = np.full((p, p), np.nan)
    return CoxResult(
        coef=beta,
        cov=cov,
        score0=score0,
        info0=info0,
        loglik=ll,
        iterations=it,
        converged=converged,
        n_events=n_events,
        message=message,
    )


def _coef_fit(res: CoxResult, j: int, n_events: int) -> CoxFit:
    b = float(res.coef[j])
    var = float(res.cov[j, j])
    se = math.sqrt(var) if var > 0 else float("nan")
    wald = b / se if se > 0 else float("nan")
    p_two = float(2 * norm.sf(abs(wald))) if math.isfinite(wald) else float("nan")
    p_one = p_two / 2 if b < 0 else 1 - p_two / 2
    return CoxFit(
        log_hr=b,
        se=se,
        wald_z=wald,
        score_z=float(res.score0[j] / math.sqrt(res.info0[j, j])),
        p_two_sided=p_two,
        p_one_sided=p_one,
        n_events=n_events,
        converged=bool(res.converged[j]),
        iterations=res.iterations,
        loglik=res.loglik,
        message=res.message,
    )


def cox_fit(dataset: TrialDataset, ties: str = "efron") -> CoxFit:
    """Arm-only Cox model on the whole follow-up (experimental coded 1)."""
    res = cox_ph(dataset.time, dataset.event, dataset.experimental.astype(float), ties=ties)
    return _coef_fit(res, 0, res.n_events)


@dataclass(frozen=True)
class Episodes:
    """Counting-process rows produced by splitting follow-up at maintenance onset."""

    subject: np.ndarray
    entry: np.ndarray
    stop: np.ndarray
    event: np.ndarray
    experimental: np.ndarray
    phase_b: np.ndarray


def split_episodes(dataset: TrialDataset) -> Episodes:
    """Phase-A episode ``[0, x]`` (censored) plus phase-B episode ``[x, s]`` per maintenance subject.

    Subjects without maintenance keep a single phase-A episode ``[0, s]``.
    """
    n = len(dataset)
    maint = dataset.has_maintenance
    idx = np.arange(n)
    m_idx = idx[maint]
    a_stop = np.where(maint, dataset.onset, dataset.time)
    a_event = np.where(maint, 0, dataset.event)
    return Episodes(
        subject=np.concatenate((idx, m_idx)),
        entry=np.concatenate((np.zeros(n), dataset.onset[maint])),
        stop=np.concatenate((a_stop, dataset.time[maint])),
        event=np.concatenate((a_event, dataset.event[maint])).astype(np.int8),
        experimental=np.concatenate((dataset.experimental, dataset.experimental[maint])),
        phase_b=np.concatenate((np.zeros(n, dtype=bool), np.ones(len(m_idx), dtype=bool))),
    )


def _phase_b_informative(ep: Episodes) -> bool:
    b = ep.phase_b
    if not (ep.event[b] == 1).any():
        return False
    return bool(ep.experimental[b].any() and (~ep.experimental[b]).any())


def cox_timevarying_fit(dataset: TrialDataset, ties: str = "efron") -> PhaseCoxFit:
    """Phase model with separate arm coefficients before and after maintenance onset.

    Phases are separate strata, each with its own baseline hazard, so the joint
    fit reproduces two separate arm-only fits: one on follow-up censored at
    onset and one on the maintenance window ``[x, s]`` of maintenance subjects.
    """
    ep = split_episodes(dataset)
    n_a = int(ep.event[~ep.phase_b].sum())
    n_b = int(ep.event[ep.phase_b].sum())
    if n_a == 0:
        raise DegenerateDataError("degenerate: no events before maintenance onset")

    if not _phase_b_informative(ep):
        note = "theta2 not estimable: no maintenance-phase events in both arms" if ep.phase_b.any() \
            else "theta2 not estimable: no subject entered maintenance"
        a = ~ep.phase_b
        if ep.phase_b.any():
            res = cox_ph(ep.stop[a], ep.event[a], ep.experimental[a].astype(float), entry=ep.entry[a], ties=ties)
        else:
            # identical inputs to cox_fit, so the estimate matches it exactly
            res = cox_ph(dataset.time, dataset.event, dataset.experimental.astype(float), ties=ties)
        return PhaseCoxFit(phase_a=_coef_fit(res, 0, n_a), phase_b=None, message=note)

    arm = ep.experimental.astype(float)
    X = np.column_stack((arm * ~ep.phase_b, arm * ep.phase_b))
    res = cox_ph(ep.stop, ep.event, X, entry=ep.entry, strata=ep.phase_b.astype(int), ties=ties)
    return PhaseCoxFit(phase_a=_coef_fit(res, 0, n_a), phase_b=_coef_fit(res, 1, n_b), message=res.message)
