"""Lambda sweeps, tipping-point search and phase contribution indices."""
from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .counterfactual import (
    CensoringKind,
    CensoringModel,
    Effect,
    EventModel,
    RpsftParams,
    check_lambda,
    draw_censoring_times,
    fit_censoring_model,
    fit_event_model,
    impute_event_times,
    needs_draws,
    retime_effect1,
    retime_effect2,
)
from .cox import cox_fit, cox_timevarying_fit
from .data import TrialDataset
from .errors import NumericalError, ParameterError, TpaceError
from .survival import logrank_test, mdd

SIGNIFICANCE = 0.025
MAX_DROPPED_FRACTION = 0.2
CRITERIA = ("a", "b", "c")


class ReplicateDroppedWarning(UserWarning):
    pass


def _anchored_mean(values) -> float:
    # offset from the first value: identical replicates average to that value exactly
    first = values[0]
    return first + float(np.mean(np.asarray(values) - first))


@dataclass(frozen=True)
class Models:
    censoring: CensoringModel = field(default_factory=CensoringModel)
    event: EventModel | None = None


def fit_models(dataset: TrialDataset, effect: Effect, censoring: CensoringKind | str = CensoringKind.CUTOFF) -> Models:
    """Fit whichever imputation model ``effect`` needs."""
    if Effect(effect) is Effect.EFFECT1:
        return Models(censoring=fit_censoring_model(dataset, censoring))
    return Models(event=fit_event_model(dataset))


@dataclass(frozen=True)
class TippingCurvePoint:
    lam: float
    hr_overall: float
    hr_phase_b: float | None
    p_one_sided: float
    avg_events: float
    hr_phase_a: float = float("nan")
    p_two_sided: float = float("nan")
    n_replicates: int = 1


@dataclass(frozen=True)
class SearchConfig:
    lam_min: float
    lam_max: float
    step: float
    tol: float = 1e-3

    def __post_init__(self):
        if not (0 < self.lam_min < self.lam_max and self.step > 0 and self.tol > 0):
            raise ParameterError(f"invalid search range/tolerance: {self}")

    @classmethod
    def default(cls, effect: Effect) -> "SearchConfig":
        if Effect(effect) is Effect.EFFECT1:
            return cls(1.0, 10.0, 0.1)
        return cls(0.05, 1.0, 0.01)

    def grid(self, effect: Effect) -> list[float]:
        """Scan order: upward from 1 for Effect 1, downward from 1 for Effect 2."""
        count = int(math.floor((self.lam_max - self.lam_min) / self.step + 1e-9))
        if Effect(effect) is Effect.EFFECT1:
            start = max(self.lam_min, 1.0)
            pts = [round(start + k * self.step, 10) for k in range(count + 1)]
            pts = [p for p in pts if p <= self.lam_max + 1e-12]
        else:
            start = min(self.lam_max, 1.0)
            pts = [round(start - k * self.step, 10) for k in range(count + 1)]
            pts = [p for p in pts if p >= self.lam_min - 1e-12]
        for p in pts:
            check_lambda(effect, p)
        return pts


@dataclass(frozen=True)
class ContributionIndices:
    index_a: float
    index_b: float


def _indices(lambda_b: float, lambda_c: float) -> ContributionIndices:
    index_a = (lambda_c - lambda_b) / (lambda_c - 1.0)
    return ContributionIndices(index_a=index_a, index_b=1.0 - index_a)


def contribution_indices_effect1(lambda_b: float, lambda_c: float) -> ContributionIndices:
    """Share of the time gained over control that is credited to the combination phase."""
    if not lambda_c > 1:
        raise ParameterError(f"lambda_c must exceed 1 (no overall effect to decompose), got {lambda_c}")
    if not 1 <= lambda_b <= lambda_c:
        raise ParameterError(f"need 1 <= lambda_b <= lambda_c, got lambda_b={lambda_b}, lambda_c={lambda_c}")
    return _indices(lambda_b, lambda_c)


def efficacy_indices_effect2(lambda_b: float, lambda_c: float) -> ContributionIndices:
    """Minimum individual efficacy share of the combination phase."""
    if not lambda_c < 1:
        raise ParameterError(f"lambda_c must be below 1 (no overall effect to decompose), got {lambda_c}")
    if not lambda_c <= lambda_b <= 1:
        raise ParameterError(f"need lambda_c <= lambda_b <= 1, got lambda_b={lambda_b}, lambda_c={lambda_c}")
    return _indices(lambda_b, lambda_c)


class LambdaEvaluator:
    """Evaluates counterfactual curve points for one dataset, effect and seed.

    Latent draws are made once per replicate and reused for every lambda, and
    points are memoized, so sweeps and bisections share work.
    """

    def __init__(self, dataset: TrialDataset, effect: Effect, models: Models, replicates: int, master_seed: int | None):
        self.dataset = dataset
        self.effect = Effect(effect)
        self.models = models
        if replicates < 1:
            raise ParameterError(f"replicates must be >= 1, got {replicates}")
        if self.effect is Effect.EFFECT2 and models.event is None:
            raise ParameterError("Effect 2 needs a fitted event model")
        self.stochastic = needs_draws(dataset, self.effect, models.censoring)
        if self.stochastic and master_seed is None:
            raise ParameterError("a master seed is required for stochastic counterfactuals")
        self.replicates = replicates if self.stochastic else 1
        self.master_seed = master_seed
        self._latent: list[np.ndarray] | None = None
        self._cache: dict[float, TippingCurvePoint] = {}

    def _latents(self) -> list[np.ndarray]:
        if self._latent is None:
            if self.effect is Effect.EFFECT1:
                self._latent = [
                    draw_censoring_times(self.dataset, self.models.censoring, self.master_seed, m)
                    for m in range(self.replicates)
                ]
            else:
                self._latent = [
                    impute_event_times(self.dataset, self.models.event, self.master_seed, m)
                    for m in range(self.replicates)
                ]
        return self._latent

    def counterfactual(self, lam: float, replicate: int = 0) -> TrialDataset:
        latent = self._latents()[replicate]
        if self.effect is Effect.EFFECT1:
            return retime_effect1(self.dataset, lam, latent)
        return retime_effect2(self.dataset, lam, latent)

    def point(self, lam: float) -> TippingCurvePoint:
        lam = float(lam)
        if lam in self._cache:
            return self._cache[lam]
        check_lambda(self.effect, lam)
        log_hr, log_hr_a, log_hr_b, p_one, p_two, events = [], [], [], [], [], []
        dropped = 0
        for m in range(self.replicates):
            cf = self.counterfactual(lam, m)
            overall = cox_fit(cf)
            phase = cox_timevarying_fit(cf)
            if not (overall.converged and phase.converged):
                dropped += 1
                warnings.warn(
                    f"lambda={lam}: replicate {m} dropped ({overall.message or phase.message})",
                    ReplicateDroppedWarning,
                    stacklevel=2,
                )
                continue
            lr = logrank_test(cf)
            log_hr.append(overall.log_hr)
            log_hr_a.append(phase.phase_a.log_hr)
            if phase.phase_b is not None:
                log_hr_b.append(phase.phase_b.log_hr)
            p_one.append(lr.p_one_sided)
            p_two.append(lr.p_two_sided)
            events.append(cf.n_events)
        if dropped > MAX_DROPPED_FRACTION * self.replicates:
            raise NumericalError(
                f"lambda={lam}: {dropped} of {self.replicates} replicates failed Cox convergence"
            )
        point = TippingCurvePoint(
            lam=lam,
            hr_overall=math.exp(_anchored_mean(log_hr)),
            hr_phase_b=math.exp(_anchored_mean(log_hr_b)) if log_hr_b else None,
            p_one_sided=float(np.median(p_one)),
            avg_events=float(np.mean(events)),
            hr_phase_a=math.exp(_anchored_mean(log_hr_a)),
            p_two_sided=float(np.median(p_two)),
            n_replicates=len(log_hr),
        )
        self._cache[lam] = point
        return point

    def met(self, criterion: str, lam: float) -> bool:
        pt = self.point(lam)
        if criterion == "a":
            return pt.p_one_sided >= SIGNIFICANCE
        if criterion == "b":
            if pt.hr_phase_b is None:
                raise NumericalError(f"lambda={lam}: maintenance-phase hazard ratio not estimable")
            return pt.hr_phase_b >= 1.0
        if criterion == "c":
            return pt.hr_overall >= 1.0
        raise ParameterError(f"unknown criterion {criterion!r}; expected one of a, b, c")

    def target_value(self, criterion: str, lam: float):
        pt = self.point(lam)
        return {"a": pt.p_one_sided, "b": pt.hr_phase_b, "c": pt.hr_overall}[criterion]

    def search(self, criterion: str, search: SearchConfig) -> tuple[float, float]:
        """Return ``(bisection midpoint, first grid value meeting the criterion)``."""
        grid = search.grid(self.effect)
        previous = None
        for lam in grid:
            if self.met(criterion, lam):
                if previous is None:
                    return lam, lam
                miss, hit = previous, lam
                while abs(hit - miss) > search.tol:
                    mid = 0.5 * (miss + hit)
                    if self.met(criterion, mid):
                        hit = mid
                    else:
                        miss = mid
                return 0.5 * (miss + hit), lam
            previous = lam
        lo, hi = grid[0], grid[-1]
        raise NumericalError(
            f"tipping point outside search range [{min(lo, hi)}, {max(lo, hi)}]: criterion ({criterion}) "
            f"target is {self.target_value(criterion, lo)} at lambda={lo} and "
            f"{self.target_value(criterion, hi)} at lambda={hi}"
        )


def evaluate_lambda(
    dataset: TrialDataset,
    params: RpsftParams,
    models: Models,
    replicates: int = 200,
    master_seed: int | None = None,
) -> TippingCurvePoint:
    """Aggregate counterfactual analyses over Monte Carlo replicates at one lambda.

    Hazard ratios are geometric means, the p-value is the median and the
    event count the arithmetic mean over replicates.
    """
    return LambdaEvaluator(dataset, params.effect, models, replicates, master_seed).point(params.lam)


def find_tipping_point(
    dataset: TrialDataset,
    effect: Effect,
    criterion: str,
    models: Models,
    search: SearchConfig | None = None,
    master_seed: int | None = None,
    replicates: int = 200,
) -> float:
    """Scan the lambda grid to bracket the first crossing, then bisect."""
    effect = Effect(effect)
    search = search or SearchConfig.default(effect)
    evaluator = LambdaEvaluator(dataset, effect, models, replicates, master_seed)
    return evaluator.search(criterion, search)[0]


@dataclass(frozen=True)
class TpaceConfig:
    master_seed: int
    criteria: tuple[str, ...] = CRITERIA
    replicates: int = 200
    search: SearchConfig | None = None
    censoring: CensoringKind = CensoringKind.CUTOFF

    def __post_init__(self):
        object.__setattr__(self, "criteria", tuple(sorted(set(self.criteria))))
        object.__setattr__(self, "censoring", CensoringKind(self.censoring))
        bad = [c for c in self.criteria if c not in CRITERIA]
        if bad or not self.criteria:
            raise ParameterError(f"criteria must be a non-empty subset of a,b,c; got {self.criteria}")


@dataclass(frozen=True)
class TippingReport:
    effect: Effect
    lambda_a: float | None
    lambda_b: float | None
    lambda_c: float | None
    hr_at_a: float | None
    hr_at_b: float | None
    hr_at_c: float | None
    p_at_a: float | None
    indices: ContributionIndices | None
    curve: tuple[TippingCurvePoint, ...]
    config: dict
    grid_lambdas: dict = field(default_factory=dict)
    at: dict = field(default_factory=dict)
    diagnostics: tuple[str, ...] = ()

    def lam(self, criterion: str) -> float | None:
        return getattr(self, f"lambda_{criterion}")


def dataset_fingerprint(dataset: TrialDataset) -> str:
    h = hashlib.sha256()
    h.update("\x1f".join(dataset.ids).encode("utf-8"))
    for arr in (dataset.experimental, dataset.time, dataset.event, dataset.onset, dataset.cutoff):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def _ordering_diagnostics(effect: Effect, lams: dict) -> list[str]:
    got = {k: v for k, v in lams.items() if v is not None}
    order = ["a", "b", "c"] if effect is Effect.EFFECT1 else ["c", "b", "a"]
    present = [k for k in order if k in got]
    out = []
    for lo, hi in zip(present, present[1:]):
        if got[lo] > got[hi]:
            out.append(
                f"ordering violated: lambda_{lo}={got[lo]:.6g} > lambda_{hi}={got[hi]:.6g} "
                "(Monte Carlo noise or a setting outside the motivating assumptions)"
            )
    return out


def run_tpace(dataset: TrialDataset, effect: Effect, config: TpaceConfig, models: Models | None = None) -> TippingReport:
    """Full analysis for one effect: curve over the scan grid, tipping points and indices."""
    effect = Effect(effect)
    search = config.search or SearchConfig.default(effect)
    try:
        models = models or fit_models(dataset, effect, config.censoring)
        evaluator = LambdaEvaluator(dataset, effect, models, config.replicates, config.master_seed)
        curve = tuple(evaluator.point(lam) for lam in search.grid(effect))
    except TpaceError as exc:
        raise type(exc)(f"Effect {int(effect)} curve: {exc}") from exc

    lams: dict[str, float | None] = dict.fromkeys(CRITERIA)
    grid_lams: dict[str, float] = {}
    at: dict[str, TippingCurvePoint] = {}
    for criterion in config.criteria:
        try:
            lams[criterion], grid_lams[criterion] = evaluator.search(criterion, search)
        except TpaceError as exc:
            raise type(exc)(f"Effect {int(effect)} criterion ({criterion}): {exc}") from exc
        at[criterion] = evaluator.point(lams[criterion])

    diagnostics = _ordering_diagnostics(effect, lams)
    indices = None
    if lams["b"] is not None and lams["c"] is not None:
        fn = contribution_indices_effect1 if effect is Effect.EFFECT1 else efficacy_indices_effect2
        try:
            indices = fn(lams["b"], lams["c"])
        except ParameterError as exc:
            diagnostics.append(f"indices undefined: {exc}")

    if "a" in at:
        realized = mdd(at["a"].avg_events, dataset.allocation, 2 * SIGNIFICANCE)
        if abs(at["a"].hr_overall - realized) > 0.02:
            diagnostics.append(
                f"hazard ratio at lambda_a ({at['a'].hr_overall:.4f}) differs from the "
                f"minimum detectable difference ({realized:.4f}) by more than 0.02"
            )

    echo = {
        "effect": int(effect),
        "criteria": list(config.criteria),
        "master_seed": config.master_seed,
        "replicates_requested": config.replicates,
        "replicates_used": evaluator.replicates,
        "stochastic": evaluator.stochastic,
        "search": {"lambda_min": search.lam_min, "lambda_max": search.lam_max, "step": search.step, "tol": search.tol},
        "significance_one_sided": SIGNIFICANCE,
        "ties": "efron",
        "censoring_model": {
            "kind": models.censoring.kind.value,
            "family": models.censoring.family,
            "rate": models.censoring.rate,
        },
        "event_model": None if models.event is None else {
            "family": models.event.family,
            "rate": models.event.rate,
            "events": models.event.events,
            "exposure": models.event.exposure,
        },
        "dataset": {
            "n_subjects": len(dataset),
            "n_experimental": dataset.n_experimental,
            "n_control": dataset.n_control,
            "n_events": dataset.n_events,
            "sha256": dataset_fingerprint(dataset),
        },
    }
    return TippingReport(
        effect=effect,
        lambda_a=lams["a"],
        lambda_b=lams["b"],
        lambda_c=lams["c"],
        hr_at_a=at["a"].hr_overall if "a" in at else None,
        hr_at_b=at["b"].hr_overall if "b" in at else None,
        hr_at_c=at["c"].hr_overall if "c" in at else None,
        p_at_a=at["a"].p_one_sided if "a" in at else None,
        indices=indices,
        curve=curve,
        config=echo,
        grid_lambdas=grid_lams,
        at=at,
        diagnostics=tuple(diagnostics),
    )
