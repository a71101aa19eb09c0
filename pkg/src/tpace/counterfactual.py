"""Counterfactual doublets under the structure ``T' = X + lam * Y``.

Effect 1 stretches the maintenance time of control subjects (``lam >= 1``) to
mimic a hypothetical arm that received maintenance therapy without the
combination add-on. Effect 2 shrinks the maintenance time of experimental
subjects (``0 < lam <= 1``) to mimic an arm without maintenance benefit.

Every random draw depends only on ``(master_seed, replicate, subject id)``, never
on ``lam``. Sweeping ``lam`` at a fixed seed therefore reuses the same latent
times (common random numbers).
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass

import numpy as np

from .data import TrialDataset
from .errors import ModelError, NumericalError, ParameterError

REJECTION_CAP = 10_000

_STREAM_CENSORING = 1
_STREAM_EVENT = 2


class Effect(enum.IntEnum):
    EFFECT1 = 1
    EFFECT2 = 2


class CensoringKind(str, enum.Enum):
    CUTOFF = "cutoff"
    PARAMETRIC = "parametric"


@dataclass(frozen=True)
class RpsftParams:
    effect: Effect
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "effect", Effect(self.effect))
        check_lambda(self.effect, self.lam)


def check_lambda(effect: Effect, lam: float) -> None:
    if Effect(effect) is Effect.EFFECT1:
        if not lam >= 1:
            raise ParameterError(f"Effect 1 requires lambda >= 1, got {lam}")
    elif not 0 < lam <= 1:
        raise ParameterError(f"Effect 2 requires 0 < lambda <= 1, got {lam}")


@dataclass(frozen=True)
class CensoringModel:
    """Latent censoring-time model for control subjects whose event was observed.

    ``cutoff`` imputes the administrative cutoff; ``parametric`` samples from an
    exponential fit to the indicator-reversed data.
    """

    kind: CensoringKind = CensoringKind.CUTOFF
    family: str = "exponential"
    rate: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", CensoringKind(self.kind))
        if self.kind is CensoringKind.PARAMETRIC:
            if self.family != "exponential":
                raise ModelError(f"unsupported censoring family {self.family!r}")
            if self.rate is None or not self.rate > 0:
                raise ModelError(f"parametric censoring rate must be > 0, got {self.rate}")

    @property
    def deterministic(self) -> bool:
        return self.kind is CensoringKind.CUTOFF


@dataclass(frozen=True)
class EventModel:
    """Exponential model for time from maintenance onset to event on the experimental arm."""

    rate: float
    family: str = "exponential"
    events: int = 0
    exposure: float = 0.0

    def __post_init__(self):
        if self.family != "exponential":
            raise ModelError(f"unsupported event family {self.family!r}")
        if not self.rate > 0:
            raise ModelError(f"event model rate must be > 0, got {self.rate}")


def fit_censoring_model(dataset: TrialDataset, kind: CensoringKind | str = CensoringKind.CUTOFF) -> CensoringModel:
    """Exponential MLE for the censoring distribution, both arms pooled.

    Indicators are reversed: original censorings are the events of the
    censoring process and original events are censored observations of it.
    """
    kind = CensoringKind(kind)
    if kind is CensoringKind.CUTOFF:
        return CensoringModel(kind)
    n_cens = int((dataset.event == 0).sum())
    if n_cens == 0:
        raise ModelError("parametric censoring model needs at least one censored observation")
    return CensoringModel(kind, rate=n_cens / float(dataset.time.sum()))


def fit_event_model(dataset: TrialDataset) -> EventModel:
    """Censored exponential MLE: maintenance-phase events over maintenance exposure, experimental arm."""
    m = dataset.experimental & dataset.has_maintenance
    exposure = float((dataset.time[m] - dataset.onset[m]).sum())
    events = int(dataset.event[m].sum())
    if events == 0 or exposure <= 0:
        raise ModelError(
            f"event model needs maintenance-phase events and exposure on the experimental arm "
            f"(events={events}, exposure={exposure})"
        )
    return EventModel(rate=events / exposure, events=events, exposure=exposure)


def subject_key(subject_id: str) -> int:
    return int.from_bytes(hashlib.sha256(subject_id.encode("utf-8")).digest()[:8], "little")


def subject_rng(master_seed: int, replicate: int, subject_id: str, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(master_seed), stream, int(replicate), subject_key(subject_id)])


def _effect1_targets(dataset: TrialDataset) -> np.ndarray:
    return ~dataset.experimental & dataset.has_maintenance & (dataset.event == 1)


def _effect2_targets(dataset: TrialDataset) -> np.ndarray:
    return dataset.experimental & dataset.has_maintenance


def needs_draws(dataset: TrialDataset, effect: Effect, censoring: CensoringModel | None = None) -> bool:
    """Whether counterfactuals for ``effect`` depend on random draws at all."""
    if Effect(effect) is Effect.EFFECT1:
        return censoring is not None and not censoring.deterministic and bool(_effect1_targets(dataset).any())
    m = _effect2_targets(dataset)
    return bool((dataset.event[m] == 0).any())


def draw_censoring_times(
    dataset: TrialDataset,
    censoring: CensoringModel,
    master_seed: int | None = None,
    replicate: int = 0,
) -> np.ndarray:
    """Latent censoring time ``r`` for each Effect-1 target subject (NaN elsewhere).

    Parametric draws are rejection-sampled conditional on ``r >= s`` and then
    capped at the subject's administrative cutoff, which bounds any follow-up.
    """
    targets = _effect1_targets(dataset)
    r = np.full(len(dataset), np.nan)
    if censoring.deterministic:
        r[targets] = dataset.cutoff[targets]
        return r
    if master_seed is None:
        raise ParameterError("a master seed is required for parametric censoring draws")
    scale = 1.0 / censoring.rate
    for k in np.flatnonzero(targets):
        s = dataset.time[k]
        rng = subject_rng(master_seed, replicate, dataset.ids[k], _STREAM_CENSORING)
        drawn, value = 0, None
        while drawn < REJECTION_CAP:
            batch = rng.exponential(scale, size=min(64, REJECTION_CAP - drawn))
            hit = np.flatnonzero(batch >= s)
            if hit.size:
                drawn += int(hit[0]) + 1
                value = float(batch[hit[0]])
                break
            drawn += batch.size
        if value is None:
            raise NumericalError(
                f"subject {dataset.ids[k]}: rejection sampling for censoring time >= {s} "
                f"exceeded {REJECTION_CAP} draws"
            )
        r[k] = min(value, dataset.cutoff[k])
    return r


def impute_event_times(
    dataset: TrialDataset,
    event_model: EventModel,
    master_seed: int,
    replicate: int = 0,
) -> np.ndarray:
    """Latent maintenance duration ``y`` for each Effect-2 target subject (NaN elsewhere).

    Observed for events; for censored records a fresh exponential residual is
    added to the censored exposure (memoryless property).
    """
    targets = _effect2_targets(dataset)
    y = np.full(len(dataset), np.nan)
    y[targets] = dataset.time[targets] - dataset.onset[targets]
    scale = 1.0 / event_model.rate
    for k in np.flatnonzero(targets & (dataset.event == 0)):
        rng = subject_rng(master_seed, replicate, dataset.ids[k], _STREAM_EVENT)
        residual = 0.0
        while residual <= 0.0:
            residual = float(rng.exponential(scale))
        y[k] = y[k] + residual
    return y


def retime_effect1(dataset: TrialDataset, lambda_c: float, latent_r: np.ndarray) -> TrialDataset:
    """Apply the Effect-1 case split given latent censoring times."""
    check_lambda(Effect.EFFECT1, lambda_c)
    m = _effect1_targets(dataset)
    s, x, r = dataset.time[m], dataset.onset[m], latent_r[m]
    # t' >= t whenever lambda >= 1; max() keeps that exact under rounding
    t_new = np.maximum(s, x + lambda_c * (s - x))
    observed = t_new <= r
    time = dataset.time.copy()
    event = dataset.event.copy()
    time[m] = np.where(observed, t_new, r)
    event[m] = observed.astype(np.int8)
    return dataset.with_doublets(time, event)


def retime_effect2(dataset: TrialDataset, lambda_e: float, latent_y: np.ndarray) -> TrialDataset:
    """Apply the Effect-2 case split given latent maintenance durations."""
    check_lambda(Effect.EFFECT2, lambda_e)
    m = _effect2_targets(dataset)
    s, x, y, d = dataset.time[m], dataset.onset[m], latent_y[m], dataset.event[m]
    shrunk = lambda_e * y
    converts = (d == 1) | (shrunk <= s - x)
    # t' <= s on every converting branch; min() keeps that exact under rounding
    t_new = np.minimum(s, x + shrunk)
    time = dataset.time.copy()
    event = dataset.event.copy()
    time[m] = np.where(converts, t_new, s)
    event[m] = converts.astype(np.int8)
    return dataset.with_doublets(time, event)


def counterfactual_effect1(
    dataset: TrialDataset,
    lambda_c: float,
    censoring: CensoringModel,
    master_seed: int | None = None,
    replicate: int = 0,
) -> TrialDataset:
    """Counterfactual dataset for a hypothetical maintenance-only control arm.

    Experimental records and control records without maintenance pass through
    unchanged; censored control records are unchanged as well.
    """
    check_lambda(Effect.EFFECT1, lambda_c)
    return retime_effect1(dataset, lambda_c, draw_censoring_times(dataset, censoring, master_seed, replicate))


def counterfactual_effect2(
    dataset: TrialDataset,
    lambda_e: float,
    event_model: EventModel,
    master_seed: int,
    replicate: int = 0,
) -> TrialDataset:
    """Counterfactual dataset for a hypothetical experimental arm without maintenance benefit."""
    check_lambda(Effect.EFFECT2, lambda_e)
    return retime_effect2(dataset, lambda_e, impute_event_times(dataset, event_model, master_seed, replicate))
