"""Subject records and the columnar trial dataset.

Times are months stored as float64. A dataset keeps one array per field so the
counterfactual and Cox code can work on whole columns; ``SubjectRecord`` is the
row view used for ingestion and inspection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

EXPERIMENTAL = "E"
CONTROL = "C"


@dataclass(frozen=True)
class TimeDoublet:
    """Observed time ``s = min(T, R)`` and event flag ``delta = I(T <= R)``."""

    s: float
    delta: int

    def __post_init__(self):
        if not (self.s >= 0 and math.isfinite(self.s)):
            raise DataError(f"time must be finite and >= 0, got {self.s!r}")
        if self.delta not in (0, 1):
            raise DataError(f"event indicator must be 0 or 1, got {self.delta!r}")


@dataclass(frozen=True)
class SubjectRecord:
    id: str
    arm: str
    doublet: TimeDoublet
    maintenance_onset: float | None
    cutoff_time: float

    def __post_init__(self):
        problem = record_problem(
            self.arm, self.doublet.s, self.maintenance_onset, self.cutoff_time
        )
        if problem:
            raise DataError(f"subject {self.id}: {problem}")

    @property
    def experimental(self) -> bool:
        return self.arm == EXPERIMENTAL


def record_problem(arm, s, onset, cutoff) -> str | None:
    """Return a description of the first violated record invariant, or None."""
    if arm not in (EXPERIMENTAL, CONTROL):
        return f"arm must be '{EXPERIMENTAL}' or '{CONTROL}', got {arm!r}"
    if not (cutoff >= 0 and math.isfinite(cutoff)):
        return f"cutoff_time must be finite and >= 0, got {cutoff!r}"
    if onset is not None:
        if not (onset >= 0 and math.isfinite(onset)):
            return f"time_to_maintenance must be finite and >= 0, got {onset!r}"
        if onset > s:
            return f"invariant time_to_maintenance <= time violated ({onset!r} > {s!r})"
    if s > cutoff:
        return f"invariant time <= cutoff_time violated ({s!r} > {cutoff!r})"
    return None


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TrialDataset:
    """Immutable two-arm cohort.

    ``onset`` holds NaN for subjects who never entered maintenance.
    """

    ids: tuple[str, ...]
    experimental: np.ndarray
    time: np.ndarray
    event: np.ndarray
    onset: np.ndarray
    cutoff: np.ndarray
    label_experimental: str = "Experimental"
    label_control: str = "Control"
    _checked: bool = field(default=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        object.__setattr__(self, "experimental", _frozen(self.experimental, bool))
        object.__setattr__(self, "time", _frozen(self.time, np.float64))
        object.__setattr__(self, "event", _frozen(self.event, np.int8))
        object.__setattr__(self, "onset", _frozen(self.onset, np.float64))
        object.__setattr__(self, "cutoff", _frozen(self.cutoff, np.float64))
        if not self._checked:
            self._validate()

    def _validate(self):
        n = len(self.ids)
        for name in ("experimental", "time", "event", "onset", "cutoff"):
            if getattr(self, name).shape != (n,):
                raise DataError(f"column {name!r} has length {getattr(self, name).shape}, expected {n}")
        if len(set(self.ids)) != n:
            seen, dupes = set(), []
            for i in self.ids:
                if i in seen:
                    dupes.append(i)
                seen.add(i)
            raise DataError(f"duplicate subject ids: {sorted(set(dupes))}")
        if not self.experimental.any() or self.experimental.all():
            raise DataError("both arms must contain at least one subject")

        has_onset = ~np.isnan(self.onset)
        bad = ~np.isfinite(self.time) | (self.time < 0)
        bad |= ~np.isin(self.event, (0, 1))
        bad |= ~np.isfinite(self.cutoff) | (self.cutoff < 0)
        bad |= has_onset & ((self.onset < 0) | ~np.isfinite(self.onset))
        bad |= has_onset & (self.onset > self.time)
        bad |= self.time > self.cutoff
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            onset = None if np.isnan(self.onset[k]) else float(self.onset[k])
            problem = record_problem(
                EXPERIMENTAL, float(self.time[k]), onset, float(self.cutoff[k])
            ) or f"event must be 0 or 1, got {int(self.event[k])}"
            raise DataError(f"subject {self.ids[k]}: {problem} ({int(bad.sum())} invalid records)")

    @classmethod
    def from_records(
        cls,
        records: Iterable[SubjectRecord],
        label_experimental: str = "Experimental",
        label_control: str = "Control",
    ) -> "TrialDataset":
        records = list(records)
        return cls(
            ids=[r.id for r in records],
            experimental=[r.experimental for r in records],
            time=[r.doublet.s for r in records],
            event=[r.doublet.delta for r in records],
            onset=[np.nan if r.maintenance_onset is None else r.maintenance_onset for r in records],
            cutoff=[r.cutoff_time for r in records],
            label_experimental=label_experimental,
            label_control=label_control,
        )

    def with_doublets(self, time: np.ndarray, event: np.ndarray) -> "TrialDataset":
        """Copy of this dataset with replaced observed doublets; everything else is retained."""
        out = TrialDataset(
            ids=self.ids,
            experimental=self.experimental,
            time=time,
            event=event,
            onset=self.onset,
            cutoff=self.cutoff,
            label_experimental=self.label_experimental,
            label_control=self.label_control,
            _checked=True,
        )
        # ids and the arm split are inherited, so only per-record invariants can break
        bad = (out.time < 0) | ~np.isfinite(out.time) | (out.time > out.cutoff)
        bad |= out.onset > out.time  # NaN compares False
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise DataError(f"subject {self.ids[k]}: counterfactual doublet ({out.time[k]!r}) violates record invariants")
        return out

    def subset(self, mask: np.ndarray) -> "TrialDataset":
        mask = np.asarray(mask, dtype=bool)
        return TrialDataset(
            ids=[i for i, m in zip(self.ids, mask) if m],
            experimental=self.experimental[mask],
            time=self.time[mask],
            event=self.event[mask],
            onset=self.onset[mask],
            cutoff=self.cutoff[mask],
            label_experimental=self.label_experimental,
            label_control=self.label_control,
        )

    def __len__(self) -> int:
        return len(self.ids)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrialDataset):
            return NotImplemented
        return (
            self.ids == other.ids
            and self.label_experimental == other.label_experimental
            and self.label_control == other.label_control
            and np.array_equal(self.experimental, other.experimental)
            and np.array_equal(self.time, other.time)
            and np.array_equal(self.event, other.event)
            and np.array_equal(self.onset, other.onset, equal_nan=True)
            and np.array_equal(self.cutoff, other.cutoff)
        )

    __hash__ = None

    @property
    def has_maintenance(self) -> np.ndarray:
        return ~np.isnan(self.onset)

    @property
    def n_events(self) -> int:
        return int(self.event.sum())

    @property
    def n_experimental(self) -> int:
        return int(self.experimental.sum())

    @property
    def n_control(self) -> int:
        return len(self) - self.n_experimental

    @property
    def allocation(self) -> float:
        """Fraction of subjects randomized to the experimental arm."""
        return self.n_experimental / len(self)

    @property
    def subjects(self) -> list[SubjectRecord]:
        return [self.record(k) for k in range(len(self))]

    def record(self, k: int) -> SubjectRecord:
        onset = self.onset[k]
        return SubjectRecord(
            id=self.ids[k],
            arm=EXPERIMENTAL if self.experimental[k] else CONTROL,
            doublet=TimeDoublet(float(self.time[k]), int(self.event[k])),
            maintenance_onset=None if np.isnan(onset) else float(onset),
            cutoff_time=float(self.cutoff[k]),
        )

    def doublets(self, experimental: bool | None = None) -> list[TimeDoublet]:
        idx: Sequence[int] = range(len(self))
        if experimental is not None:
            idx = np.flatnonzero(self.experimental == experimental)
        return [TimeDoublet(float(self.time[k]), int(self.event[k])) for k in idx]
