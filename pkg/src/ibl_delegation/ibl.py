"""Instance-based learning memory.

Instances are ``(state, action, outcome)`` triples with observation times.
The value of an action in a state blends the outcomes of all matching
instances, weighted by a Boltzmann distribution over their ACT-R
activations. Only the first observation time and the ``k`` most recent ones
are kept per instance; the older terms of the power-law decay sum are
approximated in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import EmptyActivations, EmptyCandidates, NonMonotoneTime, TimeParadox

# groups at or below this size are blended in plain Python; larger ones use numpy
_SMALL_GROUP = 8
_TINY = np.finfo(float).tiny


@dataclass
class IBLParams:
    """Memory parameters.

    ``tau`` defaults to ``sigma * sqrt(2)``. ``default_utility`` is the value
    of an action with no matching instance.
    """

    d: float = 0.5
    sigma: float = 0.25
    tau: float | None = None
    k: int = 5
    default_utility: float = 0.0

    def __post_init__(self):
        if self.tau is None:
            self.tau = self.sigma * math.sqrt(2)
        if self.d <= 0:
            raise ValueError(f"decay d must be positive, got {self.d}")
        if self.sigma < 0:
            raise ValueError(f"noise sigma must be non-negative, got {self.sigma}")
        if self.tau <= 0:
            raise ValueError(f"temperature tau must be positive, got {self.tau}")
        if self.k < 1:
            raise ValueError(f"k must be at least 1, got {self.k}")
        if self.d == 1:
            raise ValueError("the bounded-storage approximation needs d != 1")


class InstanceKey(NamedTuple):
    state: Hashable
    action: Hashable
    outcome: float


@dataclass
class InstanceRecord:
    key: InstanceKey
    first_time: int
    recent_times: list = field(default_factory=list)
    total_count: int = 0

    @property
    def latest(self) -> int:
        return self.recent_times[-1]


def _decay_sum(record: InstanceRecord, now: float, d: float, k: int) -> float:
    total = 0.0
    for t in record.recent_times:
        total += (now - t) ** -d
    extra = record.total_count - len(record.recent_times)
    if extra > 0:
        # Petrov-style tail for the observations that were dropped
        age_first = now - record.first_time
        age_oldest = now - record.recent_times[0]
        if age_first == age_oldest:
            total += extra * age_first**-d
        else:
            e = 1.0 - d
            total += extra * (age_first**e - age_oldest**e) / (e * (age_first - age_oldest))
    return total


def base_activation(
    record: InstanceRecord, now: float, params: IBLParams, rng: np.random.Generator | None = None
) -> float:
    """Activation of one instance at time ``now``, including logistic noise."""
    if now <= record.latest or now <= record.first_time:
        raise TimeParadox(f"activation read at t={now} but instance observed at t={record.latest}")
    a = math.log(_decay_sum(record, now, params.d, params.k))
    if params.sigma > 0:
        xi = max(rng.random(), _TINY)
        a += params.sigma * math.log((1.0 - xi) / xi)
    return a


def retrieval_probabilities(activations: Sequence[float], tau: float) -> np.ndarray:
    a = np.asarray(activations, dtype=float)
    if a.size == 0:
        raise EmptyActivations("retrieval needs at least one activation")
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    z = np.exp((a - a.max()) / tau)
    return z / z.sum()


class _Group:
    """Records sharing a (state, action) pair, with numpy mirrors for large groups."""

    __slots__ = ("records", "latest", "rows", "k", "_n", "_recent", "_first", "_oldest",
                 "_extra", "_inv_span", "_outcome", "_degenerate")

    def __init__(self, k: int):
        self.records: list[InstanceRecord] = []
        self.latest = -math.inf
        self.rows: dict[InstanceKey, int] = {}
        self.k = k
        self._recent = None

    def add(self, rec: InstanceRecord) -> None:
        self.rows[rec.key] = len(self.records)
        self.records.append(rec)
        self.touch(rec)

    def touch(self, rec: InstanceRecord) -> None:
        self.latest = max(self.latest, rec.latest)
        if self._recent is not None:
            self._write_row(rec)

    def _write_row(self, rec: InstanceRecord) -> None:
        i = self.rows[rec.key]
        if i >= self._recent.shape[0]:
            self._grow()
        self._n = max(self._n, i + 1)
        k = self.k
        row = self._recent[i]
        row[:] = -np.inf
        row[k - len(rec.recent_times):] = rec.recent_times
        self._first[i] = rec.first_time
        self._oldest[i] = rec.recent_times[0]
        extra = rec.total_count - len(rec.recent_times)
        self._extra[i] = extra
        self._outcome[i] = rec.key.outcome
        span = rec.recent_times[0] - rec.first_time
        if extra > 0 and span == 0:
            self._degenerate = True
        self._inv_span[i] = 1.0 / span if span > 0 else 0.0

    def _grow(self) -> None:
        cap = max(16, 2 * self._recent.shape[0])
        n = self._recent.shape[0]
        recent = np.full((cap, self.k), -np.inf)
        recent[:n] = self._recent
        self._recent = recent
        for name in ("_first", "_oldest", "_extra", "_inv_span", "_outcome"):
            arr = np.zeros(cap)
            arr[:n] = getattr(self, name)
            setattr(self, name, arr)

    def _build(self) -> None:
        cap = max(16, len(self.records))
        self._recent = np.full((cap, self.k), -np.inf)
        self._first = np.zeros(cap)
        self._oldest = np.zeros(cap)
        self._extra = np.zeros(cap)
        self._inv_span = np.zeros(cap)
        self._outcome = np.zeros(cap)
        self._n = 0
        self._degenerate = False
        for rec in self.records:
            self._write_row(rec)

    def activations(self, now: float, d: float) -> tuple[np.ndarray, np.ndarray] | None:
        """Noise-free activations and outcomes, or None if numpy cannot be used."""
        if self._recent is None:
            self._build()
        if self._degenerate:
            return None
        n = self._n
        s = ((now - self._recent[:n]) ** -d).sum(axis=1)
        e = 1.0 - d
        s += self._extra[:n] * self._inv_span[:n] / e * (
            (now - self._first[:n]) ** e - (now - self._oldest[:n]) ** e
        )
        return np.log(s), self._outcome[:n]


class IBLMemory:
    """Instance memory with an integer event clock.

    Single writer: :meth:`record` and :meth:`commit` mutate in place, reads
    (:meth:`blend`, :meth:`choose`) never do.
    """

    def __init__(self, params: IBLParams | None = None, clock: int = 0):
        self.params = params or IBLParams()
        self.clock = clock
        self.instances: dict[InstanceKey, InstanceRecord] = {}
        self._groups: dict[tuple, _Group] = {}

    def __len__(self):
        return len(self.instances)

    def __eq__(self, other):
        if not isinstance(other, IBLMemory):
            return NotImplemented
        return (
            self.params == other.params
            and self.clock == other.clock
            and self.instances == other.instances
        )

    def __getstate__(self):
        return {"params": self.params, "clock": self.clock, "records": list(self.instances.values())}

    def __setstate__(self, state):
        self.__init__(state["params"], state["clock"])
        for rec in state["records"]:
            self.add_record(rec)

    def tick(self) -> int:
        self.clock += 1
        return self.clock

    def matching(self, state, action) -> list[InstanceRecord]:
        group = self._groups.get((state, action))
        return list(group.records) if group else []

    def add_record(self, rec: InstanceRecord) -> None:
        """Insert a fully formed record, e.g. one loaded from a snapshot."""
        if rec.key in self.instances:
            raise ValueError(f"duplicate instance {rec.key}")
        self.instances[rec.key] = rec
        group_key = (rec.key.state, rec.key.action)
        group = self._groups.get(group_key)
        if group is None:
            group = self._groups[group_key] = _Group(self.params.k)
        group.add(rec)

    def record(self, key: InstanceKey, time: int) -> InstanceRecord:
        key = InstanceKey(*key)
        rec = self.instances.get(key)
        if rec is None:
            rec = InstanceRecord(key, time, [time], 1)
            self.add_record(rec)
            return rec
        if time < rec.latest:
            raise NonMonotoneTime(f"time {time} precedes observation at {rec.latest} of {key}")
        rec.recent_times.append(time)
        if len(rec.recent_times) > self.params.k:
            del rec.recent_times[0]
        rec.total_count += 1
        self._groups[(key.state, key.action)].touch(rec)
        return rec

    def commit(self, steps: Iterable[tuple[Any, Any, int]], outcome: float) -> None:
        """Credit every ``(state, action, time)`` step with the same outcome."""
        outcome = float(outcome)
        for state, action, time in steps:
            self.record(InstanceKey(state, action, outcome), time)

    def blend(self, state, action, now: int, rng: np.random.Generator | None = None) -> float:
        """Blended value of ``action`` in ``state``."""
        group = self._groups.get((state, action))
        if group is None:
            return self.params.default_utility
        if now <= group.latest:
            raise TimeParadox(
                f"blend at t={now} but {(state, action)} was observed at t={group.latest}"
            )
        recs = group.records
        if len(recs) == 1:
            return recs[0].key.outcome
        p = self.params
        vectorized = group.activations(now, p.d) if len(recs) > _SMALL_GROUP else None
        if vectorized is None:
            acts = [math.log(_decay_sum(r, now, p.d, p.k)) for r in recs]
            if p.sigma > 0:
                xis = rng.random(len(recs))
                for i, xi in enumerate(xis):
                    xi = max(xi, _TINY)
                    acts[i] += p.sigma * math.log((1.0 - xi) / xi)
            top = max(acts)
            weights = [math.exp((a - top) / p.tau) for a in acts]
            total = sum(weights)
            return sum(w * r.key.outcome for w, r in zip(weights, recs)) / total
        acts, outcomes = vectorized
        if p.sigma > 0:
            xi = np.maximum(rng.random(acts.size), _TINY)
            acts = acts + p.sigma * np.log((1.0 - xi) / xi)
        z = np.exp((acts - acts.max()) / p.tau)
        return float(z @ outcomes / z.sum())

    def choose(self, state, candidates: Sequence, now: int, rng: np.random.Generator | None = None):
        """Argmax of :meth:`blend` over ``candidates``; ties broken uniformly."""
        if len(candidates) == 0:
            raise EmptyCandidates("choose needs at least one candidate")
        if len(candidates) == 1:
            return candidates[0]
        values = [self.blend(state, c, now, rng) for c in candidates]
        best = max(values)
        tied = [c for c, v in zip(candidates, values) if v == best]
        if len(tied) == 1:
            return tied[0]
        return tied[int(rng.integers(len(tied)))]

    def snapshot(self) -> list[tuple]:
        """Order-independent view of every record, for equality checks."""
        return sorted(
            (repr(r.key.state), repr(r.key.action), r.key.outcome, r.first_time,
             tuple(r.recent_times), r.total_count)
            for r in self.instances.values()
        )
