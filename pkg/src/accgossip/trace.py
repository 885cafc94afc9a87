"""Per-run relative-error traces and their cross-trial aggregates.

The error metric everywhere is the squared ratio
||x^k - x*||^2 / ||x^0 - x*||^2 with x* the consensus point mean(x^0) * 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def default_record_every(n: int, m: int) -> int:
    """1 at desk scale (n <= 100), otherwise one epoch of m activations."""
    return 1 if n <= 100 else m


@dataclass(frozen=True)
class Trace:
    """Relative-error history of a single run."""

    method: str
    seed: int
    records: tuple[tuple[int, float], ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        records = tuple((int(k), float(e)) for k, e in self.records)
        object.__setattr__(self, "records", records)
        if not records:
            raise ValueError("trace needs at least one record")
        ks = [k for k, _ in records]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("iterations must be strictly increasing")
        if any(e < 0.0 for _, e in records):
            raise ValueError("relative errors must be nonnegative")

    @property
    def iterations(self) -> np.ndarray:
        return np.array([k for k, _ in self.records], dtype=int)

    @property
    def errors(self) -> np.ndarray:
        return np.array([e for _, e in self.records])

    @property
    def final_error(self) -> float:
        return self.records[-1][1]

    def first_below(self, threshold: float) -> int | None:
        """Earliest recorded iteration with error <= threshold, if any."""
        for k, e in self.records:
            if e <= threshold:
                return k
        return None


@dataclass(frozen=True)
class AggregateTrace:
    """Mean and envelope of relative error across trials on a shared grid."""

    method: str
    iterations: tuple[int, ...]
    mean: tuple[float, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    trials: int

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("aggregate needs at least one trial")
        lengths = {len(self.iterations), len(self.mean), len(self.lo), len(self.hi)}
        if len(lengths) != 1:
            raise ValueError("aggregate fields must share one length")
        for lo, mean, hi in zip(self.lo, self.mean, self.hi):
            if not lo <= mean <= hi:
                raise ValueError("envelope must contain the mean")


def aggregate_traces(traces) -> AggregateTrace:
    """Combine same-method traces recorded on one iteration grid."""
    traces = list(traces)
    if not traces:
        raise ValueError("nothing to aggregate")
    method = traces[0].method
    grid = tuple(traces[0].iterations.tolist())
    for t in traces:
        if t.method != method:
            raise ValueError(f"mixed methods: {t.method!r} vs {method!r}")
        if tuple(t.iterations.tolist()) != grid:
            raise ValueError("traces recorded on different iteration grids")
    errs = np.stack([t.errors for t in traces])
    return AggregateTrace(
        method=method,
        iterations=grid,
        mean=tuple(errs.mean(axis=0).tolist()),
        lo=tuple(errs.min(axis=0).tolist()),
        hi=tuple(errs.max(axis=0).tolist()),
        trials=len(traces),
    )
