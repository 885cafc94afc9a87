"""Matrix-form solvers: randomized Kaczmarz and its accelerated variant.

The accelerated step keeps two vectors (x, v) and mixes them through a
parameter schedule: either the recurrence schedule, whose gamma_k solves a
quadratic seeded at gamma_{-1} = 0, or the fixed-constant schedule built
from (lambda_min_plus(W), nu).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import SpectralSummary, summarize
from .topology import IncidenceSystem
from .trace import Trace, default_record_every

METHOD_RK = "rk"
METHOD_ACCRK_OPT1 = "accrk-opt1"
METHOD_ACCRK_OPT2 = "accrk-opt2"
SOLVE_METHODS = (METHOD_RK, METHOD_ACCRK_OPT1, METHOD_ACCRK_OPT2)


@dataclass
class SolverState:
    x: np.ndarray
    v: np.ndarray
    k: int = 0

    @classmethod
    def start(cls, x0) -> "SolverState":
        # v starts as a copy of x, never an alias
        x = np.array(x0, dtype=float)
        return cls(x=x, v=x.copy(), k=0)


class Option1Schedule:
    """Recurrence schedule.

    gamma_k is the largest root of g^2 + g (lam g_prev^2 - 1)/m - g_prev^2,
    with gamma_{-1} = 0; alpha_k = (m - gamma_k lam) / (gamma_k (m^2 - lam))
    and beta_k = 1 - gamma_k lam / m. The gamma history is cached, so one
    schedule instance can serve many runs of any length.
    """

    kind = "option1"

    def __init__(self, m: int, lam: float):
        if m < 1:
            raise ValueError("m must be at least 1")
        if lam <= 0.0:
            raise ValueError("lam must be positive")
        self.m = int(m)
        self.lam = float(lam)
        self._gammas: list[float] = []

    def _next_gamma(self, prev: float) -> float:
        m = self.m
        b = (self.lam * prev * prev - 1.0) / m
        c = -prev * prev
        if c == 0.0:
            # start-up step: roots are 0 and -b, so gamma_0 = 1/m exactly
            return max(0.0, -b)
        disc = b * b - 4.0 * c
        sq = math.sqrt(disc)
        # sign-aware largest root; the naive formula cancels once gamma
        # approaches its fixed point 1/sqrt(lam)
        if b >= 0.0:
            return (2.0 * c) / (-(b + sq))
        return 0.5 * (sq - b)

    def gamma(self, k: int) -> float:
        if k < 0:
            raise ValueError("k must be nonnegative")
        while len(self._gammas) <= k:
            prev = self._gammas[-1] if self._gammas else 0.0
            self._gammas.append(self._next_gamma(prev))
        return self._gammas[k]

    def params(self, k: int) -> tuple[float, float, float]:
        g = self.gamma(k)
        m = self.m
        denom = m * m - self.lam
        if denom <= 0.0:
            # m=1 with lam=1: the alpha formula is 0/0 (gamma is still defined)
            raise ValueError(f"alpha undefined for m^2 - lam = {denom!r}")
        alpha = (m - g * self.lam) / (g * denom)
        beta = 1.0 - g * self.lam / m
        return alpha, beta, g


class Option2Schedule:
    """Fixed-constant schedule from lambda_min_plus(W) and nu."""

    kind = "option2"

    def __init__(self, lam_w: float, nu: float):
        if lam_w <= 0.0:
            raise ValueError("lam_w must be positive")
        if nu <= 0.0:
            raise ValueError("nu must be positive")
        self.lam_w = float(lam_w)
        self.nu = float(nu)
        self.gamma = math.sqrt(1.0 / (lam_w * nu))
        # lam_w * nu >= 1 up to rounding; keep beta in [0, 1)
        self.beta = max(0.0, 1.0 - math.sqrt(lam_w / nu))
        self.alpha = 1.0 / (1.0 + self.gamma * self.nu)

    def params(self, k: int) -> tuple[float, float, float]:
        return self.alpha, self.beta, self.gamma


def option1_schedule(m: int, lam: float) -> Option1Schedule:
    return Option1Schedule(m, lam)


def option2_schedule(summary: SpectralSummary) -> Option2Schedule:
    return Option2Schedule(summary.lambda_min_plus_w, summary.nu)


def rk_step(system: IncidenceSystem, x, row: int) -> np.ndarray:
    """Project x onto the hyperplane of one row.

    On the incidence system this sets the row's two coordinates to their
    mean and leaves the rest alone.
    """
    a_row = system.a[row]
    x = np.asarray(x, dtype=float)
    resid = a_row @ x - system.b[row]
    return x - (resid / (a_row @ a_row)) * a_row


def accrk_step(system: IncidenceSystem, state: SolverState, schedule,
               row: int) -> SolverState:
    """One accelerated step: y-mix, project, momentum update."""
    alpha, beta, gamma = schedule.params(state.k)
    y = alpha * state.v + (1.0 - alpha) * state.x
    a_row = system.a[row]
    t = ((a_row @ y - system.b[row]) / (a_row @ a_row)) * a_row
    return SolverState(
        x=y - t,
        v=beta * state.v + (1.0 - beta) * y - gamma * t,
        k=state.k + 1,
    )


def solve(system: IncidenceSystem, x0, method: str, iterations: int, seed,
          record_every: int | None = None, schedule=None, lam: float | None = None,
          meta: dict | None = None, seed_label: int | None = None) -> Trace:
    """Run a matrix-form method with uniform row sampling.

    Records the squared relative error against x* = mean(x0) * 1 at k = 0,
    every record_every steps, and at the final iteration. For accelerated
    methods a schedule may be passed in; otherwise one is built from the
    system's spectral summary (lam selects the recurrence-schedule lambda,
    defaulting to lambda_min_plus(A^T A)).
    """
    if method not in SOLVE_METHODS:
        raise ValueError(f"unknown method {method!r}")
    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    m, n = system.a.shape
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ValueError(f"x0 must have length {n}")
    if record_every is None:
        record_every = default_record_every(n, m)
    if record_every < 1:
        raise ValueError("record_every must be positive")

    if schedule is None and method != METHOD_RK:
        summ = summarize(system)
        if method == METHOD_ACCRK_OPT1:
            schedule = option1_schedule(m, summ.lambda_min_plus_ata if lam is None else lam)
        else:
            schedule = option2_schedule(summ)

    rng = np.random.default_rng(seed)
    rows = rng.integers(0, m, size=iterations)
    x_star = np.full(n, x0.mean())
    diff0 = x0 - x_star
    denom = float(diff0 @ diff0)

    def rel_err(x: np.ndarray) -> float:
        if denom == 0.0:
            return 0.0
        d = x - x_star
        return float(d @ d) / denom

    records = [(0, 1.0 if denom > 0.0 else 0.0)]
    state = SolverState.start(x0)
    for idx in range(iterations):
        row = int(rows[idx])
        if method == METHOD_RK:
            state = SolverState(x=rk_step(system, state.x, row), v=state.v, k=state.k + 1)
        else:
            state = accrk_step(system, state, schedule, row)
        k = state.k
        if k % record_every == 0 or k == iterations:
            records.append((k, rel_err(state.x)))

    info = {"n": n, "m": m, "method": method, "record_every": record_every}
    if schedule is not None:
        info["schedule"] = schedule.kind
    if meta:
        info.update(meta)
    label = seed_label if seed_label is not None else _seed_label(seed)
    return Trace(method=method, seed=label, records=tuple(records), meta=info)


def _seed_label(seed) -> int:
    """Best-effort integer label for the trace's seed column."""
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    entropy = getattr(seed, "entropy", None)
    if isinstance(entropy, (int, np.integer)):
        return int(entropy)
    return -1
