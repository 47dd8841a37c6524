"""Discrete Bernoulli edge diffusion: schedules, forward sampling, posteriors.

The forward process resamples each edge entry independently at step t with
rate beta_t; a resampled entry becomes 1 with probability p. With p = 0 the
process is pure edge removal and the t-step marginal of an original edge is
simply alpha_bar_t. Everything here is closed form; sampling routines draw
from those forms with an explicit numpy Generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ALPHA_BAR_FLOOR = 1e-4


@dataclass(frozen=True)
class Schedule:
    """Diffusion schedule over steps 1..T.

    beta[t-1], alpha[t-1], alpha_bar[t-1] hold the step-t values; the
    convenience accessors below take 1-based step indices and treat t = 0 as
    the identity (alpha_bar_0 = 1).
    """

    beta: np.ndarray
    p: float = 0.0

    def __post_init__(self) -> None:
        beta = np.ascontiguousarray(self.beta, dtype=np.float64)
        if beta.ndim != 1 or beta.size < 1:
            raise ValueError("beta must be a non-empty 1-d array")
        if not ((beta > 0.0) & (beta <= 1.0)).all():
            raise ValueError("every beta_t must lie in (0, 1]")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        alpha = 1.0 - beta
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        alpha_bar = np.cumprod(alpha)
        alpha_bar.setflags(write=False)
        object.__setattr__(self, "alpha_bar", alpha_bar)

    @property
    def T(self) -> int:
        return int(self.beta.size)

    def beta_at(self, t: int) -> float:
        self._check_step(t)
        return float(self.beta[t - 1])

    def alpha_bar_at(self, t: int) -> float:
        """Cumulative keep probability after t steps; t = 0 returns 1."""
        if t == 0:
            return 1.0
        self._check_step(t)
        return float(self.alpha_bar[t - 1])

    def _check_step(self, t: int) -> None:
        if not 1 <= t <= self.T:
            raise ValueError(f"step t={t} outside [1, {self.T}]")


def build_schedule(T: int, p: float = 0.0) -> Schedule:
    """Linear-decay schedule: alpha_bar_t = 1 - (1 - floor) * t / T.

    alpha_bar falls from near 1 at t = 1 to exactly the floor (1e-4) at
    t = T, so with p = 0 the graph is empty at time T w.h.p. beta is
    back-computed from consecutive alpha_bar ratios.
    """
    if T < 1:
        raise ValueError(f"diffusion horizon T must be >= 1, got {T}")
    t = np.arange(1, T + 1, dtype=np.float64)
    alpha_bar = 1.0 - (1.0 - ALPHA_BAR_FLOOR) * t / T
    prev = np.concatenate(([1.0], alpha_bar[:-1]))
    beta = 1.0 - alpha_bar / prev
    return Schedule(beta=beta, p=p)


def single_step_edge_prob(a_prev: int, t: int, sched: Schedule) -> float:
    """P(a_t = 1 | a_{t-1}) = (1 - beta_t) * a_prev + beta_t * p."""
    beta = sched.beta_at(t)
    return (1.0 - beta) * a_prev + beta * sched.p


def marginal_edge_prob(a0: int, t: int, sched: Schedule) -> float:
    """P(a_t = 1 | a_0) = alpha_bar_t * a0 + (1 - alpha_bar_t) * p."""
    abar = sched.alpha_bar_at(t)
    return abar * a0 + (1.0 - abar) * sched.p


def posterior_edge_prob(a_t: int, a0: int, t: int, sched: Schedule) -> float:
    """P(a_{t-1} = 1 | a_t, a_0) by Bayes over the single-step and marginal forms."""
    sched._check_step(t)
    evidence = a_t * marginal_edge_prob(a0, t, sched) + (1 - a_t) * (
        1.0 - marginal_edge_prob(a0, t, sched)
    )
    if evidence <= 0.0:
        raise ValueError(
            f"impossible evidence: a_t={a_t}, a0={a0} has zero probability "
            f"at t={t} (p={sched.p})"
        )
    prev_one = marginal_edge_prob(a0, t - 1, sched)
    step = single_step_edge_prob(1, t, sched)
    lik = a_t * step + (1 - a_t) * (1.0 - step)
    return lik * prev_one / evidence


def forward_step_sample(
    A_prev: np.ndarray, t: int, sched: Schedule, rng: np.random.Generator
) -> np.ndarray:
    """One forward step: resample each edge entry with rate beta_t."""
    return _sample_symmetric(
        (1.0 - sched.beta_at(t)) * A_prev + sched.beta_at(t) * sched.p, rng
    )


def forward_marginal_sample(
    A0: np.ndarray, t: int, sched: Schedule, rng: np.random.Generator
) -> np.ndarray:
    """Sample A_t directly from A_0 via the t-step marginal."""
    abar = sched.alpha_bar_at(t)
    return _sample_symmetric(abar * A0 + (1.0 - abar) * sched.p, rng)


def _sample_symmetric(prob: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Draw independent upper-triangle Bernoullis and mirror them."""
    n = prob.shape[0]
    upper = np.triu(rng.random((n, n)) < prob, k=1)
    out = upper.astype(np.uint8)
    return out + out.T


def state_change_prob(
    d0: np.ndarray | int, dt: np.ndarray | int, t: int, sched: Schedule
) -> np.ndarray:
    """Probability that a node's degree changed between steps t-1 and t.

    Closed form given the clean and current degrees:
        1 - (1 - beta_t * abar_{t-1} / (1 - abar_{t-1}))^(d0 - dt)
    At t = 1 the ratio diverges, so the probability collapses to the
    indicator of a remaining degree deficit. The base is clamped to [0, 1];
    the ratio can exceed 1 at small t, where any deficit certainly implies a
    change this step.
    """
    sched._check_step(t)
    d0 = np.asarray(d0, dtype=np.int64)
    dt = np.asarray(dt, dtype=np.int64)
    if (dt > d0).any():
        raise ValueError("current degree exceeds reference degree (dt > d0)")
    deficit = d0 - dt
    if t == 1:
        return (deficit > 0).astype(np.float64)
    abar_prev = sched.alpha_bar_at(t - 1)
    ratio = sched.beta_at(t) * abar_prev / (1.0 - abar_prev)
    base = min(max(1.0 - ratio, 0.0), 1.0)
    return np.clip(1.0 - base ** deficit.astype(np.float64), 0.0, 1.0)


def sample_state_vector(
    d0: np.ndarray,
    dt: np.ndarray,
    t: int,
    sched: Schedule,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw the binary degree-change indicator per node from its closed form."""
    prob = state_change_prob(d0, dt, t, sched)
    return (rng.random(prob.shape) < prob).astype(np.uint8)


def compute_state_vector(A_prev: np.ndarray, A_next: np.ndarray) -> np.ndarray:
    """1 where the row sums of the two adjacencies differ, else 0."""
    if A_prev.shape != A_next.shape:
        raise ValueError(f"shape mismatch: {A_prev.shape} vs {A_next.shape}")
    d_prev = np.asarray(A_prev, dtype=np.int64).sum(axis=1)
    d_next = np.asarray(A_next, dtype=np.int64).sum(axis=1)
    return (d_prev != d_next).astype(np.uint8)
