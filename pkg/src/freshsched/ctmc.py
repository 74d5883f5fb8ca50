"""Truncated continuous-time Markov chain for the single-threshold policies.

States are (n_q, n_u, z) with z = 0 empty/idle, z = 1 serving the query queue,
z = 2 serving the update queue. Transitions are generated through the shared
policy decision function, so the chain and the simulator cannot drift apart.
Arrivals that would cross the truncation boundary are dropped (reflection).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import ModelParams, QueryK, Unbounded, UpdateK
from .policy import SchedulerState, ServerPosition, Trigger, decide

Z_IDLE, Z_QUERY, Z_UPDATE = 0, 1, 2

TAIL_TOLERANCE = 1e-8
RESIDUAL_TOLERANCE = 1e-10
MAX_TRUNCATION = 4096


class TruncationTooSmall(ValueError):
    """Truncation bounds too tight for the threshold region (or the tail)."""


class NoConvergence(RuntimeError):
    """The stationary solve did not reach the residual tolerance."""


class Reducible(RuntimeError):
    """The represented state space is not a single recurrent class."""


def _finite_k(policy) -> int:
    if isinstance(policy, (QueryK, UpdateK)) and not isinstance(policy.k, Unbounded):
        return policy.k
    raise ValueError(f"CTMC supports QueryK/UpdateK with finite k, got {policy!r}")


@dataclass(frozen=True)
class CtmcSpec:
    params: ModelParams
    policy: "QueryK | UpdateK"
    c_q: int
    c_u: int

    def __post_init__(self):
        k = _finite_k(self.policy)
        bound = self.c_q if isinstance(self.policy, QueryK) else self.c_u
        if bound < k + 2:
            raise TruncationTooSmall(
                f"truncation {bound} below k+2 = {k + 2} for {self.policy!r}")
        if self.c_q < 1 or self.c_u < 1:
            raise TruncationTooSmall("truncation bounds must be >= 1")


_POSITION_TO_Z = {
    ServerPosition.IDLE: Z_IDLE,
    ServerPosition.SERVING_QUERY: Z_QUERY,
    ServerPosition.SERVING_UPDATE: Z_UPDATE,
}
_Z_TO_POSITION = {z: pos for pos, z in _POSITION_TO_Z.items()}


@dataclass
class CtmcRates:
    """Reachable states and their transition rates."""

    spec: "CtmcSpec | None"
    states: List[Tuple[int, int, int]]
    index: Dict[Tuple[int, int, int], int]
    transitions: List[Tuple[int, int, float]]


def _emptying(policy, position: ServerPosition) -> bool:
    # under a single-threshold policy the prioritized queue is always being
    # emptied while served, so the flag carries no extra state
    if isinstance(policy, QueryK):
        return position is ServerPosition.SERVING_QUERY
    return position is ServerPosition.SERVING_UPDATE


def build_ctmc(spec: CtmcSpec) -> CtmcRates:
    params, policy = spec.params, spec.policy
    start = (0, 0, Z_IDLE)
    index = {start: 0}
    states = [start]
    transitions: List[Tuple[int, int, float]] = []
    frontier = deque([start])
    while frontier:
        state = frontier.popleft()
        i, j, z = state
        si = index[state]
        events = []
        if i < spec.c_q:
            events.append((Trigger.ARRIVAL_QUERY, params.lambda_q))
        if j < spec.c_u:
            events.append((Trigger.ARRIVAL_UPDATE, params.lambda_u))
        if z == Z_QUERY:
            events.append((Trigger.DEPARTURE_QUERY, params.mu_q))
        elif z == Z_UPDATE:
            events.append((Trigger.DEPARTURE_UPDATE, params.mu_u))
        position = _Z_TO_POSITION[z]
        sched = SchedulerState(i, j, position, _emptying(policy, position))
        for trigger, rate in events:
            post = decide(policy, sched, trigger)
            target = (post.n_q, post.n_u, _POSITION_TO_Z[post.position])
            ti = index.get(target)
            if ti is None:
                ti = len(states)
                index[target] = ti
                states.append(target)
                frontier.append(target)
            transitions.append((si, ti, rate))
    return CtmcRates(spec, states, index, transitions)


@dataclass
class CtmcSolution:
    rates: CtmcRates
    probabilities: np.ndarray
    residual: float
    tail_mass: float

    def probability(self, state: Tuple[int, int, int]) -> float:
        idx = self.rates.index.get(state)
        return 0.0 if idx is None else float(self.probabilities[idx])


def _check_recurrent(rates: CtmcRates) -> None:
    # every state must be able to reach the empty state, otherwise the
    # truncated chain has a transient piece the solve cannot normalize over
    n = len(rates.states)
    reverse: List[List[int]] = [[] for _ in range(n)]
    for si, ti, _ in rates.transitions:
        reverse[ti].append(si)
    target = rates.index.get((0, 0, Z_IDLE), 0)
    seen = [False] * n
    seen[target] = True
    stack = [target]
    while stack:
        node = stack.pop()
        for prev in reverse[node]:
            if not seen[prev]:
                seen[prev] = True
                stack.append(prev)
    if not all(seen):
        raise Reducible("states exist that cannot reach the empty state")


def solve_stationary(rates: CtmcRates) -> CtmcSolution:
    """Solve pi Q = 0 with sum(pi) = 1 by sparse direct factorization."""
    _check_recurrent(rates)
    n = len(rates.states)
    rows, cols, vals = [], [], []
    for si, ti, rate in rates.transitions:
        rows.append(ti)
        cols.append(si)
        vals.append(rate)
        rows.append(si)
        cols.append(si)
        vals.append(-rate)
    qt = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    norm_row = rates.index.get((0, 0, Z_IDLE), 0)
    keep = qt.tocoo()
    mask = keep.row != norm_row
    rows2 = np.concatenate([keep.row[mask], np.full(n, norm_row)])
    cols2 = np.concatenate([keep.col[mask], np.arange(n)])
    vals2 = np.concatenate([keep.data[mask], np.ones(n)])
    a = sp.coo_matrix((vals2, (rows2, cols2)), shape=(n, n)).tocsc()
    b = np.zeros(n)
    b[norm_row] = 1.0

    pi = spla.spsolve(a, b)
    if not np.all(np.isfinite(pi)):
        raise NoConvergence("stationary solve produced non-finite probabilities")
    residual = float(np.max(np.abs(qt @ pi)))
    if residual > RESIDUAL_TOLERANCE:
        raise NoConvergence(f"balance residual {residual:g} above {RESIDUAL_TOLERANCE:g}")
    if np.min(pi) < -1e-9:
        raise NoConvergence(f"negative stationary probability {np.min(pi):g}")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()

    tail = 0.0
    spec = rates.spec
    if spec is not None:
        for (i, j, _z), p in zip(rates.states, pi):
            if i >= spec.c_q - 1 or j >= spec.c_u - 1:
                tail += p
    return CtmcSolution(rates, pi, residual, float(tail))


def expected_queue_lengths(solution: CtmcSolution) -> Tuple[float, float]:
    """Direct first moments (E[N_q], E[N_u]) of the stationary distribution."""
    i_arr = np.fromiter((s[0] for s in solution.rates.states), dtype=float)
    j_arr = np.fromiter((s[1] for s in solution.rates.states), dtype=float)
    pi = solution.probabilities
    return float(i_arr @ pi), float(j_arr @ pi)
