"""Shared parameter, policy, job, and metric types.

Rates are plain floats; loads are derived on access and never stored, so
there is a single source of truth for each quantity.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class NonPositiveRate(ValueError):
    """A rate was zero or negative."""


class NonFiniteRate(ValueError):
    """A rate was NaN or infinite."""


class Unstable(ValueError):
    """Total load is at or above 1, so no steady state exists."""

    def __init__(self, rho: float):
        super().__init__(f"total load rho = {rho:g} >= 1; system is unstable")
        self.rho = rho


@dataclass(frozen=True)
class ModelParams:
    """Arrival and service rates for the update and query classes."""

    lambda_u: float
    mu_u: float
    lambda_q: float
    mu_q: float

    @property
    def rho_u(self) -> float:
        return self.lambda_u / self.mu_u

    @property
    def rho_q(self) -> float:
        return self.lambda_q / self.mu_q

    @property
    def rho(self) -> float:
        return self.rho_u + self.rho_q


def validate_params(lambda_u: float, mu_u: float, lambda_q: float, mu_q: float) -> ModelParams:
    """Check the four rates and return an immutable parameter set."""
    for name, value in (("lambda_u", lambda_u), ("mu_u", mu_u),
                        ("lambda_q", lambda_q), ("mu_q", mu_q)):
        if not math.isfinite(value):
            raise NonFiniteRate(f"{name} = {value!r} is not finite")
        if value <= 0:
            raise NonPositiveRate(f"{name} = {value!r} must be strictly positive")
    return ModelParams(float(lambda_u), float(mu_u), float(lambda_q), float(mu_q))


def stability_guard(params: ModelParams) -> None:
    """Raise Unstable unless the total load is below 1."""
    if params.rho >= 1.0:
        raise Unstable(params.rho)


class Unbounded:
    """Explicit infinite-threshold marker (never compared numerically)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "inf"


UNBOUNDED = Unbounded()

Threshold = "int | Unbounded"


def _check_threshold(value, name: str) -> None:
    if isinstance(value, Unbounded):
        return
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValueError(f"threshold {name} must be a positive integer or UNBOUNDED, got {value!r}")
    if value < 1:
        raise ValueError(f"threshold {name} must be >= 1, got {value}")


@dataclass(frozen=True)
class Fcfs:
    """Single arrival-ordered line across both classes, no preemption."""


@dataclass(frozen=True)
class QueryK:
    """Switch to queries when their count reaches k (or updates run out), then empty them."""

    k: "int | Unbounded"

    def __post_init__(self):
        _check_threshold(self.k, "k")


@dataclass(frozen=True)
class UpdateK:
    """Mirror image of QueryK with the threshold on the update queue."""

    k: "int | Unbounded"

    def __post_init__(self):
        _check_threshold(self.k, "k")


@dataclass(frozen=True)
class JointMN:
    """Threshold m on the update queue and n on the query queue, preempt-resume both ways."""

    m: "int | Unbounded"
    n: "int | Unbounded"

    def __post_init__(self):
        _check_threshold(self.m, "m")
        _check_threshold(self.n, "n")
        if isinstance(self.m, Unbounded) and isinstance(self.n, Unbounded):
            raise ValueError("JointMN with both thresholds unbounded never switches")


PolicySpec = "Fcfs | QueryK | UpdateK | JointMN"


class JobClass(enum.Enum):
    UPDATE = "update"
    QUERY = "query"


@dataclass
class JobRecord:
    """One job's lifetime: arrival, service requirement, and (once done) completion."""

    job_class: JobClass
    arrival_time: float
    service_requirement: float
    completion_time: "float | None" = None

    def __post_init__(self):
        if self.service_requirement <= 0:
            raise ValueError("service_requirement must be positive")
        if (self.completion_time is not None
                and self.completion_time < self.arrival_time + self.service_requirement):
            raise ValueError("completion_time earlier than arrival + service requirement")

    @property
    def system_time(self) -> "float | None":
        if self.completion_time is None:
            return None
        return self.completion_time - self.arrival_time


@dataclass(frozen=True)
class ReplicationMetrics:
    """Per-run estimates; None marks a metric with no samples in the window."""

    mean_response_time: "float | None"
    mean_paoi: "float | None"
    mean_aoi: float
    mean_nq: float
    mean_nu: float
    mean_update_system_time: "float | None"
    completed_queries: int
    completed_updates: int
    horizon: float
