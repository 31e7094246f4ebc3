"""Replication-level evaluation of upper prediction limits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError

__all__ = [
    "ReplicationRecord",
    "SUMMARY_COLUMNS",
    "empirical_coverage",
    "interval_score",
    "relative_score",
]

SUMMARY_COLUMNS = (
    "scenario", "method", "n", "alpha", "coverage", "score", "relative_score", "R", "seed",
    "eta_hat", "iterations", "converged", "errors",
)


@dataclass(frozen=True)
class ReplicationRecord:
    q_hat: float
    y_next: float
    q_star: Optional[float] = None


def _arrays(records: Sequence[ReplicationRecord]):
    records = list(records)
    if not records:
        raise InsufficientDataError("at least one replication record is required")
    q = np.array([r.q_hat for r in records], dtype=float)
    y = np.array([r.y_next for r in records], dtype=float)
    return records, q, y


def empirical_coverage(records: Iterable[ReplicationRecord]) -> float:
    """Fraction of replications with ``q_hat >= y_next``."""
    _, q, y = _arrays(records)
    return float(np.mean(q >= y))


def _score(q, y, alpha):
    return float(np.mean(q + (y - q) * (y > q) / alpha))


def interval_score(records: Iterable[ReplicationRecord], alpha) -> float:
    """One-sided interval score ``mean(q + (y - q) 1{y > q} / alpha)``.

    Smaller is better; the true upper-alpha quantile minimizes its
    expectation.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    _, q, y = _arrays(records)
    return _score(q, y, alpha)


def relative_score(records: Iterable[ReplicationRecord], alpha) -> float:
    """Interval score of ``q_hat`` divided by that of ``q_star``."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    records, q, y = _arrays(records)
    if any(r.q_star is None for r in records):
        raise DomainError("relative score needs the true quantile on every record")
    q_star = np.array([r.q_star for r in records], dtype=float)
    return _score(q, y, alpha) / _score(q_star, y, alpha)
