"""Noise mechanisms, sensitivity bounds and a composition accountant.

Neighbouring datasets differ by the addition or removal of one record. Under
that notion a record changes exactly one cell of a disjoint histogram, so a
single histogram has l1 sensitivity 1, and a stack of M histograms over the
same rows has l2 sensitivity sqrt(M).
"""
from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

HISTOGRAM_L1 = 1.0


def stacked_histogram_l2(m: int) -> float:
    """l2 sensitivity of ``m`` count tables computed over the same rows."""
    return math.sqrt(m)


class PrivacyError(ValueError):
    pass


class BudgetExceeded(PrivacyError):
    pass


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise PrivacyError(f"epsilon must be positive and finite, got {self.epsilon}")
        if not 0 <= self.delta <= 1:
            raise PrivacyError(f"delta must lie in [0, 1], got {self.delta}")

    def as_dict(self) -> dict:
        return {"epsilon": self.epsilon, "delta": self.delta}


@dataclass(frozen=True)
class SensitivityBound:
    l1: float | None = None
    l2: float | None = None

    def __post_init__(self):
        if self.l1 is None and self.l2 is None:
            raise PrivacyError("a sensitivity bound needs an l1 or l2 value")
        for v in (self.l1, self.l2):
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise PrivacyError(f"sensitivity must be finite and nonnegative, got {v}")


@dataclass(frozen=True)
class SeededRng:
    """A reproducible random stream named by ``(master_seed, stream_id)``.

    ``generator()`` always returns a fresh generator positioned at the start
    of the stream, so the same SeededRng yields the same draws every time.
    Use ``child`` to derive independent sub-streams.
    """

    master_seed: int
    stream_id: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        sid = self.stream_id
        sid = (sid,) if isinstance(sid, int) else tuple(int(s) for s in sid)
        if any(s < 0 for s in sid):
            raise ValueError("stream ids must be nonnegative")
        object.__setattr__(self, "stream_id", sid)

    def child(self, *ids: int) -> "SeededRng":
        return SeededRng(self.master_seed, self.stream_id + tuple(ids))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.Philox(seq))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected SeededRng or numpy Generator, got {type(rng).__name__}")


def laplace_scale(l1: float, epsilon: float) -> float:
    return l1 / epsilon


def laplace_density(x, loc, scale: float):
    x = np.asarray(x, dtype=float)
    return np.exp(-np.abs(x - loc) / scale) / (2 * scale)


def laplace_mechanism(values, sens: SensitivityBound, epsilon: float, rng) -> np.ndarray:
    if sens.l1 is None:
        raise PrivacyError("Laplace mechanism requires an l1 sensitivity")
    if not epsilon > 0:
        raise PrivacyError(f"epsilon must be positive, got {epsilon}")
    values = np.asarray(values, dtype=float)
    gen = as_generator(rng)
    return values + gen.laplace(0.0, laplace_scale(sens.l1, epsilon), size=values.shape)


def gaussian_sigma(l2: float, params: PrivacyParams) -> float:
    if params.delta <= 0:
        raise PrivacyError("Gaussian mechanism requires δ > 0")
    return l2 / params.epsilon * math.sqrt(2 * math.log(1.25 / params.delta))


def gaussian_mechanism(values, sens: SensitivityBound, params: PrivacyParams, rng) -> np.ndarray:
    if sens.l2 is None:
        raise PrivacyError("Gaussian mechanism requires an l2 sensitivity")
    sigma = gaussian_sigma(sens.l2, params)
    if params.epsilon > 1:
        log.warning(
            "Gaussian mechanism calibrated with epsilon=%g > 1; the classical constant "
            "is only proven for epsilon <= 1",
            params.epsilon,
        )
    values = np.asarray(values, dtype=float)
    gen = as_generator(rng)
    return values + gen.normal(0.0, sigma, size=values.shape)


def exponential_probabilities(quality, sens: SensitivityBound, epsilon: float) -> np.ndarray:
    if sens.l1 is None:
        raise PrivacyError("exponential mechanism requires an l1 sensitivity")
    if not epsilon > 0:
        raise PrivacyError(f"epsilon must be positive, got {epsilon}")
    quality = np.asarray(quality, dtype=float)
    if quality.size == 0:
        raise PrivacyError("exponential mechanism needs at least one candidate")
    logits = epsilon * quality / (2 * sens.l1) if sens.l1 > 0 else np.zeros_like(quality)
    logits = logits - logits.max()
    w = np.exp(logits)
    return w / w.sum()


def exponential_mechanism(candidates, quality, sens: SensitivityBound, epsilon: float, rng):
    candidates = list(candidates)
    if not candidates:
        raise PrivacyError("exponential mechanism needs at least one candidate")
    if len(candidates) != len(quality):
        raise PrivacyError("candidates and quality scores differ in length")
    probs = exponential_probabilities(quality, sens, epsilon)
    gen = as_generator(rng)
    return candidates[int(gen.choice(len(candidates), p=probs))]


def split_budget(params: PrivacyParams, m: int) -> PrivacyParams:
    """Even sequential split of a budget across ``m`` releases."""
    if m < 1:
        raise PrivacyError("m must be at least 1")
    if m == 1:
        return params
    return PrivacyParams(params.epsilon / m, params.delta / m)


@dataclass(frozen=True)
class Spend:
    label: str
    params: PrivacyParams
    partitions: int = 1

    def as_dict(self) -> dict:
        return {"label": self.label, **self.params.as_dict(), "partitions": self.partitions}


# Slack for float round-off when spends are fractions of the total.
_SLACK = 1e-12


@dataclass
class BudgetAccountant:
    """Sequential-composition ledger. Spends are append-only and all-or-nothing."""

    total: PrivacyParams
    ledger: list[Spend] = field(default_factory=list)

    def __post_init__(self):
        self._lock = threading.Lock()

    @property
    def spent(self) -> tuple[float, float]:
        return (
            math.fsum(s.params.epsilon for s in self.ledger),
            math.fsum(s.params.delta for s in self.ledger),
        )

    @property
    def remaining(self) -> tuple[float, float]:
        eps, delta = self.spent
        return max(0.0, self.total.epsilon - eps), max(0.0, self.total.delta - delta)

    def _fits(self, cost: PrivacyParams) -> bool:
        eps = math.fsum([s.params.epsilon for s in self.ledger] + [cost.epsilon])
        delta = math.fsum([s.params.delta for s in self.ledger] + [cost.delta])
        return (
            eps <= self.total.epsilon * (1 + _SLACK)
            and delta <= self.total.delta * (1 + _SLACK) + 1e-300
        )

    def spend(self, label: str, cost: PrivacyParams, partitions: int = 1) -> "BudgetAccountant":
        with self._lock:
            if not self._fits(cost):
                eps, delta = self.remaining
                raise BudgetExceeded(
                    f"spend {label!r} of (ε={cost.epsilon:g}, δ={cost.delta:g}) exceeds the "
                    f"remaining budget (ε={eps:g}, δ={delta:g})"
                )
            self.ledger.append(Spend(label, cost, partitions))
        return self

    def snapshot(self) -> dict:
        with self._lock:
            eps, delta = self.spent
            return {
                "total": self.total.as_dict(),
                "spent": {"epsilon": eps, "delta": delta},
                "ledger": [s.as_dict() for s in self.ledger],
            }


def accountant_spend(acct: BudgetAccountant, label: str, cost: PrivacyParams) -> BudgetAccountant:
    return acct.spend(label, cost)


def parallel_scope(
    acct: BudgetAccountant, label: str, cost: PrivacyParams, partition_count: int
) -> BudgetAccountant:
    """Charge once for ``partition_count`` releases on disjoint row subsets.

    Every branch pays the same ``cost``, so the maximum over branches is
    ``cost`` itself. The caller is responsible for the disjointness claim.
    """
    if partition_count < 1:
        raise PrivacyError("partition_count must be at least 1")
    return acct.spend(label, cost, partitions=partition_count)
