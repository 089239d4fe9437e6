"""Audit-precision arithmetic: precision@k and Bayesian credible intervals.

The posterior over precision given k audited and w worth auditing is
Beta(alpha0 + w, beta0 + k - w). Quantiles come from bisection on the
regularized incomplete beta function, itself evaluated with the
standard continued-fraction expansion (Lentz's method).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

_CF_MAX_ITER = 300
_CF_EPS = 1e-15
_TINY = 1e-300
_QUANTILE_TOL = 1e-10


class MissingGroundTruth(KeyError):
    """A ranked id has no ground-truth verdict."""


@dataclass(frozen=True)
class AuditOutcome:
    k: int  # audited count
    w: int  # deemed worth auditing

    def __post_init__(self):
        if not 0 <= self.w <= self.k:
            raise ValueError(f"need 0 <= w <= k, got w={self.w}, k={self.k}")


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), the Beta(a, b) CDF at x."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # use the expansion on the side where it converges fast
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def beta_quantile(a: float, b: float, p: float) -> float:
    """Inverse Beta CDF by bisection to 1e-10."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > _QUANTILE_TOL:
        mid = 0.5 * (lo + hi)
        if regularized_incomplete_beta(a, b, mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def credible_interval(
    outcome: AuditOutcome,
    level: float = 0.9,
    prior: tuple[float, float] = (1.0, 1.0),
) -> tuple[float, float]:
    """Equal-tailed posterior interval on precision.

    With the default uniform prior this reproduces published audit
    tables; pass prior=(0.5, 0.5) for Jeffreys.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    alpha0, beta0 = prior
    if alpha0 <= 0 or beta0 <= 0:
        raise ValueError("prior components must be > 0")
    a = alpha0 + outcome.w
    b = beta0 + outcome.k - outcome.w
    tail = (1.0 - level) / 2.0
    return beta_quantile(a, b, tail), beta_quantile(a, b, 1.0 - tail)


def precision_at_k(labels: list[bool]) -> float:
    """Fraction of the provided top-k verdicts deemed worth auditing."""
    if not labels:
        raise ValueError("labels must be non-empty")
    return sum(bool(x) for x in labels) / len(labels)


@dataclass(frozen=True)
class EvaluationReport:
    k: int
    w: int
    precision: float
    level: float
    interval: tuple[float, float]

    def to_json(self) -> str:
        return json.dumps(
            {
                "k": self.k,
                "w": self.w,
                "precision": self.precision,
                "level": self.level,
                "interval_low": self.interval[0],
                "interval_high": self.interval[1],
            },
            indent=2,
        )


def evaluate(ranked, ground_truth: dict[str, bool], k: int, level: float = 0.9) -> EvaluationReport:
    """Audit outcome over the top k of a ranking, with its credible interval."""
    if k < 1:
        raise ValueError("k must be >= 1")
    top = list(ranked)[:k]
    verdicts = []
    for finding in top:
        sid = finding.subgraph_id if hasattr(finding, "subgraph_id") else str(finding)
        if sid not in ground_truth:
            raise MissingGroundTruth(sid)
        verdicts.append(ground_truth[sid])
    outcome = AuditOutcome(k=len(verdicts), w=sum(verdicts))
    return EvaluationReport(
        k=outcome.k,
        w=outcome.w,
        precision=precision_at_k(verdicts),
        level=level,
        interval=credible_interval(outcome, level),
    )
