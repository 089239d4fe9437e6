from __future__ import annotations

import numpy as np
import pytest
from scipy import special, stats as scipy_stats

from sentinel.ranking import RankedFinding
from sentinel.stats import (
    AuditOutcome,
    MissingGroundTruth,
    beta_quantile,
    credible_interval,
    evaluate,
    precision_at_k,
    regularized_incomplete_beta,
)

# the published audit table: (k, w) -> 90% interval in percent
TABLE = [
    (50, 38, 64.7, 84.2),
    (50, 32, 52.3, 74.0),
    (50, 29, 46.3, 68.7),
    (50, 1, 0.7, 9.0),
]


class TestIncompleteBeta:
    def test_against_scipy_on_grid(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            a = float(rng.uniform(0.1, 80))
            b = float(rng.uniform(0.1, 80))
            x = float(rng.uniform(0, 1))
            assert regularized_incomplete_beta(a, b, x) == pytest.approx(
                float(special.betainc(a, b, x)), abs=1e-12, rel=1e-10
            )

    def test_bounds(self):
        assert regularized_incomplete_beta(2, 3, 0.0) == 0.0
        assert regularized_incomplete_beta(2, 3, 1.0) == 1.0

    def test_quantile_inverts_cdf(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a = float(rng.uniform(0.5, 50))
            b = float(rng.uniform(0.5, 50))
            p = float(rng.uniform(0.01, 0.99))
            q = beta_quantile(a, b, p)
            assert regularized_incomplete_beta(a, b, q) == pytest.approx(p, abs=1e-8)


class TestCredibleInterval:
    @pytest.mark.parametrize("k,w,lo,hi", TABLE)
    def test_reproduces_published_table(self, k, w, lo, hi):
        got_lo, got_hi = credible_interval(AuditOutcome(k=k, w=w), 0.90)
        assert got_lo * 100 == pytest.approx(lo, abs=0.1)
        assert got_hi * 100 == pytest.approx(hi, abs=0.1)

    def test_prior_only_posterior(self):
        lo, hi = credible_interval(AuditOutcome(k=0, w=0), 0.90)
        assert lo == pytest.approx(0.05, abs=1e-9)
        assert hi == pytest.approx(0.95, abs=1e-9)

    def test_against_scipy_quantiles(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            k = int(rng.integers(1, 200))
            w = int(rng.integers(0, k + 1))
            level = float(rng.uniform(0.5, 0.99))
            lo, hi = credible_interval(AuditOutcome(k=k, w=w), level)
            dist = scipy_stats.beta(1 + w, 1 + k - w)
            assert lo == pytest.approx(dist.ppf((1 - level) / 2), abs=1e-8)
            assert hi == pytest.approx(dist.ppf((1 + level) / 2), abs=1e-8)

    def test_interval_mass_equals_level(self):
        for k, w, _lo, _hi in TABLE:
            lo, hi = credible_interval(AuditOutcome(k=k, w=w), 0.90)
            a, b = 1 + w, 1 + k - w
            mass = regularized_incomplete_beta(a, b, hi) - regularized_incomplete_beta(a, b, lo)
            assert mass == pytest.approx(0.90, abs=1e-8)
            assert 0.0 <= lo < hi <= 1.0

    def test_endpoints_monotone_in_w(self):
        prev = (0.0, 0.0)
        for w in range(0, 51):
            cur = credible_interval(AuditOutcome(k=50, w=w), 0.90)
            assert cur[0] >= prev[0] - 1e-12
            assert cur[1] >= prev[1] - 1e-12
            prev = cur

    def test_jeffreys_prior_option(self):
        lo, hi = credible_interval(AuditOutcome(k=50, w=38), 0.90, prior=(0.5, 0.5))
        dist = scipy_stats.beta(38.5, 12.5)
        assert lo == pytest.approx(dist.ppf(0.05), abs=1e-8)
        assert hi == pytest.approx(dist.ppf(0.95), abs=1e-8)

    def test_validation(self):
        with pytest.raises(ValueError):
            AuditOutcome(k=5, w=6)
        with pytest.raises(ValueError):
            credible_interval(AuditOutcome(k=1, w=0), level=1.0)
        with pytest.raises(ValueError):
            credible_interval(AuditOutcome(k=1, w=0), prior=(0.0, 1.0))


class TestPrecision:
    def test_all_worth(self):
        assert precision_at_k([True] * 5) == 1.0

    def test_none_worth(self):
        assert precision_at_k([False] * 5) == 0.0

    def test_published_nn_row(self):
        labels = [True] * 38 + [False] * 12
        assert precision_at_k(labels) == pytest.approx(0.76)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            precision_at_k([])


def _findings(ids):
    return [RankedFinding(s, "NN", float(i), i + 1) for i, s in enumerate(ids)]


class TestEvaluate:
    def test_k_must_be_positive(self):
        with pytest.raises(ValueError):
            evaluate(_findings(["a"]), {"a": True}, k=0)

    def test_missing_ground_truth(self):
        with pytest.raises(MissingGroundTruth):
            evaluate(_findings(["a", "b"]), {"a": True}, k=2)

    def test_all_anomalies_in_top_k(self):
        ids = [f"s{i}" for i in range(10)]
        truth = {s: i < 4 for i, s in enumerate(ids)}
        report = evaluate(_findings(ids), truth, k=10)
        assert report.w == 4
        assert report.precision == pytest.approx(0.4)

    def test_random_ranking_matches_prevalence(self):
        # Monte Carlo oracle: mean precision of random rankings ~ prevalence
        rng = np.random.default_rng(5)
        n, prevalence, k = 1000, 0.1, 50
        ids = [f"s{i:04d}" for i in range(n)]
        truth = {s: bool(rng.random() < prevalence) for s in ids}
        actual_prev = sum(truth.values()) / n
        precisions = []
        for _ in range(200):
            pick = rng.permutation(n)[:k]
            precisions.append(evaluate(_findings([ids[i] for i in pick]), truth, k=k).precision)
        mean = float(np.mean(precisions))
        sigma = float(np.std(precisions)) / np.sqrt(len(precisions))
        assert abs(mean - actual_prev) <= 3 * sigma
