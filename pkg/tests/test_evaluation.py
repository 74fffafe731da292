import io
import math
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homeconflict.domain import ConflictCase, ConflictType, Participant, ResidentProfile, ServiceEvent
from homeconflict.errors import InvalidDistribution, ShapeMismatch
from homeconflict.evaluation import (
    DEFAULT_FIXTURE,
    AccuracyReport,
    DistKind,
    DistributionSpec,
    ExperimentConfig,
    Fixture,
    aggregate_reports,
    derive_distribution_params,
    fixtures_from_cases,
    reports_from_csv,
    reports_to_csv,
    run_experiment,
    run_trial,
    sample,
    trial_rng,
)

from oracles import normal_cdf, triangular_tail, uniform_tail

T = datetime(2011, 6, 15, 20)
MID = (23.32 + 22.0) / 2
PROFILES = {"R1": ResidentProfile("R1", 30, 3, 2, 5), "R2": ResidentProfile("R2", 50, 2, 4, 0)}
AC_CASE = ConflictCase(
    ConflictType.TEMPERATURE, "ac", "temperature", "living", T, T + timedelta(minutes=20),
    (Participant("R1", 25.0, T), Participant("R2", 19.0, T + timedelta(minutes=5))),
)


def hist(user, value, sick, day):
    start = datetime(2011, 6, day, 20)
    return ServiceEvent("ac", start, start + timedelta(hours=1), "living", user,
                        {"temperature": value, "context:illness": sick})


HISTORY = [hist("R2", 23.0, 1, 1), hist("R2", 23.0, 2, 2), hist("R2", 18.0, 0, 3), hist("R1", 27.0, 1, 4)]


class TestDerive:
    def test_normal_from_history(self):
        d = derive_distribution_params(AC_CASE, HISTORY, PROFILES, "normal")
        assert d.kind is DistKind.NORMAL
        assert d.params == (24.0, 1.0)
        assert d.flags == ()

    def test_no_history_midpoint(self):
        d = derive_distribution_params(AC_CASE, [], PROFILES, "normal")
        assert d.params == (22.0, 1.0)
        assert "empty_history" in d.flags

    def test_triangular_and_uniform(self):
        assert derive_distribution_params(AC_CASE, HISTORY, PROFILES, "triangular").params == (19.0, 24.0, 25.0)
        assert derive_distribution_params(AC_CASE, HISTORY, PROFILES, "uniform").params == (19.0, 25.0)

    def test_custom_stddev(self):
        assert derive_distribution_params(AC_CASE, HISTORY, PROFILES, "normal", stddev=2.5).params == (24.0, 2.5)

    def test_non_numeric(self):
        c = ConflictCase(ConflictType.OTHER, "tv", "channel", "den", T, T + timedelta(minutes=5),
                         (Participant("R1", "news", T), Participant("R2", "sport", T)))
        with pytest.raises(InvalidDistribution):
            derive_distribution_params(c, [], PROFILES)


class TestSample:
    @pytest.mark.parametrize(
        "dist, value",
        [
            (DistributionSpec.triangular(3, 3, 3), 3),
            (DistributionSpec.normal(24, 0), 24),
            (DistributionSpec.uniform(7, 7), 7),
        ],
    )
    def test_degenerate(self, dist, value):
        assert sample(dist, trial_rng(1, 0)) == value

    @pytest.mark.parametrize("bad", [("normal", (0, -1)), ("uniform", (2, 1)), ("triangular", (0, 5, 4))])
    def test_invalid(self, bad):
        with pytest.raises(InvalidDistribution):
            DistributionSpec(DistKind(bad[0]), bad[1])

    @pytest.mark.parametrize(
        "dist",
        [DistributionSpec.normal(24, 1), DistributionSpec.uniform(19, 25), DistributionSpec.triangular(19, 24, 25)],
    )
    def test_mean_converges(self, dist):
        rng = np.random.Generator(np.random.Philox(12345))
        n = 100_000
        xs = np.array([sample(dist, rng) for _ in range(n)])
        assert abs(xs.mean() - dist.mean) < 3 * math.sqrt(dist.variance) / math.sqrt(n)

    def test_substreams_reproducible_and_distinct(self):
        d = DistributionSpec.uniform(0, 1)
        assert sample(d, trial_rng(7, 3)) == sample(d, trial_rng(7, 3))
        assert sample(d, trial_rng(7, 3)) != sample(d, trial_rng(7, 4))
        assert sample(d, trial_rng(7, 3)) != sample(d, trial_rng(8, 3))


class TestTrial:
    @pytest.mark.parametrize("truth, winner", [(24.0, "adaptive"), (22.0, "average"), (22.66, "average")])
    def test_examples(self, truth, winner):
        assert run_trial({"adaptive": 23.32, "average": 22.0}, truth, "average") == winner

    def test_identical_setpoints_go_to_baseline(self):
        assert run_trial({"adaptive": 22.0, "average": 22.0}, 30.0, "average") == "average"

    def test_needs_two(self):
        with pytest.raises(ValueError):
            run_trial({"adaptive": 1.0}, 0.0)


def fraction(report, batch, strategy="adaptive"):
    return report.fractions[batch][strategy]


class TestExperiment:
    def test_normal_closed_form(self):
        r = run_experiment(ExperimentConfig(DistributionSpec.normal(24, 1), seed=11))
        p = 1 - normal_cdf(MID, 24, 1)
        assert p == pytest.approx(0.9099, abs=1e-4)
        for b in r.batch_sizes:
            assert abs(fraction(r, b) - p) <= 3 * math.sqrt(p * (1 - p) / b)

    def test_uniform_closed_form(self):
        r = run_experiment(ExperimentConfig(DistributionSpec.uniform(19, 25), seed=11))
        p = uniform_tail(MID, 19, 25)
        assert p == pytest.approx(0.39, abs=1e-9)
        for b in r.batch_sizes:
            assert abs(fraction(r, b) - p) <= 3 * math.sqrt(p * (1 - p) / b)

    def test_triangular_closed_form(self):
        r = run_experiment(ExperimentConfig(DistributionSpec.triangular(19, 24, 25), seed=5, batch_sizes=(1000,)))
        p = triangular_tail(MID, 19, 24, 25)
        assert abs(fraction(r, 1000) - p) <= 3 * math.sqrt(p * (1 - p) / 1000)

    def test_identical_setpoints(self):
        cfg = ExperimentConfig(DistributionSpec.normal(24, 1), seed=1, fixtures=(Fixture("same", {"adaptive": 22.0, "average": 22.0}),))
        r = run_experiment(cfg)
        assert all(fraction(r, b, "average") == 1.0 for b in r.batch_sizes)

    def test_deterministic_and_sums_to_one(self):
        cfg = ExperimentConfig(DistributionSpec.triangular(19, 24, 25), seed=2**63 + 5)
        a, b = run_experiment(cfg), run_experiment(cfg)
        assert reports_to_csv([a]) == reports_to_csv([b])
        for batch in a.batch_sizes:
            assert sum(a.fractions[batch].values()) == pytest.approx(1, abs=1e-9)

    def test_batches_share_prefixes(self):
        # with one trial the first batch's draws are a prefix of every later batch
        r = run_experiment(ExperimentConfig(DistributionSpec.normal(24, 1), seed=3, batch_sizes=(1, 2)))
        first = run_trial(DEFAULT_FIXTURE.setpoints, sample(DistributionSpec.normal(24, 1), trial_rng(3, 0)), "average")
        assert fraction(r, 1, first) == 1.0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(DistributionSpec.normal(24, 1), seed=1, batch_sizes=(400, 200))
        with pytest.raises(ValueError):
            ExperimentConfig(DistributionSpec.normal(24, 1), seed=1, strategies=("adaptive",))

    @settings(max_examples=25, deadline=None)
    @given(st.floats(19, 27), st.floats(0.3, 2.0))
    def test_directional_claim(self, mean, sd):
        # median above the strategies' midpoint: adaptive should win most trials
        if mean <= MID + 0.1:
            return
        r = run_experiment(ExperimentConfig(DistributionSpec.normal(mean, sd), seed=9, batch_sizes=(1000,)))
        assert fraction(r, 1000) > 0.5


def report(values, strategies=("adaptive", "average"), batches=(1000,)):
    return AccuracyReport("x", 1, "f", strategies, {b: {"adaptive": v, "average": 1 - v} for b in batches for v in [values]})


class TestAggregate:
    def test_identical(self):
        r = report(0.7)
        assert aggregate_reports([r, r]).fractions == r.fractions

    def test_mean(self):
        assert aggregate_reports([report(0.6), report(0.4)]).fractions[1000]["adaptive"] == pytest.approx(0.5)

    def test_reference_percentages(self):
        agg = aggregate_reports([report(0.566), report(0.59), report(0.646)])
        assert agg.fractions[1000]["adaptive"] == pytest.approx(0.600, abs=0.001)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            aggregate_reports([report(0.5), report(0.5, batches=(200,))])
        with pytest.raises(ShapeMismatch):
            aggregate_reports([])


def test_report_csv_roundtrip():
    r = run_experiment(ExperimentConfig(DistributionSpec.uniform(19, 25), seed=4))
    text = reports_to_csv([r])
    assert text.splitlines()[0] == "distribution,batch_size,strategy,win_fraction,seed"
    (back,) = reports_from_csv(io.StringIO(text))
    assert back.fractions == r.fractions
    assert reports_to_csv([back]) == text


def test_fixtures_from_cases():
    (fx,) = fixtures_from_cases([AC_CASE], PROFILES, HISTORY, "normal")
    assert fx.setpoints == {"adaptive": 24.0, "average": 22.0}
    assert fx.dist.params == (24.0, 1.0)
