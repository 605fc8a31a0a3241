import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from entrysim.dynamics import State
from entrysim.engine import Scenario, TerminalReport, run, with_target
from entrysim.montecarlo import (DispersionSpec, EmptyEnsembleError, cep, default_threads,
                                 run_ensemble, sample_scenario, summarize)

POINT = dict(mass_range=(1500.0, 1500.0), entry_gamma_range=(3.5, 3.5),
             entry_altitude_range=(100000.0, 100000.0), density_multiplier_sigma=0.0,
             target_offset_sigma=0.0)


def test_degenerate_draws_reproduce_nominal():
    spec = DispersionSpec(n_runs=5, **POINT)
    for i in range(5):
        s = sample_scenario(spec, i)
        assert s == replace(Scenario(), seed=s.seed)


def test_same_index_same_scenario():
    spec = DispersionSpec(n_runs=3, base_seed=11)
    assert sample_scenario(spec, 2) == sample_scenario(spec, 2)
    assert sample_scenario(spec, 1) != sample_scenario(spec, 2)


def test_index_out_of_range():
    with pytest.raises(IndexError):
        sample_scenario(DispersionSpec(n_runs=3), 3)


def test_mass_mean():
    spec = DispersionSpec(n_runs=10000)
    masses = [sample_scenario(spec, i).vehicle.mass for i in range(spec.n_runs)]
    assert 1495.0 <= np.mean(masses) <= 1505.0
    assert 1450.0 <= min(masses) and max(masses) <= 1550.0


def test_draws_within_ranges():
    spec = DispersionSpec(n_runs=200, target_offset_sigma=10.0)
    for i in range(spec.n_runs):
        s = sample_scenario(spec, i)
        assert math.radians(3.0) <= s.entry.entry_gamma <= math.radians(4.0)
        assert 90000.0 <= s.entry.entry_altitude <= 100000.0
        assert s.density_multiplier > 0
        assert s.target[1] == 0.0  # planar: no crossrange offset
        assert s.guidance.seeker_noise_sigma == spec.seeker_noise_sigma


@pytest.mark.parametrize("misses,expected", [([3, 4, 5], 4.0), ([1, 1, 1, 1], 1.0),
                                             ([2, 4, 6, 8], 5.0)])
def test_cep_examples(misses, expected):
    assert cep(misses) == expected


def test_cep_empty():
    with pytest.raises(ValueError):
        cep([])


positive = st.floats(0.0, 1e6, allow_nan=False)


@given(st.lists(positive, min_size=1, max_size=50), st.floats(1e-3, 1e3))
def test_cep_scale_equivariant(misses, c):
    assert cep([c * m for m in misses]) == pytest.approx(c * cep(misses), rel=1e-9, abs=1e-12)


def _report(miss, outcome="impact", t=70.0):
    return TerminalReport(miss, t, (miss, 0.0), 6e5 + miss, {}, 1.0, 1.0, 0.0, outcome,
                          State())


@given(st.lists(positive, min_size=1, max_size=40), st.randoms())
def test_summary_order_independent(misses, rnd):
    reports = [_report(m) for m in misses]
    shuffled = reports[:]
    rnd.shuffle(shuffled)
    a, b = summarize(reports), summarize(shuffled)
    assert a == b
    assert a.miss_min <= a.cep <= a.miss_max
    q = a.quantiles
    assert q["50"] <= q["90"] <= q["95"]


def test_summary_excludes_non_impact():
    stats = summarize([_report(1.0), _report(3.0), _report(1e6, "timeout"),
                       _report(0.0, "aborted")])
    assert stats.n == 4 and stats.n_impact == 2
    assert stats.miss_max == 3.0
    assert stats.outcome_counts == {"impact": 2, "timeout": 1, "aborted": 1}


def test_summary_all_failed():
    with pytest.raises(EmptyEnsembleError):
        summarize([_report(1.0, "timeout")])


def test_zero_dispersion_oracle_run():
    quiet = replace(Scenario(), guidance=replace(Scenario().guidance, seeker_noise_sigma=0.0))
    _, nominal = run(quiet)
    spec = DispersionSpec(n_runs=1, seeker_noise_sigma=0.0,
                          base=with_target(quiet, *nominal.impact_point), **POINT)
    stats, _ = run_ensemble(spec)
    assert stats.cep < 1.0


def test_ensemble_deterministic_across_threads():
    spec = DispersionSpec(n_runs=6, base_seed=4)
    one, reps1 = run_ensemble(spec, threads=1)
    many, reps4 = run_ensemble(spec, threads=4)
    assert one == many
    assert [r.to_dict() for r in reps1] == [r.to_dict() for r in reps4]
    assert one.n == 6


def test_ensemble_all_timeouts():
    spec = DispersionSpec(n_runs=2, base=Scenario(max_time=1.0))
    with pytest.raises(EmptyEnsembleError):
        run_ensemble(spec)


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("SIM_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.delenv("SIM_THREADS")
    assert default_threads() >= 1


@pytest.mark.parametrize("kwargs", [dict(n_runs=0), dict(mass_range=(2.0, 1.0)),
                                    dict(seeker_noise_sigma=-1.0),
                                    dict(density_multiplier_sigma=-0.1)])
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        DispersionSpec(**kwargs)
