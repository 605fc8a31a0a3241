"""Dispersion sampling, ensemble execution and miss-distance statistics."""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import OUTCOMES, Scenario, run


class EmptyEnsembleError(ValueError):
    """No run of the ensemble reached the ground."""


@dataclass(frozen=True)
class DispersionSpec:
    n_runs: int = 100
    base_seed: int = 0
    mass_range: tuple = (1450.0, 1550.0)  # kg, uniform
    entry_gamma_range: tuple = (3.0, 4.0)  # deg, uniform
    entry_altitude_range: tuple = (90000.0, 100000.0)  # m, uniform
    density_multiplier_sigma: float = 0.05  # lognormal sigma
    seeker_noise_sigma: float = 1.0e-3  # rad
    target_offset_sigma: float = 0.0  # m, per horizontal axis
    base: Scenario = field(default_factory=Scenario)

    def __post_init__(self):
        if int(self.n_runs) < 1:
            raise ValueError("n_runs must be >= 1")
        for name in ("mass_range", "entry_gamma_range", "entry_altitude_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} must be ordered low <= high")
        for name in ("density_multiplier_sigma", "seeker_noise_sigma", "target_offset_sigma"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class EnsembleStats:
    n: int
    n_impact: int
    miss_mean: float
    miss_std: float
    miss_min: float
    miss_max: float
    cep: float
    quantiles: dict
    impact_time_mean: float
    impact_time_std: float
    downrange_mean: float
    downrange_std: float
    outcome_counts: dict

    def to_dict(self):
        return {
            "n": self.n,
            "n_impact": self.n_impact,
            "miss_mean": self.miss_mean,
            "miss_std": self.miss_std,
            "miss_min": self.miss_min,
            "miss_max": self.miss_max,
            "cep": self.cep,
            "quantiles": dict(self.quantiles),
            "impact_time_mean": self.impact_time_mean,
            "impact_time_std": self.impact_time_std,
            "downrange_mean": self.downrange_mean,
            "downrange_std": self.downrange_std,
            "outcome_counts": dict(self.outcome_counts),
        }


def run_stream(base_seed, run_index):
    """Independent generator for one run, keyed on (base_seed, run_index)."""
    return np.random.default_rng(np.random.SeedSequence([int(base_seed), int(run_index)]))


def sample_scenario(spec, run_index):
    """Draw the dispersed scenario for ``run_index``.

    The draw order is fixed: mass, entry angle, entry altitude, density
    multiplier, target offset (x then z), seeker noise seed.
    """
    if not 0 <= run_index < spec.n_runs:
        raise IndexError(f"run_index {run_index} outside [0, {spec.n_runs})")
    rng = run_stream(spec.base_seed, run_index)
    base = spec.base
    mass = rng.uniform(*spec.mass_range)
    gamma = math.radians(rng.uniform(*spec.entry_gamma_range))
    altitude = rng.uniform(*spec.entry_altitude_range)
    rho_mult = math.exp(spec.density_multiplier_sigma * rng.standard_normal())
    dx, dz = spec.target_offset_sigma * rng.standard_normal(2)
    if base.planar:
        dz = 0.0
    seed = int(rng.integers(0, 2**63 - 1))
    return replace(
        base,
        entry=replace(base.entry, entry_gamma=gamma, entry_altitude=altitude),
        vehicle=replace(base.vehicle, mass=mass),
        guidance=replace(base.guidance, seeker_noise_sigma=spec.seeker_noise_sigma),
        target=(base.target[0] + dx, base.target[1] + dz),
        density_multiplier=base.density_multiplier * rho_mult,
        seed=seed,
    )


def cep(miss_distances):
    """Circular error probable as the empirical median miss radius."""
    misses = np.asarray(miss_distances, dtype=float)
    if misses.size == 0:
        raise ValueError("cep of an empty list")
    return float(np.percentile(misses, 50.0, method="linear"))


def summarize(reports):
    """Aggregate terminal reports; only impacting runs enter the miss statistics."""
    counts = {o: 0 for o in OUTCOMES}
    for r in reports:
        counts[r.outcome] += 1
    hits = [r for r in reports if r.outcome == "impact"]
    if not hits:
        raise EmptyEnsembleError(f"no impacting runs among {len(reports)}")
    miss = np.sort([r.miss_distance for r in hits])
    times = np.sort([r.impact_time for r in hits])
    ranges = np.sort([r.downrange for r in hits])
    ddof = 1 if len(hits) > 1 else 0
    q50, q90, q95 = (float(v) for v in np.percentile(miss, [50.0, 90.0, 95.0], method="linear"))
    return EnsembleStats(
        n=len(reports),
        n_impact=len(hits),
        miss_mean=float(np.mean(miss)),
        miss_std=float(np.std(miss, ddof=ddof)),
        miss_min=float(miss[0]),
        miss_max=float(miss[-1]),
        cep=cep(miss),
        quantiles={"50": q50, "90": q90, "95": q95},
        impact_time_mean=float(np.mean(times)),
        impact_time_std=float(np.std(times, ddof=ddof)),
        downrange_mean=float(np.mean(ranges)),
        downrange_std=float(np.std(ranges, ddof=ddof)),
        outcome_counts=counts,
    )


def default_threads():
    env = os.environ.get("SIM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_ensemble(spec, threads=None, return_samples=False):
    """Fly every dispersed run and aggregate.

    Returns ``(stats, reports)`` with reports ordered by run index whatever
    the thread count, plus the sampled scenarios when ``return_samples``.
    """
    samples = [sample_scenario(spec, i) for i in range(spec.n_runs)]
    threads = threads or default_threads()

    def fly(scenario):
        return run(scenario, record=False)[1]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(fly, samples))
    else:
        reports = [fly(s) for s in samples]
    if return_samples:
        return summarize(reports), reports, samples
    return summarize(reports), reports
