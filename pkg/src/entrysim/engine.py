"""Closed-loop flight simulation.

Fixed-step classic RK4 at 100 Hz by default. Guidance runs once per step and
its command is held constant across the step. Phase changes are checked at
step boundaries; only the ground crossing is refined, by bisecting the step
fraction until the altitude is within a millimetre of zero.
"""
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .atmosphere import _sound_speed, _standard
from .dynamics import State, VehicleParams, _gravity, _rates
from .guidance import (EntryConditions, GuidanceConfig, GuidancePhase, _law_cruise,
                       _law_pullup, _line_of_sight, _next_phase, _wrap)

IMPACT_TOLERANCE = 1e-3  # m
MAX_BISECTIONS = 60
SEEKER_HOLD = 0.5  # s a lost terminal measurement is held before falling back

OUTCOMES = ("impact", "timeout", "aborted")
COLUMNS = ("t_s", "x_m", "y_m", "z_m", "v_m_s", "theta_rad", "psi_rad", "phase",
           "u_cmd", "u_applied", "mach", "q_pa")

# Reference end-to-end bands each report is compared against.
REFERENCE_IMPACT_TIME = (60.0, 90.0)  # s
REFERENCE_DOWNRANGE = (500000.0, 625000.0)  # m


class IntegrationAborted(ArithmeticError):
    pass


@dataclass(frozen=True)
class Scenario:
    entry: EntryConditions = field(default_factory=EntryConditions)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    target: tuple = (1400000.0, 0.0)  # (x, z) on the ground, m
    mode: str = "planar"
    dt: float = 0.01
    max_time: float = 600.0
    curvature_term: bool = True
    seed: int = 0
    density_multiplier: float = 1.0
    output_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.max_time > self.dt:
            raise ValueError("max_time must be > dt")
        if self.mode not in ("planar", "three_d"):
            raise ValueError("mode must be 'planar' or 'three_d'")
        if not self.density_multiplier >= 0:
            raise ValueError("density_multiplier must be >= 0")
        if int(self.output_every) < 1:
            raise ValueError("output_every must be >= 1")
        if len(self.target) != 2 or not all(math.isfinite(v) for v in self.target):
            raise ValueError("target must be a finite (x, z) pair")

    @property
    def planar(self):
        return self.mode == "planar"

    def initial_state(self):
        e = self.entry
        return State(0.0, 0.0, e.entry_altitude, 0.0, e.entry_speed, -e.entry_gamma,
                     e.entry_heading)


@dataclass
class Trajectory:
    """Time history, one row per recorded step, columns as in ``COLUMNS``."""
    data: np.ndarray

    def __len__(self):
        return len(self.data)

    def column(self, name):
        return self.data[:, COLUMNS.index(name)]

    @property
    def t(self):
        return self.column("t_s")

    @property
    def y(self):
        return self.column("y_m")

    @property
    def phase(self):
        return self.column("phase").astype(int)

    def state(self, i):
        r = self.data[i]
        return State(*(float(v) for v in r[:7]))


@dataclass
class TerminalReport:
    miss_distance: float
    impact_time: float
    impact_point: tuple
    downrange: float
    phase_entry_times: dict
    peak_applied_load: float
    peak_dynamic_pressure: float
    saturation_fraction: float
    outcome: str
    final_state: State = None

    def reference_comparison(self):
        lo_t, hi_t = REFERENCE_IMPACT_TIME
        lo_x, hi_x = REFERENCE_DOWNRANGE
        return {
            "impact_time_band_s": [lo_t, hi_t],
            "impact_time_within": lo_t <= self.impact_time <= hi_t,
            "downrange_band_m": [lo_x, hi_x],
            "downrange_within": lo_x <= self.downrange <= hi_x,
        }

    def to_dict(self):
        return {
            "miss_distance": self.miss_distance,
            "impact_time": self.impact_time,
            "impact_point": list(self.impact_point),
            "downrange": self.downrange,
            "phase_entry_times": dict(self.phase_entry_times),
            "peak_applied_load": self.peak_applied_load,
            "peak_dynamic_pressure": self.peak_dynamic_pressure,
            "saturation_fraction": self.saturation_fraction,
            "outcome": self.outcome,
            "reference_comparison": self.reference_comparison(),
        }


def _advance(state, d, h):
    return State(state.t + h * d.dt, state.x + h * d.dx, state.y + h * d.dy,
                 state.z + h * d.dz, state.V + h * d.dV, state.theta + h * d.dtheta,
                 state.psi + h * d.dpsi)


def rk4_step(state, dt, deriv):
    """One classic Runge-Kutta step of size ``dt``.

    ``deriv`` maps a State to a StateDerivative; any command it applies is
    held fixed for the whole step.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    k1 = deriv(state)
    k2 = deriv(_advance(state, k1, 0.5 * dt))
    k3 = deriv(_advance(state, k2, 0.5 * dt))
    k4 = deriv(_advance(state, k3, dt))
    for k in (k1, k2, k3, k4):
        if not k.is_finite():
            raise IntegrationAborted(f"non-finite derivative at t={state.t}")
    names = ("dt", "dx", "dy", "dz", "dV", "dtheta", "dpsi")
    inc = [dt / 6.0 * (getattr(k1, n) + 2 * getattr(k2, n) + 2 * getattr(k3, n) + getattr(k4, n))
           for n in names]
    return State(state.t + inc[0], state.x + inc[1], state.y + inc[2], state.z + inc[3],
                 state.V + inc[4], state.theta + inc[5], state.psi + inc[6])


def refine_impact(state_before, state_after, deriv):
    """Locate the ground crossing inside one step by bisecting the step fraction.

    Returns the first bisection state with 0 <= y < 1 mm, or the last state
    found above ground if the iteration budget runs out.
    """
    if not (state_before.y > 0 >= state_after.y):
        raise ValueError("refine_impact needs y_before > 0 >= y_after")
    if state_after.y == 0:
        return state_after
    dt = state_after.t - state_before.t
    lo, hi = 0.0, 1.0
    above = state_before
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        crossing = rk4_step(state_before, mid * dt, deriv)
        # accept only from above so the reported point never sits underground
        if 0.0 <= crossing.y < IMPACT_TOLERANCE:
            return crossing
        if crossing.y > 0:
            lo, above = mid, crossing
        else:
            hi = mid
    return above


@njit(cache=True, nogil=True)
def _rk4(x, y, z, V, th, ps, h, nv, nl, rho_scale, mass, area, ld, cx0, cymax, curv):
    a = _rates(y, V, th, ps, nv, nl, rho_scale, mass, area, ld, cx0, cymax, curv)
    hh = 0.5 * h
    b = _rates(y + hh * a[1], V + hh * a[3], th + hh * a[4], ps + hh * a[5], nv, nl,
               rho_scale, mass, area, ld, cx0, cymax, curv)
    c = _rates(y + hh * b[1], V + hh * b[3], th + hh * b[4], ps + hh * b[5], nv, nl,
               rho_scale, mass, area, ld, cx0, cymax, curv)
    d = _rates(y + h * c[1], V + h * c[3], th + h * c[4], ps + h * c[5], nv, nl,
               rho_scale, mass, area, ld, cx0, cymax, curv)
    s = h / 6.0
    return (x + s * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0]),
            y + s * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1]),
            z + s * (a[2] + 2.0 * b[2] + 2.0 * c[2] + d[2]),
            V + s * (a[3] + 2.0 * b[3] + 2.0 * c[3] + d[3]),
            th + s * (a[4] + 2.0 * b[4] + 2.0 * c[4] + d[4]),
            ps + s * (a[5] + 2.0 * b[5] + 2.0 * c[5] + d[5]))


@njit(cache=True, nogil=True)
def _finite6(s):
    for v in s:
        if not math.isfinite(v):
            return False
    return True


@njit(cache=True, nogil=True)
def _simulate(x, y, z, V, th, ps,
              mass, area, ld, cx0, cymax, rho_scale, curv, planar,
              pullup_alt, turn_radius, cruise_alt, k_alt, k_rate, k_term,
              acq_range, fov, sigma, tx, tz,
              dt, n_max, noise, out, every):
    """Integrate one run. Rows are written to ``out`` when it has capacity.

    Returns (n_rows, outcome, t_end, state6, entry_times, peak_load, peak_q,
    saturated_steps, steps). outcome: 0 impact, 1 timeout, 2 aborted.
    """
    entry = np.full(5, np.nan)
    entry[0] = 0.0
    phase = 0
    last_phi_el = 0.0
    last_phi_az = 0.0
    last_fix = -1.0e300
    ni = 0
    rows = 0
    cap = out.shape[0]
    peak_load = 0.0
    peak_q = 0.0
    sat_steps = 0
    steps = 0
    outcome = 1
    k = 0
    t = 0.0
    s = (x, y, z, V, th, ps)
    while True:
        t = k * dt
        x, y, z, V, th, ps = s
        phi_el, phi_az, total, slant = _line_of_sight(x, y, z, th, ps, tx, tz)
        acquired = slant <= acq_range and total <= fov
        if acquired and sigma > 0.0:
            phi_el += sigma * noise[ni]
            phi_az += sigma * noise[ni + 1]
            ni += 2
        new_phase = _next_phase(phase, y, th, acquired, pullup_alt, cruise_alt)
        if new_phase != phase:
            phase = new_phase
            entry[phase] = t

        nl = 0.0
        if phase == 0:
            nv = math.cos(th)
        elif phase == 1:
            nv = _law_pullup(V, th, _gravity(y), turn_radius)
        elif phase == 2:
            nv = _law_cruise(y, V, th, k_alt, cruise_alt, k_rate)
        else:
            if acquired:
                last_phi_el = phi_el
                last_phi_az = phi_az
                last_fix = t
            if t - last_fix <= SEEKER_HOLD + 1e-9:
                nv = k_term * last_phi_el
                if not planar:
                    nl = k_term * last_phi_az
            else:
                nv = math.cos(th)

        r = _rates(y, V, th, ps, nv, nl, rho_scale, mass, area, ld, cx0, cymax, curv)
        load = math.hypot(r[6], r[7])
        q = r[9]
        steps += 1
        if r[8]:
            sat_steps += 1
        if load > peak_load:
            peak_load = load
        if q > peak_q:
            peak_q = q

        if rows < cap and k % every == 0:
            temp = _standard(max(y, 0.0))[0]
            out[rows, 0] = t
            out[rows, 1] = x
            out[rows, 2] = y
            out[rows, 3] = z
            out[rows, 4] = V
            out[rows, 5] = th
            out[rows, 6] = ps
            out[rows, 7] = phase
            out[rows, 8] = nv
            out[rows, 9] = r[6]
            out[rows, 10] = V / _sound_speed(temp)
            out[rows, 11] = q
            rows += 1

        if k >= n_max:
            outcome = 1
            break
        if not _finite6(r[:6]):
            outcome = 2
            break
        s_new = _rk4(x, y, z, V, th, ps, dt, nv, nl, rho_scale, mass, area, ld,
                     cx0, cymax, curv)
        if not _finite6(s_new):
            outcome = 2
            break
        if s_new[1] <= 0.0:
            frac = 1.0
            if s_new[1] < 0.0:
                lo = 0.0
                hi = 1.0
                above = (x, y, z, V, th, ps)
                found = False
                for _ in range(MAX_BISECTIONS):
                    frac = 0.5 * (lo + hi)
                    s_new = _rk4(x, y, z, V, th, ps, frac * dt, nv, nl, rho_scale, mass,
                                 area, ld, cx0, cymax, curv)
                    if 0.0 <= s_new[1] < IMPACT_TOLERANCE:
                        found = True
                        break
                    if s_new[1] > 0.0:
                        lo = frac
                        above = s_new
                    else:
                        hi = frac
                if not found:
                    frac = lo
                    s_new = above
            t = t + frac * dt
            s = (s_new[0], s_new[1], s_new[2], s_new[3], s_new[4], _wrap(s_new[5]))
            phase = 4
            entry[4] = t
            outcome = 0
            if rows < cap:
                x, y, z, V, th, ps = s
                temp = _standard(max(y, 0.0))[0]
                rho = rho_scale * _standard(max(y, 0.0))[2]
                out[rows, 0] = t
                out[rows, 1] = x
                out[rows, 2] = y
                out[rows, 3] = z
                out[rows, 4] = V
                out[rows, 5] = th
                out[rows, 6] = ps
                out[rows, 7] = phase
                out[rows, 8] = nv
                out[rows, 9] = r[6]
                out[rows, 10] = V / _sound_speed(temp)
                out[rows, 11] = 0.5 * rho * V * V
                rows += 1
            break
        s = (s_new[0], s_new[1], s_new[2], s_new[3], s_new[4], _wrap(s_new[5]))
        k += 1
    return rows, outcome, t, s, entry, peak_load, peak_q, sat_steps, steps


def _step_limit(scenario):
    return int(math.ceil(scenario.max_time / scenario.dt - 1e-9))


def _noise(scenario, n_max):
    if scenario.guidance.seeker_noise_sigma > 0:
        rng = np.random.default_rng(scenario.seed)
        return rng.standard_normal(2 * (n_max + 1))
    return np.zeros(0)


def run(scenario, record=True):
    """Fly one scenario. Returns ``(trajectory, report)``.

    With ``record=False`` no time history is kept and the trajectory is empty.
    """
    n_max = _step_limit(scenario)
    every = int(scenario.output_every)
    out = np.zeros((n_max // every + 2 if record else 0, len(COLUMNS)))
    s0 = scenario.initial_state()
    v, g = scenario.vehicle, scenario.guidance
    rows, outcome, t_end, s, entry, peak_load, peak_q, sat, steps = _simulate(
        s0.x, s0.y, s0.z, s0.V, s0.theta, s0.psi,
        v.mass, v.ref_area, v.lift_to_drag, v.cx0, v.cy_max,
        float(scenario.density_multiplier), bool(scenario.curvature_term), scenario.planar,
        g.pullup_altitude, g.turn_radius, g.cruise_altitude, g.k_alt, g.k_alt_rate,
        g.k_terminal, g.seeker_acquisition_range, g.seeker_fov_half_angle,
        g.seeker_noise_sigma, float(scenario.target[0]), float(scenario.target[1]),
        float(scenario.dt), n_max, _noise(scenario, n_max), out, every)
    trajectory = Trajectory(out[:rows])
    final = State(float(t_end), *(float(c) for c in s))
    tx, tz = scenario.target
    report = TerminalReport(
        miss_distance=math.hypot(final.x - tx, final.z - tz),
        impact_time=final.t,
        impact_point=(final.x, final.z),
        downrange=final.x,
        phase_entry_times={p.label: (None if math.isnan(entry[p]) else float(entry[p]))
                           for p in GuidancePhase},
        peak_applied_load=float(peak_load),
        peak_dynamic_pressure=float(peak_q),
        saturation_fraction=sat / steps if steps else 0.0,
        outcome=OUTCOMES[outcome],
        final_state=final,
    )
    return trajectory, report


def with_target(scenario, x, z=0.0):
    return replace(scenario, target=(float(x), float(z)))
