"""Four-phase autopilot and infrared seeker model.

Each phase has its own law for the commanded load factor U:

    descent   U = cos(theta)
    pull-up   U = V**2 / (g R) + cos(theta)
    cruise    U = k_alt * (H - y) - k_alt_rate * dy/dt + cos(theta)
    terminal  U = k_terminal * phi

where phi is the seeker's line-of-sight angle off the velocity vector. The
cruise rate term damps the altitude loop; with ``k_alt_rate = 0`` it reduces to
plain proportional altitude hold, which is undamped.
"""
import math
from dataclasses import dataclass
from enum import IntEnum

from numba import njit

from .dynamics import GuidanceCommand, _gravity


class GuidancePhase(IntEnum):
    GRAVITATIONAL_DESCENT = 0
    PULL_UP = 1
    CRUISE = 2
    TERMINAL = 3
    IMPACT = 4

    @property
    def label(self):
        return self.name.lower()


@dataclass(frozen=True)
class GuidanceConfig:
    pullup_altitude: float = 85000.0  # m
    turn_radius: float = 45000.0  # m
    cruise_altitude: float = 35000.0  # m
    k_alt: float = 3.0e-3  # 1/m
    k_alt_rate: float = 0.0245  # s/m
    k_terminal: float = 1000.0  # 1/rad
    seeker_acquisition_range: float = 150000.0  # m
    seeker_fov_half_angle: float = 0.26  # rad
    seeker_noise_sigma: float = 1.0e-3  # rad

    def __post_init__(self):
        for name in ("pullup_altitude", "turn_radius", "cruise_altitude",
                     "seeker_acquisition_range"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("k_alt", "k_terminal"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not self.k_alt_rate >= 0:
            raise ValueError("k_alt_rate must be >= 0")
        if not 0 < self.seeker_fov_half_angle < math.pi / 2:
            raise ValueError("seeker_fov_half_angle must be in (0, pi/2)")
        if not self.seeker_noise_sigma >= 0:
            raise ValueError("seeker_noise_sigma must be >= 0")


@dataclass(frozen=True)
class EntryConditions:
    entry_altitude: float = 100000.0  # m
    entry_speed: float = 7600.0  # m/s
    entry_gamma: float = math.radians(3.5)  # rad below the horizon
    entry_heading: float = 0.0  # rad

    def __post_init__(self):
        if not 0 < self.entry_gamma < math.radians(15):
            raise ValueError("entry_gamma must be in (0, 15) degrees")
        if not self.entry_speed > 0:
            raise ValueError("entry_speed must be > 0")
        if not self.entry_altitude > 0:
            raise ValueError("entry_altitude must be > 0")


@dataclass(frozen=True)
class SeekerMeasurement:
    acquired: bool
    phi_elevation: float | None = None  # rad, + when target above velocity vector
    phi_azimuth: float | None = None  # rad, + toward +z
    slant_range: float = math.inf


@njit(cache=True, nogil=True)
def _wrap(a):
    # onto (-pi, pi]
    return a - 2.0 * math.pi * math.ceil((a - math.pi) / (2.0 * math.pi))


@njit(cache=True, nogil=True)
def _law_pullup(V, theta, g, turn_radius):
    return V * V / (g * turn_radius) + math.cos(theta)


@njit(cache=True, nogil=True)
def _law_cruise(y, V, theta, k_alt, cruise_altitude, k_alt_rate):
    return k_alt * (cruise_altitude - y) - k_alt_rate * V * math.sin(theta) + math.cos(theta)


@njit(cache=True, nogil=True)
def _line_of_sight(x, y, z, theta, psi, tx, tz):
    """(phi_el, phi_az, total_angle, slant_range) from vehicle to ground target."""
    lx = tx - x
    ly = -y
    lz = tz - z
    horiz = math.hypot(lx, lz)
    slant = math.hypot(horiz, ly)
    phi_el = math.atan2(ly, horiz) - theta
    phi_az = _wrap(math.atan2(lz, lx) - psi)
    if slant == 0.0:
        return 0.0, 0.0, 0.0, 0.0
    ct = math.cos(theta)
    dot = (ct * math.cos(psi) * lx + math.sin(theta) * ly + ct * math.sin(psi) * lz) / slant
    total = math.acos(min(1.0, max(-1.0, dot)))
    return phi_el, phi_az, total, slant


@njit(cache=True, nogil=True)
def _next_phase(phase, y, theta, acquired, pullup_altitude, cruise_altitude):
    if phase == 0:
        if y <= pullup_altitude:
            return 1
    elif phase == 1:
        if theta >= 0.0 or y <= cruise_altitude:
            return 2
    elif phase == 2:
        if acquired:
            return 3
    elif phase == 3:
        if y <= 0.0:
            return 4
    return phase


def control_phase1(state):
    return GuidanceCommand(math.cos(state.theta), 0.0)


def control_phase2(state, turn_radius):
    if not turn_radius > 0:
        raise ValueError("turn_radius must be > 0")
    g = _gravity(max(float(state.y), 0.0))
    return GuidanceCommand(float(_law_pullup(float(state.V), float(state.theta), g,
                                             float(turn_radius))), 0.0)


def control_phase3(state, k_alt, cruise_altitude, k_alt_rate=0.0):
    """Altitude hold. ``k_alt_rate`` adds damping on the climb rate V sin(theta)."""
    u = _law_cruise(float(state.y), float(state.V), float(state.theta), float(k_alt),
                    float(cruise_altitude), float(k_alt_rate))
    return GuidanceCommand(float(u), 0.0)


def control_phase4(measurement, k_terminal, planar=True):
    if not measurement.acquired:
        raise ValueError("terminal law needs an acquired seeker measurement")
    lateral = 0.0 if planar else k_terminal * measurement.phi_azimuth
    return GuidanceCommand(k_terminal * measurement.phi_elevation, lateral)


def seeker_measure(state, target, config, rng=None):
    """Measure the line of sight from ``state`` to a ground ``target`` (x, z).

    The target is acquired when it is inside the acquisition range and the
    field-of-view cone around the velocity vector. Gaussian angle noise is
    drawn from ``rng`` (a numpy Generator) only when acquired and sigma > 0.
    """
    phi_el, phi_az, total, slant = _line_of_sight(
        float(state.x), float(state.y), float(state.z), float(state.theta),
        float(state.psi), float(target[0]), float(target[1]))
    acquired = slant <= config.seeker_acquisition_range and total <= config.seeker_fov_half_angle
    if not acquired:
        return SeekerMeasurement(False, slant_range=float(slant))
    sigma = config.seeker_noise_sigma
    if sigma > 0:
        if rng is None:
            raise ValueError("a noise source is required when seeker_noise_sigma > 0")
        phi_el += sigma * rng.standard_normal()
        phi_az += sigma * rng.standard_normal()
    return SeekerMeasurement(True, float(phi_el), float(phi_az), float(slant))


def next_phase(phase, state, measurement, config):
    return GuidancePhase(_next_phase(int(phase), float(state.y), float(state.theta),
                                     bool(measurement.acquired), config.pullup_altitude,
                                     config.cruise_altitude))
