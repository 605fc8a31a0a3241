"""Point-mass equations of motion over a spherical, non-rotating Earth.

The vehicle state is (t, x, y, z, V, theta, psi): downrange, altitude and
crossrange positions, speed, flight-path angle and heading. Guidance commands
a load factor U (lift in units of local g); the flight-path angle responds as

    dtheta/dt = (g / V) * (U - cos(theta)) + V * cos(theta) / (Re + y)

so that U = cos(theta) flies a straight line over a flat Earth and
U = V**2 / (g R) + cos(theta) flies an arc of radius R. The last term is the
Earth-curvature correction and can be switched off.

Lift is limited by what the air can supply: the command is scaled down so the
lift coefficient never exceeds ``cy_max``. Drag is a zero-lift part plus the
lift-induced part ``|L| / K`` where K is the lift-to-drag ratio.
"""
import math
from dataclasses import dataclass

from numba import njit

from . import atmosphere

G0 = 9.80665
EARTH_RADIUS = 6371000.0  # m, gravity and curvature radius


@dataclass(frozen=True)
class State:
    t: float = 0.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    V: float = 0.0
    theta: float = 0.0
    psi: float = 0.0


@dataclass(frozen=True)
class StateDerivative:
    dx: float
    dy: float
    dz: float
    dV: float
    dtheta: float
    dpsi: float
    dt: float = 1.0

    def is_finite(self):
        return all(math.isfinite(v) for v in
                   (self.dx, self.dy, self.dz, self.dV, self.dtheta, self.dpsi))


@dataclass(frozen=True)
class VehicleParams:
    """Aerodynamic point-mass vehicle.

    ``cx0`` and ``cy_max`` are not fixed by any published data for this
    vehicle class; they are free parameters of the drag and lift model.
    """
    mass: float = 1500.0  # kg
    ref_area: float = 2.0  # m^2
    lift_to_drag: float = 2.0
    cx0: float = 0.10
    cy_max: float = 1.2

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be > 0")
        if not self.ref_area > 0:
            raise ValueError("ref_area must be > 0")
        if not self.lift_to_drag > 0:
            raise ValueError("lift_to_drag must be > 0")
        if not self.cx0 >= 0:
            raise ValueError("cx0 must be >= 0")
        if not self.cy_max > 0:
            raise ValueError("cy_max must be > 0")


@dataclass(frozen=True)
class GuidanceCommand:
    u_vertical: float = 0.0
    u_lateral: float = 0.0


@njit(cache=True, nogil=True)
def _gravity(h):
    r = EARTH_RADIUS / (EARTH_RADIUS + h)
    return G0 * r * r


@njit(cache=True, nogil=True)
def _achieved_load(nv, nl, q, g, mass, ref_area, cy_max):
    """Scale (nv, nl) so the total lift coefficient stays within cy_max."""
    if nv == 0.0 and nl == 0.0:
        return 0.0, 0.0, False
    if q <= 0.0:
        return 0.0, 0.0, True
    cy = math.hypot(nv, nl) * mass * g / (q * ref_area)
    if cy > cy_max:
        f = cy_max / cy
        return nv * f, nl * f, True
    return nv, nl, False


@njit(cache=True, nogil=True)
def _rates_rho(y, V, theta, psi, nv, nl, rho, mass, ref_area, lift_to_drag,
               cx0, cy_max, curvature):
    """State rates for a given air density.

    Returns (dx, dy, dz, dV, dtheta, dpsi, nv_applied, nl_applied, saturated, q).
    Non-positive speed yields NaN rates so the integrator aborts.
    """
    nan = math.nan
    if not V > 0.0:
        return nan, nan, nan, nan, nan, nan, 0.0, 0.0, False, 0.0
    g = _gravity(y)
    q = 0.5 * rho * V * V
    nva, nla, sat = _achieved_load(nv, nl, q, g, mass, ref_area, cy_max)
    weight = mass * g
    drag = q * ref_area * cx0 + (abs(nva) + abs(nla)) * weight / lift_to_drag
    ct = math.cos(theta)
    st = math.sin(theta)
    dtheta = (g / V) * (nva - ct)
    if curvature:
        dtheta += V * ct / (EARTH_RADIUS + y)
    dpsi = (g / V) * nla / ct
    return (V * ct * math.cos(psi), V * st, V * ct * math.sin(psi),
            -drag / mass - g * st, dtheta, dpsi, nva, nla, sat, q)


@njit(cache=True, nogil=True)
def _rates(y, V, theta, psi, nv, nl, rho_scale, mass, ref_area, lift_to_drag,
           cx0, cy_max, curvature):
    rho = rho_scale * atmosphere._density(y)
    return _rates_rho(y, V, theta, psi, nv, nl, rho, mass, ref_area,
                      lift_to_drag, cx0, cy_max, curvature)


def gravity(altitude):
    """Inverse-square gravitational acceleration (m/s^2) at an altitude."""
    if altitude < 0:
        raise ValueError(f"altitude must be >= 0, got {altitude}")
    return float(_gravity(float(altitude)))


def dynamic_pressure(altitude, speed, density=atmosphere.density):
    return 0.5 * density(altitude) * speed * speed


def achieved_load(command, dynamic_pressure, vehicle, altitude=0.0):
    """Lift-limited version of ``command``.

    Returns ``(applied, saturated)``. In vacuum any non-zero command
    saturates to zero lift.
    """
    if dynamic_pressure < 0:
        raise ValueError("dynamic_pressure must be >= 0")
    nv, nl, sat = _achieved_load(float(command.u_vertical), float(command.u_lateral),
                                 float(dynamic_pressure), _gravity(float(altitude)),
                                 vehicle.mass, vehicle.ref_area, vehicle.cy_max)
    return GuidanceCommand(float(nv), float(nl)), bool(sat)


def derivatives(state, command, vehicle, density=atmosphere.density, curvature=True):
    """Time derivative of ``state`` under a held guidance command.

    ``density`` maps altitude to air density; pass ``atmosphere.vacuum`` for a
    lift- and drag-free coast.
    """
    rho = density(max(state.y, 0.0))
    r = _rates_rho(float(state.y), float(state.V), float(state.theta), float(state.psi),
                   float(command.u_vertical), float(command.u_lateral), float(rho),
                   vehicle.mass, vehicle.ref_area, vehicle.lift_to_drag,
                   vehicle.cx0, vehicle.cy_max, bool(curvature))
    return StateDerivative(*(float(v) for v in r[:6]))


def specific_energy(state):
    """Kinetic plus inverse-square potential energy per unit mass."""
    return 0.5 * state.V ** 2 - G0 * EARTH_RADIUS ** 2 / (EARTH_RADIUS + state.y)
