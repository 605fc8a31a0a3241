"""Standard atmosphere: temperature, pressure, density and speed of sound.

US Standard Atmosphere 1976, seven geopotential layers up to 86 km geometric.
Above 86 km the density and pressure decay exponentially with a fixed scale
height while the temperature is frozen at its 86 km value. Above 150 km the
model returns vacuum.

The ``_``-prefixed kernels are compiled with numba and shared with the flight
engine; the public functions validate their input and wrap the kernels.
"""
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

G0 = 9.80665
R_AIR = 287.053  # J/(kg K)
GAMMA_AIR = 1.4
EARTH_RADIUS_ATM = 6356766.0  # m, USSA-1976 geopotential convention

TOP_STANDARD = 86000.0  # m geometric
SCALE_HEIGHT = 7200.0  # m, exponential continuation above TOP_STANDARD
CEILING = 150000.0  # m geometric; vacuum above

LAYER_BASE = np.array([0.0, 11000.0, 20000.0, 32000.0, 47000.0, 51000.0, 71000.0, 84852.0])
LAYER_LAPSE = np.array([-0.0065, 0.0, 0.001, 0.0028, 0.0, -0.0028, -0.002])


def _layer_bases(lapse, base):
    temps = [288.15]
    press = [101325.0]
    for i in range(len(lapse)):
        dh = base[i + 1] - base[i]
        t0, lr = temps[i], lapse[i]
        if lr == 0.0:
            press.append(press[i] * math.exp(-G0 * dh / (R_AIR * t0)))
        else:
            press.append(press[i] * (t0 / (t0 + lr * dh)) ** (G0 / (R_AIR * lr)))
        temps.append(t0 + lr * dh)
    return np.array(temps), np.array(press)


LAYER_TEMPERATURE, LAYER_PRESSURE = _layer_bases(LAYER_LAPSE, LAYER_BASE)


@dataclass(frozen=True)
class AtmosphereSample:
    altitude_geometric: float  # m
    temperature: float  # K
    pressure: float  # Pa
    density: float  # kg/m^3
    speed_of_sound: float  # m/s


@njit(cache=True, nogil=True)
def _geopotential(h):
    return EARTH_RADIUS_ATM * h / (EARTH_RADIUS_ATM + h)


@njit(cache=True, nogil=True)
def _sound_speed(temperature):
    return math.sqrt(GAMMA_AIR * R_AIR * temperature)


@njit(cache=True, nogil=True)
def _layers(hgp):
    i = 0
    while i < 6 and hgp >= LAYER_BASE[i + 1]:
        i += 1
    t0 = LAYER_TEMPERATURE[i]
    lr = LAYER_LAPSE[i]
    dh = hgp - LAYER_BASE[i]
    if lr == 0.0:
        p = LAYER_PRESSURE[i] * math.exp(-G0 * dh / (R_AIR * t0))
    else:
        p = LAYER_PRESSURE[i] * (t0 / (t0 + lr * dh)) ** (G0 / (R_AIR * lr))
    return t0 + lr * dh, p


@njit(cache=True, nogil=True)
def _standard(h):
    """(temperature, pressure, density) at geometric altitude ``h`` >= 0."""
    if h <= TOP_STANDARD:
        t, p = _layers(_geopotential(h))
        return t, p, p / (R_AIR * t)
    t, p = _layers(_geopotential(TOP_STANDARD))
    if h > CEILING:
        return t, 0.0, 0.0
    p = p * math.exp(-(h - TOP_STANDARD) / SCALE_HEIGHT)
    return t, p, p / (R_AIR * t)


@njit(cache=True, nogil=True)
def _density(h):
    if h < 0.0:
        h = 0.0
    return _standard(h)[2]


def geopotential_altitude(geometric):
    """Geopotential altitude (m) for a geometric altitude (m)."""
    if geometric < 0:
        raise ValueError(f"geometric altitude must be >= 0, got {geometric}")
    return float(_geopotential(float(geometric)))


def speed_of_sound(temperature):
    """Speed of sound in air, ``sqrt(gamma * R * T)``."""
    if not temperature > 0:
        raise ValueError(f"temperature must be > 0 K, got {temperature}")
    return float(_sound_speed(float(temperature)))


def sample(altitude):
    """Atmosphere state at a geometric altitude in metres.

    Raises:
        ValueError: if ``altitude`` is negative or not finite.
    """
    if not (altitude >= 0 and math.isfinite(altitude)):
        raise ValueError(f"altitude must be finite and >= 0, got {altitude}")
    t, p, rho = _standard(float(altitude))
    return AtmosphereSample(float(altitude), float(t), float(p), float(rho),
                            float(_sound_speed(t)))


def density(altitude):
    """Standard-atmosphere density; the default density evaluator for dynamics."""
    return float(_density(float(altitude)))


def vacuum(altitude):
    return 0.0
