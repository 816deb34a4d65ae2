"""
Add-drop micro-disk modulator (MDM) and the electronic front-end of the
optical-electrical-optical neuron.

The device model is an add-drop resonator with Lorentzian line shapes on
both ports and a carrier-induced resonance shift that switches on at the
PN-junction turn-on voltage:

    shift(v) = sign * a * (v - v_on)^b     for v > v_on, else 0
    T(d)     = 1 - (1 - t_min) / (1 + (2d/fwhm)^2)     (through port)
    D(d)     = d_max / (1 + (2d/fwhm)^2)               (drop port)

where d is the detuning between the instantaneous resonance and the supply
wavelength.  All wavelengths are in nm, voltages in V, transmissions are
power fractions in [0, 1].

Everything here is an immutable value type plus pure functions, so the
model is safe for unrestricted concurrent reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

PORT_THROUGH = "through"
PORT_DROP = "drop"
PORTS = (PORT_THROUGH, PORT_DROP)

#: Default supply wavelength, nm.
LAMBDA_SUPPLY = 1539.15


@dataclass(frozen=True)
class MdmParams:
    """Physical parameters of the micro-disk modulator.

    Parameters
    ----------
    lambda_res0 : float
        Resonance wavelength at zero drive before thermal tuning [nm].
    fwhm : float
        Full linewidth of the resonance [nm].
    t_min : float
        Through-port transmission at resonance, in [0, 1).
    d_max : float
        Drop-port peak transmission, in (0, 1].
    v_on : float
        Junction turn-on voltage [V]; no resonance shift below it.
    shift_coeff : float
        Carrier-shift magnitude a [nm / V^shift_exp].
    shift_exp : float
        Carrier-shift exponent b (dimensionless, > 0).
    shift_sign : int
        -1 for a blue shift under forward drive, +1 for red.
    thermal_detune : float
        Heater-set resonance offset [nm]; set once by calibration.
    """

    lambda_res0: float = LAMBDA_SUPPLY
    fwhm: float = 0.10
    t_min: float = 0.05
    d_max: float = 0.85
    v_on: float = 0.9
    shift_coeff: float = 0.40
    shift_exp: float = 1.6
    shift_sign: int = -1
    thermal_detune: float = 0.0

    def __post_init__(self) -> None:
        if not self.fwhm > 0:
            raise ValueError(f"fwhm must be positive, got {self.fwhm}")
        if not 0 <= self.t_min < 1:
            raise ValueError(f"t_min must be in [0, 1), got {self.t_min}")
        if not 0 < self.d_max <= 1:
            raise ValueError(f"d_max must be in (0, 1], got {self.d_max}")
        if self.t_min + self.d_max > 1:
            # passive device: cannot emit more power than injected at resonance
            raise ValueError(
                f"t_min + d_max must not exceed 1, got {self.t_min + self.d_max}"
            )
        if not self.v_on > 0:
            raise ValueError(f"v_on must be positive, got {self.v_on}")
        if not self.shift_coeff >= 0:
            raise ValueError(f"shift_coeff must be >= 0, got {self.shift_coeff}")
        if not self.shift_exp > 0:
            raise ValueError(f"shift_exp must be positive, got {self.shift_exp}")
        if self.shift_sign not in (-1, 1):
            raise ValueError(f"shift_sign must be -1 or +1, got {self.shift_sign}")

    def with_thermal_detune(self, detune: float) -> "MdmParams":
        """Return a copy with the heater offset replaced."""
        return replace(self, thermal_detune=float(detune))


@dataclass(frozen=True)
class DriveConfig:
    """Electronic front-end of one neuron operating mode.

    The drive maps a neuron signal u (weighted-sum units, volts) onto the
    junction voltage ``bias + gain * u``; the junction voltage is clamped
    at ``v_clamp`` inside :func:`device_response`.
    """

    port: str
    gain: float = 1.0
    bias: float = 0.0
    v_clamp: float = math.inf
    lambda_supply: float = LAMBDA_SUPPLY

    def __post_init__(self) -> None:
        if self.port not in PORTS:
            raise ValueError(f"port must be one of {PORTS}, got {self.port!r}")
        if not self.gain > 0:
            raise ValueError(f"gain must be positive, got {self.gain}")
        if not self.v_clamp > self.bias:
            raise ValueError(
                f"v_clamp ({self.v_clamp}) must exceed bias ({self.bias})"
            )

    def drive_voltage(self, signal):
        """Junction drive voltage for a neuron signal (pre-clamp)."""
        return self.bias + self.gain * np.asarray(signal, dtype=float)


@dataclass(frozen=True)
class NeuronInputs:
    """Optical input powers and intensity-modulator weights of one neuron."""

    x: np.ndarray
    w: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if x.shape != w.shape:
            raise ValueError(f"x and w must have equal length, got {x.shape} vs {w.shape}")
        if np.any(x < 0):
            raise ValueError("optical input powers must be non-negative")
        if np.any((w < 0) | (w > 1)):
            raise ValueError("weights must lie in [0, 1]")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", w)


def resonance_shift(v, p: MdmParams):
    """Carrier-induced resonance shift [nm] at junction voltage ``v``.

    Zero at and below the turn-on voltage, ``sign * a * (v - v_on)^b``
    above it; continuous at ``v = v_on``.
    """
    v = np.asarray(v, dtype=float)
    over = np.maximum(v - p.v_on, 0.0)
    return p.shift_sign * p.shift_coeff * over**p.shift_exp


def through_transmission(detune, p: MdmParams):
    """Through-port power transmission at detuning ``detune`` [nm]."""
    x = 2.0 * np.asarray(detune, dtype=float) / p.fwhm
    return 1.0 - (1.0 - p.t_min) / (1.0 + x * x)


def drop_transmission(detune, p: MdmParams):
    """Drop-port power transmission at detuning ``detune`` [nm]."""
    x = 2.0 * np.asarray(detune, dtype=float) / p.fwhm
    return p.d_max / (1.0 + x * x)


def device_response(v_in, p: MdmParams, d: DriveConfig):
    """Optical output power fraction for junction voltage ``v_in``.

    The junction voltage is clamped at ``d.v_clamp``; the resulting
    detuning against the supply wavelength selects a point on the
    monitored port's line shape.  Deterministic and total.
    """
    v_eff = np.minimum(np.asarray(v_in, dtype=float), d.v_clamp)
    detune = (p.lambda_res0 + p.thermal_detune + resonance_shift(v_eff, p)) - d.lambda_supply
    if d.port == PORT_THROUGH:
        return through_transmission(detune, p)
    return drop_transmission(detune, p)


def neuron_drive(n: NeuronInputs, d: DriveConfig) -> float:
    """Drive voltage produced by the photodiode-summed weighted inputs.

    Photocurrent is taken proportional to the weighted optical power with
    unity responsivity folded into the electronic gain.
    """
    return float(d.bias + d.gain * np.dot(n.w, n.x))
