"""
Operating-point calibration, voltage sweeps and parametric curve fitting.

The four neuron modes map onto two calibration procedures:

* ``sigmoid`` / ``relu`` / ``relu_grad`` monitor the through port with the
  resonance thermally aligned to the supply wavelength
  (:func:`align_resonance`).
* ``sigmoid_grad`` monitors the drop port, thermally detuned until the
  zero-drive drop output falls to a threshold (:func:`detune_to_threshold`),
  placed on the side opposite the carrier shift so increasing drive sweeps
  the resonance across the supply wavelength.

A sweep samples the device response against the drive-input axis and the
result is fitted with a mode-specific parametric form:

======================  ==============  =======================================
mode                    fit kind        model
======================  ==============  =======================================
``sigmoid``             ``logistic``    A / (1 + exp(-(v - v_mid)/w)) + C
``sigmoid_grad``        ``logistic_bell``  A*s*(1-s) + C,  s = sigmoid((v - v_peak)/w)
``relu``                ``hinge``       floor + slope * max(v - v_knee, 0)
``relu_grad``           ``step``        low + (high-low) * sigmoid((v - v_th)/w_steep)
======================  ==============  =======================================
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit, minimize_scalar

from .device import (
    PORT_DROP,
    PORT_THROUGH,
    DriveConfig,
    MdmParams,
    device_response,
)

MODE_SIGMOID = "sigmoid"
MODE_SIGMOID_GRAD = "sigmoid_grad"
MODE_RELU = "relu"
MODE_RELU_GRAD = "relu_grad"
MODES = (MODE_SIGMOID, MODE_SIGMOID_GRAD, MODE_RELU, MODE_RELU_GRAD)

KIND_LOGISTIC = "logistic"
KIND_BELL = "logistic_bell"
KIND_HINGE = "hinge"
KIND_STEP = "step"

#: fit kind compatible with each sweep mode
KIND_FOR_MODE = {
    MODE_SIGMOID: KIND_LOGISTIC,
    MODE_SIGMOID_GRAD: KIND_BELL,
    MODE_RELU: KIND_HINGE,
    MODE_RELU_GRAD: KIND_STEP,
}

PARAM_NAMES = {
    KIND_LOGISTIC: ("A", "C", "v_mid", "w"),
    KIND_BELL: ("A", "C", "v_peak", "w"),
    KIND_HINGE: ("floor", "v_knee", "slope"),
    KIND_STEP: ("low", "high", "v_th", "w_steep"),
}

CURVE_CSV_HEADER = "v_volts,p_norm"

#: zero-drive drop-port threshold for sigmoid-gradient calibration,
#: as a fraction of the drop-port peak
DEFAULT_THETA_FRAC = 0.40


class CalibrationError(RuntimeError):
    """A calibration procedure could not reach its target."""


class InvalidThresholdError(ValueError):
    """Requested drop-port threshold is outside (0, d_max)."""


class FitError(RuntimeError):
    """Curve fit did not converge; carries the best attempt found."""

    def __init__(self, message: str, best: "CurveFit | None" = None):
        super().__init__(message)
        self.best = best


# ---------------------------------------------------------------------------
# fitted forms


def eval_logistic(v, A, C, v_mid, w):
    return A / (1.0 + np.exp(-(np.asarray(v, float) - v_mid) / w)) + C


def eval_bell(v, A, C, v_peak, w):
    s = 1.0 / (1.0 + np.exp(-(np.asarray(v, float) - v_peak) / w))
    return A * s * (1.0 - s) + C


def eval_hinge(v, floor, v_knee, slope):
    return floor + slope * np.maximum(np.asarray(v, float) - v_knee, 0.0)


def eval_step(v, low, high, v_th, w_steep):
    s = 1.0 / (1.0 + np.exp(-(np.asarray(v, float) - v_th) / w_steep))
    return low + (high - low) * s


_EVAL = {
    KIND_LOGISTIC: eval_logistic,
    KIND_BELL: eval_bell,
    KIND_HINGE: eval_hinge,
    KIND_STEP: eval_step,
}


# ---------------------------------------------------------------------------
# data types


@dataclass
class ActivationCurve:
    """A sampled drive-voltage -> normalized-power sweep.

    ``v`` is strictly increasing, ``p`` lies in [0, 1], and at least 8
    samples are required.  ``params``/``drive`` record the device state the
    sweep was taken with (may be None for curves imported from CSV).
    """

    v: np.ndarray
    p: np.ndarray
    mode: str
    params: MdmParams | None = None
    drive: DriveConfig | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.v, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if v.ndim != 1 or v.shape != p.shape:
            raise ValueError("v and p must be 1-D arrays of equal length")
        if len(v) < 8:
            raise ValueError(f"need at least 8 samples, got {len(v)}")
        if np.any(np.diff(v) <= 0):
            raise ValueError("v must be strictly increasing")
        if np.any((p < 0) | (p > 1)):
            raise ValueError("p must lie in [0, 1]")
        self.v = v
        self.p = p

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            f.write(self.dumps_csv())

    def dumps_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CURVE_CSV_HEADER + "\n")
        for vi, pi in zip(self.v, self.p):
            buf.write(f"{vi:.12g},{pi:.12g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path, mode: str) -> "ActivationCurve":
        with open(path) as f:
            header = f.readline().strip()
            if header != CURVE_CSV_HEADER:
                raise ValueError(
                    f"expected CSV header {CURVE_CSV_HEADER!r}, got {header!r}"
                )
            rows = [line.split(",") for line in f if line.strip()]
        v = np.array([float(r[0]) for r in rows])
        p = np.array([float(r[1]) for r in rows])
        return cls(v=v, p=p, mode=mode)


@dataclass
class CurveFit:
    """A fitted parametric form with its residual on the fitted samples."""

    kind: str
    params: tuple
    rmse: float

    def __post_init__(self) -> None:
        if self.kind not in PARAM_NAMES:
            raise ValueError(f"unknown fit kind {self.kind!r}")
        names = PARAM_NAMES[self.kind]
        if len(self.params) != len(names):
            raise ValueError(
                f"{self.kind} takes {len(names)} parameters {names}, "
                f"got {len(self.params)}"
            )
        self.params = tuple(float(x) for x in self.params)
        d = self.as_dict()
        if "A" in d and not d["A"] > 0:
            raise ValueError(f"amplitude A must be positive, got {d['A']}")
        if "w" in d and not d["w"] > 0:
            raise ValueError(f"width w must be positive, got {d['w']}")
        if "w_steep" in d and not d["w_steep"] > 0:
            raise ValueError(f"w_steep must be positive, got {d['w_steep']}")
        if not self.rmse >= 0:
            raise ValueError(f"rmse must be >= 0, got {self.rmse}")

    def as_dict(self) -> dict:
        return dict(zip(PARAM_NAMES[self.kind], self.params))

    def __call__(self, v):
        return _EVAL[self.kind](v, *self.params)

    def to_text(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.dumps())

    def dumps(self) -> str:
        lines = [f"kind={self.kind}"]
        lines += [f"{n}={x:.17g}" for n, x in self.as_dict().items()]
        lines.append(f"rmse={self.rmse:.17g}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, path) -> "CurveFit":
        fields = {}
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, val = line.partition("=")
                fields[key.strip()] = val.strip()
        kind = fields.pop("kind", None)
        if kind not in PARAM_NAMES:
            raise ValueError(f"fit file {path} has unknown kind {kind!r}")
        rmse = float(fields.pop("rmse"))
        params = tuple(float(fields[n]) for n in PARAM_NAMES[kind])
        return cls(kind=kind, params=params, rmse=rmse)


# ---------------------------------------------------------------------------
# calibration procedures


def align_resonance(p: MdmParams, d: DriveConfig) -> MdmParams:
    """Thermally tune the resonance onto the supply wavelength.

    Minimizes the through-port output at zero drive signal over the heater
    offset; the residual detune is below 1e-4 * fwhm.  Raises
    :class:`CalibrationError` when the required offset exceeds the
    +-5*fwhm tuning range.
    """
    if d.port != PORT_THROUGH:
        raise ValueError("align_resonance requires the through port")
    target = d.lambda_supply - p.lambda_res0
    if abs(target) > 5.0 * p.fwhm:
        raise CalibrationError(
            f"required thermal detune {target:.4g} nm exceeds the "
            f"+-{5.0 * p.fwhm:.4g} nm tuning range"
        )
    v0 = d.drive_voltage(0.0)

    def objective(detune: float) -> float:
        return float(device_response(v0, p.with_thermal_detune(detune), d))

    res = minimize_scalar(
        objective,
        bounds=(target - p.fwhm, target + p.fwhm),
        method="bounded",
        options={"xatol": 1e-6 * p.fwhm},
    )
    detune = float(res.x)
    if abs(detune - target) > 1e-4 * p.fwhm:
        raise CalibrationError(
            f"alignment residual {abs(detune - target):.3g} nm above tolerance"
        )
    return p.with_thermal_detune(detune)


def detune_to_threshold(p: MdmParams, d: DriveConfig, theta: float) -> MdmParams:
    """Thermally detune until the zero-drive drop output equals ``theta``.

    The offset is placed on the side opposite the carrier shift so that an
    increasing drive sweeps the resonance across the supply wavelength:

        detune = -shift_sign * (fwhm/2) * sqrt(d_max/theta - 1)
    """
    if d.port != PORT_DROP:
        raise ValueError("detune_to_threshold requires the drop port")
    if not 0 < theta < p.d_max:
        raise InvalidThresholdError(
            f"threshold must lie strictly inside (0, d_max={p.d_max}), got {theta}"
        )
    detune = -p.shift_sign * (p.fwhm / 2.0) * np.sqrt(p.d_max / theta - 1.0)
    # thermal offset is expressed relative to the supply wavelength
    thermal = (d.lambda_supply - p.lambda_res0) + detune
    return p.with_thermal_detune(thermal)


def sweep(
    p: MdmParams,
    d: DriveConfig,
    v_lo: float,
    v_hi: float,
    n: int,
    mode: str,
    noise: float = 0.0,
    seed: int | None = None,
) -> ActivationCurve:
    """Sample the device response on a uniform drive-signal grid.

    The drive front-end is applied to the grid (identity for the sigmoid
    modes, whose default gain is 1 and bias 0), so the curve's voltage axis
    is the neuron-signal axis of the mode.  Optional additive uniform noise
    of amplitude ``noise`` supports robustness tests; samples are clipped
    back into [0, 1].
    """
    if not v_lo < v_hi:
        raise ValueError(f"need v_lo < v_hi, got {v_lo} >= {v_hi}")
    if n < 8:
        raise ValueError(f"need at least 8 samples, got {n}")
    v = np.linspace(v_lo, v_hi, n)
    resp = device_response(d.drive_voltage(v), p, d)
    if noise:
        rng = np.random.Generator(np.random.PCG64(seed))
        resp = resp + rng.uniform(-noise, noise, size=resp.shape)
    resp = np.clip(resp, 0.0, 1.0)
    return ActivationCurve(v=v, p=resp, mode=mode, params=p, drive=d)


# ---------------------------------------------------------------------------
# fitting

_MAXFEV = 5000
_WIDTH_FACTORS = (0.3, 1.0, 3.0)


def _starts_for(kind: str, v: np.ndarray, p: np.ndarray) -> list[tuple]:
    lo, hi = float(p.min()), float(p.max())
    span = float(v[-1] - v[0])
    amp = max(hi - lo, 1e-6)
    starts = []
    if kind == KIND_LOGISTIC:
        half = lo + amp / 2.0
        v_mid = float(v[np.argmin(np.abs(p - half))])
        for f in _WIDTH_FACTORS:
            starts.append((amp, lo, v_mid, f * span / 10.0))
    elif kind == KIND_BELL:
        v_peak = float(v[np.argmax(p)])
        for f in _WIDTH_FACTORS:
            starts.append((4.0 * amp, lo, v_peak, f * span / 10.0))
    elif kind == KIND_HINGE:
        knee = float(v[np.argmin(np.abs(p - (lo + 0.1 * amp)))])
        for f in _WIDTH_FACTORS:
            starts.append((lo, knee, f * amp / max(span, 1e-9)))
    elif kind == KIND_STEP:
        half = lo + amp / 2.0
        v_th = float(v[np.argmin(np.abs(p - half))])
        for f in _WIDTH_FACTORS:
            starts.append((lo, hi, v_th, f * span / 50.0))
    return starts


def _canonicalize(kind: str, params: np.ndarray) -> tuple | None:
    """Normalize sign conventions; None when the solution is inadmissible."""
    q = [float(x) for x in params]
    if kind in (KIND_LOGISTIC, KIND_BELL):
        A, C, center, w = q
        if kind == KIND_BELL and w < 0:
            w = -w  # bell is symmetric in w
        if A <= 0 or w <= 0:
            return None
        return (A, C, center, w)
    if kind == KIND_HINGE:
        floor, knee, slope = q
        if slope <= 0:
            return None
        return (floor, knee, slope)
    low, high, v_th, w_steep = q
    if w_steep < 0:
        low, high, w_steep = high, low, -w_steep  # mirrored step
    if w_steep <= 0 or high <= low:
        return None
    return (low, high, v_th, w_steep)


def fit_curve(curve: ActivationCurve, kind: str | None = None) -> CurveFit:
    """Least-squares fit of the mode's parametric form to a sweep.

    Levenberg-Marquardt from a fixed list of data-driven starts; the best
    admissible solution by SSE wins (fixed reduction order, deterministic).
    Raises :class:`FitError` carrying the best attempt when no start
    converges to an admissible solution within the evaluation budget.
    """
    if kind is None:
        kind = KIND_FOR_MODE[curve.mode]
    expected = KIND_FOR_MODE[curve.mode]
    if kind != expected:
        raise ValueError(
            f"mode {curve.mode!r} is fitted with kind {expected!r}, got {kind!r}"
        )
    model = _EVAL[kind]
    v, p = curve.v, curve.p

    best: tuple | None = None
    best_sse = np.inf
    failures: list[str] = []
    for start in _starts_for(kind, v, p):
        try:
            popt, _ = curve_fit(model, v, p, p0=start, maxfev=_MAXFEV)
        except RuntimeError as exc:
            failures.append(str(exc))
            continue
        canon = _canonicalize(kind, popt)
        if canon is None:
            failures.append(f"inadmissible solution from start {start}")
            continue
        sse = float(np.sum((model(v, *canon) - p) ** 2))
        if sse < best_sse:
            best, best_sse = canon, sse

    if best is None:
        raise FitError(
            f"no {kind} fit converged within {_MAXFEV} evaluations per start: "
            + "; ".join(failures[:3]),
            best=None,
        )
    rmse = float(np.sqrt(best_sse / len(v)))
    return CurveFit(kind=kind, params=best, rmse=rmse)


# ---------------------------------------------------------------------------
# mode presets

#: drive front-ends of the four operating modes
DEFAULT_DRIVES = {
    MODE_SIGMOID: DriveConfig(port=PORT_THROUGH, gain=1.0, bias=0.0),
    MODE_SIGMOID_GRAD: DriveConfig(port=PORT_DROP, gain=1.0, bias=0.0),
    # low-gain mode: the clamp keeps the junction inside the quasi-linear
    # Lorentzian edge
    MODE_RELU: DriveConfig(port=PORT_THROUGH, gain=2.0, bias=0.9, v_clamp=1.4),
    # high-gain mode: the same bias keeps the turn-on point, the gain makes
    # the transition step-like on the signal axis
    MODE_RELU_GRAD: DriveConfig(port=PORT_THROUGH, gain=20.0, bias=0.9),
}

DEFAULT_SWEEP_POINTS = 101


def default_sweep_range(mode: str, p: MdmParams, d: DriveConfig) -> tuple[float, float]:
    """Default sweep window (drive-signal volts) for a mode."""
    if mode == MODE_SIGMOID:
        return (0.0, 2.5)
    if mode == MODE_SIGMOID_GRAD:
        # start at the turn-on point: below it the drop output sits at the
        # calibration threshold, which would bias the bell fit
        return (p.v_on, 2.5)
    # relu modes: a symmetric signal window reaching the junction clamp
    # (the unclamped high-gain mode reuses the same +-0.25 V window)
    hi = (d.v_clamp - d.bias) / d.gain if np.isfinite(d.v_clamp) else 0.25
    return (-hi, hi)


def calibrate_mode(
    mode: str,
    p: MdmParams | None = None,
    d: DriveConfig | None = None,
    theta: float | None = None,
) -> tuple[MdmParams, DriveConfig]:
    """Run a mode's thermal calibration; returns tuned params + drive."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if p is None:
        p = MdmParams()
    if d is None:
        d = DEFAULT_DRIVES[mode]
    if mode == MODE_SIGMOID_GRAD:
        if theta is None:
            theta = DEFAULT_THETA_FRAC * p.d_max
        return detune_to_threshold(p, d, theta), d
    return align_resonance(p, d), d


def sweep_mode(
    mode: str,
    p: MdmParams | None = None,
    d: DriveConfig | None = None,
    theta: float | None = None,
    v_lo: float | None = None,
    v_hi: float | None = None,
    n: int = DEFAULT_SWEEP_POINTS,
    noise: float = 0.0,
    seed: int | None = None,
) -> ActivationCurve:
    """Calibrate a mode and sweep it over its default (or given) window."""
    p_cal, d_cal = calibrate_mode(mode, p, d, theta)
    lo, hi = default_sweep_range(mode, p_cal, d_cal)
    if v_lo is not None:
        lo = v_lo
    if v_hi is not None:
        hi = v_hi
    return sweep(p_cal, d_cal, lo, hi, n, mode, noise=noise, seed=seed)
