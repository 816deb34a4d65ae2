"""
Packaging of calibrated device curves into network-ready activations.

A :class:`HardwareActivation` pairs an independently calibrated forward
curve and gradient curve behind one input map and two output maps:

    forward(z)  = fwd_scale  * eval(fwd,  v_center + v_scale * z) + fwd_offset
    backward(z) = grad_scale * eval(grad, v_center + v_scale * z) * upstream

The backward multiplier is the calibrated gradient curve, never the
analytic derivative of the forward evaluation - the two paths are fully
decoupled, which is the point of the hardware scheme.

Normalization anchors are chosen so that a hardware activation and its
ideal counterpart differ only in curve shape: the sigmoid forward maps to
the unit logistic (0.5 at z=0), its gradient peak maps to 0.25, the ReLU
forward maps to a unit-slope hinge with floor 0, and the step's high level
maps to 1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .calibration import (
    KIND_BELL,
    KIND_HINGE,
    KIND_LOGISTIC,
    KIND_STEP,
    ActivationCurve,
    CurveFit,
)

EVAL_FITTED = "fitted"
EVAL_LUT = "lut_linear_interp"

#: maximum forward-knee / gradient-step misalignment accepted for ReLU [V]
RELU_ANCHOR_TOL = 0.05


class CalibrationMismatchError(ValueError):
    """Forward and gradient calibrations disagree on their anchor point."""


@dataclass(frozen=True)
class HardwareActivation:
    """A forward/gradient curve pair with its normalization maps."""

    kind: str  # "sigmoid" | "relu"
    fwd: CurveFit
    grad: CurveFit
    v_center: float
    v_scale: float
    fwd_offset: float
    fwd_scale: float
    grad_offset: float
    grad_scale: float
    eval_mode: str = EVAL_FITTED
    fwd_curve: ActivationCurve | None = None
    grad_curve: ActivationCurve | None = None

    def __post_init__(self) -> None:
        if self.eval_mode not in (EVAL_FITTED, EVAL_LUT):
            raise ValueError(f"unknown eval_mode {self.eval_mode!r}")
        if not self.v_scale > 0:
            raise ValueError(f"v_scale must be positive, got {self.v_scale}")
        if not (self.fwd_scale > 0 and self.grad_scale > 0):
            raise ValueError("output map scales must be positive")
        if self.eval_mode == EVAL_LUT and (self.fwd_curve is None or self.grad_curve is None):
            raise ValueError("LUT evaluation requires stored sweep curves")
        # mapped-range sanity on the representation actually evaluated
        zs = np.linspace(-8.0, 8.0, 401)
        if self.kind == "sigmoid":
            f = self.forward(zs)
            if f.min() < -0.02 or f.max() > 1.02:
                raise ValueError(
                    f"mapped sigmoid forward range [{f.min():.3g}, {f.max():.3g}] "
                    "outside [-0.02, 1.02]"
                )
        else:
            g = self.backward(zs, np.ones_like(zs))
            if not 0.95 <= g.max() <= 1.05:
                raise ValueError(
                    f"mapped step high level {g.max():.3g} outside [0.95, 1.05]"
                )

    # -- evaluation -------------------------------------------------------

    def _eval(self, which: str, z):
        v = self.v_center + self.v_scale * np.asarray(z, dtype=float)
        if self.eval_mode == EVAL_LUT:
            curve = self.fwd_curve if which == "fwd" else self.grad_curve
            # linear interpolation with clamped extrapolation at both ends
            return np.interp(v, curve.v, curve.p)
        fit = self.fwd if which == "fwd" else self.grad
        return fit(v)

    def forward(self, z):
        """Elementwise activation output for pre-activation ``z``."""
        return self.fwd_scale * self._eval("fwd", z) + self.fwd_offset

    def backward(self, z, upstream):
        """Upstream gradient times the calibrated gradient curve at ``z``."""
        z = np.asarray(z, dtype=float)
        upstream = np.asarray(upstream, dtype=float)
        if z.shape != upstream.shape:
            raise ValueError(
                f"shape mismatch: z {z.shape} vs upstream {upstream.shape}"
            )
        return upstream * (self.grad_scale * self._eval("grad", z) + self.grad_offset)

    @property
    def name(self) -> str:
        return f"hw_{self.kind}"

    def with_eval_mode(self, eval_mode: str) -> "HardwareActivation":
        return replace(self, eval_mode=eval_mode)


def act_forward(h: HardwareActivation, z):
    return h.forward(z)


def act_backward(h: HardwareActivation, z, upstream):
    return h.backward(z, upstream)


def build_sigmoid_activation(
    fwd_fit: CurveFit,
    grad_fit: CurveFit,
    eval_mode: str = EVAL_FITTED,
    fwd_curve: ActivationCurve | None = None,
    grad_curve: ActivationCurve | None = None,
) -> HardwareActivation:
    """Assemble the sigmoid-mode activation from its two calibrated fits.

    The input map sends z=0 to the forward midpoint and one z unit to one
    logistic width, so the fitted forward evaluates to the unit logistic.
    The gradient's peak is scaled to 0.25 (the ideal sigmoid-gradient
    peak); its calibrated floor ratio is preserved, not zeroed.
    """
    if fwd_fit.kind != KIND_LOGISTIC or grad_fit.kind != KIND_BELL:
        raise ValueError(
            f"sigmoid activation needs ({KIND_LOGISTIC}, {KIND_BELL}) fits, "
            f"got ({fwd_fit.kind}, {grad_fit.kind})"
        )
    f = fwd_fit.as_dict()
    g = grad_fit.as_dict()
    peak = g["A"] / 4.0 + g["C"]
    return HardwareActivation(
        kind="sigmoid",
        fwd=fwd_fit,
        grad=grad_fit,
        v_center=f["v_mid"],
        v_scale=f["w"],
        fwd_offset=-f["C"] / f["A"],
        fwd_scale=1.0 / f["A"],
        grad_offset=0.0,
        grad_scale=0.25 / peak,
        eval_mode=eval_mode,
        fwd_curve=fwd_curve,
        grad_curve=grad_curve,
    )


def build_relu_activation(
    fwd_fit: CurveFit,
    grad_fit: CurveFit,
    eval_mode: str = EVAL_FITTED,
    fwd_curve: ActivationCurve | None = None,
    grad_curve: ActivationCurve | None = None,
) -> HardwareActivation:
    """Assemble the ReLU-mode activation from its two calibrated fits.

    Both curves are anchored at the junction turn-on by their drives'
    shared bias; a knee/threshold disagreement beyond 0.05 V means the two
    calibrations drifted apart and is rejected.  The forward maps to a
    unit-slope hinge with floor 0; the step's high level maps to 1 with
    the calibrated floor ratio preserved.
    """
    if fwd_fit.kind != KIND_HINGE or grad_fit.kind != KIND_STEP:
        raise ValueError(
            f"relu activation needs ({KIND_HINGE}, {KIND_STEP}) fits, "
            f"got ({fwd_fit.kind}, {grad_fit.kind})"
        )
    f = fwd_fit.as_dict()
    g = grad_fit.as_dict()
    if abs(f["v_knee"] - g["v_th"]) > RELU_ANCHOR_TOL:
        raise CalibrationMismatchError(
            f"forward knee {f['v_knee']:.4g} V and gradient threshold "
            f"{g['v_th']:.4g} V differ by more than {RELU_ANCHOR_TOL} V"
        )
    return HardwareActivation(
        kind="relu",
        fwd=fwd_fit,
        grad=grad_fit,
        v_center=f["v_knee"],
        v_scale=1.0 / f["slope"],
        fwd_offset=-f["floor"],
        fwd_scale=1.0,
        grad_offset=0.0,
        grad_scale=1.0 / g["high"],
        eval_mode=eval_mode,
        fwd_curve=fwd_curve,
        grad_curve=grad_curve,
    )


def save_activation(h: HardwareActivation, fwd_path, grad_path) -> None:
    """Persist an activation as its two fit files (calibration text format)."""
    h.fwd.to_text(fwd_path)
    h.grad.to_text(grad_path)


def load_activation(kind: str, fwd_path, grad_path) -> HardwareActivation:
    """Rebuild an activation from two fit files written by ``save_activation``."""
    fwd = CurveFit.from_text(fwd_path)
    grad = CurveFit.from_text(grad_path)
    if kind == "sigmoid":
        return build_sigmoid_activation(fwd, grad)
    if kind == "relu":
        return build_relu_activation(fwd, grad)
    raise ValueError(f"kind must be 'sigmoid' or 'relu', got {kind!r}")
