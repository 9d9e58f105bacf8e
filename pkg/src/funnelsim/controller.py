"""The funnel controller: gain recursion and reference signals.

The feedback law is static in (t, e, de/dt, ..., e^(r-1)): each stage
builds a gain from its funnel and error, then forms the next stage error
e_{i+1} = d(e_i)/dt + k_i e_i.  All derivatives are resolved with jet
arithmetic, so the controller needs only the error jet and the analytic
funnel/reference derivatives; it keeps no state between calls.
"""

import math
from dataclasses import dataclass

import numpy as np

from .funnel import DEFAULT_GUARD, FunnelStack, gain
from .jets import Jet, jet_add, jet_scale

__all__ = [
    "ReferenceSignal",
    "CosReference",
    "ConstReference",
    "PolyReference",
    "CallbackReference",
    "reference_jet",
    "ControllerConfig",
    "ControllerOutput",
    "controller_eval",
]


class ReferenceSignal:
    """Base class: a reference trajectory evaluable as a derivative jet."""

    max_order = None
    dim = 1

    def jet(self, t, k):
        raise NotImplementedError

    def value(self, t):
        return self.jet(t, 0).value


class CosReference(ReferenceSignal):
    """y_ref(t) = amplitude * cos(omega t + phase)."""

    def __init__(self, amplitude=1.0, omega=1.0, phase=0.0):
        self.amplitude = float(amplitude)
        self.omega = float(omega)
        self.phase = float(phase)

    def jet(self, t, k):
        c = np.empty(k + 1)
        for j in range(k + 1):
            c[j] = (
                self.amplitude
                * self.omega**j
                * math.cos(self.omega * t + self.phase + j * math.pi / 2.0)
            )
        return Jet(c)


class ConstReference(ReferenceSignal):
    def __init__(self, value):
        self._value = np.atleast_1d(np.asarray(value, dtype=float))
        self.dim = self._value.shape[0]

    def jet(self, t, k):
        return Jet.constant(self._value, k)


class PolyReference(ReferenceSignal):
    """Polynomial reference with ascending coefficients: sum c_j t^j."""

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.ndim != 1 or self.coeffs.size == 0:
            raise ValueError("PolyReference needs a 1-D coefficient list")

    def jet(self, t, k):
        out = np.empty(k + 1)
        der = np.polynomial.Polynomial(self.coeffs)
        for j in range(k + 1):
            out[j] = der(t)
            der = der.deriv()
        return Jet(out)


class CallbackReference(ReferenceSignal):
    """Reference given by callbacks for the value and each derivative."""

    def __init__(self, derivs, dim=1):
        derivs = tuple(derivs)
        if not derivs:
            raise ValueError("CallbackReference needs at least the value callback")
        self.derivs = derivs
        self.max_order = len(derivs) - 1
        self.dim = dim

    def jet(self, t, k):
        if k > self.max_order:
            raise ValueError(
                f"reference callbacks provide derivatives up to order "
                f"{self.max_order}, order {k} requested"
            )
        rows = [np.atleast_1d(np.asarray(d(t), dtype=float)) for d in self.derivs[: k + 1]]
        return Jet(np.vstack(rows))


def reference_jet(ref, t, k):
    """Jet of the reference with exact analytic derivatives up to order k."""
    return ref.jet(t, k)


@dataclass
class ControllerConfig:
    """Relative degree (stack length), funnel stack, and the gain guard."""

    funnels: FunnelStack
    guard: float = DEFAULT_GUARD

    @property
    def r(self):
        return len(self.funnels)


@dataclass
class ControllerOutput:
    u: np.ndarray           # feedback input, shape (m,)
    stage_errors: np.ndarray  # e_i values, shape (r, m)
    gains: np.ndarray       # k_i values, shape (r,)


def controller_eval(cfg, t, e0_jet):
    """Evaluate the funnel feedback at time t from the tracking-error jet.

    ``e0_jet`` must carry e = y - y_ref with derivatives up to order r-1.
    Stage i uses a funnel jet of order r-1-i, so each recursion step
    e_{i+1} = d(e_i)/dt + k_i e_i loses exactly one derivative order and
    the final stage uses plain values: u = -k_{r-1} e_{r-1}.

    Raises FunnelViolation (with the stage index) as soon as any stage
    denominator 1 - phi_i^2 ||e_i||^2 drops below the guard.
    """
    r = cfg.r
    if e0_jet.order < r - 1:
        raise ValueError(
            f"error jet of order {e0_jet.order} cannot drive a relative-degree-{r} "
            f"controller (order {r - 1} needed)"
        )
    e = e0_jet.truncated(r - 1)
    errors = np.empty((r, e.dim))
    gains = np.empty(r)
    u = None
    for i in range(r):
        k_order = r - 1 - i
        phi = cfg.funnels[i].jet(t, k_order)
        kj = gain(phi, e, guard=cfg.guard, stage=i, t=t)
        errors[i] = e.value
        gains[i] = kj.value[0]
        if i == r - 1:
            u = -gains[i] * e.value
        else:
            e = jet_add(e.derivative(), jet_scale(kj, e))
    return ControllerOutput(u=u, stage_errors=errors, gains=gains)
