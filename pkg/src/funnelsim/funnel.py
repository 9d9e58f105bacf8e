"""Performance funnels: boundary functions, derivative jets, and gains.

A funnel function phi defines the time-varying performance set
{(t, e) : phi(t) * ||e|| < 1} whose boundary is 1/phi.  The built-in
families keep phi and all its derivatives bounded and phi bounded away
from zero in the tail, which is what the closed-loop guarantees rely on.
"""

import math

import numpy as np

from .jets import Jet, jet_mul, jet_reciprocal, jet_sqnorm

__all__ = [
    "FunnelViolation",
    "FunnelFunction",
    "ExpShiftFunnel",
    "ConstFunnel",
    "CallbackFunnel",
    "FunnelStack",
    "phi_jet",
    "funnel_margin",
    "gain",
    "funnel_class_report",
    "DEFAULT_GUARD",
]

# Numerical guard on the gain denominator.  The exact closed loop never
# reaches the boundary, so a denominator at or below this value indicates
# discretization error and must fail loudly instead of returning a huge
# finite gain.
DEFAULT_GUARD = 1e-12


class FunnelViolation(RuntimeError):
    """Gain denominator 1 - phi(t)^2 ||e(t)||^2 fell below the guard."""

    def __init__(self, message, stage=None, t=None):
        super().__init__(message)
        self.stage = stage
        self.t = t


class FunnelFunction:
    """Base class: a funnel function evaluable as a derivative jet."""

    #: highest derivative order available, or None for unlimited
    max_order = None

    def jet(self, t, k):
        raise NotImplementedError

    def value(self, t):
        return float(self.jet(t, 0).value[0])

    def boundary(self, t):
        """Funnel radius 1/phi(t); infinite where phi vanishes."""
        v = self.value(t)
        return math.inf if v == 0.0 else 1.0 / v


class ExpShiftFunnel(FunnelFunction):
    """phi(t) = 1 / (a * exp(-b t) + c) with a >= 0, b > 0, c > 0.

    The parameter constraints make phi and every derivative bounded on
    t >= 0 and give lim inf phi = 1/c > 0, so membership in any funnel
    class is structural.  The boundary shrinks from a + c to c.
    """

    def __init__(self, a, b, c):
        if a < 0.0:
            raise ValueError("ExpShiftFunnel requires a >= 0")
        if b <= 0.0 or c <= 0.0:
            raise ValueError("ExpShiftFunnel requires b > 0 and c > 0")
        self.a = float(a)
        self.b = float(b)
        self.c = float(c)

    def jet(self, t, k):
        if t < 0.0:
            raise ValueError("funnel functions are defined for t >= 0")
        env = self.a * math.exp(-self.b * t)
        g = np.empty(k + 1)
        g[0] = env + self.c
        for j in range(1, k + 1):
            g[j] = env * (-self.b) ** j
        return jet_reciprocal(Jet(g))

    def __repr__(self):
        return f"ExpShiftFunnel(a={self.a}, b={self.b}, c={self.c})"


class ConstFunnel(FunnelFunction):
    """phi(t) = 1/lam for a fixed radius lam > 0."""

    def __init__(self, lam):
        if lam <= 0.0:
            raise ValueError("ConstFunnel requires lam > 0")
        self.lam = float(lam)

    def jet(self, t, k):
        if t < 0.0:
            raise ValueError("funnel functions are defined for t >= 0")
        return Jet.constant(1.0 / self.lam, k)

    def __repr__(self):
        return f"ConstFunnel(lam={self.lam})"


class CallbackFunnel(FunnelFunction):
    """Funnel given by callbacks for phi and its derivatives.

    ``derivs[j]`` evaluates the j-th derivative of phi.  This is the only
    form that may have phi(0) = 0 (an initially unbounded funnel); the
    caller is responsible for boundedness and a positive tail.
    """

    def __init__(self, derivs):
        derivs = tuple(derivs)
        if not derivs:
            raise ValueError("CallbackFunnel needs at least the value callback")
        self.derivs = derivs
        self.max_order = len(derivs) - 1

    def jet(self, t, k):
        if t < 0.0:
            raise ValueError("funnel functions are defined for t >= 0")
        if k > self.max_order:
            raise ValueError(
                f"funnel callbacks provide derivatives up to order {self.max_order}, "
                f"order {k} requested"
            )
        return Jet(np.array([float(d(t)) for d in self.derivs[: k + 1]]))


class FunnelStack:
    """The per-stage funnel functions (phi_0, ..., phi_{r-1}).

    Stage i must provide derivatives up to order r - i, which is automatic
    for the built-in families and checked for callback funnels.
    """

    def __init__(self, functions):
        functions = tuple(functions)
        if not functions:
            raise ValueError("FunnelStack needs at least one funnel function")
        r = len(functions)
        for i, f in enumerate(functions):
            needed = r - i
            if f.max_order is not None and f.max_order < needed:
                raise ValueError(
                    f"stage {i} funnel supports order {f.max_order}, "
                    f"but order {needed} is required for relative degree {r}"
                )
        self.functions = functions

    def __len__(self):
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def __getitem__(self, i):
        return self.functions[i]


def phi_jet(phi, t, k):
    """Jet (phi(t), ..., phi^(k)(t)) with analytic derivatives."""
    return phi.jet(t, k)


def funnel_margin(phi, t, e):
    """1 - phi(t)*||e||; positive exactly when (t, e) lies inside the funnel."""
    return 1.0 - phi.value(t) * float(np.linalg.norm(np.atleast_1d(e)))


def gain(phi, err, guard=DEFAULT_GUARD, stage=None, t=None):
    """Gain jet k = 1 / (1 - phi^2 ||e||^2) from a funnel jet and an error jet.

    Raises FunnelViolation when the denominator value is below ``guard``
    (or not finite), carrying the stage index for diagnostics.
    """
    k = min(phi.order, err.order)
    p = phi.truncated(k)
    phi_sq = jet_mul(p, p)
    den = Jet.constant(1.0, k) - jet_mul(phi_sq, jet_sqnorm(err.truncated(k)))
    d0 = float(den.value[0])
    if not math.isfinite(d0) or d0 < guard:
        where = "" if stage is None else f" at stage {stage}"
        when = "" if t is None else f", t={t:.6g}"
        raise FunnelViolation(
            f"funnel boundary hit{where}{when}: 1 - phi^2||e||^2 = {d0:.3e}",
            stage=stage,
            t=t,
        )
    return jet_reciprocal(den)


def funnel_class_report(phi, order, horizon=20.0, samples=2001):
    """Numeric membership probe for callback funnels.

    Samples phi and its derivatives on [0, horizon] and reports the
    observed sup-norms, whether phi is positive for t > 0, and the minimum
    of phi over the trailing fifth of the horizon as a lim-inf estimate.
    Built-in families satisfy the class conditions structurally; this is a
    sanity check for user-supplied callbacks.
    """
    ts = np.linspace(0.0, horizon, samples)
    vals = np.array([phi.jet(t, order).coeffs[:, 0] for t in ts])
    tail = vals[int(0.8 * samples):, 0]
    return {
        "sup_per_order": np.max(np.abs(vals), axis=0),
        "positive_after_zero": bool(np.all(vals[1:, 0] > 0.0)),
        "tail_liminf_estimate": float(np.min(tail)),
        "bounded": bool(np.all(np.isfinite(vals))),
    }
