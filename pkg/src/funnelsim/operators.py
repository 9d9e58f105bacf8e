"""Causal internal-dynamics operators and their numerical certification.

The internal dynamics of the plant are driven by a causal operator T that
maps the stacked output trajectory zeta = (y, dy/dt, ..., y^(r-1)) to a
signal w(t).  Four interchangeable realizations are provided:

* ConvolutionOperator -- w(t) = sum_k a_k yhat(t - t_k) + int_0^t yhat(t-s) g(s) ds
  for a measure made of finite atoms plus an integrable density (optionally
  with an inverse-square-root factor at zero, removed exactly by the
  substitution s = sigma^2).
* TransportPDE -- upwind discretization of z_t = c z_xi + load(xi) y(t) on a
  truncated domain, output z(t, 0).  Cross-validates the convolution form.
* LTIInternal -- eta' = Q eta + R zeta, w = S eta.
* ComposedOperator -- F(passthrough(zeta)(t), inner(zeta)(t), inner2(zeta)(t))
  for a memoryless/delay passthrough and inner dynamics blocks.

All operators share a push/commit/output protocol: ``push`` records an input
sample, ``commit`` integrates internal state forward, ``output`` is a pure
query (so a rejected integrator step never corrupts operator state).
``advance`` bundles push+commit for simple drivers.  The probe functions at
the bottom exercise causality, bounded-input bounded-output behaviour, and
local Lipschitz continuity on randomized trials.
"""

import copy
import logging
import math
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "HistoryGap",
    "NoRelativeDegree",
    "GridDensity",
    "FunctionDensity",
    "expsqrt_density",
    "load_density",
    "Measure",
    "HistoryBuffer",
    "InternalOperator",
    "ConvolutionOperator",
    "TransportPDE",
    "LTIInternal",
    "LinearObservation",
    "ComposedOperator",
    "convolve",
    "pde_step",
    "lti_step",
    "LinearTriple",
    "ByrnesIsidoriForm",
    "bi_transform",
    "chain_realization",
    "bi_internal_operator",
    "drive",
    "probe_causality",
    "causality_suite",
    "probe_bibo",
    "probe_lipschitz",
    "CausalityReport",
    "BiboReport",
    "LipschitzReport",
]


class HistoryGap(RuntimeError):
    """An operator was queried at a time its input history does not cover."""


class NoRelativeDegree(ValueError):
    """All Markov parameters <A^j b, c> vanish below tolerance."""


# --------------------------------------------------------------------------
# quadrature helpers (composite Simpson)
# --------------------------------------------------------------------------

def _simpson_nodes(a, b, panels):
    """Nodes and weights of composite Simpson with ``panels`` panels on [a, b]."""
    n = 2 * panels
    xs = np.linspace(a, b, n + 1)
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= (b - a) / (3.0 * n)
    return xs, w


def _simpson(fn, a, b, panels):
    if b <= a:
        return 0.0
    xs, w = _simpson_nodes(a, b, panels)
    return float(np.dot(w, fn(xs)))


# --------------------------------------------------------------------------
# densities and measures
# --------------------------------------------------------------------------

class GridDensity:
    """Density tabulated on a strictly increasing grid, linear between nodes."""

    singular = False

    def __init__(self, xi, values):
        xi = np.asarray(xi, dtype=float)
        values = np.asarray(values, dtype=float)
        if xi.ndim != 1 or xi.shape != values.shape or xi.size < 2:
            raise ValueError("grid density needs matching 1-D xi and value arrays")
        if np.any(np.diff(xi) <= 0.0):
            raise ValueError("grid density abscissae must be strictly increasing")
        if xi[0] < 0.0:
            raise ValueError("density support must lie in xi >= 0")
        self.xi = xi
        self.values = values
        self.support = (float(xi[0]), float(xi[-1]))

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = np.interp(s, self.xi, self.values, left=0.0, right=0.0)
        return out


class FunctionDensity:
    """Closed-form density g, or g(s) = smooth(s)/sqrt(s) when ``singular``.

    ``support`` bounds the numerically relevant part of the support; for
    unbounded integrable tails it only affects total-variation reporting.
    """

    def __init__(self, smooth, singular=False, support=None):
        self.smooth = smooth
        self.singular = bool(singular)
        self.support = (0.0, support) if support is not None else (0.0, math.inf)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        vals = np.asarray(self.smooth(s), dtype=float)
        if self.singular:
            with np.errstate(divide="ignore"):
                vals = vals / np.sqrt(s)
        return vals


def _exp_decay(s):
    return np.exp(-np.asarray(s, dtype=float))


def expsqrt_density():
    """The density exp(-s)/sqrt(s): integrable, not square integrable."""
    return FunctionDensity(_exp_decay, singular=True)


def load_density(path):
    """Read a two-column (xi, g(xi)) text file into a GridDensity."""
    data = np.loadtxt(path, dtype=float)
    data = np.atleast_2d(data)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError(f"{path}: expected two numeric columns (xi, g)")
    return GridDensity(data[:, 0], data[:, 1])


@dataclass
class Measure:
    """Borel measure on t >= 0: finite atoms plus an optional density.

    Atoms are (location, weight) pairs with distinct, sorted locations.
    The total variation (atom mass plus integrated |density|) must be
    finite; it is estimated numerically on a truncated support.
    """

    atoms: tuple = ()
    density: object = None
    panels_per_unit: int = 64

    def __post_init__(self):
        atoms = tuple((float(t), float(a)) for t, a in self.atoms)
        locs = [t for t, _ in atoms]
        if any(t < 0.0 for t in locs):
            raise ValueError("atom locations must be >= 0")
        if sorted(locs) != locs or len(set(locs)) != len(locs):
            raise ValueError("atom locations must be distinct and sorted")
        if not all(math.isfinite(a) for _, a in atoms):
            raise ValueError("atom weights must be finite")
        self.atoms = atoms
        tv = self.total_variation()
        if not math.isfinite(tv):
            raise ValueError("measure has unbounded total variation")

    @classmethod
    def dirac(cls, location=0.0, weight=1.0):
        return cls(atoms=((location, weight),))

    def _density_panels(self, lo, hi):
        return max(1, int(math.ceil(self.panels_per_unit * (hi - lo))))

    def density_mass(self, lo, hi, absolute=False):
        """Integral of the density (or |density|) over [lo, hi]."""
        g = self.density
        if g is None:
            return 0.0
        lo = max(lo, g.support[0])
        hi = min(hi, g.support[1]) if math.isfinite(g.support[1]) else hi
        if hi <= lo:
            return 0.0
        if getattr(g, "singular", False):
            # s = sigma^2 removes the 1/sqrt(s) factor exactly
            a, b = math.sqrt(lo), math.sqrt(hi)
            panels = self._density_panels(a, b)

            def fn(sig):
                v = np.asarray(g.smooth(sig * sig), dtype=float)
                return np.abs(v) if absolute else v

            return 2.0 * _simpson(fn, a, b, panels)
        panels = self._density_panels(lo, hi)

        def fn(s):
            v = np.asarray(g(s), dtype=float)
            return np.abs(v) if absolute else v

        return _simpson(fn, lo, hi, panels)

    def total_variation(self, upper=None):
        """Atom mass plus integrated |density| on [0, upper] (truncated)."""
        tv = sum(abs(a) for _, a in self.atoms)
        if self.density is not None:
            hi = self.density.support[1]
            if not math.isfinite(hi):
                hi = 60.0  # tail bound for reporting; convolution never truncates
            if upper is not None:
                hi = min(hi, upper)
            tv += self.density_mass(0.0, hi, absolute=True)
        return tv

    def tail_mass(self, beyond):
        """|density| mass past ``beyond`` plus atoms located there."""
        tail = sum(abs(a) for t, a in self.atoms if t > beyond)
        if self.density is not None:
            hi = self.density.support[1]
            if not math.isfinite(hi):
                hi = beyond + 60.0
            tail += self.density_mass(beyond, hi, absolute=True)
        return tail


# --------------------------------------------------------------------------
# input history
# --------------------------------------------------------------------------

class HistoryBuffer:
    """Timestamped input samples with piecewise-linear interpolation.

    Queries left of the first sample hold the first value (pre-history
    seeding covers negative times when the plant has memory).  Queries past
    the newest sample extend the last segment's slope, which keeps the
    interpolant causal while letting integrator stages look one step ahead.
    """

    def __init__(self, dim):
        self.dim = dim
        self._ts = np.empty(64)
        self._vals = np.empty((64, dim))
        self._n = 0

    def __len__(self):
        return self._n

    @property
    def times(self):
        return self._ts[: self._n]

    @property
    def values(self):
        return self._vals[: self._n]

    def clear(self):
        self._n = 0

    def push(self, t, value):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        if value.shape != (self.dim,):
            raise ValueError(f"expected a sample of dimension {self.dim}")
        n = self._n
        if n and abs(t - self._ts[n - 1]) <= 1e-12 * max(1.0, abs(t)):
            self._vals[n - 1] = value
            return
        if n and t < self._ts[n - 1]:
            raise ValueError("history samples must arrive in time order")
        if n == self._ts.shape[0]:
            self._ts = np.concatenate([self._ts, np.empty_like(self._ts)])
            self._vals = np.concatenate([self._vals, np.empty_like(self._vals)])
        self._ts[n] = t
        self._vals[n] = value
        self._n = n + 1

    def eval(self, times):
        """Interpolated samples at ``times`` (shape (k, dim))."""
        if self._n == 0:
            raise HistoryGap("operator queried before any input sample exists")
        times = np.atleast_1d(np.asarray(times, dtype=float))
        ts = self._ts[: self._n]
        vals = self._vals[: self._n]
        if self._n == 1:
            return np.repeat(vals[:1], times.shape[0], axis=0)
        idx = np.clip(np.searchsorted(ts, times, side="right") - 1, 0, self._n - 2)
        t0 = ts[idx]
        t1 = ts[idx + 1]
        frac = (times - t0) / (t1 - t0)
        # below the first sample: hold; past the last: extend the last slope
        frac = np.maximum(frac, 0.0)
        out = vals[idx] + frac[:, None] * (vals[idx + 1] - vals[idx])
        return out


# --------------------------------------------------------------------------
# operator protocol
# --------------------------------------------------------------------------

class InternalOperator:
    """Causal operator advanced against a sampled input prefix.

    Subclasses set ``input_dim``/``output_dim`` and implement the protocol.
    Determinism contract: the same sample prefix yields bitwise-identical
    output, and output(t) depends only on samples at times <= t.
    """

    input_dim = 1
    output_dim = 1

    def reset(self):
        raise NotImplementedError

    def push(self, t, zeta):
        raise NotImplementedError

    def commit(self, t_next):
        raise NotImplementedError

    def output(self, t):
        raise NotImplementedError

    def advance(self, t_prev, t_next, samples):
        """Record ``samples`` (iterable of (t, zeta) on [t_prev, t_next]) and
        integrate through t_next."""
        for ts, zs in samples:
            self.push(ts, zs)
        self.commit(t_next)

    def clone(self):
        """Fresh operator with identical configuration and initial state."""
        other = copy.deepcopy(self)
        other.reset()
        return other

    def _check_zeta(self, zeta):
        zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
        if zeta.shape != (self.input_dim,):
            raise ValueError(
                f"operator expects input of dimension {self.input_dim}, "
                f"got shape {zeta.shape}"
            )
        return zeta


class ConvolutionOperator(InternalOperator):
    """w(t) = (measure * yhat)(t) for the first input component yhat.

    Atoms are applied exactly on the interpolated history; the density part
    is integrated with composite Simpson, after the substitution s = sigma^2
    when the density carries the inverse-square-root factor.  The full
    sample history is kept: measures with unbounded support forbid
    windowing, and horizons are desk scale.
    """

    def __init__(self, measure, input_dim=1, panels_per_unit=64):
        self.measure = measure
        self.input_dim = int(input_dim)
        self.output_dim = 1
        self.panels_per_unit = int(panels_per_unit)
        self._buf = HistoryBuffer(1)
        self._committed = 0.0

    def reset(self):
        self._buf.clear()
        self._committed = 0.0

    def push(self, t, zeta):
        zeta = self._check_zeta(zeta)
        self._buf.push(t, zeta[:1])

    def commit(self, t_next):
        self._committed = max(self._committed, t_next)

    def _yhat(self, times):
        return self._buf.eval(times)[:, 0]

    def convolve(self, t):
        """Convolution value at time t (scalar)."""
        if len(self._buf) == 0:
            raise HistoryGap("convolution queried before any input sample exists")
        total = 0.0
        for loc, wgt in self.measure.atoms:
            if loc <= t + 1e-12:
                total += wgt * float(self._yhat(np.array([t - loc]))[0])
        g = self.measure.density
        if g is not None and t > 0.0:
            lo = max(0.0, g.support[0])
            hi = min(t, g.support[1]) if math.isfinite(g.support[1]) else t
            if hi > lo:
                if getattr(g, "singular", False):
                    a, b = math.sqrt(lo), math.sqrt(hi)
                    panels = max(1, int(math.ceil(self.panels_per_unit * (b - a))))
                    sig, w = _simpson_nodes(a, b, panels)
                    vals = 2.0 * np.asarray(g.smooth(sig * sig), dtype=float)
                    vals *= self._yhat(t - sig * sig)
                    total += float(np.dot(w, vals))
                else:
                    panels = max(1, int(math.ceil(self.panels_per_unit * (hi - lo))))
                    s, w = _simpson_nodes(lo, hi, panels)
                    vals = np.asarray(g(s), dtype=float) * self._yhat(t - s)
                    total += float(np.dot(w, vals))
        return total

    def output(self, t):
        return np.array([self.convolve(t)])


class TransportPDE(InternalOperator):
    """Explicit upwind scheme for z_t = c z_xi + load(xi) y(t), output z(t, 0).

    The grid is chosen so the Courant number c*dt/dxi is at most 1 for the
    integrator's base step; at exactly 1 the advection part is exact and the
    remaining error is the first-order source coupling.  The value z = 0 is
    imposed at the truncation boundary, so mass of the measure beyond the
    domain width never enters; ``tail_mass`` quantifies that truncation.
    """

    def __init__(self, measure, speed, width, cell, dt_max, input_dim=1):
        if speed <= 0.0:
            raise ValueError("transport speed must be positive")
        if cell <= 0.0 or width <= cell:
            raise ValueError("need 0 < cell < width")
        courant = speed * dt_max / cell
        if courant > 1.0 + 1e-12:
            raise ValueError(
                f"CFL violation: c*dt/dxi = {courant:.4g} > 1 "
                f"(speed={speed}, dt={dt_max}, cell={cell})"
            )
        self.measure = measure
        self.speed = float(speed)
        self.width = float(width)
        self.cell = float(cell)
        self.dt_max = float(dt_max)
        self.input_dim = int(input_dim)
        self.output_dim = 1
        self.n = int(round(width / cell))
        self.xi = np.arange(self.n) * self.cell
        self.load = self._build_load()
        self.z = np.zeros(self.n)
        self._t = 0.0
        self._pending = 0.0

    def _build_load(self):
        # A deposit at load index j reaches the output after j+1 steps (at
        # Courant number 1), so index j must carry the measure's mass around
        # delay (j+1)*cell; otherwise every contribution arrives one step
        # late and the scheme never converges on atoms.
        load = np.zeros(self.n)
        g = self.measure.density
        nodes = self.xi + self.cell
        if g is not None:
            if getattr(g, "singular", False):
                # cell-averaged mass keeps the deposit finite near xi = 0
                # (point sampling diverges there); index 0 also absorbs the
                # sub-cell mass below cell/2
                half = 0.5 * self.cell
                for i in range(self.n):
                    lo = 0.0 if i == 0 else nodes[i] - half
                    hi = nodes[i] + half
                    load[i] = self.measure.density_mass(lo, hi) / self.cell
            else:
                load = np.asarray(g(nodes), dtype=float).copy()
        for loc, wgt in self.measure.atoms:
            idx = max(0, int(round(loc / self.cell)) - 1)
            if idx < self.n:
                load[idx] += wgt / self.cell
            else:
                log.warning(
                    "atom at %.4g lies beyond the truncated domain [0, %.4g) "
                    "and is dropped from the transport realization",
                    loc,
                    self.width,
                )
        return load

    def reset(self):
        self.z[:] = 0.0
        self._t = 0.0
        self._pending = 0.0

    def push(self, t, zeta):
        zeta = self._check_zeta(zeta)
        self._pending = float(zeta[0])

    def step(self, y_value, dt):
        """One upwind step with held input value ``y_value``."""
        nu = self.speed * dt / self.cell
        if nu > 1.0 + 1e-12:
            raise ValueError(f"CFL violation in step: c*dt/dxi = {nu:.4g} > 1")
        z = self.z
        shifted = np.empty_like(z)
        shifted[:-1] = z[1:]
        shifted[-1] = 0.0  # truncation boundary
        self.z = z + nu * (shifted - z) + dt * self.load * y_value

    def commit(self, t_next):
        interval = t_next - self._t
        if interval <= 0.0:
            return
        nsub = max(1, int(math.ceil(interval / self.dt_max - 1e-9)))
        h = interval / nsub
        for _ in range(nsub):
            self.step(self._pending, h)
        self._t = t_next

    def output(self, t):
        # value held within the current step; the scheme's own O(dxi) error
        # dominates the resulting O(dt) coupling error
        return np.array([self.z[0]])

    def tail_mass(self):
        return self.measure.tail_mass(self.width)


class LTIInternal(InternalOperator):
    """Finite-dimensional internal dynamics eta' = Q eta + R zeta, w = S eta."""

    def __init__(self, Q, R, S, eta0=None):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        R = np.asarray(R, dtype=float)
        if R.ndim == 1:
            R = R[:, None]
        S = np.asarray(S, dtype=float)
        if S.ndim == 1:
            S = S[None, :]
        n = Q.shape[0]
        if Q.shape != (n, n) or R.shape[0] != n or S.shape[1] != n:
            raise ValueError("inconsistent Q/R/S dimensions")
        self.Q = Q
        self.R = R
        self.S = S
        self.eta0 = np.zeros(n) if eta0 is None else np.asarray(eta0, dtype=float).copy()
        if self.eta0.shape != (n,):
            raise ValueError("eta0 has wrong dimension")
        self.input_dim = R.shape[1]
        self.output_dim = S.shape[0]
        self.eta = self.eta0.copy()
        self._t = 0.0
        self._pending = np.zeros(self.input_dim)
        # substep cap keeps the classical one-step method in its stability region
        self._qscale = max(1e-12, float(np.linalg.norm(Q, 2)))

    def reset(self):
        self.eta = self.eta0.copy()
        self._t = 0.0
        self._pending = np.zeros(self.input_dim)

    def push(self, t, zeta):
        self._pending = self._check_zeta(zeta).copy()

    def step(self, zeta_value, dt):
        """One classical 4th-order step with held input ``zeta_value``."""
        forcing = self.R @ np.atleast_1d(zeta_value)

        def f(eta):
            return self.Q @ eta + forcing

        k1 = f(self.eta)
        k2 = f(self.eta + 0.5 * dt * k1)
        k3 = f(self.eta + 0.5 * dt * k2)
        k4 = f(self.eta + dt * k3)
        self.eta = self.eta + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def commit(self, t_next):
        interval = t_next - self._t
        if interval <= 0.0:
            return
        nsub = max(1, int(math.ceil(interval * self._qscale / 0.5)))
        h = interval / nsub
        for _ in range(nsub):
            self.step(self._pending, h)
        self._t = t_next

    def output(self, t):
        return self.S @ self.eta


class LinearObservation:
    """F(z1, z2, z3) = W1 z1 + W2 z2 (+ W3 z3), the built-in observation map."""

    def __init__(self, W1, W2, W3=None):
        self.W1 = np.atleast_2d(np.asarray(W1, dtype=float))
        self.W2 = np.atleast_2d(np.asarray(W2, dtype=float))
        self.W3 = None if W3 is None else np.atleast_2d(np.asarray(W3, dtype=float))
        if self.W1.shape[0] != self.W2.shape[0]:
            raise ValueError("observation blocks disagree on output dimension")
        self.output_dim = self.W1.shape[0]

    def __call__(self, z1, z2, z3):
        out = self.W1 @ z1 + self.W2 @ z2
        if self.W3 is not None:
            out = out + self.W3 @ z3
        return out


class ComposedOperator(InternalOperator):
    """T(zeta)(t) = F(passthrough(zeta)(t), inner(zeta)(t), inner2(zeta)(t)).

    ``passthrough`` is "identity", ("delay", h), or a pointwise smooth map.
    ``inner`` (and optionally ``inner2``) are internal operators fed the same
    input; when ``inner2`` is omitted the third observation channel repeats
    the second.  ``observe`` is a LinearObservation or a callable with
    continuous first derivatives (supply ``output_dim`` for callables).
    """

    def __init__(self, passthrough, inner, observe, inner2=None, input_dim=None,
                 output_dim=None):
        self.passthrough = passthrough
        self.inner = inner
        self.inner2 = inner2
        self.observe = observe
        self.input_dim = int(input_dim if input_dim is not None else inner.input_dim)
        if inner.input_dim != self.input_dim:
            raise ValueError("inner operator input dimension mismatch")
        if inner2 is not None and inner2.input_dim != self.input_dim:
            raise ValueError("second inner operator input dimension mismatch")
        if isinstance(observe, LinearObservation):
            self.output_dim = observe.output_dim
        elif output_dim is not None:
            self.output_dim = int(output_dim)
        else:
            raise ValueError("callable observation maps need an explicit output_dim")
        self._buf = HistoryBuffer(self.input_dim)

    def reset(self):
        self._buf.clear()
        self.inner.reset()
        if self.inner2 is not None:
            self.inner2.reset()

    def push(self, t, zeta):
        zeta = self._check_zeta(zeta)
        self._buf.push(t, zeta)
        self.inner.push(t, zeta)
        if self.inner2 is not None:
            self.inner2.push(t, zeta)

    def commit(self, t_next):
        self.inner.commit(t_next)
        if self.inner2 is not None:
            self.inner2.commit(t_next)

    def _passthrough_value(self, t):
        tag = self.passthrough
        if tag == "identity" or tag is None:
            return self._buf.eval(np.array([t]))[0]
        if isinstance(tag, tuple) and tag[0] == "delay":
            return self._buf.eval(np.array([t - tag[1]]))[0]
        if callable(tag):
            return np.atleast_1d(np.asarray(tag(self._buf.eval(np.array([t]))[0])))
        raise ValueError(f"unknown passthrough spec: {tag!r}")

    def output(self, t):
        z1 = self._passthrough_value(t)
        z2 = self.inner.output(t)
        z3 = self.inner2.output(t) if self.inner2 is not None else z2
        return np.atleast_1d(np.asarray(self.observe(z1, z2, z3), dtype=float))


def convolve(op, t):
    """Convolution output of a ConvolutionOperator at time t (scalar)."""
    return op.convolve(t)


def pde_step(op, y_value, dt):
    """Advance a TransportPDE by one upwind step with held input."""
    op.step(y_value, dt)


def lti_step(op, zeta_value, dt):
    """Advance an LTIInternal by one classical 4th-order step with held input."""
    op.step(zeta_value, dt)


# --------------------------------------------------------------------------
# linear triples and the relative-degree normal form
# --------------------------------------------------------------------------

@dataclass
class LinearTriple:
    """State-space system x' = A x + b u, y = <x, c>."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = A.shape[0]
        if A.shape != (n, n) or b.shape != (n,) or c.shape != (n,):
            raise ValueError("inconsistent A/b/c dimensions")
        self.A, self.b, self.c = A, b, c

    @property
    def n(self):
        return self.A.shape[0]


@dataclass
class ByrnesIsidoriForm:
    """Output-chain/internal-dynamics decomposition of a LinearTriple.

    In coordinates z = transform @ x the first r entries are
    (y, y', ..., y^(r-1)) and the rest is eta, with

        y^(r) = sum_i p[i] y^(i) + S eta + gamma u,
        eta'  = Q eta + R y.
    """

    r: int
    gamma: float
    p: np.ndarray          # chain coefficients, shape (r,)
    Q: np.ndarray          # (n-r, n-r)
    R: np.ndarray          # (n-r,)
    S: np.ndarray          # (n-r,)
    transform: np.ndarray  # (n, n), z = transform @ x


def bi_transform(sys, tol_gamma=1e-9):
    """Decompose a LinearTriple into output chain plus internal dynamics.

    The relative degree r is the first index with <A^(r-1) b, c> above
    ``tol_gamma`` in magnitude (earlier Markov parameters must vanish).
    The chain coordinates are w_i = <A^i x, c>; the internal coordinates
    eta = V x use rows V spanning the annihilator of {b, Ab, ..., A^(r-1)b},
    which is exactly the choice that makes eta' depend on y alone.

    Raises NoRelativeDegree when every Markov parameter is below tolerance.
    """
    A, b, c = sys.A, sys.b, sys.c
    n = sys.n
    # Markov parameters m_j = <A^j b, c>
    v = b.copy()
    markov = []
    for _ in range(n):
        markov.append(float(np.dot(c, v)))
        v = A @ v
    r = None
    for j, m in enumerate(markov):
        if abs(m) > tol_gamma:
            r = j + 1
            break
    if r is None:
        raise NoRelativeDegree(
            f"all Markov parameters below tol_gamma={tol_gamma:.1e}"
        )
    gamma = markov[r - 1]

    # chain rows W[i] = c^T A^i and input chain B_r = [b, Ab, ..., A^(r-1) b]
    W = np.empty((r, n))
    row = c.copy()
    for i in range(r):
        W[i] = row
        row = A.T @ row
    Br = np.empty((n, r))
    col = b.copy()
    for j in range(r):
        Br[:, j] = col
        col = A @ col

    if r < n:
        # orthonormal basis of the annihilator of the input chain
        _, _, vh = np.linalg.svd(Br.T)
        V = vh[r:]
    else:
        V = np.empty((0, n))
    T = np.vstack([W, V])
    Tinv = np.linalg.inv(T)
    X_eta = Tinv[:, r:]

    Ar_row = W[r - 1] @ A  # c^T A^r
    p = Ar_row @ Br @ np.linalg.inv(W @ Br)
    S = Ar_row @ X_eta
    Q = V @ A @ X_eta
    R = (V @ (A @ Br[:, r - 1])) / gamma if r < n else np.empty(0)
    return ByrnesIsidoriForm(
        r=r,
        gamma=gamma,
        p=np.asarray(p, dtype=float).reshape(r),
        Q=Q,
        R=np.asarray(R, dtype=float).reshape(max(n - r, 0)),
        S=np.asarray(S, dtype=float).reshape(max(n - r, 0)),
        transform=T,
    )


def chain_realization(bi):
    """LinearTriple of the transformed system in (chain, eta) coordinates.

    Simulating this triple under the same input reproduces the output of
    the original system (the coordinate change is exact).
    """
    r, n_eta = bi.r, bi.Q.shape[0]
    n = r + n_eta
    A = np.zeros((n, n))
    for i in range(r - 1):
        A[i, i + 1] = 1.0
    A[r - 1, :r] = bi.p
    A[r - 1, r:] = bi.S
    if n_eta:
        A[r:, 0] = bi.R
        A[r:, r:] = bi.Q
    b = np.zeros(n)
    b[r - 1] = bi.gamma
    c = np.zeros(n)
    c[0] = 1.0
    return LinearTriple(A, b, c)


def bi_internal_operator(bi):
    """Internal operator realizing w = p . (y, ..., y^(r-1)) + S eta.

    Feeding this composed operator the stacked output trajectory turns the
    transformed system into the standard plant form y^(r) = w + gamma u.
    """
    r, n_eta = bi.r, bi.Q.shape[0]
    if n_eta == 0:
        raise ValueError("system has no internal dynamics (r = n)")
    R_pad = np.zeros((n_eta, r))
    R_pad[:, 0] = bi.R  # internal dynamics are driven by y alone
    inner = LTIInternal(bi.Q, R_pad, bi.S[None, :])
    observe = LinearObservation(bi.p[None, :], np.ones((1, 1)))
    return ComposedOperator("identity", inner, observe)


# --------------------------------------------------------------------------
# operator probes
# --------------------------------------------------------------------------

def drive(op, times, signal):
    """Stream a signal through an operator, returning outputs at ``times``.

    ``signal`` maps t to the input vector.  Each output is queried right
    after the sample at the same time is pushed and before the state is
    integrated further, so outputs never see future samples.
    """
    times = np.asarray(times, dtype=float)
    out = np.empty((times.shape[0], op.output_dim))
    for j, t in enumerate(times):
        op.push(t, signal(t))
        out[j] = op.output(t)
        if j + 1 < times.shape[0]:
            op.commit(times[j + 1])
    return out


def _as_signal(fn_or_value, dim):
    if callable(fn_or_value):
        def sig(t):
            return np.atleast_1d(np.asarray(fn_or_value(t), dtype=float))
        return sig
    vec = np.atleast_1d(np.asarray(fn_or_value, dtype=float))
    return lambda t: vec


def _random_smooth(rng, dim, bound, horizon):
    """Random bounded harmonic mix with sup-norm scaled to ``bound``."""
    n_modes = 4
    amps = rng.uniform(-1.0, 1.0, size=(n_modes, dim))
    omegas = rng.uniform(0.3, 6.0, size=n_modes)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=n_modes)
    grid = np.linspace(0.0, horizon, 257)
    vals = np.zeros((grid.size, dim))
    for a, w, p in zip(amps, omegas, phases):
        vals += np.sin(np.outer(grid, w) + p) * a
    peak = np.max(np.abs(vals))
    scale = bound / peak if peak > 0.0 else 0.0

    def sig(t):
        x = np.zeros(dim)
        for a, w, p in zip(amps, omegas, phases):
            x += a * math.sin(w * t + p)
        return scale * x

    return sig


@dataclass
class CausalityReport:
    trials: int
    passes: int
    max_prefix_deviation: float
    counterexample_seed: int = -1

    @property
    def ok(self):
        return self.passes == self.trials


@dataclass
class BiboReport:
    c1: float
    trials: int
    c2_estimate: float
    worst_family: str


@dataclass
class LipschitzReport:
    estimate: float
    pairs_used: int
    trials: int


def _causality_deviation(op, zeta1, zeta2, t, horizon, dt):
    """Max output deviation on [0, t) for inputs streamed on a common grid."""
    times = np.arange(0.0, horizon + 0.5 * dt, dt)
    s1 = _as_signal(zeta1, op.input_dim)
    s2 = _as_signal(zeta2, op.input_dim)
    o1 = drive(op.clone(), times, s1)
    o2 = drive(op.clone(), times, s2)
    mask = times < t - 1e-12
    if not np.any(mask):
        return 0.0, 1.0
    dev = float(np.max(np.abs(o1[mask] - o2[mask])))
    scale = 1.0 + float(np.max(np.abs(o1[mask])))
    return dev, scale


def probe_causality(op, zeta1, zeta2, t, horizon=None, dt=0.05, tol=1e-12):
    """True when two inputs agreeing before t produce equal outputs on [0, t).

    Both signals are streamed through fresh clones of ``op`` on a common
    grid; outputs at grid points strictly before t are compared.  Equal
    prefixes must give bitwise-equal outputs, so the tolerance only guards
    against harmless last-bit drift.
    """
    horizon = t if horizon is None else horizon
    dev, scale = _causality_deviation(op, zeta1, zeta2, t, horizon, dt)
    return dev <= tol * scale


def causality_suite(op, trials=100, seed=0, horizon=4.0, dt=0.05, tol=1e-12):
    """Randomized causality trials: perturb inputs after a split time only."""
    rng = np.random.default_rng(seed)
    passes = 0
    worst = 0.0
    bad_seed = -1
    for trial in range(trials):
        base = _random_smooth(rng, op.input_dim, 1.0, horizon)
        bump = _random_smooth(rng, op.input_dim, 1.0, horizon)
        t_split = float(rng.uniform(0.35, 0.75)) * horizon

        def perturbed(t, base=base, bump=bump, t_split=t_split):
            if t < t_split:
                return base(t)
            return base(t) + (t - t_split) * bump(t) + 0.5

        dev, scale = _causality_deviation(op, base, perturbed, t_split, horizon, dt)
        worst = max(worst, dev)
        if dev <= tol * scale:
            passes += 1
        elif bad_seed < 0:
            bad_seed = trial
    return CausalityReport(
        trials=trials, passes=passes, max_prefix_deviation=worst,
        counterexample_seed=bad_seed,
    )


def probe_bibo(op, c1=1.0, trials=20, seed=0, horizon=8.0, dt=0.02):
    """Empirical bound on the output sup-norm over bounded random inputs.

    Families: constants, steps, harmonic mixes, and smoothed noise, all with
    sup-norm at most c1.  Returns the largest observed output norm; this is
    an estimate, never a proof.
    """
    rng = np.random.default_rng(seed)
    times = np.arange(0.0, horizon + 0.5 * dt, dt)
    dim = op.input_dim
    best = 0.0
    worst_family = "none"

    def consider(family, signal):
        nonlocal best, worst_family
        out = drive(op.clone(), times, signal)
        peak = float(np.max(np.abs(out))) if out.size else 0.0
        if peak > best:
            best = peak
            worst_family = family

    consider("const", lambda t: np.full(dim, c1))
    consider("const", lambda t: np.full(dim, -c1))
    for _ in range(trials):
        kind = rng.integers(0, 3)
        if kind == 0:
            consider("harmonics", _random_smooth(rng, dim, c1, horizon))
        elif kind == 1:
            t_flip = float(rng.uniform(0.1, 0.9)) * horizon
            lo = rng.uniform(-c1, c1, size=dim)
            hi = rng.uniform(-c1, c1, size=dim)
            consider("step", lambda t, lo=lo, hi=hi, tf=t_flip: lo if t < tf else hi)
        else:
            raw = _random_smooth(rng, dim, 1.0, horizon)
            off = rng.uniform(-0.5, 0.5, size=dim)
            consider(
                "noise",
                lambda t, raw=raw, off=off: np.clip(raw(t) + off, -c1, c1),
            )
    return BiboReport(c1=c1, trials=trials + 2, c2_estimate=best,
                      worst_family=worst_family)


def probe_lipschitz(op, xi=None, t=1.0, tau=1.0, delta=0.5, trials=30, seed=0,
                    dt=0.02):
    """Empirical local Lipschitz constant around a frozen input prefix.

    Pairs of inputs agree with ``xi`` up to time t and stay within delta of
    xi(t) afterwards; the estimate is the largest ratio of output to input
    sup-deviation on [t, t+tau].  Pairs with zero input deviation are
    skipped.
    """
    rng = np.random.default_rng(seed)
    dim = op.input_dim
    if xi is None:
        xi = _random_smooth(rng, dim, 1.0, t)
    xi = _as_signal(xi, dim)
    anchor = xi(t)
    times = np.arange(0.0, t + tau + 0.5 * dt, dt)
    tail = times >= t - 1e-12

    def make_suffix():
        bump = _random_smooth(rng, dim, 1.0, tau)
        amp = float(rng.uniform(0.2, 0.95)) * delta

        def sig(s):
            if s < t:
                return xi(s)
            # ramp keeps the signal continuous at the split and within delta
            ramp = min(1.0, (s - t) / max(tau * 0.2, 1e-9))
            return anchor + amp * ramp * bump(s - t)

        return sig

    best = 0.0
    used = 0
    for _ in range(trials):
        s1, s2 = make_suffix(), make_suffix()
        grid_in1 = np.array([s1(s) for s in times])
        grid_in2 = np.array([s2(s) for s in times])
        den = float(np.max(np.abs(grid_in1[tail] - grid_in2[tail])))
        if den <= 1e-14:
            continue
        o1 = drive(op.clone(), times, s1)
        o2 = drive(op.clone(), times, s2)
        num = float(np.max(np.abs(o1[tail] - o2[tail])))
        best = max(best, num / den)
        used += 1
    return LipschitzReport(estimate=best, pairs_used=used, trials=trials)
