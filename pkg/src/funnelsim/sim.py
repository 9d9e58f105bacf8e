"""Closed-loop simulation: plant, fixed-step integration, runtime certificates.

The plant state is the stack (y, y', ..., y^(r-1)); its top derivative is
y^(r) = f(d, w) + Gain(d, w) u with w produced by the internal operator fed
the stacked state.  The controller is evaluated at every integrator stage;
any funnel violation rejects the step, which is retried at half the size
(the exact solution never touches the boundary, so an excursion is
discretization error and refining the step is the faithful response).

Each accepted trace row therefore satisfies every stage funnel strictly,
and the run report collects the boundedness witnesses that a successful
run must exhibit: sup-norms of the input, the gains and the state, and the
minimum distance to each funnel boundary.
"""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .controller import controller_eval
from .funnel import FunnelViolation
from .jets import Jet
from .operators import TransportPDE

log = logging.getLogger(__name__)

__all__ = [
    "GainDegenerate",
    "InadmissibleInitialCondition",
    "StepCollapse",
    "ZeroDisturbance",
    "SinDisturbance",
    "StepDisturbance",
    "AffineDrift",
    "ConstantGain",
    "Plant",
    "Scenario",
    "TraceRecord",
    "RunReport",
    "Verdict",
    "rhs",
    "simulate",
    "verify_run",
]


class GainDegenerate(RuntimeError):
    """The symmetric part of the input gain matrix lost positive definiteness."""


class InadmissibleInitialCondition(RuntimeError):
    """Some stage error starts on or outside its funnel boundary."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class StepCollapse(RuntimeError):
    """Step halving was exhausted; carries the partial trace and report."""

    def __init__(self, message, trace, report):
        super().__init__(message)
        self.trace = trace
        self.report = report


# --------------------------------------------------------------------------
# disturbances, drift and gain maps
# --------------------------------------------------------------------------

class ZeroDisturbance:
    def __init__(self, dim=1):
        self.dim = dim
        self._zero = np.zeros(dim)

    def __call__(self, t):
        return self._zero


class SinDisturbance:
    def __init__(self, amplitude=1.0, omega=1.0, phase=0.0):
        self.amplitude = float(amplitude)
        self.omega = float(omega)
        self.phase = float(phase)
        self.dim = 1

    def __call__(self, t):
        return np.array([self.amplitude * math.sin(self.omega * t + self.phase)])


class StepDisturbance:
    def __init__(self, amplitude=1.0, switch_time=1.0):
        self.amplitude = float(amplitude)
        self.switch_time = float(switch_time)
        self.dim = 1

    def __call__(self, t):
        return np.array([self.amplitude if t >= self.switch_time else 0.0])


class AffineDrift:
    """f(d, w) = F0 + D d + W w with matrices of matching shape."""

    def __init__(self, F0, D, W):
        self.F0 = np.atleast_1d(np.asarray(F0, dtype=float))
        self.D = np.atleast_2d(np.asarray(D, dtype=float))
        self.W = np.atleast_2d(np.asarray(W, dtype=float))
        m = self.F0.shape[0]
        if self.D.shape[0] != m or self.W.shape[0] != m:
            raise ValueError("drift blocks disagree on output dimension")

    def __call__(self, d, w):
        return self.F0 + self.D @ d + self.W @ w


class ConstantGain:
    """Constant input gain matrix; its symmetric part must be positive definite."""

    def __init__(self, matrix):
        G = np.atleast_2d(np.asarray(matrix, dtype=float))
        if G.shape[0] != G.shape[1]:
            raise ValueError("gain matrix must be square")
        eig_min = float(np.min(np.linalg.eigvalsh(G + G.T)))
        if eig_min <= 0.0:
            raise GainDegenerate(
                f"gain matrix symmetric part has eigenvalue {eig_min:.3e} <= 0"
            )
        self.matrix = G

    def __call__(self, d, w):
        return self.matrix


def _gain_matrix(gain_map, d, w):
    if isinstance(gain_map, ConstantGain):
        return gain_map.matrix  # checked once at construction
    G = np.atleast_2d(np.asarray(gain_map(d, w), dtype=float))
    eig_min = float(np.min(np.linalg.eigvalsh(G + G.T)))
    if eig_min <= 0.0:
        raise GainDegenerate(
            f"gain matrix symmetric part has eigenvalue {eig_min:.3e} <= 0"
        )
    return G


# --------------------------------------------------------------------------
# plant and scenario
# --------------------------------------------------------------------------

@dataclass
class Plant:
    """Relative degree, output dimension, maps, internal operator and memory.

    ``initial_state`` stacks (y(0), y'(0), ..., y^(r-1)(0)) as rows; when
    the memory ``h`` is positive, ``history`` maps t in [-h, 0] to the same
    stack and is sampled into the operator as read-only pre-history.
    """

    r: int
    m: int
    drift: object
    gain_map: object
    disturbance: object
    operator: object
    initial_state: np.ndarray
    h: float = 0.0
    history: object = None

    def __post_init__(self):
        self.initial_state = np.asarray(self.initial_state, dtype=float).reshape(
            self.r, self.m
        )
        if self.operator.input_dim != self.r * self.m:
            raise ValueError(
                f"operator expects input dimension {self.operator.input_dim}, "
                f"but the stacked state has dimension {self.r * self.m}"
            )
        if self.h < 0.0:
            raise ValueError("memory h must be >= 0")
        if self.h > 0.0 and self.history is None:
            raise ValueError("plants with memory h > 0 need an initial history")


@dataclass
class Scenario:
    plant: Plant
    controller: object           # ControllerConfig
    reference: object            # ReferenceSignal
    t_end: float
    dt: float
    integrator: str = "rk4"      # "euler" or "rk4"
    decimation: int = 1
    max_halvings: int = 20

    def __post_init__(self):
        if self.integrator not in ("euler", "rk4"):
            raise ValueError("integrator must be 'euler' or 'rk4'")
        if self.dt <= 0.0 or self.t_end <= 0.0:
            raise ValueError("dt and t_end must be positive")
        if self.decimation < 1:
            raise ValueError("decimation must be >= 1")


@dataclass
class TraceRecord:
    t: float
    y: np.ndarray
    y_ref: np.ndarray
    u: np.ndarray
    w: np.ndarray
    e_norms: np.ndarray   # per-stage ||e_i||
    gains: np.ndarray     # per-stage k_i
    radii: np.ndarray     # per-stage funnel radius 1/phi_i(t)


@dataclass
class RunReport:
    t_end: float
    t_final: float
    steps: int
    rejected_steps: int
    sup_u: float
    sup_gains: np.ndarray
    sup_state: np.ndarray   # per derivative order, sup ||y^(i)||
    min_margins: np.ndarray  # per stage, min (1/phi_i - ||e_i||)
    min_margin_times: np.ndarray
    wall_time: float = 0.0

    @property
    def horizon_reached(self):
        return self.t_final >= self.t_end - 1e-9

    def as_text(self):
        lines = [
            f"t_end={self.t_end:.17g}",
            f"t_final={self.t_final:.17g}",
            f"horizon_reached={str(self.horizon_reached).lower()}",
            f"steps={self.steps}",
            f"rejected_steps={self.rejected_steps}",
            f"sup_u={self.sup_u:.17g}",
            f"wall_time_s={self.wall_time:.3f}",
        ]
        for i, g in enumerate(self.sup_gains):
            lines.append(f"sup_k{i}={g:.17g}")
        for i, s in enumerate(self.sup_state):
            lines.append(f"sup_y_deriv{i}={s:.17g}")
        for i, (m, tm) in enumerate(zip(self.min_margins, self.min_margin_times)):
            lines.append(f"min_margin{i}={m:.17g}")
            lines.append(f"min_margin{i}_at_t={tm:.17g}")
        return "\n".join(lines) + "\n"


def rhs(plant, t, state, u):
    """Top derivative y^(r) = f(d(t), w) + Gain(d(t), w) u at time t.

    The internal operator must have been advanced to (or pushed through) t
    so its output query is valid.
    """
    w = plant.operator.output(t)
    d = plant.disturbance(t)
    return plant.drift(d, w) + _gain_matrix(plant.gain_map, d, w) @ u


def verify_run(trace, report, u_cap=1e3, gain_cap=1e3):
    """Check the boundedness and funnel-clearance conclusions on a finished run.

    Clause a: the full horizon was reached (global-solution surrogate).
    Clause b: sup |u| and every sup k_i are finite and below the caps.
    Clause c: every stage kept a strictly positive distance to its boundary.
    """
    clauses = {}
    clauses["a_horizon"] = {
        "passed": report.horizon_reached,
        "t_final": report.t_final,
        "t_end": report.t_end,
    }
    gains_ok = bool(
        math.isfinite(report.sup_u)
        and report.sup_u <= u_cap
        and np.all(np.isfinite(report.sup_gains))
        and np.all(report.sup_gains <= gain_cap)
    )
    clauses["b_bounded"] = {
        "passed": gains_ok,
        "sup_u": report.sup_u,
        "u_cap": u_cap,
        "sup_gains": list(map(float, report.sup_gains)),
        "gain_cap": gain_cap,
    }
    margins = np.array(
        [min((row.radii[i] - row.e_norms[i]) for row in trace)
         for i in range(len(report.min_margins))]
    ) if trace else report.min_margins
    margins = np.minimum(margins, report.min_margins)
    clauses["c_margins"] = {
        "passed": bool(len(trace) > 0 and np.all(margins > 0.0)),
        "min_margins": list(map(float, margins)),
        "at_times": list(map(float, report.min_margin_times)),
    }
    passed = all(c["passed"] for c in clauses.values())
    return Verdict(passed=passed, clauses=clauses)


@dataclass
class Verdict:
    passed: bool
    clauses: dict

    def as_text(self):
        lines = [f"verified={str(self.passed).lower()}"]
        for name, info in self.clauses.items():
            lines.append(f"clause_{name}={str(info['passed']).lower()}")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# simulation
# --------------------------------------------------------------------------

class _Aggregates:
    """Running boundedness witnesses over every accepted step."""

    def __init__(self, r):
        self.sup_u = 0.0
        self.sup_gains = np.zeros(r)
        self.sup_state = np.zeros(r)
        self.min_margins = np.full(r, np.inf)
        self.min_margin_times = np.zeros(r)

    def absorb(self, t, state, ctl, radii):
        self.sup_u = max(self.sup_u, float(np.max(np.abs(ctl.u))))
        np.maximum(self.sup_gains, ctl.gains, out=self.sup_gains)
        np.maximum(
            self.sup_state,
            np.max(np.abs(state), axis=1),
            out=self.sup_state,
        )
        e_norms = np.linalg.norm(ctl.stage_errors, axis=1)
        margins = radii - e_norms
        better = margins < self.min_margins
        self.min_margins[better] = margins[better]
        self.min_margin_times[better] = t


def _report(sc, aggr, t_final, steps, rejected, wall):
    return RunReport(
        t_end=sc.t_end,
        t_final=t_final,
        steps=steps,
        rejected_steps=rejected,
        sup_u=aggr.sup_u,
        sup_gains=aggr.sup_gains.copy(),
        sup_state=aggr.sup_state.copy(),
        min_margins=aggr.min_margins.copy(),
        min_margin_times=aggr.min_margin_times.copy(),
        wall_time=wall,
    )


def simulate(sc):
    """Integrate the closed loop over [0, t_end]; returns (trace, report).

    Fixed Euler or classical Runge-Kutta steps on the base grid n*dt.  The
    internal operator receives one stacked-state sample per accepted step;
    stage queries within the step read the operator's causal extension, so
    a rejected step never mutates operator state.  On a funnel violation
    the step is halved, up to ``max_halvings`` times, after which
    StepCollapse is raised carrying the partial results.

    Raises InadmissibleInitialCondition when the controller cannot be
    evaluated at t = 0.
    """
    started = time.perf_counter()
    plant, cfg, ref = sc.plant, sc.controller, sc.reference
    r, m = plant.r, plant.m
    if cfg.r != r:
        raise ValueError(f"controller relative degree {cfg.r} != plant degree {r}")
    op = plant.operator
    op.reset()
    if isinstance(op, TransportPDE):
        needed = op.speed * sc.t_end
        if op.width < needed:
            log.warning(
                "transport domain width %.4g < c*T = %.4g; truncated measure "
                "mass %.3e is dropped",
                op.width, needed, op.tail_mass(),
            )

    # pre-history visible to the operator at negative times
    if plant.h > 0.0:
        n_hist = max(1, int(math.ceil(plant.h / sc.dt)))
        for j in range(n_hist, 0, -1):
            th = -plant.h * j / n_hist
            stack = np.asarray(plant.history(th), dtype=float).reshape(r, m)
            op.push(th, stack.reshape(-1))

    state = plant.initial_state.copy()

    def _eval(t, x):
        rj = ref.jet(t, r - 1)
        e0 = Jet(x - rj.coeffs)
        return controller_eval(cfg, t, e0), rj

    def _radii(t):
        return np.array([f.boundary(t) for f in cfg.funnels])

    def _stage(t, x):
        ctl, _ = _eval(t, x)
        acc = rhs(plant, t, x, ctl.u)
        dx = np.empty_like(x)
        dx[:-1] = x[1:]
        dx[-1] = acc
        return dx

    def _step(t, x, h):
        if sc.integrator == "euler":
            return x + h * _stage(t, x)
        k1 = _stage(t, x)
        k2 = _stage(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = _stage(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = _stage(t + h, x + h * k3)
        return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    # admissibility at t = 0
    op.push(0.0, state.reshape(-1))
    try:
        ctl0, rj0 = _eval(0.0, state)
    except FunnelViolation as exc:
        raise InadmissibleInitialCondition(
            f"initial condition violates stage {exc.stage} funnel: {exc}",
            stage=exc.stage,
        ) from exc

    aggr = _Aggregates(r)
    trace = []

    def _record(t, x, ctl, rj, radii):
        trace.append(
            TraceRecord(
                t=t,
                y=x[0].copy(),
                y_ref=rj.value.copy(),
                u=ctl.u.copy(),
                w=op.output(t).copy(),
                e_norms=np.linalg.norm(ctl.stage_errors, axis=1),
                gains=ctl.gains.copy(),
                radii=radii,
            )
        )

    radii0 = _radii(0.0)
    aggr.absorb(0.0, state, ctl0, radii0)
    _record(0.0, state, ctl0, rj0, radii0)

    n_cells = int(round(sc.t_end / sc.dt))
    if abs(n_cells * sc.dt - sc.t_end) > 1e-9 * max(1.0, sc.t_end):
        n_cells = int(math.ceil(sc.t_end / sc.dt - 1e-12))
    t = 0.0
    steps = 0
    rejected = 0
    record_countdown = sc.decimation

    for cell in range(n_cells):
        cell_end = min((cell + 1) * sc.dt, sc.t_end)
        while t < cell_end - 1e-12:
            dt_try = cell_end - t
            halvings = 0
            while True:
                op.push(t, state.reshape(-1))
                try:
                    x_new = _step(t, state, dt_try)
                    if not np.all(np.isfinite(x_new)):
                        raise FunnelViolation(
                            "state left the finite range", stage=-1, t=t
                        )
                    t_new = cell_end if dt_try >= cell_end - t - 1e-15 else t + dt_try
                    ctl_new, rj_new = _eval(t_new, x_new)
                    break
                except FunnelViolation:
                    halvings += 1
                    rejected += 1
                    if halvings > sc.max_halvings:
                        wall = time.perf_counter() - started
                        report = _report(sc, aggr, t, steps, rejected, wall)
                        raise StepCollapse(
                            f"step below dt/2^{sc.max_halvings} still rejected "
                            f"at t={t:.6g}",
                            trace,
                            report,
                        ) from None
                    dt_try *= 0.5
            op.commit(t_new)
            op.push(t_new, x_new.reshape(-1))
            t = t_new
            state = x_new
            steps += 1
            record_countdown -= 1
            at_end = t >= sc.t_end - 1e-12
            radii = _radii(t)
            aggr.absorb(t, state, ctl_new, radii)
            if record_countdown == 0 or at_end:
                _record(t, state, ctl_new, rj_new, radii)
                record_countdown = sc.decimation

    wall = time.perf_counter() - started
    report = _report(sc, aggr, t, steps, rejected, wall)
    return trace, report
