"""funnelsim: funnel control with convolution, transport-PDE or LTI internals.

A numpy-based toolkit for simulating prescribed-performance output tracking
of nonlinear systems with strict relative degree whose internal dynamics
are realized by causal operators, plus numerical probes that certify the
operator-side assumptions (causality, bounded-input bounded-output
behaviour, local Lipschitz continuity) on randomized trials.
"""

from .jets import (
    Jet,
    jet_add,
    jet_mul,
    jet_reciprocal,
    jet_scale,
    jet_sqnorm,
    jet_sub,
)
from .funnel import (
    CallbackFunnel,
    ConstFunnel,
    ExpShiftFunnel,
    FunnelStack,
    FunnelViolation,
    funnel_margin,
    gain,
    phi_jet,
)
from .controller import (
    CallbackReference,
    ConstReference,
    ControllerConfig,
    ControllerOutput,
    CosReference,
    PolyReference,
    controller_eval,
    reference_jet,
)
from .operators import (
    ByrnesIsidoriForm,
    ComposedOperator,
    ConvolutionOperator,
    FunctionDensity,
    GridDensity,
    HistoryGap,
    LTIInternal,
    LinearObservation,
    LinearTriple,
    Measure,
    NoRelativeDegree,
    TransportPDE,
    bi_internal_operator,
    bi_transform,
    causality_suite,
    chain_realization,
    convolve,
    drive,
    expsqrt_density,
    load_density,
    lti_step,
    pde_step,
    probe_bibo,
    probe_causality,
    probe_lipschitz,
)
from .sim import (
    AffineDrift,
    ConstantGain,
    GainDegenerate,
    InadmissibleInitialCondition,
    Plant,
    RunReport,
    Scenario,
    SinDisturbance,
    StepCollapse,
    StepDisturbance,
    TraceRecord,
    ZeroDisturbance,
    rhs,
    simulate,
    verify_run,
)
from .presets import PRESETS, build_preset

__version__ = "0.1.0"
