"""Family-based graphical gatekeeping: test hierarchically ordered families
of hypotheses with strong overall FWER control.

A strategy is a directed weighted graph over hypothesis *families*. Layers
are tested in order; each family runs a local FWER-controlling procedure at
its current critical value, and the unspent part of that value flows to
later families along the graph's edges.
"""

from .engine import (
    ExecutionState,
    FamilyOutcome,
    TestReport,
    Transfer,
    initial_state,
    replay,
    report_from_json,
    report_to_json,
    run,
    step,
)
from .errors import GatekeepError, InvalidSpecError, SpecFormatError
from .graph import (
    FamilySpec,
    GraphSpec,
    HypothesisRef,
    TransitionCoefficients,
    ValidationOutcome,
    make_spec,
    spec_from_json,
    spec_to_json,
    to_dot,
    validate_spec,
)
from .hypgraph import (
    HypothesisGraph,
    graph_from_json,
    graph_to_json,
    run_hypothesis_graph,
    validate_graph,
)
from .mcsim import (
    PValueModel,
    SimConfig,
    SimResult,
    SweepError,
    batch_run,
    simulate_fwer,
    sweep,
)
from .procedures import (
    FamilyTestInput,
    LocalProcedureSpec,
    error_rate_bound,
    test_family,
)

__version__ = "0.1.0"

__all__ = [
    "ExecutionState",
    "FamilyOutcome",
    "FamilySpec",
    "FamilyTestInput",
    "GatekeepError",
    "GraphSpec",
    "HypothesisGraph",
    "HypothesisRef",
    "InvalidSpecError",
    "LocalProcedureSpec",
    "PValueModel",
    "SimConfig",
    "SimResult",
    "SpecFormatError",
    "SweepError",
    "TestReport",
    "Transfer",
    "TransitionCoefficients",
    "ValidationOutcome",
    "batch_run",
    "error_rate_bound",
    "graph_from_json",
    "graph_to_json",
    "initial_state",
    "make_spec",
    "replay",
    "report_from_json",
    "report_to_json",
    "run",
    "run_hypothesis_graph",
    "simulate_fwer",
    "spec_from_json",
    "spec_to_json",
    "step",
    "sweep",
    "test_family",
    "to_dot",
    "validate_graph",
    "validate_spec",
]
