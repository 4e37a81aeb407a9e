"""Joint task-offloading and MU-MIMO uplink beamforming simulator."""

__version__ = "0.1.0"

from .baselines import (  # noqa: F401
    SCHEME_IDS,
    SchemeResult,
    run_fdma,
    run_local_only,
    run_op_mmse,
    run_scheme,
    run_tdma,
)
from .beamforming import (  # noqa: F401
    BeamformingSolution,
    InnerInfeasible,
    solve_beamforming,
)
from .decision import OffloadDecision, dm_mmco_decide  # noqa: F401
from .harness import ResultRow, SweepSpec, run_sweep, write_csv  # noqa: F401
from .pipeline import PipelineResult, run_dm_mmco  # noqa: F401
from .scenario import (  # noqa: F401
    InvalidConfig,
    MobileDevice,
    Scenario,
    ScenarioConfig,
    generate_scenario,
    load_config,
    pathloss_linear,
)
from .system_model import CostBreakdown, cost_from_rates, total_cost  # noqa: F401
