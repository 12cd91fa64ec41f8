"""Well-being driven energy policy analysis.

Fits a survey regression of subjective well-being, simulates a grid of
local renewable energy policies hour by hour, and picks the policy that
maximizes well-being once the survey variables react to the simulated
cost, renewable share and regional money circulation.
"""

from .config import RunConfig, load_config, validate_config
from .coupling import Baseline, MeanVector, ValueTypeSpec, builtin_presets, select_optimal
from .mabs import AgentConfig, PolicyIndices, PolicyParams, simulate_batch, simulate_year
from .pipeline import STAGES, run_pipeline, run_stage
from .survey import RegressionModel, extract_explanatory, fit_ols, normalize_items, predict
from .sweep import DEFAULT_GRID, AxisRange, SweepGrid, evaluate_all

__version__ = "0.1.0"
