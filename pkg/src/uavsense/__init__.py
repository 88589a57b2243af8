"""Rate allocation, layered rateless coding and delivery simulation for UAV-swarm scene capture."""

from .allocation import (AllocationError, AllocationResult, InfeasibleSessionError, brute_force_allocation,
                         solve_allocation, waterfill)
from .beams import Beam, LinkModel, PowerSchedule, brute_force_schedule, rate_to_power, schedule
from .codec import (CodedSymbolBatch, LayerAllocation, WindowDistribution, decode, encode,
                    estimate_prefix_probabilities, hall_decodable)
from .config import SyntheticSceneParams, emit_scenario, generate_scenario, parse_scenario
from .harness import (BaselineConfig, ChannelConfig, HarnessConfig, default_scenario, run_baseline_pipeline,
                      run_optimal_pipeline, sweep_adaptivity, sweep_capacity, sweep_reliability)
from .layered import EstimatorConfig, LayeredOptConfig, coordinate_descent, eval_objective, initial_layer_rates
from .scene import (DistortionModel, ScenarioSpec, SessionSpec, Viewpoint, aggregate_weights,
                    session_distortions)

__version__ = "0.1.0"
