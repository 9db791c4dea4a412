"""Discrete-frame simulator and scheduling policies for a mobile-edge
computing cell with random device arrivals."""

from .model import (Action, Arrival, EdgeDevice, LocalDevice, ReducedState,
                    SystemParams, SystemState, advance, discounted_local_cost,
                    local_completion_frames, local_power_w, reduced_stage_cost,
                    segments_transmitted, stage_cost)
from .channel import (AnnulusChannel, QuantizedChannel,
                      expected_inverse_pathloss, expected_uplink_rate,
                      sample_arrival, sample_fading_power)
from .valuefn import (ValueModel, build_cost_vector, build_transition_matrix,
                      expected_task_cost, frames_to_drain, w_pi, w_pi_empty)
from .policies import (PolicyKind, action_cost_to_go, all_edge_decide,
                       all_local_decide, baseline_decide, candidate_powers,
                       improved_decide, make_policy, successor_reduced)
from .sim import (EpisodeResult, OracleResult, PolicyStats, SweepRow,
                  auto_horizon, estimate_value, finite_horizon_oracle,
                  run_episode, run_episodes, sweep_arrival_rate, sweep_csv)

__all__ = [name for name in dir() if not name.startswith("_")]
