"""Distributed sidelink resource-allocation simulator and analytical toolkit."""

from .analysis import (HoldTimeDistribution, reallocation_probability,
                       simulate_hold_times, simulate_reallocation_probability,
                       tbc_ccdf, tbc_distribution, tbe_distribution,
                       total_variation)
from .channel import (ChannelParams, ChannelRealization, ObstacleMap,
                      los_state, noise_floor_dbm, pathloss_db, rx_power_dbm,
                      shadow_step)
from .config import ConfigError, RunConfig, load_config
from .engine import SimulationEngine, SimulationResult, run_hidden_node, run_scenario
from .grid import BrIndex, GridConfig, br_count, br_flat_index, br_from_flat
from .metrics import (HiddenNodeAccumulator, PrrAccumulator, UdTracker,
                      hidden_node_probability, record_beacon, ud_percentile)
from .mobility import (HighwayConfig, HighwayState, TraceRecord, load_trace,
                       neighbors, spawn_highway, step_highway)
from .mode4 import (Mode4Params, Mode4State, candidate_set, mac_select,
                    on_beacon_period_end, power_threshold)
from .phy import (RxOutcome, SenseSample, TxEvent, receive_subframe,
                  sense_subframe, sinr)
from .scenario import ScenarioSnapshot

__version__ = "0.1.0"
