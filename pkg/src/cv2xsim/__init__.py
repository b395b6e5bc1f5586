"""cv2xsim: a deterministic C-V2X Mode 4 vehicular network simulator with
SPS resource reservation, multi-priority message queues, NOMA/SIC reception,
and pluggable (random / genetic / MPDQN) allocation agents optimizing the
age of information and transmit energy jointly."""

from .config import (ConfigError, SimulationConfig, config_to_dict,
                     config_to_text, default_config, load_config, save_config)
from .engine import (EpisodeMetrics, EpochRecord, Simulator, epoch_reward,
                     observe_state, run_episode, update_receiver_aoi)

__version__ = "0.1.0"

__all__ = [
    "SimulationConfig", "ConfigError", "default_config", "load_config",
    "save_config", "config_to_text", "config_to_dict", "Simulator",
    "EpisodeMetrics", "EpochRecord", "run_episode", "epoch_reward",
    "observe_state", "update_receiver_aoi", "__version__",
]
