"""Desk-scale home energy management lab.

A 15-minute-grid household simulator (shiftable appliances, RC-modeled
HVAC, an EV charger), a from-scratch dueling double-DQN controller, exact
per-appliance scheduling oracles, and a CLI for generating data, training,
and comparing the learned policy against the optimum.
"""

from .appliances import (
    DEFAULT_MODE_WINDOWS,
    EvParams,
    EvState,
    HvacParams,
    HvacState,
    ModeWindows,
    PreferenceMode,
    ShiftableApplianceParams,
    ShiftableApplianceState,
)
from .environment import (
    HVAC_ID,
    EpisodePlan,
    EpisodeTrace,
    HomeEnvironment,
    NormalizationBounds,
    PenaltyFactors,
    RewardBreakdown,
    compile_episode,
    episode_cost,
    schedule_cost,
)
from .errors import (
    AlignmentError,
    CheckpointFormatError,
    CompatibilityError,
    ConfigError,
    ConflictError,
    DataError,
    HemslabError,
    InfeasibleError,
    NumericalError,
    ParseError,
    SchemaError,
    StateError,
    UnsupportedVersionError,
)
from .timeseries import (
    ApplianceEvent,
    ApplianceEventLog,
    PriceSeries,
    TimeGrid,
    WeatherSeries,
    load_events_csv,
    load_price_csv,
    load_weather_csv,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ApplianceEvent",
    "ApplianceEventLog",
    "AlignmentError",
    "CheckpointFormatError",
    "CompatibilityError",
    "ConfigError",
    "ConflictError",
    "DataError",
    "DEFAULT_MODE_WINDOWS",
    "EpisodePlan",
    "EpisodeTrace",
    "EvParams",
    "EvState",
    "HemslabError",
    "HomeEnvironment",
    "HVAC_ID",
    "HvacParams",
    "HvacState",
    "InfeasibleError",
    "ModeWindows",
    "NormalizationBounds",
    "NumericalError",
    "ParseError",
    "PenaltyFactors",
    "PreferenceMode",
    "PriceSeries",
    "RewardBreakdown",
    "SchemaError",
    "ShiftableApplianceParams",
    "ShiftableApplianceState",
    "StateError",
    "TimeGrid",
    "UnsupportedVersionError",
    "WeatherSeries",
    "compile_episode",
    "episode_cost",
    "load_events_csv",
    "load_price_csv",
    "load_weather_csv",
    "schedule_cost",
]
