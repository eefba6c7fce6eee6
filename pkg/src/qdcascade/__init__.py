"""Rate-equation and Monte Carlo toolkit for actively reset biexciton-exciton
cascades in a quantum dot."""

__version__ = "0.1.0"

from .model import G, X, XX, DeviceParams, DriveWaveform, Populations, generator, pump_rate_at
from .dynamics import (
    Trajectory, dc_steady_state, evolve_cycles, periodic_steady_state, populations_at, propagate,
)
from .metrics import (
    cascade_photon_fraction, completion_probability, cycle_populations, dc_pair_rate,
    ideal_reset_pairs_per_cycle, model_cycle_fidelity, model_fidelity_map,
    model_fidelity_vs_delay, pair_rate, pairs_per_cycle,
)
from .optimize import (
    BandResult, OptimizationError, ideal_reset_band, optimal_clock_rate, optimal_dc_pump,
    superequilibrium_band,
)
from .montecarlo import (
    DetectorModel, Emissions, assign_polarizations, detect, simulate_basis_streams,
    simulate_emissions, werner_pair_stream,
)
from .analyzer import (
    cumulative_pairs, cycle_fidelity, fidelity_map, fidelity_vs_delay, g2_auto, g2_cross_2d,
    polarization_maps, qber_from_fidelity,
)
from .timetags import read_timetags, write_timetags
from .config import ConfigError, RunConfig, load_config
