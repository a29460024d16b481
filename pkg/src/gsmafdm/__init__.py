"""Link-level simulator for generalized spatial modulation on chirp carriers
over doubly selective channels.

Modules: mapping (bits <-> sparse antenna frames), waveform (chirp
transforms, prefix), channel (doubly selective realizations, effective MIMO
matrices), detectors (six receivers with operation counters), analysis
(union bound, diversity, capacity), sim (Monte-Carlo engine + CSV/plots),
cli (command line).
"""
from . import _kernels
from .errors import (CapabilityError, ConfigurationError, DemapError,
                     GsmAfdmError, InputError, NumericError)
from .mapping import (Constellation, GsmConfig, TapCodebook, build_frame,
                      build_tap_codebook, demap_frame, demap_group, map_group,
                      mapping_matrix)
from .waveform import (AfdmParams, add_cpp, choose_c1, choose_c2, daft, idaft,
                       remove_cpp, validate_dimensions)
from .channel import (EffectiveChannel, NoiseModel, PathSet, add_noise,
                      assemble_effective, corrupt_csi, daft_channel_operator,
                      daft_channel_sparse, generate_paths, td_channel_matrix)
from .detectors import (DetectionResult, DetectorContext, detect_frame,
                        grcd_detect, llr_per_antenna, llrd_detect,
                        lmmse_equalize, lmmse_mld, mld_joint, rscd_detect,
                        symbolwise_ml, tc_llrd_detect)
from .analysis import (BoundResult, CapacityResult, ErrorEvent, build_xi,
                       dcmc_capacity, diversity_and_coding_gain, union_bound_ber,
                       upep)
from .sim import (BerCurve, SimConfig, emit_curve_csv, emit_plot_svg,
                  read_curve_csv, run_ber_sweep, run_bound_sweep,
                  run_capacity_sweep, run_detector_comparison)

__version__ = "0.1.0"

kernel_backend = _kernels.backend_name
