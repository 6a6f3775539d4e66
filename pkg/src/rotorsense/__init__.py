"""rotorsense: FMCW radar toolkit for UAV detection by rotor micro-motion.

Pipeline: synthesize beat-signal frames (echo), form Range-Doppler maps
(rdmap), score Doppler-row periodicity by spectrum folding (folding), recover
the range track by spectral subtraction + constrained dynamic programming +
particle filtering (tracking), then classify aligned Doppler-time segments
with a from-scratch LSTM (identify, lstm). The cli module ties the stages
into reproducible commands.
"""

from .config import (DerivedParams, RadarConfig, TrajectorySegment,
                     TrajectorySpec, UavConfig, ValidationError,
                     constant_velocity, derive, hover, validate)
from .echo import (Distractor, Frame, SceneSpec, SimulationError, StaticClutter,
                   UavEmitter, scatterer_range, synthesize_distractor_frames,
                   synthesize_frame, synthesize_frames)
from .folding import (FoldingMap, FoldOutcome, build_folding_map, folding_result,
                      folding_value)
from .rdmap import (RangeDopplerMap, compute_map, dc_bin, doppler_fft,
                    doppler_row, process_frames, range_fft)

__version__ = "0.1.0"
