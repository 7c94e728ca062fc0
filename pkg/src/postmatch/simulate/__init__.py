"""Transmission sessions, posterior tracking and decoders."""

from .decoders import (FIXED_RATE, ROLLBACK, VARIABLE_RATE, DecodedInterval, decode_fixed_rate,
                       decode_rollback, decode_variable_rate)
from .piecewise import Segments, compose
from .posterior import (PosteriorMap, TrajectoryPair, posterior_cdf, posterior_log_density_at_message,
                        posterior_quantile, trajectories)
from .session import (Transcript, draw_message, replay_errors, run_session, session_precision,
                      transcript_from_outputs)

__all__ = [
    "FIXED_RATE", "ROLLBACK", "VARIABLE_RATE", "DecodedInterval", "decode_fixed_rate",
    "decode_rollback", "decode_variable_rate", "Segments", "compose", "PosteriorMap",
    "TrajectoryPair", "posterior_cdf", "posterior_log_density_at_message", "posterior_quantile",
    "trajectories", "Transcript", "draw_message", "replay_errors", "run_session",
    "session_precision", "transcript_from_outputs",
]
