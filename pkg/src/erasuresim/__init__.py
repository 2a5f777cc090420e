"""Interactive coding over erasure channels: schemes, simulator, verifier and socket harness."""
from .channel import ERASURE, SILENCE, NoisePattern, Symbol4, greedy_adversary, parse_noise
from .protocol import (NoiselessProtocol, normalize, reference_transcript, resolve_protocol,
                       string_exchange)
from .sim import (RunConfig, RunResult, RunTrace, exhaustive_noise_search, run,
                  unsync_termination_demo)
from .verify import verify_trace

__all__ = [
    "ERASURE", "SILENCE", "NoisePattern", "Symbol4", "greedy_adversary", "parse_noise",
    "NoiselessProtocol", "normalize", "reference_transcript", "resolve_protocol", "string_exchange",
    "RunConfig", "RunResult", "RunTrace", "exhaustive_noise_search", "run",
    "unsync_termination_demo", "verify_trace",
]
