"""Stochastic-computing simulation of memristor-based edge detection."""

__version__ = "0.1.0"

from .bitstream import (
    BitStream,
    CorrelationMode,
    EntropySource,
    FlipMode,
    FlipSpec,
    complement,
    decode,
    encode,
    encode_pair,
    inject_flips,
    scc,
)
from .device import MemristorParams, SneTransfer
from .logic import GateKind, gate_apply, gate_mux, oracle, verify_gate
from .metrics import psnr, ssim
from .roberts import DetectorConfig, reference_roberts, stochastic_roberts
