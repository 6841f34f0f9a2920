"""Sub-bit binary spiking neural networks: compact codebooks, outlier-aware
assignment, packed storage and a codeword-reuse inference engine."""

from ._ext import CONV_BACKEND, QUANT_BACKEND
from .binarize import BinaryConvWeights, sign_binarize
from .codebook import CompactCodebook, NotSubBitError, sample_codebook
from .engine import InferenceNet, OpCounters, binary_conv, subbit_conv
from .neuron import LifConfig, LifState, lif_step
from .pack import QuantizedLayer

__version__ = "0.1.0"

__all__ = [
    "CONV_BACKEND",
    "QUANT_BACKEND",
    "BinaryConvWeights",
    "CompactCodebook",
    "InferenceNet",
    "LifConfig",
    "LifState",
    "NotSubBitError",
    "OpCounters",
    "QuantizedLayer",
    "binary_conv",
    "lif_step",
    "sample_codebook",
    "sign_binarize",
    "subbit_conv",
]
