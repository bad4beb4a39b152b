"""Contactless fingerprint enhancement, neighbour-code encoding and matching."""

__version__ = "0.1.0"

from .config import Config
from .encode import FingerCode, MinutiaCode, NeighborFeature, encode_fingerprint, read_fingercode, write_fingercode
from .enhance import binarize, build_gabor_bank, gabor_enhance, gabor_kernel, thin
from .evaluation import compute_eer, compute_rates, genuine_pairs, impostor_pairs, sweep_grid
from .exceptions import RidgekitError
from .imgio import DatasetIndex, load_dataset, load_image, normalize
from .match import MatchParams, MatchResult, match_fingercodes
from .minutiae import Minutia, MinutiaList, extract_minutiae, remove_false_minutiae
from .pipeline import extract, process_image
from .ridgefield import estimate_frequency, estimate_orientation, segment_roi, smooth_orientation
from .synth import SynthSpec, generate, impression

__all__ = [
    "Config",
    "DatasetIndex",
    "FingerCode",
    "MatchParams",
    "MatchResult",
    "Minutia",
    "MinutiaCode",
    "MinutiaList",
    "NeighborFeature",
    "RidgekitError",
    "SynthSpec",
    "binarize",
    "build_gabor_bank",
    "compute_eer",
    "compute_rates",
    "encode_fingerprint",
    "estimate_frequency",
    "estimate_orientation",
    "extract",
    "extract_minutiae",
    "gabor_enhance",
    "gabor_kernel",
    "generate",
    "genuine_pairs",
    "impostor_pairs",
    "impression",
    "load_dataset",
    "load_image",
    "match_fingercodes",
    "normalize",
    "process_image",
    "read_fingercode",
    "remove_false_minutiae",
    "segment_roi",
    "smooth_orientation",
    "sweep_grid",
    "thin",
    "write_fingercode",
]
