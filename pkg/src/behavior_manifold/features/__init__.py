"""Audio to 420-dim analysis frames: LLDs, functionals, feature files."""

from .fileio import (
    InvalidFeatureFile,
    decode_features,
    encode_features,
    features_to_csv,
    read_features,
    read_feature_dir,
    read_wav,
    write_features,
    write_wav,
)
from .functionals import (
    FUNCTIONALS,
    FrameSequence,
    compute_functionals,
    extract_analysis_frames,
    functional_names,
)
from .lld import (
    AudioBuffer,
    InsufficientAudioError,
    LldConfig,
    LldSequence,
    compute_lld_sequence,
)


def extract_file_features(audio: AudioBuffer, source_id: str = "", window_s: float = 20.0,
                          shift_s: float = 1.0, cfg: LldConfig = LldConfig()) -> FrameSequence:
    """Audio buffer straight to its analysis-frame sequence."""
    return extract_analysis_frames(compute_lld_sequence(audio, cfg), source_id, window_s, shift_s)


__all__ = [
    "AudioBuffer",
    "FUNCTIONALS",
    "FrameSequence",
    "InsufficientAudioError",
    "InvalidFeatureFile",
    "LldConfig",
    "LldSequence",
    "compute_functionals",
    "compute_lld_sequence",
    "decode_features",
    "encode_features",
    "extract_analysis_frames",
    "extract_file_features",
    "features_to_csv",
    "functional_names",
    "read_feature_dir",
    "read_features",
    "read_wav",
    "write_features",
    "write_wav",
]
