"""Audio-visual speech enhancement: DSP, metrics, training and inference."""

from ._vsegan import (
    ContractViolation,
    Enhancer,
    IntegrityError,
    NonFiniteError,
    __version__,
    build_corpus,
    evaluate,
    gradient_suite,
    log_mel,
    lsd,
    mix_at_snr,
    si_sdr,
    stoi,
    train,
)

__all__ = [
    "ContractViolation",
    "Enhancer",
    "IntegrityError",
    "NonFiniteError",
    "__version__",
    "build_corpus",
    "evaluate",
    "gradient_suite",
    "log_mel",
    "lsd",
    "mix_at_snr",
    "si_sdr",
    "stoi",
    "train",
]
