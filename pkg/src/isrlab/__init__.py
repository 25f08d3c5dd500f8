"""Monte Carlo lab for communication with imperfectly shared randomness.

Submodules cover uncertain-prior compression, correlated-bit agreement
distillation, gap inner-product protocols (Gaussian and sparse), two-party
strategy calculus, a small Boolean Fourier toolkit, and a seeded experiment
harness with a CLI front end (``isr-lab``).
"""

__version__ = "0.1.0"

from . import agree, codes, compress, gapip, harness, mathcore, mc, strategies
from .errors import ConfigError, ParameterError
from .randsource import (
    CorrelatedSource,
    corr_bits,
    corr_gaussians_exact,
    corr_gaussians_from_bits,
    derive_seed,
    dictionary_word,
    make_pair,
    parse_seed,
    shared_indices,
)

__all__ = [
    "__version__",
    "ConfigError",
    "ParameterError",
    "CorrelatedSource",
    "make_pair",
    "corr_bits",
    "corr_gaussians_exact",
    "corr_gaussians_from_bits",
    "dictionary_word",
    "shared_indices",
    "derive_seed",
    "parse_seed",
    "agree",
    "codes",
    "compress",
    "gapip",
    "harness",
    "mathcore",
    "mc",
    "strategies",
]
