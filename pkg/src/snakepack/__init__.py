"""snakepack: Brownian-snake simulation and packing-measure verification toolkit."""

__version__ = "0.1.0"

from .kernels import (
    Excursion,
    Path,
    StableSample,
    TruncatedItoSample,
    first_exit_time,
    first_exit_times,
    ito_mass,
    sample_bessel3,
    sample_brownian_path,
    sample_ito_excursion,
    sample_normalized_excursion,
    sample_stable,
    shorokhod_tail,
)
from .rng import make_rng

__all__ = [
    "Excursion",
    "Path",
    "StableSample",
    "TruncatedItoSample",
    "first_exit_time",
    "first_exit_times",
    "ito_mass",
    "make_rng",
    "sample_bessel3",
    "sample_brownian_path",
    "sample_ito_excursion",
    "sample_normalized_excursion",
    "sample_stable",
    "shorokhod_tail",
]
