"""Cavity-assisted scattering of single-photon pulses: CPF gates and QND protocols."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CavsimError,
    InvalidArgumentError,
    NumericalFailure,
    SettleWindowExceeded,
    UndefinedFidelityError,
    UsageError,
)
from .params import AtomLabel, CavityParams  # noqa: E402
from .pulse import (  # noqa: E402
    Envelope,
    PulseSpec,
    TimeGrid,
    inner_product,
    make_gaussian_pulse,
    make_grid,
)
from .scattering import ReflectionResult, reflect, reflect_offresonant  # noqa: E402
from .spectral import reflect_spectral, reflection_coefficient  # noqa: E402

__all__ = [
    "AtomLabel",
    "CavityParams",
    "CavsimError",
    "Envelope",
    "InvalidArgumentError",
    "NumericalFailure",
    "PulseSpec",
    "ReflectionResult",
    "SettleWindowExceeded",
    "TimeGrid",
    "UndefinedFidelityError",
    "UsageError",
    "inner_product",
    "make_gaussian_pulse",
    "make_grid",
    "reflect",
    "reflect_offresonant",
    "reflect_spectral",
    "reflection_coefficient",
]
