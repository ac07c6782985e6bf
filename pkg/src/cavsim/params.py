"""Physical parameters of the atom-cavity system, in natural units (kappa = 1)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import IntEnum

from .errors import InvalidArgumentError

LOSS_MODELS = ("standard_decay", "paper_literal")


class AtomLabel(IntEnum):
    """Atomic ground state; only G1 couples to the cavity mode."""

    G0 = 0
    G1 = 1


@dataclass(frozen=True)
class CavityParams:
    """Rates of the one-sided cavity with a single three-level atom.

    ``loss_model='standard_decay'`` damps the excited-state amplitude at
    gamma_s/2. ``'paper_literal'`` additionally applies the +gamma_s/2 gain
    on the |1> population term, which for the coupled branch shows up as a
    cavity pole at (kappa - gamma_s)/2.
    """

    g: float = 3.0
    gamma_s: float = 1.0
    delta: float = 0.0
    kappa: float = 1.0
    loss_model: str = "standard_decay"

    def __post_init__(self):
        for name in ("g", "gamma_s", "delta", "kappa"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidArgumentError(f"{name} must be finite, got {v}")
        if self.g < 0:
            raise InvalidArgumentError(f"g must be >= 0, got {self.g}")
        if self.gamma_s < 0:
            raise InvalidArgumentError(f"gamma_s must be >= 0, got {self.gamma_s}")
        if not self.kappa > 0:
            raise InvalidArgumentError(f"kappa must be > 0, got {self.kappa}")
        if self.loss_model not in LOSS_MODELS:
            raise InvalidArgumentError(
                f"loss_model must be one of {LOSS_MODELS}, got {self.loss_model!r}"
            )

    def replace(self, **changes) -> "CavityParams":
        d = asdict(self)
        d.update(changes)
        return CavityParams(**d)

    @property
    def rates(self):
        return (self.g, self.kappa, self.gamma_s, self.delta)

    def as_dict(self) -> dict:
        return asdict(self)
