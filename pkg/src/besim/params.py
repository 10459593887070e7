"""Physical constants of the coupled flow / order-parameter system."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class ModelParams:
    """Bulk coefficients a, b, c; elastic constant L; rotational diffusion
    Gamma; viscosity mu; tumbling/alignment ratio xi.

    L, Gamma and mu must be positive. a, b, c and xi are unrestricted;
    c < 0 is allowed but loses coercivity of the bulk potential, so
    construction emits a warning.
    """

    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    L: float = 1.0
    Gamma: float = 1.0
    mu: float = 1.0
    xi: float = 0.0

    def __post_init__(self):
        values = [self.a, self.b, self.c, self.L, self.Gamma, self.mu, self.xi]
        if not all(np.isfinite(v) for v in values):
            raise ConfigurationError(f"non-finite model parameter in {values}")
        if not self.L > 0.0:
            raise ConfigurationError(f"elastic constant L must be positive, got {self.L}")
        if not self.Gamma > 0.0:
            raise ConfigurationError(f"rotational diffusion Gamma must be positive, got {self.Gamma}")
        if not self.mu > 0.0:
            raise ConfigurationError(f"viscosity mu must be positive, got {self.mu}")
        if self.c < 0.0:
            warnings.warn(
                f"c = {self.c} < 0: quartic bulk term is not coercive, "
                "free energy is unbounded below",
                stacklevel=2,
            )
