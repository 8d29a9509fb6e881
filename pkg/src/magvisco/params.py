"""Model parameters shared across the solver modules."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Params:
    """Viscosity mu_s, deformation diffusivity kappa, magnetization
    dissipation alpha, precession strength beta; epsilon is the penalty
    length of the relaxed (non-unit-constraint) variant and is unused by
    the constrained model."""

    mu_s: float = 1.0
    kappa: float = 1.0
    alpha: float = 1.0
    beta: float = 0.5
    epsilon: float | None = None

    def __post_init__(self):
        for name in ("mu_s", "kappa", "alpha"):
            v = getattr(self, name)
            if not v > 0.0:
                raise ValueError(f"{name} must be positive, got {v}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.epsilon is not None and not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
