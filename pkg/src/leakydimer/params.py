"""Model parameters and shared numerical defaults."""

from __future__ import annotations

import math
from dataclasses import dataclass

# Shared solver defaults so cross-engine comparisons are dominated by the
# model difference, not by solver error.
DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
DEFAULT_MAX_STEPS = 5_000_000


class IntegrationError(RuntimeError):
    """Raised when time propagation cannot reach the requested time.

    Carries the time actually reached in ``t_reached``.
    """

    def __init__(self, message: str, t_reached: float):
        super().__init__(f"{message} (time reached: {t_reached:.9g})")
        self.t_reached = float(t_reached)


def _as_finite_float(name: str, value) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a finite real number, got {value!r}") from None
    if not math.isfinite(out):
        raise ValueError(f"{name} must be finite, got {out!r}")
    return out


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the leaky two-site dimer (units with hbar = 1).

    epsilon : onsite asymmetry, site energies +epsilon (site 1) and -epsilon
    v       : inter-site coupling
    g       : macroscopic interaction strength; the N-particle Hamiltonian
              uses the per-particle value g / N (see microscopic_interaction)
    gamma   : decay rate of site 1; must be >= 0
    """

    epsilon: float = 0.0
    v: float = 1.0
    g: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("epsilon", "v", "g", "gamma"):
            object.__setattr__(self, name, _as_finite_float(name, getattr(self, name)))
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")

    def microscopic_interaction(self, n_particles: int) -> float:
        """Per-particle interaction entering the N-particle Hamiltonian."""
        if n_particles < 1:
            raise ValueError(f"n_particles must be >= 1, got {n_particles}")
        return self.g / n_particles

    def as_dict(self) -> dict:
        return {"epsilon": self.epsilon, "v": self.v, "g": self.g, "gamma": self.gamma}
