"""Mean-field dynamics: nonlinear Bloch flow and its spinor form.

The per-particle spin expectations (sx, sy, sz) move on the radius-1/2
sphere under a nonlinear, norm-decaying flow; the per-particle norm n obeys
dn/dt = -2*gamma*(2*sz + 1)*n.  The equivalent two-component nonlinear
Schroedinger form evolves (psi1, psi2) with an accumulated global phase
beta that never feeds back into the dynamics.

Internally both integrators evolve log(n) (and a unit spinor direction)
so that strongly decaying runs never underflow; see leakydimer.kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .params import (
    DEFAULT_ATOL,
    DEFAULT_MAX_STEPS,
    DEFAULT_RTOL,
    IntegrationError,
    ModelParams,
)

SPHERE_TOL = 1e-9


@dataclass
class BlochState:
    """Point on the radius-1/2 Bloch sphere plus per-particle norm n > 0."""

    sx: float
    sy: float
    sz: float
    n: float = 1.0

    def __post_init__(self):
        self.sx = float(self.sx)
        self.sy = float(self.sy)
        self.sz = float(self.sz)
        self.n = float(self.n)
        if not all(map(math.isfinite, (self.sx, self.sy, self.sz, self.n))):
            raise ValueError("Bloch state entries must be finite")
        if self.n <= 0.0:
            raise ValueError(f"per-particle norm must be positive, got {self.n}")

    @property
    def radius_sq(self) -> float:
        return self.sx**2 + self.sy**2 + self.sz**2

    @property
    def sphere_defect(self) -> float:
        return abs(self.radius_sq - 0.25)

    def as_array(self) -> np.ndarray:
        return np.array([self.sx, self.sy, self.sz])


@dataclass
class SpinorState:
    """Two complex amplitudes plus the accumulated global phase beta."""

    psi1: complex
    psi2: complex
    beta: float = 0.0

    def __post_init__(self):
        self.psi1 = complex(self.psi1)
        self.psi2 = complex(self.psi2)
        self.beta = float(self.beta)
        values = (self.psi1.real, self.psi1.imag, self.psi2.real, self.psi2.imag, self.beta)
        if not all(map(math.isfinite, values)):
            raise ValueError("spinor entries must be finite")
        if self.psi1 == 0 and self.psi2 == 0:
            raise ValueError("spinor must be nonzero")

    @property
    def n(self) -> float:
        return abs(self.psi1) ** 2 + abs(self.psi2) ** 2

    @property
    def kappa(self) -> float:
        return (abs(self.psi1) ** 2 - abs(self.psi2) ** 2) / self.n


@dataclass
class BlochTrajectory:
    """Sampled Bloch evolution; n is reconstructed from its integrated log."""

    t: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    log_n: np.ndarray

    @property
    def n(self) -> np.ndarray:
        return np.exp(self.log_n)

    def survival(self, n_particles: int) -> np.ndarray:
        """Condensate survival probability n(t)^N, evaluated in log space."""
        return np.exp(n_particles * self.log_n)

    def log_survival(self, n_particles: int) -> np.ndarray:
        return n_particles * self.log_n

    def state(self, i: int) -> BlochState:
        return BlochState(self.sx[i], self.sy[i], self.sz[i], float(np.exp(self.log_n[i])))

    @property
    def final(self) -> BlochState:
        return self.state(-1)

    @property
    def max_sphere_defect(self) -> float:
        return float(np.max(np.abs(self.sx**2 + self.sy**2 + self.sz**2 - 0.25)))


@dataclass
class SpinorTrajectory:
    """Sampled spinor evolution as unit direction + log-norm + phase."""

    t: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    log_n: np.ndarray
    beta: np.ndarray

    @property
    def n(self) -> np.ndarray:
        return np.exp(self.log_n)

    def state(self, i: int) -> SpinorState:
        amp = math.exp(0.5 * float(self.log_n[i]))
        return SpinorState(amp * self.u1[i], amp * self.u2[i], float(self.beta[i]))

    def bloch(self) -> BlochTrajectory:
        """Map to the Bloch picture via the spin expectation formulas."""
        n_dir = np.abs(self.u1) ** 2 + np.abs(self.u2) ** 2
        cross = np.conj(self.u1) * self.u2
        return BlochTrajectory(
            t=self.t,
            sx=cross.real / n_dir,
            sy=cross.imag / n_dir,
            sz=0.5 * (np.abs(self.u1) ** 2 - np.abs(self.u2) ** 2) / n_dir,
            log_n=self.log_n.copy(),
        )


def bloch_rhs(state: BlochState, params: ModelParams) -> np.ndarray:
    """Right-hand side (dsx, dsy, dsz, dn) of the nonlinear Bloch flow."""
    fx, fy, fz, fl = kernels.bloch_rhs_terms(
        params.epsilon, params.v, params.g, params.gamma, state.sx, state.sy, state.sz
    )
    return np.array([fx, fy, fz, fl * state.n])


def _validated_times(times) -> np.ndarray:
    times = np.ascontiguousarray(times, dtype=np.float64)
    if times.ndim != 1 or times.shape[0] < 1:
        raise ValueError("times must be a 1-d array with at least one entry")
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("times must be strictly increasing")
    return times


def integrate_bloch(
    s0: BlochState,
    params: ModelParams,
    times,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    fixed_step: float | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> BlochTrajectory:
    """Integrate the Bloch flow, sampling at the given times.

    The initial state must satisfy sx^2+sy^2+sz^2 = 1/4 within 1e-9; it is
    projected exactly onto the sphere before integration and re-projected
    after every accepted step, so the sphere is conserved to machine
    precision along the returned trajectory.
    """
    times = _validated_times(times)
    if s0.sphere_defect > SPHERE_TOL:
        raise ValueError(
            f"initial Bloch state is off the radius-1/2 sphere: |s^2 - 1/4| = {s0.sphere_defect:.3e}"
        )
    r = math.sqrt(s0.radius_sq)
    x0, y0, z0 = (0.5 / r) * np.array([s0.sx, s0.sy, s0.sz])
    log0 = math.log(s0.n)
    if fixed_step is not None:
        if fixed_step <= 0.0:
            raise ValueError("fixed_step must be positive")
        out, status, t_reached, _ = kernels.bloch_rk4(
            params.epsilon, params.v, params.g, params.gamma,
            x0, y0, z0, log0, float(times[0]), times, float(fixed_step), max_steps,
        )
    else:
        if rtol <= 0.0 or atol <= 0.0:
            raise ValueError("rtol and atol must be positive")
        out, status, t_reached, _ = kernels.bloch_dopri5(
            params.epsilon, params.v, params.g, params.gamma,
            x0, y0, z0, log0, float(times[0]), times, float(rtol), float(atol), max_steps,
        )
    if status == kernels.STATUS_STEP_UNDERFLOW:
        raise IntegrationError("step size underflow in Bloch integration", t_reached)
    if status == kernels.STATUS_STEP_BUDGET:
        raise IntegrationError("step budget exhausted in Bloch integration", t_reached)
    return BlochTrajectory(
        t=times, sx=out[:, 0], sy=out[:, 1], sz=out[:, 2], log_n=out[:, 3]
    )


def gpe_rhs(
    psi: SpinorState, params: ModelParams, *, normalized_kappa: bool = True
) -> tuple[np.ndarray, float]:
    """Right-hand side (dpsi1, dpsi2) and dbeta of the spinor flow."""
    n = psi.n
    kap = psi.kappa if normalized_kappa else psi.kappa * n
    diag = params.epsilon + params.g * kap
    dpsi1 = -1j * (diag * psi.psi1 + params.v * psi.psi2) - 2.0 * params.gamma * psi.psi1
    dpsi2 = -1j * (params.v * psi.psi1 - diag * psi.psi2)
    return np.array([dpsi1, dpsi2]), -params.g * kap * kap


def integrate_gpe(
    psi0: SpinorState,
    params: ModelParams,
    times,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    fixed_step: float | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
    normalized_kappa: bool = True,
) -> SpinorTrajectory:
    """Integrate the spinor form, sampling at the given times."""
    times = _validated_times(times)
    n0 = psi0.n
    amp = 1.0 / math.sqrt(n0)
    u1, u2 = amp * psi0.psi1, amp * psi0.psi2
    log0 = math.log(n0)
    if fixed_step is not None:
        if fixed_step <= 0.0:
            raise ValueError("fixed_step must be positive")
        u_out, log_out, beta_out, status, t_reached, _ = kernels.spinor_rk4(
            params.epsilon, params.v, params.g, params.gamma, bool(normalized_kappa),
            u1, u2, log0, psi0.beta, float(times[0]), times, float(fixed_step), max_steps,
        )
    else:
        if rtol <= 0.0 or atol <= 0.0:
            raise ValueError("rtol and atol must be positive")
        u_out, log_out, beta_out, status, t_reached, _ = kernels.spinor_dopri5(
            params.epsilon, params.v, params.g, params.gamma, bool(normalized_kappa),
            u1, u2, log0, psi0.beta, float(times[0]), times, float(rtol), float(atol), max_steps,
        )
    if status == kernels.STATUS_STEP_UNDERFLOW:
        raise IntegrationError("step size underflow in spinor integration", t_reached)
    if status == kernels.STATUS_STEP_BUDGET:
        raise IntegrationError("step budget exhausted in spinor integration", t_reached)
    return SpinorTrajectory(
        t=times, u1=u_out[:, 0], u2=u_out[:, 1], log_n=log_out, beta=beta_out
    )


def bloch_from_spinor(psi: SpinorState) -> BlochState:
    """Spin expectations of a spinor: exactly on the radius-1/2 sphere."""
    n = psi.n
    cross = np.conj(psi.psi1) * psi.psi2
    return BlochState(
        sx=cross.real / n,
        sy=cross.imag / n,
        sz=0.5 * (abs(psi.psi1) ** 2 - abs(psi.psi2) ** 2) / n,
        n=n,
    )


def spinor_from_bloch(s: BlochState) -> SpinorState:
    """Inverse map with the gauge psi2 real non-negative.

    The psi2-real gauge is singular only where psi2 vanishes, i.e. at the
    north pole sz = +1/2; there psi1 is taken real non-negative instead.
    """
    if s.sphere_defect > SPHERE_TOL:
        raise ValueError(
            f"Bloch state is off the radius-1/2 sphere: |s^2 - 1/4| = {s.sphere_defect:.3e}"
        )
    n = s.n
    p1 = max(0.0, n * (0.5 + s.sz))
    p2 = max(0.0, n * (0.5 - s.sz))
    if p2 > 4.0 * np.finfo(float).eps * n:
        r2 = math.sqrt(p2)
        psi2 = complex(r2, 0.0)
        psi1 = n * complex(s.sx, -s.sy) / r2
    else:
        r1 = math.sqrt(p1)
        psi1 = complex(r1, 0.0)
        psi2 = n * complex(s.sx, s.sy) / r1
    return SpinorState(psi1, psi2, 0.0)
