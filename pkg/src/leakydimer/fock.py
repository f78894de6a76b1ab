"""Exact many-particle engine for the leaky two-site Bose-Hubbard model.

The particle number N is conserved even with the decay term, so everything
lives in the (N+1)-dimensional sector spanned by the Fock states with
k = 0..N particles in site 1.  The Hamiltonian in that sector is a
complex-symmetric tridiagonal matrix; its anti-hermitian part is the
diagonal loss 2*gamma*k that drains survival probability without removing
particles.

States are stored as a unit direction plus the log of the survival
probability <psi|psi>.  That reformulation is exact and keeps runs with
survival ~ exp(-2 gamma N t) well inside float range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .params import (
    DEFAULT_ATOL,
    DEFAULT_MAX_STEPS,
    DEFAULT_RTOL,
    IntegrationError,
    ModelParams,
)

OBSERVABLE_IDS = ("lx", "ly", "lz", "n")


def _validate_n_particles(n_particles) -> int:
    if not isinstance(n_particles, (int, np.integer)):
        raise ValueError(f"particle number must be an integer, got {n_particles!r}")
    n = int(n_particles)
    if n < 1:
        raise ValueError(f"particle number must be >= 1, got {n}")
    return n


def basis_dimension(n_particles: int) -> int:
    """Dimension of the fixed-N sector: one state per site-1 occupation."""
    return _validate_n_particles(n_particles) + 1


def hopping_weights(n_particles: int) -> np.ndarray:
    """Off-diagonal matrix elements sqrt((k+1)(N-k)), k = 0..N-1."""
    n = _validate_n_particles(n_particles)
    k = np.arange(n, dtype=np.float64)
    return np.sqrt((k + 1.0) * (n - k))


def build_hamiltonian(params: ModelParams, n_particles: int) -> np.ndarray:
    """Assemble the (N+1)x(N+1) complex-symmetric tridiagonal Hamiltonian.

    Diagonal: (epsilon - 2i*gamma)*k - epsilon*(N-k) + (c/2)*(2k-N)^2 with
    the per-particle interaction c = g/N; off-diagonals v*sqrt((k+1)(N-k)).
    """
    n = _validate_n_particles(n_particles)
    c_mp = params.microscopic_interaction(n)
    k = np.arange(n + 1, dtype=np.float64)
    diag = (
        (params.epsilon - 2.0j * params.gamma) * k
        - params.epsilon * (n - k)
        + 0.5 * c_mp * (2.0 * k - n) ** 2
    )
    off = params.v * hopping_weights(n)
    ham = np.diag(diag.astype(np.complex128))
    ham += np.diag(off.astype(np.complex128), 1)
    ham += np.diag(off.astype(np.complex128), -1)
    return ham


def split_hamiltonian(ham: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split a dimer Hamiltonian into (real diagonal, real off-diagonal, loss).

    The loss is minus the imaginary part of the diagonal, so that
    H = tridiag(hr, off) - i*diag(loss).  Rejects matrices that are not of
    the complex-symmetric tridiagonal dimer form.
    """
    ham = np.asarray(ham)
    if ham.ndim != 2 or ham.shape[0] != ham.shape[1] or ham.shape[0] < 2:
        raise ValueError(f"hamiltonian must be a square matrix of size >= 2, got shape {ham.shape}")
    diag = np.diag(ham)
    upper = np.diag(ham, 1)
    lower = np.diag(ham, -1)
    scale = max(1.0, float(np.max(np.abs(ham))))
    if np.max(np.abs(upper - lower)) > 1e-12 * scale:
        raise ValueError("hamiltonian must be complex-symmetric (upper != lower off-diagonal)")
    if np.max(np.abs(upper.imag)) > 1e-12 * scale:
        raise ValueError("hamiltonian off-diagonal must be real")
    dense = np.diag(diag) + np.diag(upper, 1) + np.diag(lower, -1)
    if np.max(np.abs(ham - dense)) > 1e-12 * scale:
        raise ValueError("hamiltonian must be tridiagonal")
    return (
        np.ascontiguousarray(diag.real, dtype=np.float64),
        np.ascontiguousarray(upper.real, dtype=np.float64),
        np.ascontiguousarray(-diag.imag, dtype=np.float64),
    )


@dataclass
class ManyParticleState:
    """Unit direction over the N+1 Fock states plus log survival probability.

    Any nonzero amplitude vector may be passed; the constructor folds its
    norm into ``log_survival`` so that ``direction`` is exactly unit.
    """

    direction: np.ndarray
    log_survival: float = 0.0

    def __post_init__(self):
        d = np.ascontiguousarray(self.direction, dtype=np.complex128)
        if d.ndim != 1 or d.shape[0] < 2:
            raise ValueError("direction must be a 1-d array of length >= 2")
        if not np.all(np.isfinite(d.view(np.float64))):
            raise ValueError("direction must be finite")
        nrm = float(np.linalg.norm(d))
        if nrm == 0.0:
            raise ValueError("direction must be nonzero")
        self.direction = d / nrm
        self.log_survival = float(self.log_survival) + 2.0 * math.log(nrm)

    @property
    def n_particles(self) -> int:
        return self.direction.shape[0] - 1

    @property
    def survival(self) -> float:
        return math.exp(self.log_survival)

    @property
    def amplitudes(self) -> np.ndarray:
        """Unnormalised state vector (may underflow for strong decay)."""
        return math.exp(0.5 * self.log_survival) * self.direction

    def copy(self) -> "ManyParticleState":
        return ManyParticleState(self.direction.copy(), self.log_survival)


@dataclass
class ObservableRecord:
    """Per-particle spin expectations plus survival and site populations."""

    t: float
    sx: float
    sy: float
    sz: float
    survival: float
    pop1: float
    pop2: float

    @property
    def bloch(self) -> tuple[float, float, float]:
        return (self.sx, self.sy, self.sz)


@dataclass
class FockTrajectory:
    """Sampled many-particle evolution: directions and log survival."""

    times: np.ndarray
    directions: np.ndarray
    log_survival: np.ndarray

    def state(self, i: int) -> ManyParticleState:
        return ManyParticleState(self.directions[i].copy(), float(self.log_survival[i]))

    @property
    def survival(self) -> np.ndarray:
        return np.exp(self.log_survival)

    def observable_records(self) -> list[ObservableRecord]:
        return [
            observables(self.state(i), t=float(self.times[i]))
            for i in range(self.times.shape[0])
        ]


def coherent_state(x1: complex, x2: complex, n_particles: int) -> ManyParticleState:
    """Pure-condensate state with amplitudes sqrt(C(N,k)) x1^k x2^(N-k).

    Returned as unit direction with log_survival = N*log(|x1|^2 + |x2|^2),
    matching the norm law <x1,x2|x1,x2> = n^N.
    """
    n = _validate_n_particles(n_particles)
    x1 = complex(x1)
    x2 = complex(x2)
    if not (math.isfinite(x1.real) and math.isfinite(x1.imag)
            and math.isfinite(x2.real) and math.isfinite(x2.imag)):
        raise ValueError("coherent-state parameters must be finite")
    norm1p = abs(x1) ** 2 + abs(x2) ** 2
    if norm1p == 0.0:
        raise ValueError("coherent-state spinor must be nonzero")
    u1 = x1 / math.sqrt(norm1p)
    u2 = x2 / math.sqrt(norm1p)

    d = np.zeros(n + 1, dtype=np.complex128)
    if u1 == 0.0:
        d[0] = u2 ** n
    elif u2 == 0.0:
        d[n] = u1 ** n
    else:
        k = np.arange(n + 1, dtype=np.float64)
        log_binom = np.array(
            [math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1) for j in range(n + 1)]
        )
        log_mag = 0.5 * log_binom + k * math.log(abs(u1)) + (n - k) * math.log(abs(u2))
        phase = k * np.angle(u1) + (n - k) * np.angle(u2)
        d = np.exp(log_mag + 1j * phase)
    return ManyParticleState(d, n * math.log(norm1p))


def evolve(
    state: ManyParticleState,
    hamiltonian: np.ndarray,
    times,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    fixed_step: float | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> FockTrajectory:
    """Propagate and sample at the given times; state is taken at times[0]."""
    times = np.ascontiguousarray(times, dtype=np.float64)
    if times.ndim != 1 or times.shape[0] < 1:
        raise ValueError("times must be a 1-d array with at least one entry")
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("times must be strictly increasing")
    hr, off, loss = split_hamiltonian(hamiltonian)
    if hr.shape[0] != state.direction.shape[0]:
        raise ValueError("hamiltonian dimension does not match the state")
    if fixed_step is not None:
        if fixed_step <= 0.0:
            raise ValueError("fixed_step must be positive")
        d_out, log_out, status, t_reached, _ = kernels.fock_rk4(
            hr, off, loss, state.direction, state.log_survival,
            float(times[0]), times, float(fixed_step), max_steps,
        )
    else:
        if rtol <= 0.0 or atol <= 0.0:
            raise ValueError("rtol and atol must be positive")
        d_out, log_out, status, t_reached, _ = kernels.fock_dopri5(
            hr, off, loss, state.direction, state.log_survival,
            float(times[0]), times, float(rtol), float(atol), max_steps,
        )
    if status == kernels.STATUS_STEP_UNDERFLOW:
        raise IntegrationError("step size underflow in many-particle propagation", t_reached)
    if status == kernels.STATUS_STEP_BUDGET:
        raise IntegrationError("step budget exhausted in many-particle propagation", t_reached)
    return FockTrajectory(times=times, directions=d_out, log_survival=log_out)


def propagate(
    state: ManyParticleState,
    hamiltonian: np.ndarray,
    t0: float,
    t1: float,
    tol: float | None = None,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    fixed_step: float | None = None,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> ManyParticleState:
    """Solve i d|psi>/dt = H |psi> from t0 to t1 and return the final state.

    ``tol`` is a convenience knob setting rtol = tol, atol = tol * 1e-3;
    pass rtol/atol explicitly for independent control.  The direction is
    renormalised after every accepted step with the lost magnitude folded
    into log_survival (an exact reformulation, not an approximation).
    """
    if t1 < t0:
        raise ValueError(f"t1 must be >= t0, got t0={t0}, t1={t1}")
    if tol is not None:
        if tol <= 0.0:
            raise ValueError("tol must be positive")
        rtol = float(tol)
        atol = float(tol) * 1e-3
    if t1 == t0:
        return state.copy()
    traj = evolve(
        state,
        hamiltonian,
        np.array([t0, t1], dtype=np.float64),
        rtol=rtol,
        atol=atol,
        fixed_step=fixed_step,
        max_steps=max_steps,
    )
    return traj.state(1)


def observables(state: ManyParticleState, t: float = 0.0) -> ObservableRecord:
    """Normalised per-particle spin expectations, survival and populations.

    sz from the site-1 occupation, sx/sy from the nearest-neighbour
    overlaps with the hopping weights; pop1 + pop2 equals the survival
    probability exactly.
    """
    d = state.direction
    n = state.n_particles
    k = np.arange(n + 1, dtype=np.float64)
    pk = np.abs(d) ** 2
    lz = float(np.dot(k - 0.5 * n, pk))
    cross = complex(np.sum(hopping_weights(n) * np.conj(d[1:]) * d[:-1]))
    sx = cross.real / n
    sy = cross.imag / n
    sz = lz / n
    survival = state.survival
    return ObservableRecord(
        t=float(t),
        sx=sx,
        sy=sy,
        sz=sz,
        survival=survival,
        pop1=(0.5 + sz) * survival,
        pop2=(0.5 - sz) * survival,
    )


def angular_momentum_matrices(n_particles: int) -> dict[str, np.ndarray]:
    """Dense sector matrices for lx, ly, lz and the number operator."""
    n = _validate_n_particles(n_particles)
    w = hopping_weights(n)
    raising = np.zeros((n + 1, n + 1), dtype=np.complex128)
    for k in range(n):
        raising[k + 1, k] = w[k]  # moves one particle from site 2 to site 1
    lowering = raising.conj().T
    lx = 0.5 * (raising + lowering)
    ly = (raising - lowering) / 2.0j
    lz = np.diag((np.arange(n + 1) - 0.5 * n).astype(np.complex128))
    nop = float(n) * np.eye(n + 1, dtype=np.complex128)
    return {"lx": lx, "ly": ly, "lz": lz, "n": nop}


def _expect(matrix: np.ndarray, d: np.ndarray) -> float:
    return float(np.real(np.vdot(d, matrix @ d)))


def covariance(state: ManyParticleState, a: str, b: str) -> float:
    """Symmetrised covariance <(AB+BA)/2> - <A><B> of two sector observables.

    Observable ids: 'lx', 'ly', 'lz', 'n' (case-insensitive).
    """
    ka = str(a).lower()
    kb = str(b).lower()
    mats = angular_momentum_matrices(state.n_particles)
    if ka not in mats or kb not in mats:
        raise ValueError(f"unsupported observable id pair ({a!r}, {b!r}); use {OBSERVABLE_IDS}")
    ma, mb = mats[ka], mats[kb]
    d = state.direction
    anti = 0.5 * (ma @ mb + mb @ ma)
    return _expect(anti, d) - _expect(ma, d) * _expect(mb, d)


def energy_expectation(state: ManyParticleState, hamiltonian: np.ndarray) -> complex:
    """Normalised expectation <H> (complex for gamma > 0)."""
    d = state.direction
    return complex(np.vdot(d, np.asarray(hamiltonian) @ d))


def norm_decay_rate(state: ManyParticleState, params: ModelParams) -> float:
    """Exact decay law: d(log survival)/dt = -2*gamma*(2<Lz> + N)."""
    rec = observables(state)
    n = state.n_particles
    return -2.0 * params.gamma * (2.0 * rec.sz * n + n)


def heisenberg_residual(
    state: ManyParticleState,
    params: ModelParams,
    *,
    fd_step: float = 1e-4,
    rtol: float = 1e-11,
    atol: float = 1e-14,
) -> np.ndarray:
    """Residual of the exact evolution equations for <Lx>, <Ly>, <Lz>.

    Evaluates the commutator/covariance right-hand sides from matrix
    elements and subtracts a centered finite-difference derivative obtained
    by short propagation (the backward leg runs the sign-flipped
    Hamiltonian forward).  Small residuals certify engine consistency.
    """
    n = state.n_particles
    c_mp = params.microscopic_interaction(n)
    mats = angular_momentum_matrices(n)
    d = state.direction

    lx = _expect(mats["lx"], d)
    ly = _expect(mats["ly"], d)
    lz = _expect(mats["lz"], d)
    anti_xz = _expect(0.5 * (mats["lx"] @ mats["lz"] + mats["lz"] @ mats["lx"]), d) * 2.0
    anti_yz = _expect(0.5 * (mats["ly"] @ mats["lz"] + mats["lz"] @ mats["ly"]), d) * 2.0
    cov_xz = covariance(state, "lx", "lz")
    cov_yz = covariance(state, "ly", "lz")
    cov_zz = covariance(state, "lz", "lz")
    cov_xn = covariance(state, "lx", "n")
    cov_yn = covariance(state, "ly", "n")
    cov_zn = covariance(state, "lz", "n")

    gamma = params.gamma
    eps = params.epsilon
    v = params.v
    rhs = np.array(
        [
            -2.0 * eps * ly - 2.0 * c_mp * anti_yz - 2.0 * gamma * (2.0 * cov_xz + cov_xn),
            2.0 * eps * lx + 2.0 * c_mp * anti_xz - 2.0 * v * lz - 2.0 * gamma * (2.0 * cov_yz + cov_yn),
            2.0 * v * ly - 2.0 * gamma * (2.0 * cov_zz + cov_zn),
        ]
    )

    ham = build_hamiltonian(params, n)
    fwd = propagate(state, ham, 0.0, fd_step, rtol=rtol, atol=atol)
    bwd = propagate(state, -ham, 0.0, fd_step, rtol=rtol, atol=atol)
    fd = np.empty(3)
    for i, key in enumerate(("lx", "ly", "lz")):
        e_fwd = _expect(mats[key], fwd.direction)
        e_bwd = _expect(mats[key], bwd.direction)
        fd[i] = (e_fwd - e_bwd) / (2.0 * fd_step)
    return rhs - fd


def factorization_check(x1: complex, x2: complex, n_particles: int) -> float:
    """Largest deviation in the coherent-state anti-commutator identity.

    For pure condensates, <[Li, Lj]_+> = 2(1-1/N)<Li><Lj> + delta_ij N/2;
    both sides are evaluated by exact matrix arithmetic for all i, j.
    """
    n = _validate_n_particles(n_particles)
    state = coherent_state(x1, x2, n)
    d = state.direction
    mats = angular_momentum_matrices(n)
    keys = ("lx", "ly", "lz")
    expect = {key: _expect(mats[key], d) for key in keys}
    worst = 0.0
    for i, ki in enumerate(keys):
        for j, kj in enumerate(keys):
            anti = _expect(mats[ki] @ mats[kj] + mats[kj] @ mats[ki], d)
            fact = 2.0 * (1.0 - 1.0 / n) * expect[ki] * expect[kj]
            if i == j:
                fact += 0.5 * n
            dev = abs(anti - fact)
            if dev > worst:
                worst = dev
    return worst
