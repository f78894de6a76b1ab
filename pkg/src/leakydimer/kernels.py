"""Hot time-stepping kernels (numba-compiled, pure-NumPy fallback).

Three systems share the same embedded Dormand-Prince 4(5) machinery,
specialised per state layout so the inner loops compile cleanly:

* Fock direction + log-norm: the unnormalised state psi is stored as a
  unit vector d times exp(log_norm / 2).  With H = H_r - i*diag(loss)
  (H_r real symmetric tridiagonal) the exact change of variables reads

      d'        = -i H_r d - (loss - <loss>_d) d,
      log_norm' = -2 <loss>_d,

  where <loss>_d is the expectation of the loss diagonal in d.  This keeps
  every component representable even when <psi|psi> underflows, and it
  preserves ||d|| = 1 exactly in continuous time.
* Bloch vector + log of the per-particle norm.
* Two-component spinor direction + log-norm + accumulated global phase.

Every accepted step renormalises the direction (projects the Bloch vector
back onto the radius-1/2 sphere) and folds the correction into the
log-norm, so the constraint holds to machine precision at sample times.

Conventions shared by all steppers:

* ``t_eval`` must be non-decreasing with ``t_eval[0] >= t0``; the kernel
  lands on each sample time exactly (no dense output, no interpolation).
* Return ``status``: 0 = ok, 1 = step-size underflow, 2 = step budget
  exhausted; on failure the last filled sample index and the time reached
  are reported alongside.
"""

from __future__ import annotations

import numpy as np

from .backend import njit

STATUS_OK = 0
STATUS_STEP_UNDERFLOW = 1
STATUS_STEP_BUDGET = 2

# Dormand-Prince 4(5) tableau.
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
)
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = (
    35.0 / 384.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
)
# Difference between the 5th and the embedded 4th order weights.
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


# ---------------------------------------------------------------------------
# Fock-space engine: complex direction vector + log-norm
# ---------------------------------------------------------------------------


@njit
def fock_rhs(hr, off, loss, d):
    """Derivative of (unit direction, log-norm) for the tridiagonal dimer."""
    hd = hr * d
    hd[:-1] += off * d[1:]
    hd[1:] += off * d[:-1]
    nrm2 = 0.0
    lexp = 0.0
    for k in range(d.shape[0]):
        p = d[k].real * d[k].real + d[k].imag * d[k].imag
        nrm2 += p
        lexp += loss[k] * p
    ge = lexp / nrm2
    dd = -1j * hd + (ge - loss) * d
    return dd, -2.0 * ge


@njit
def _fock_err_norm(e_d, e_l, d0, d1, l0, l1, rtol, atol):
    m = d0.shape[0]
    acc = 0.0
    for k in range(m):
        a0 = abs(d0[k])
        a1 = abs(d1[k])
        sc = atol + rtol * (a0 if a0 > a1 else a1)
        q = abs(e_d[k]) / sc
        acc += q * q
    a0 = abs(l0)
    a1 = abs(l1)
    sc = atol + rtol * (a0 if a0 > a1 else a1)
    q = abs(e_l) / sc
    acc += q * q
    return np.sqrt(acc / (m + 1))


@njit
def fock_dopri5(hr, off, loss, d0, log0, t0, t_eval, rtol, atol, max_steps):
    """Adaptive propagation of the Fock direction; samples at t_eval."""
    m = d0.shape[0]
    nt = t_eval.shape[0]
    d_out = np.zeros((nt, m), np.complex128)
    log_out = np.zeros(nt, np.float64)

    d = d0.copy()
    log_norm = log0
    t = t0
    nsteps = 0
    status = STATUS_OK
    filled = 0

    # Initial step size from the derivative scale.
    k1, l1 = fock_rhs(hr, off, loss, d)
    fmax = abs(l1)
    for k in range(m):
        a = abs(k1[k])
        if a > fmax:
            fmax = a
    h = 1e-4
    if fmax > 0.0:
        h = 0.01 / fmax
    rejected = False

    for idx in range(nt):
        target = t_eval[idx]
        while t < target:
            if nsteps >= max_steps:
                status = STATUS_STEP_BUDGET
                break
            clamped = t + h >= target
            hs = target - t if clamped else h
            if hs < 1e-14 * (1.0 if abs(t) < 1.0 else abs(t)):
                if clamped:
                    # Remaining gap is pure roundoff: land on the target.
                    t = target
                    break
                status = STATUS_STEP_UNDERFLOW
                break

            k1, l1 = fock_rhs(hr, off, loss, d)
            k2, l2 = fock_rhs(hr, off, loss, d + hs * (_A21 * k1))
            k3, l3 = fock_rhs(hr, off, loss, d + hs * (_A31 * k1 + _A32 * k2))
            k4, l4 = fock_rhs(
                hr, off, loss, d + hs * (_A41 * k1 + _A42 * k2 + _A43 * k3)
            )
            k5, l5 = fock_rhs(
                hr,
                off,
                loss,
                d + hs * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4),
            )
            k6, l6 = fock_rhs(
                hr,
                off,
                loss,
                d
                + hs * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5),
            )
            d5 = d + hs * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
            log5 = log_norm + hs * (
                _B1 * l1 + _B3 * l3 + _B4 * l4 + _B5 * l5 + _B6 * l6
            )
            k7, l7 = fock_rhs(hr, off, loss, d5)
            e_d = hs * (
                _E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7
            )
            e_l = hs * (_E1 * l1 + _E3 * l3 + _E4 * l4 + _E5 * l5 + _E6 * l6 + _E7 * l7)

            err = _fock_err_norm(e_d, e_l, d, d5, log_norm, log5, rtol, atol)
            nsteps += 1
            if err <= 1.0:
                t = target if clamped else t + hs
                nrm2 = 0.0
                for k in range(m):
                    nrm2 += d5[k].real * d5[k].real + d5[k].imag * d5[k].imag
                nrm = np.sqrt(nrm2)
                d = d5 / nrm
                log_norm = log5 + 2.0 * np.log(nrm)
                factor = _MAX_FACTOR
                if err > 0.0:
                    factor = _SAFETY * err ** (-0.2)
                    if factor > _MAX_FACTOR:
                        factor = _MAX_FACTOR
                    if factor < _MIN_FACTOR:
                        factor = _MIN_FACTOR
                if rejected and factor > 1.0:
                    factor = 1.0
                rejected = False
                if not clamped:
                    h = hs * factor
            else:
                rejected = True
                factor = _SAFETY * err ** (-0.2)
                if factor < _MIN_FACTOR:
                    factor = _MIN_FACTOR
                h = hs * factor
        if status != STATUS_OK:
            break
        d_out[idx] = d
        log_out[idx] = log_norm
        filled = idx + 1
    return d_out, log_out, status, t, filled


@njit
def fock_rk4(hr, off, loss, d0, log0, t0, t_eval, step, max_steps):
    """Fixed-step classical RK4 propagation (reproducibility path)."""
    m = d0.shape[0]
    nt = t_eval.shape[0]
    d_out = np.zeros((nt, m), np.complex128)
    log_out = np.zeros(nt, np.float64)

    d = d0.copy()
    log_norm = log0
    t = t0
    nsteps = 0
    status = STATUS_OK
    filled = 0

    for idx in range(nt):
        target = t_eval[idx]
        span = target - t
        if span > 0.0:
            nsub = int(np.ceil(span / step))
            if nsub < 1:
                nsub = 1
            if nsteps + nsub > max_steps:
                status = STATUS_STEP_BUDGET
                break
            hs = span / nsub
            for _ in range(nsub):
                k1, l1 = fock_rhs(hr, off, loss, d)
                k2, l2 = fock_rhs(hr, off, loss, d + 0.5 * hs * k1)
                k3, l3 = fock_rhs(hr, off, loss, d + 0.5 * hs * k2)
                k4, l4 = fock_rhs(hr, off, loss, d + hs * k3)
                d = d + (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                log_norm = log_norm + (hs / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
                nrm2 = 0.0
                for k in range(m):
                    nrm2 += d[k].real * d[k].real + d[k].imag * d[k].imag
                nrm = np.sqrt(nrm2)
                d = d / nrm
                log_norm = log_norm + 2.0 * np.log(nrm)
                nsteps += 1
            t = target
        d_out[idx] = d
        log_out[idx] = log_norm
        filled = idx + 1
    return d_out, log_out, status, t, filled


# ---------------------------------------------------------------------------
# Bloch vector + log per-particle norm
# ---------------------------------------------------------------------------


@njit
def bloch_rhs_terms(eps, v, g, gamma, x, y, z):
    """Nonlinear Bloch right-hand side; last slot is d(log n)/dt."""
    fx = -2.0 * eps * y - 4.0 * g * z * y + 4.0 * gamma * z * x
    fy = 2.0 * eps * x + 4.0 * g * z * x - 2.0 * v * z + 4.0 * gamma * z * y
    fz = 2.0 * v * y - gamma * (1.0 - 4.0 * z * z)
    fl = -2.0 * gamma * (2.0 * z + 1.0)
    return fx, fy, fz, fl


@njit
def _scalar_err(e, y0, y1, rtol, atol):
    a0 = abs(y0)
    a1 = abs(y1)
    sc = atol + rtol * (a0 if a0 > a1 else a1)
    q = abs(e) / sc
    return q * q


@njit
def bloch_dopri5(eps, v, g, gamma, x0, y0, z0, log0, t0, t_eval, rtol, atol, max_steps):
    """Adaptive integration of the Bloch vector; samples at t_eval."""
    nt = t_eval.shape[0]
    out = np.zeros((nt, 4), np.float64)

    x, y, z, ln = x0, y0, z0, log0
    t = t0
    nsteps = 0
    status = STATUS_OK
    filled = 0

    fx, fy, fz, fl = bloch_rhs_terms(eps, v, g, gamma, x, y, z)
    fmax = max(max(abs(fx), abs(fy)), max(abs(fz), abs(fl)))
    h = 1e-4
    if fmax > 0.0:
        h = 0.01 / fmax
    rejected = False

    for idx in range(nt):
        target = t_eval[idx]
        while t < target:
            if nsteps >= max_steps:
                status = STATUS_STEP_BUDGET
                break
            clamped = t + h >= target
            hs = target - t if clamped else h
            if hs < 1e-14 * (1.0 if abs(t) < 1.0 else abs(t)):
                if clamped:
                    t = target
                    break
                status = STATUS_STEP_UNDERFLOW
                break

            k1x, k1y, k1z, k1l = bloch_rhs_terms(eps, v, g, gamma, x, y, z)
            k2x, k2y, k2z, k2l = bloch_rhs_terms(
                eps,
                v,
                g,
                gamma,
                x + hs * _A21 * k1x,
                y + hs * _A21 * k1y,
                z + hs * _A21 * k1z,
            )
            k3x, k3y, k3z, k3l = bloch_rhs_terms(
                eps,
                v,
                g,
                gamma,
                x + hs * (_A31 * k1x + _A32 * k2x),
                y + hs * (_A31 * k1y + _A32 * k2y),
                z + hs * (_A31 * k1z + _A32 * k2z),
            )
            k4x, k4y, k4z, k4l = bloch_rhs_terms(
                eps,
                v,
                g,
                gamma,
                x + hs * (_A41 * k1x + _A42 * k2x + _A43 * k3x),
                y + hs * (_A41 * k1y + _A42 * k2y + _A43 * k3y),
                z + hs * (_A41 * k1z + _A42 * k2z + _A43 * k3z),
            )
            k5x, k5y, k5z, k5l = bloch_rhs_terms(
                eps,
                v,
                g,
                gamma,
                x + hs * (_A51 * k1x + _A52 * k2x + _A53 * k3x + _A54 * k4x),
                y + hs * (_A51 * k1y + _A52 * k2y + _A53 * k3y + _A54 * k4y),
                z + hs * (_A51 * k1z + _A52 * k2z + _A53 * k3z + _A54 * k4z),
            )
            k6x, k6y, k6z, k6l = bloch_rhs_terms(
                eps,
                v,
                g,
                gamma,
                x + hs * (_A61 * k1x + _A62 * k2x + _A63 * k3x + _A64 * k4x + _A65 * k5x),
                y + hs * (_A61 * k1y + _A62 * k2y + _A63 * k3y + _A64 * k4y + _A65 * k5y),
                z + hs * (_A61 * k1z + _A62 * k2z + _A63 * k3z + _A64 * k4z + _A65 * k5z),
            )
            x5 = x + hs * (_B1 * k1x + _B3 * k3x + _B4 * k4x + _B5 * k5x + _B6 * k6x)
            y5 = y + hs * (_B1 * k1y + _B3 * k3y + _B4 * k4y + _B5 * k5y + _B6 * k6y)
            z5 = z + hs * (_B1 * k1z + _B3 * k3z + _B4 * k4z + _B5 * k5z + _B6 * k6z)
            l5 = ln + hs * (_B1 * k1l + _B3 * k3l + _B4 * k4l + _B5 * k5l + _B6 * k6l)
            k7x, k7y, k7z, k7l = bloch_rhs_terms(eps, v, g, gamma, x5, y5, z5)
            ex = hs * (
                _E1 * k1x + _E3 * k3x + _E4 * k4x + _E5 * k5x + _E6 * k6x + _E7 * k7x
            )
            ey = hs * (
                _E1 * k1y + _E3 * k3y + _E4 * k4y + _E5 * k5y + _E6 * k6y + _E7 * k7y
            )
            ez = hs * (
                _E1 * k1z + _E3 * k3z + _E4 * k4z + _E5 * k5z + _E6 * k6z + _E7 * k7z
            )
            el = hs * (
                _E1 * k1l + _E3 * k3l + _E4 * k4l + _E5 * k5l + _E6 * k6l + _E7 * k7l
            )
            err = np.sqrt(
                (
                    _scalar_err(ex, x, x5, rtol, atol)
                    + _scalar_err(ey, y, y5, rtol, atol)
                    + _scalar_err(ez, z, z5, rtol, atol)
                    + _scalar_err(el, ln, l5, rtol, atol)
                )
                / 4.0
            )
            nsteps += 1
            if err <= 1.0:
                t = target if clamped else t + hs
                r = np.sqrt(x5 * x5 + y5 * y5 + z5 * z5)
                scale = 0.5 / r
                x, y, z = x5 * scale, y5 * scale, z5 * scale
                ln = l5
                factor = _MAX_FACTOR
                if err > 0.0:
                    factor = _SAFETY * err ** (-0.2)
                    if factor > _MAX_FACTOR:
                        factor = _MAX_FACTOR
                    if factor < _MIN_FACTOR:
                        factor = _MIN_FACTOR
                if rejected and factor > 1.0:
                    factor = 1.0
                rejected = False
                if not clamped:
                    h = hs * factor
            else:
                rejected = True
                factor = _SAFETY * err ** (-0.2)
                if factor < _MIN_FACTOR:
                    factor = _MIN_FACTOR
                h = hs * factor
        if status != STATUS_OK:
            break
        out[idx, 0] = x
        out[idx, 1] = y
        out[idx, 2] = z
        out[idx, 3] = ln
        filled = idx + 1
    return out, status, t, filled


@njit
def bloch_rk4(eps, v, g, gamma, x0, y0, z0, log0, t0, t_eval, step, max_steps):
    """Fixed-step RK4 for the Bloch system."""
    nt = t_eval.shape[0]
    out = np.zeros((nt, 4), np.float64)

    x, y, z, ln = x0, y0, z0, log0
    t = t0
    nsteps = 0
    status = STATUS_OK
    filled = 0

    for idx in range(nt):
        target = t_eval[idx]
        span = target - t
        if span > 0.0:
            nsub = int(np.ceil(span / step))
            if nsub < 1:
                nsub = 1
            if nsteps + nsub > max_steps:
                status = STATUS_STEP_BUDGET
                break
            hs = span / nsub
            for _ in range(nsub):
                k1x, k1y, k1z, k1l = bloch_rhs_terms(eps, v, g, gamma, x, y, z)
                k2x, k2y, k2z, k2l = bloch_rhs_terms(
                    eps,
                    v,
                    g,
                    gamma,
                    x + 0.5 * hs * k1x,
                    y + 0.5 * hs * k1y,
                    z + 0.5 * hs * k1z,
                )
                k3x, k3y, k3z, k3l = bloch_rhs_terms(
                    eps,
                    v,
                    g,
                    gamma,
                    x + 0.5 * hs * k2x,
                    y + 0.5 * hs * k2y,
                    z + 0.5 * hs * k2z,
                )
                k4x, k4y, k4z, k4l = bloch_rhs_terms(
                    eps, v, g, gamma, x + hs * k3x, y + hs * k3y, z + hs * k3z
                )
                x = x + (hs / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
                y = y + (hs / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
                z = z + (hs / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
                ln = ln + (hs / 6.0) * (k1l + 2.0 * k2l + 2.0 * k3l + k4l)
                r = np.sqrt(x * x + y * y + z * z)
                scale = 0.5 / r
                x, y, z = x * scale, y * scale, z * scale
                nsteps += 1
            t = target
        out[idx, 0] = x
        out[idx, 1] = y
        out[idx, 2] = z
        out[idx, 3] = ln
        filled = idx + 1
    return out, status, t, filled


# ---------------------------------------------------------------------------
# Spinor direction + log-norm + accumulated global phase
# ---------------------------------------------------------------------------


@njit
def spinor_rhs_terms(eps, v, g, gamma, normalized_kappa, u1, u2, ln):
    """Discrete nonlinear Schroedinger right-hand side in split form.

    normalized_kappa selects the population-imbalance convention in the
    nonlinearity: True uses (|psi1|^2-|psi2|^2)/n, False the bare
    difference |psi1|^2-|psi2|^2 (a historically used variant with
    different dynamics, kept for demonstration only).
    """
    p1 = u1.real * u1.real + u1.imag * u1.imag
    p2 = u2.real * u2.real + u2.imag * u2.imag
    n_dir = p1 + p2
    kap = (p1 - p2) / n_dir
    if not normalized_kappa:
        kap = (p1 - p2) * np.exp(ln)
    ge = 2.0 * gamma * p1 / n_dir
    diag = eps + g * kap
    du1 = -1j * (diag * u1 + v * u2) - 2.0 * gamma * u1 + ge * u1
    du2 = -1j * (v * u1 - diag * u2) + ge * u2
    dln = -2.0 * ge
    dbeta = -g * kap * kap
    return du1, du2, dln, dbeta


@njit
def _cscalar_err(e, y0, y1, rtol, atol):
    a0 = abs(y0)
    a1 = abs(y1)
    sc = atol + rtol * (a0 if a0 > a1 else a1)
    q = abs(e) / sc
    return q * q


@njit
def spinor_dopri5(
    eps, v, g, gamma, normalized_kappa, u1_0, u2_0, log0, beta0, t0, t_eval, rtol, atol, max_steps
):
    """Adaptive integration of the spinor form; samples at t_eval."""
    nt = t_eval.shape[0]
    u_out = np.zeros((nt, 2), np.complex128)
    log_out = np.zeros(nt, np.float64)
    beta_out = np.zeros(nt, np.float64)

    u1, u2 = u1_0, u2_0
    ln = log0
    beta = beta0
    t = t0
    nsteps = 0
    status = STATUS_OK
    filled = 0

    d1, d2, dl, db = spinor_rhs_terms(eps, v, g, gamma, normalized_kappa, u1, u2, ln)
    fmax = max(max(abs(d1), abs(d2)), max(abs(dl), abs(db)))
    h = 1e-4
    if fmax > 0.0:
        h = 0.01 / fmax
    rejected = False

    for idx in range(nt):
        target = t_eval[idx]
        while t < target:
            if nsteps >= max_steps:
                status = STATUS_STEP_BUDGET
                break
            clamped = t + h >= target
            hs = target - t if clamped else h
            if hs < 1e-14 * (1.0 if abs(t) < 1.0 else abs(t)):
                if clamped:
                    t = target
                    break
                status = STATUS_STEP_UNDERFLOW
                break

            k1a, k1b, k1l, k1p = spinor_rhs_terms(
                eps, v, g, gamma, normalized_kappa, u1, u2, ln
            )
            k2a, k2b, k2l, k2p = spinor_rhs_terms(
                eps,
                v,
                g,
                gamma,
                normalized_kappa,
                u1 + hs * _A21 * k1a,
                u2 + hs * _A21 * k1b,
                ln + hs * _A21 * k1l,
            )
            k3a, k3b, k3l, k3p = spinor_rhs_terms(
                eps,
                v,
                g,
                gamma,
                normalized_kappa,
                u1 + hs * (_A31 * k1a + _A32 * k2a),
                u2 + hs * (_A31 * k1b + _A32 * k2b),
                ln + hs * (_A31 * k1l + _A32 * k2l),
            )
            k4a, k4b, k4l, k4p = spinor_rhs_terms(
                eps,
                v,
                g,
                gamma,
                normalized_kappa,
                u1 + hs * (_A41 * k1a + _A42 * k2a + _A43 * k3a),
                u2 + hs * (_A41 * k1b + _A42 * k2b + _A43 * k3b),
                ln + hs * (_A41 * k1l + _A42 * k2l + _A43 * k3l),
            )
            k5a, k5b, k5l, k5p = spinor_rhs_terms(
                eps,
                v,
                g,
                gamma,
                normalized_kappa,
                u1 + hs * (_A51 * k1a + _A52 * k2a + _A53 * k3a + _A54 * k4a),
                u2 + hs * (_A51 * k1b + _A52 * k2b + _A53 * k3b + _A54 * k4b),
                ln + hs * (_A51 * k1l + _A52 * k2l + _A53 * k3l + _A54 * k4l),
            )
            k6a, k6b, k6l, k6p = spinor_rhs_terms(
                eps,
                v,
                g,
                gamma,
                normalized_kappa,
                u1 + hs * (_A61 * k1a + _A62 * k2a + _A63 * k3a + _A64 * k4a + _A65 * k5a),
                u2 + hs * (_A61 * k1b + _A62 * k2b + _A63 * k3b + _A64 * k4b + _A65 * k5b),
                ln + hs * (_A61 * k1l + _A62 * k2l + _A63 * k3l + _A64 * k4l + _A65 * k5l),
            )
            u1_5 = u1 + hs * (_B1 * k1a + _B3 * k3a + _B4 * k4a + _B5 * k5a + _B6 * k6a)
            u2_5 = u2 + hs * (_B1 * k1b + _B3 * k3b + _B4 * k4b + _B5 * k5b + _B6 * k6b)
            l5 = ln + hs * (_B1 * k1l + _B3 * k3l + _B4 * k4l + _B5 * k5l + _B6 * k6l)
            b5 = beta + hs * (_B1 * k1p + _B3 * k3p + _B4 * k4p + _B5 * k5p + _B6 * k6p)
            k7a, k7b, k7l, k7p = spinor_rhs_terms(
                eps, v, g, gamma, normalized_kappa, u1_5, u2_5, l5
            )
            e1 = hs * (
                _E1 * k1a + _E3 * k3a + _E4 * k4a + _E5 * k5a + _E6 * k6a + _E7 * k7a
            )
            e2 = hs * (
                _E1 * k1b + _E3 * k3b + _E4 * k4b + _E5 * k5b + _E6 * k6b + _E7 * k7b
            )
            el = hs * (
                _E1 * k1l + _E3 * k3l + _E4 * k4l + _E5 * k5l + _E6 * k6l + _E7 * k7l
            )
            ep = hs * (
                _E1 * k1p + _E3 * k3p + _E4 * k4p + _E5 * k5p + _E6 * k6p + _E7 * k7p
            )
            err = np.sqrt(
                (
                    _cscalar_err(e1, u1, u1_5, rtol, atol)
                    + _cscalar_err(e2, u2, u2_5, rtol, atol)
                    + _scalar_err(el, ln, l5, rtol, atol)
                    + _scalar_err(ep, beta, b5, rtol, atol)
                )
                / 4.0
            )
            nsteps += 1
            if err <= 1.0:
                t = target if clamped else t + hs
                nrm = np.sqrt(
                    u1_5.real * u1_5.real
                    + u1_5.imag * u1_5.imag
                    + u2_5.real * u2_5.real
                    + u2_5.imag * u2_5.imag
                )
                u1 = u1_5 / nrm
                u2 = u2_5 / nrm
                ln = l5 + 2.0 * np.log(nrm)
                beta = b5
                factor = _MAX_FACTOR
                if err > 0.0:
                    factor = _SAFETY * err ** (-0.2)
                    if factor > _MAX_FACTOR:
                        factor = _MAX_FACTOR
                    if factor < _MIN_FACTOR:
                        factor = _MIN_FACTOR
                if rejected and factor > 1.0:
                    factor = 1.0
                rejected = False
                if not clamped:
                    h = hs * factor
            else:
                rejected = True
                factor = _SAFETY * err ** (-0.2)
                if factor < _MIN_FACTOR:
                    factor = _MIN_FACTOR
                h = hs * factor
        if status != STATUS_OK:
            break
        u_out[idx, 0] = u1
        u_out[idx, 1] = u2
        log_out[idx] = ln
        beta_out[idx] = beta
        filled = idx + 1
    return u_out, log_out, beta_out, status, t, filled


@njit
def spinor_rk4(
    eps, v, g, gamma, normalized_kappa, u1_0, u2_0, log0, beta0, t0, t_eval, step, max_steps
):
    """Fixed-step RK4 for the spinor system."""
    nt = t_eval.shape[0]
    u_out = np.zeros((nt, 2), np.complex128)
    log_out = np.zeros(nt, np.float64)
    beta_out = np.zeros(nt, np.float64)

    u1, u2 = u1_0, u2_0
    ln = log0
    beta = beta0
    t = t0
    nsteps = 0
    status = STATUS_OK
    filled = 0

    for idx in range(nt):
        target = t_eval[idx]
        span = target - t
        if span > 0.0:
            nsub = int(np.ceil(span / step))
            if nsub < 1:
                nsub = 1
            if nsteps + nsub > max_steps:
                status = STATUS_STEP_BUDGET
                break
            hs = span / nsub
            for _ in range(nsub):
                k1a, k1b, k1l, k1p = spinor_rhs_terms(
                    eps, v, g, gamma, normalized_kappa, u1, u2, ln
                )
                k2a, k2b, k2l, k2p = spinor_rhs_terms(
                    eps,
                    v,
                    g,
                    gamma,
                    normalized_kappa,
                    u1 + 0.5 * hs * k1a,
                    u2 + 0.5 * hs * k1b,
                    ln + 0.5 * hs * k1l,
                )
                k3a, k3b, k3l, k3p = spinor_rhs_terms(
                    eps,
                    v,
                    g,
                    gamma,
                    normalized_kappa,
                    u1 + 0.5 * hs * k2a,
                    u2 + 0.5 * hs * k2b,
                    ln + 0.5 * hs * k2l,
                )
                k4a, k4b, k4l, k4p = spinor_rhs_terms(
                    eps,
                    v,
                    g,
                    gamma,
                    normalized_kappa,
                    u1 + hs * k3a,
                    u2 + hs * k3b,
                    ln + hs * k3l,
                )
                u1 = u1 + (hs / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
                u2 = u2 + (hs / 6.0) * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
                ln = ln + (hs / 6.0) * (k1l + 2.0 * k2l + 2.0 * k3l + k4l)
                beta = beta + (hs / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
                nrm = np.sqrt(
                    u1.real * u1.real
                    + u1.imag * u1.imag
                    + u2.real * u2.real
                    + u2.imag * u2.imag
                )
                u1 = u1 / nrm
                u2 = u2 / nrm
                ln = ln + 2.0 * np.log(nrm)
                nsteps += 1
            t = target
        u_out[idx, 0] = u1
        u_out[idx, 1] = u2
        log_out[idx] = ln
        beta_out[idx] = beta
        filled = idx + 1
    return u_out, log_out, beta_out, status, t, filled
