"""Fixed points of the nonlinear Bloch flow: location, stability, regions.

For the symmetric dimer (epsilon = 0) the stationary points come in closed
form: an equatorial pair that exists for |gamma| <= |v| and an off-equator
pair that exists for g^2 + gamma^2 >= v^2.  For general epsilon the sz
coordinates are the admissible real roots of a quartic (solved via the
companion-matrix eigenvalues behind numpy.roots) and (sx, sy) follow from
the stationarity conditions; sphere membership is automatic.

Stability is read off the flow's Jacobian projected onto the tangent plane
of the sphere.  Parameter points within 1e-8 of a bifurcation boundary
yield records flagged ``marginal`` (plus a warning) rather than a class.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .meanfield import BlochState, bloch_rhs
from .params import ModelParams

RESIDUAL_TOL = 1e-10
CLASS_TOL = 1e-8
BOUNDARY_TOL = 1e-8

KINDS = ("center", "saddle", "sink", "source")


class MarginalStabilityError(RuntimeError):
    """Eigenvalues fall inside the tolerance band where no class is safe."""

    def __init__(self, eigenvalues):
        self.eigenvalues = tuple(eigenvalues)
        super().__init__(
            f"stability is marginal at this tolerance: eigenvalues {self.eigenvalues}"
        )


class MarginalParameterWarning(UserWarning):
    """Parameters sit within tolerance of a bifurcation boundary."""


@dataclass
class FixedPointRecord:
    """Fixed point with tangent-plane spectrum, class and topological index."""

    s: tuple[float, float, float]
    eigenvalues: tuple[complex, complex]
    kind: str
    index: int | None
    residual: float
    marginal: bool = False


@dataclass
class RegionLabel:
    """Parameter-plane region for epsilon = 0.

    label 'a': g^2 + gamma^2 < v^2 (two centers);
    label 'b': |gamma| > |v| (sink and source);
    label 'c': otherwise (four coexisting fixed points).
    dist_circle / dist_line are distances to the g^2+gamma^2 = v^2 circle
    and the |gamma| = |v| lines.
    """

    label: str
    dist_circle: float
    dist_line: float


def _rhs_residual(s: tuple[float, float, float], params: ModelParams) -> float:
    state = BlochState(s[0], s[1], s[2], 1.0)
    return float(np.max(np.abs(bloch_rhs(state, params)[:3])))


def jacobian(s, params: ModelParams) -> np.ndarray:
    """Analytic 3x3 Jacobian of the Bloch flow at s = (sx, sy, sz)."""
    x, y, z = s
    eps, v, g, gamma = params.epsilon, params.v, params.g, params.gamma
    return np.array(
        [
            [4.0 * gamma * z, -2.0 * eps - 4.0 * g * z, -4.0 * g * y + 4.0 * gamma * x],
            [2.0 * eps + 4.0 * g * z, 4.0 * gamma * z, 4.0 * g * x - 2.0 * v + 4.0 * gamma * y],
            [0.0, 2.0 * v, 8.0 * gamma * z],
        ]
    )


def tangent_basis(s) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the sphere's tangent plane at s."""
    s = np.asarray(s, dtype=float)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(s)))] = 1.0
    u = np.cross(s, axis)
    u /= np.linalg.norm(u)
    w = np.cross(s, u)
    w /= np.linalg.norm(w)
    return u, w


def tangent_eigenvalues(s, params: ModelParams) -> np.ndarray:
    """Spectrum of the Jacobian restricted to the sphere's tangent plane."""
    u, w = tangent_basis(s)
    jac = jacobian(s, params)
    j2 = np.array(
        [[u @ jac @ u, u @ jac @ w], [w @ jac @ u, w @ jac @ w]]
    )
    eig = np.linalg.eigvals(j2)
    return eig[np.argsort(eig.real)]


def _classify_eigenvalues(eig: np.ndarray, tol: float) -> tuple[str, int]:
    re_lo, re_hi = eig[0].real, eig[1].real
    if abs(re_lo) < tol and abs(re_hi) < tol:
        if min(abs(eig[0].imag), abs(eig[1].imag)) > tol:
            return "center", 1
        raise MarginalStabilityError(eig)
    if re_lo < -tol and re_hi > tol:
        return "saddle", -1
    if re_lo < -tol and re_hi < -tol:
        return "sink", 1
    if re_lo > tol and re_hi > tol:
        return "source", 1
    raise MarginalStabilityError(eig)


def classify(s, params: ModelParams, *, tol: float = CLASS_TOL):
    """Classify a fixed point: returns (eigenvalues, kind, index).

    The point must satisfy the stationarity condition to RESIDUAL_TOL.
    Eigenvalues inside the tolerance band raise MarginalStabilityError
    rather than guessing a class.
    """
    s = (float(s[0]), float(s[1]), float(s[2]))
    residual = _rhs_residual(s, params)
    if residual >= RESIDUAL_TOL:
        raise ValueError(
            f"not a fixed point: max |rhs| = {residual:.3e} >= {RESIDUAL_TOL:.0e}"
        )
    eig = tangent_eigenvalues(s, params)
    kind, index = _classify_eigenvalues(eig, tol)
    return (complex(eig[0]), complex(eig[1])), kind, index


def boundary_distances(params: ModelParams) -> tuple[float, float]:
    """Distances to the g^2+gamma^2 = v^2 circle and the |gamma| = |v| lines."""
    rad = math.hypot(params.g, params.gamma)
    return abs(rad - abs(params.v)), abs(abs(params.gamma) - abs(params.v))


def region(params: ModelParams) -> RegionLabel:
    """Parameter-plane region label; only defined for epsilon = 0."""
    if params.epsilon != 0.0:
        raise ValueError("region taxonomy is defined for the symmetric case epsilon = 0")
    dist_circle, dist_line = boundary_distances(params)
    if abs(params.gamma) > abs(params.v):
        label = "b"
    elif params.g**2 + params.gamma**2 < params.v**2:
        label = "a"
    else:
        label = "c"
    return RegionLabel(label=label, dist_circle=dist_circle, dist_line=dist_line)


def _record(s, params: ModelParams, expected_kind: str | None, marginal: bool) -> FixedPointRecord:
    s = (float(s[0]), float(s[1]), float(s[2]))
    residual = _rhs_residual(s, params)
    eig = tangent_eigenvalues(s, params)
    if marginal:
        return FixedPointRecord(
            s=s,
            eigenvalues=(complex(eig[0]), complex(eig[1])),
            kind="marginal",
            index=None,
            residual=residual,
            marginal=True,
        )
    kind, index = _classify_eigenvalues(eig, CLASS_TOL)
    if expected_kind is not None and kind != expected_kind:
        raise RuntimeError(
            f"closed-form analysis expects a {expected_kind} at {s} but the "
            f"numeric spectrum {tuple(eig)} classifies as {kind}"
        )
    return FixedPointRecord(
        s=s,
        eigenvalues=(complex(eig[0]), complex(eig[1])),
        kind=kind,
        index=index,
        residual=residual,
    )


def _fixed_points_symmetric(params: ModelParams, marginal: bool) -> list[FixedPointRecord]:
    """Closed forms for epsilon = 0, with region analysis fixing the classes."""
    v, g, gamma = params.v, params.g, params.gamma
    gg = g * g + gamma * gamma
    records: list[FixedPointRecord] = []

    if gamma * gamma <= v * v:
        # Equatorial pair: sy = gamma/(2v), sx = +-sqrt(v^2-gamma^2)/(2v).
        sy = gamma / (2.0 * v)
        sx_mag = math.sqrt(max(0.0, v * v - gamma * gamma)) / (2.0 * abs(v))
        signs = (1.0,) if sx_mag == 0.0 else (1.0, -1.0)
        for sgn in signs:
            sx = sgn * sx_mag
            # Tangent spectrum is +-sqrt(2vb); a center when 2vb < 0, a
            # saddle when 2vb > 0 (see the Jacobian at sz = 0).
            b = 4.0 * g * sx - 2.0 * v + 4.0 * gamma * sy
            expected = None if marginal else ("saddle" if 2.0 * v * b > 0.0 else "center")
            records.append(_record((sx, sy, 0.0), params, expected, marginal))

    if gg >= v * v and gg > 0.0:
        # Off-equator pair (hermitian limit gamma -> 0 by continuity).
        sx = g * v / (2.0 * gg)
        sy = v * gamma / (2.0 * gg)
        sz_mag = math.sqrt(max(0.0, gg - v * v)) / (2.0 * math.sqrt(gg))
        if sz_mag == 0.0:
            # Bifurcation point: the pair collapses onto the equator and
            # coincides with an equatorial root; nothing new to add.
            pass
        else:
            for sgn in (1.0, -1.0):
                if marginal:
                    expected = None
                elif gamma == 0.0:
                    expected = "center"
                else:
                    expected = "sink" if sgn < 0.0 else "source"
                records.append(_record((sx, sy, sgn * sz_mag), params, expected, marginal))

    records.sort(key=lambda rec: (rec.s[2], rec.s[0], rec.s[1]))
    return records


def _fixed_points_general(params: ModelParams, marginal: bool) -> list[FixedPointRecord]:
    """Quartic route for epsilon != 0: root-find sz, reconstruct (sx, sy)."""
    eps, v, g, gamma = params.epsilon, params.v, params.g, params.gamma
    coeffs = np.array(
        [
            4.0 * (g * g + gamma * gamma),
            4.0 * g * eps,
            eps * eps + v * v - g * g - gamma * gamma,
            -g * eps,
            -0.25 * eps * eps,
        ]
    )
    roots = np.roots(coeffs)
    records: list[FixedPointRecord] = []
    seen: list[float] = []
    for root in roots:
        if abs(root.imag) >= 1e-10:
            continue
        z = float(root.real)
        if abs(z) > 0.5 + 1e-12:
            continue
        if any(abs(z - prev) < 1e-12 for prev in seen):
            continue
        # Stationarity of (sx, sy) at fixed sz is a 2x2 rotation-like
        # linear system; D = 0 only at candidates that are not true
        # fixed points, which the residual filter removes anyway.
        a = 4.0 * gamma * z
        b = 2.0 * eps + 4.0 * g * z
        c = 2.0 * v * z
        det = a * a + b * b
        if det < 1e-300:
            continue
        sx = b * c / det
        sy = a * c / det
        if _rhs_residual((sx, sy, z), params) >= RESIDUAL_TOL:
            continue
        seen.append(z)
        records.append(_record((sx, sy, z), params, None, marginal))
    records.sort(key=lambda rec: (rec.s[2], rec.s[0], rec.s[1]))
    return records


def fixed_points(params: ModelParams) -> list[FixedPointRecord]:
    """All fixed points of the Bloch flow for the given parameters.

    Within 1e-8 of a bifurcation boundary the records carry the
    ``marginal`` flag (kind 'marginal', no index) and a
    MarginalParameterWarning is emitted.
    """
    if params.v == 0.0:
        raise ValueError("fixed-point enumeration requires a nonzero coupling v")
    dist_circle, dist_line = boundary_distances(params)
    marginal = params.epsilon == 0.0 and min(dist_circle, dist_line) < BOUNDARY_TOL
    if marginal:
        warnings.warn(
            f"parameters are within {BOUNDARY_TOL:.0e} of a bifurcation boundary; "
            "fixed points are flagged marginal",
            MarginalParameterWarning,
            stacklevel=2,
        )
    if params.epsilon == 0.0:
        return _fixed_points_symmetric(params, marginal)
    return _fixed_points_general(params, marginal)


def index_sum_check(records: list[FixedPointRecord]) -> int:
    """Sum of topological indices; must equal 2 on the sphere."""
    total = 0
    for rec in records:
        if rec.index is None:
            raise ValueError("index sum is undefined for marginal records")
        total += rec.index
    return total


@dataclass
class ScanPoint:
    """Fixed-point census at one (g, gamma) grid point."""

    g: float
    gamma: float
    label: str
    n_fixed_points: int
    n_center: int
    n_saddle: int
    n_sink: int
    n_source: int
    marginal: bool
    exceptional: bool


@dataclass
class BoundaryCrossing:
    """Midpoint of a grid edge across which the fixed-point count changes."""

    g: float
    gamma: float
    count_from: int
    count_to: int
    axis: str  # 'g' or 'gamma': the direction of the crossing edge


@dataclass
class ScanResult:
    """Grid census plus detected bifurcation boundaries."""

    v: float
    g_values: np.ndarray
    gamma_values: np.ndarray
    points: list[ScanPoint]
    crossings: list[BoundaryCrossing]
    exceptional_points: list[tuple[float, float]]

    def counts(self) -> np.ndarray:
        """Fixed-point counts as a (len(g_values), len(gamma_values)) grid."""
        n_g = len(self.g_values)
        n_gam = len(self.gamma_values)
        grid = np.empty((n_g, n_gam), dtype=int)
        for idx, pt in enumerate(self.points):
            grid[idx // n_gam, idx % n_gam] = pt.n_fixed_points
        return grid


def _scan_point(v: float, g: float, gamma: float, exceptional_tol: float) -> ScanPoint:
    params = ModelParams(epsilon=0.0, v=v, g=g, gamma=gamma)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MarginalParameterWarning)
        records = fixed_points(params)
    tally = {"center": 0, "saddle": 0, "sink": 0, "source": 0}
    marginal = False
    for rec in records:
        if rec.marginal:
            marginal = True
        else:
            tally[rec.kind] += 1
    exceptional = abs(g) <= exceptional_tol and abs(abs(gamma) - abs(v)) <= exceptional_tol
    return ScanPoint(
        g=g,
        gamma=gamma,
        label=region(params).label,
        n_fixed_points=len(records),
        n_center=tally["center"],
        n_saddle=tally["saddle"],
        n_sink=tally["sink"],
        n_source=tally["source"],
        marginal=marginal,
        exceptional=exceptional,
    )


def bifurcation_scan(
    v: float,
    g_values,
    gamma_values,
    *,
    exceptional_tol: float = 1e-9,
) -> ScanResult:
    """Census of fixed points over a rectangular (g, gamma) grid.

    Emits the grid-edge midpoints where the fixed-point count changes (the
    detected bifurcation boundaries) and flags the non-generic points at
    g = 0, |gamma| = |v| where two centers turn directly into a sink and a
    source.
    """
    g_values = np.ascontiguousarray(g_values, dtype=np.float64)
    gamma_values = np.ascontiguousarray(gamma_values, dtype=np.float64)
    if g_values.ndim != 1 or gamma_values.ndim != 1:
        raise ValueError("grid axes must be 1-d arrays")
    points = [
        _scan_point(v, float(g), float(gamma), exceptional_tol)
        for g in g_values
        for gamma in gamma_values
    ]
    return assemble_scan(v, g_values, gamma_values, points)


def assemble_scan(v: float, g_values: np.ndarray, gamma_values: np.ndarray, points: list[ScanPoint]) -> ScanResult:
    """Build a ScanResult (boundary crossings, exceptional flags) from points.

    Split out so grid points can be computed in parallel over independent
    workers and assembled deterministically afterwards.
    """
    n_gam = len(gamma_values)
    counts = np.array([pt.n_fixed_points for pt in points]).reshape(len(g_values), n_gam)
    crossings: list[BoundaryCrossing] = []
    for i in range(len(g_values)):
        for j in range(n_gam):
            if j + 1 < n_gam and counts[i, j] != counts[i, j + 1]:
                crossings.append(
                    BoundaryCrossing(
                        g=float(g_values[i]),
                        gamma=float(0.5 * (gamma_values[j] + gamma_values[j + 1])),
                        count_from=int(counts[i, j]),
                        count_to=int(counts[i, j + 1]),
                        axis="gamma",
                    )
                )
            if i + 1 < len(g_values) and counts[i, j] != counts[i + 1, j]:
                crossings.append(
                    BoundaryCrossing(
                        g=float(0.5 * (g_values[i] + g_values[i + 1])),
                        gamma=float(gamma_values[j]),
                        count_from=int(counts[i, j]),
                        count_to=int(counts[i + 1, j]),
                        axis="g",
                    )
                )
    exceptional_points = []
    for gam in (abs(v), -abs(v)):
        inside_g = g_values.min() <= 0.0 <= g_values.max()
        inside_gam = gamma_values.min() <= gam <= gamma_values.max()
        if inside_g and inside_gam:
            exceptional_points.append((0.0, gam))
    return ScanResult(
        v=float(v),
        g_values=g_values,
        gamma_values=gamma_values,
        points=points,
        crossings=crossings,
        exceptional_points=exceptional_points,
    )
