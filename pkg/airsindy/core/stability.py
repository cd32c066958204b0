"""
Critical points of a planar quadratic system and their linear stability.

Points are found by eliminating one variable with the resultant of the two
nullcline conics (a quartic at most), rooting it through the companion matrix,
back-substituting and polishing with Newton on (P, Q).
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P

from airsindy.core.errors import ConfigError, IllConditionedResultantError, SharedComponentError
from airsindy.core.ode import QuadraticModel, evaluate_jacobian

IMAG_TOL = 1e-8
DEDUP_TOL = 1e-8
RESIDUAL_TOL = 1e-8
TRIM_TOL = 1e-12
MAX_CONDITION = 1e15
NEWTON_ITER = 60

# irrational-looking shears keep distinct points on distinct u = y1 - c*y2
SHEARS = (0.3819660112501051, -0.6180339887498949, 1.324717957244746, -0.7548776662466927, 2.414213562373095)


class PointClass(str, Enum):
    STABLE_NODE = 'StableNode'
    UNSTABLE_NODE = 'UnstableNode'
    SADDLE = 'Saddle'
    STABLE_SPIRAL = 'StableSpiral'
    UNSTABLE_SPIRAL = 'UnstableSpiral'
    DEGENERATE = 'Degenerate'


@dataclass(frozen=True, eq=False)
class CriticalPoint:
    z: np.ndarray
    is_real: bool
    multiplicity: int = 1
    eigenvalues: Optional[np.ndarray] = None
    point_class: Optional[PointClass] = None
    physical: Optional[tuple] = None
    residual: float = 0.0

    @property
    def real(self):
        return tuple(float(v) for v in self.z.real)

    def to_dict(self):
        out = {
            'standardized': [[float(v.real), float(v.imag)] for v in self.z] if not self.is_real else list(self.real),
            'is_real': self.is_real,
            'multiplicity': self.multiplicity,
            'residual': self.residual,
        }
        if self.eigenvalues is not None:
            out['eigenvalues'] = [[float(v.real), float(v.imag)] for v in self.eigenvalues]
        if self.point_class is not None:
            out['class'] = self.point_class.value
        if self.physical is not None:
            out['physical'] = list(self.physical)
        return out


@dataclass(frozen=True, eq=False)
class StabilityReport:
    points: tuple
    multiplicity_total: int
    counts: dict = field(default_factory=dict)

    @property
    def real_points(self):
        return [p for p in self.points if p.is_real]

    def to_dict(self):
        return {
            'multiplicity_total': self.multiplicity_total,
            'counts': dict(self.counts),
            'points': [p.to_dict() for p in self.points],
        }


# --- polynomial helpers ---

def _quadratic_parts(row, c):
    """Coefficients of P(u + c v, v) = A0(u) + A1(u) v + A2 v^2."""
    b0, b1, b2, b3, b4, b5 = row
    A0 = Polynomial([b0, b1, b3])
    A1 = Polynomial([b1 * c + b2, 2 * b3 * c + b4])
    A2 = b3 * c * c + b4 * c + b5
    return A0, A1, A2


def _residual(coeffs, z):
    y1, y2 = z
    features = np.array([1.0, y1, y2, y1 * y1, y1 * y2, y2 * y2])
    return coeffs @ features


def _jacobian(coeffs, z):
    y1, y2 = z
    b = coeffs
    return np.array([
        [b[i, 1] + 2 * b[i, 3] * y1 + b[i, 4] * y2, b[i, 2] + b[i, 4] * y1 + 2 * b[i, 5] * y2]
        for i in range(2)
    ])


def _polish(coeffs, z):
    z = np.asarray(z, dtype=complex)
    for _ in range(NEWTON_ITER):
        F = _residual(coeffs, z)
        J = _jacobian(coeffs, z)
        try:
            dz = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            break
        if not np.isfinite(dz).all():
            break
        z = z + dz
        if np.max(np.abs(dz)) <= 4 * np.finfo(float).eps * (1 + np.max(np.abs(z))):
            break
    return z


def _trimmed_roots(poly, tol):
    """Roots of ``poly`` with roundoff-level leading coefficients removed."""
    coef = np.array(poly.coef, dtype=float)
    scale = np.max(np.abs(coef)) if coef.size else 0.0
    if scale <= tol:
        return None
    coef = P.polytrim(coef, TRIM_TOL * scale)
    if coef.size <= 1:
        return np.array([], dtype=complex)
    companion = P.polycompanion(coef)
    roots, vectors = np.linalg.eig(companion)
    condition = np.linalg.cond(vectors)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise IllConditionedResultantError(condition)
    return roots


# --- solvers per structure ---

def _solve_linear(coeffs):
    A = coeffs[:, 1:3]
    rhs = -coeffs[:, 0]
    rank = np.linalg.matrix_rank(A)
    if rank == 2:
        return [np.linalg.solve(A, rhs).astype(complex)]
    augmented = np.linalg.matrix_rank(np.column_stack([A, rhs]))
    if augmented == rank:
        raise SharedComponentError("the nullclines coincide along a line: infinitely many critical points")
    return []


def _solve_line_conic(line, conic):
    a0, a1, a2 = line[:3]
    norm = a1 * a1 + a2 * a2
    if norm == 0:
        if a0 == 0:
            raise SharedComponentError("one equation vanishes identically: infinitely many critical points")
        return []
    p0 = -a0 * np.array([a1, a2]) / norm
    d = np.array([-a2, a1])
    y1 = Polynomial([p0[0], d[0]])
    y2 = Polynomial([p0[1], d[1]])
    q = conic[0] + conic[1] * y1 + conic[2] * y2 + conic[3] * y1 ** 2 + conic[4] * y1 * y2 + conic[5] * y2 ** 2
    roots = _trimmed_roots(q, 1e-12 * max(1.0, np.max(np.abs(conic))))
    if roots is None:
        raise SharedComponentError("the linear nullcline lies on the other conic: infinitely many critical points")
    return [np.array([y1(s), y2(s)], dtype=complex) for s in roots]


def _solve_conics(coeffs):
    a, b = coeffs
    c = max(SHEARS, key=lambda s: min(abs(_quadratic_parts(a, s)[2]) / np.abs(a[3:]).max(),
                                       abs(_quadratic_parts(b, s)[2]) / np.abs(b[3:]).max()))
    A0, A1, A2 = _quadratic_parts(a, c)
    B0, B1, B2 = _quadratic_parts(b, c)

    res = (A2 * B0 - A0 * B2) ** 2 - (A2 * B1 - A1 * B2) * (A1 * B0 - A0 * B1)
    scale = (np.abs(a).max() * np.abs(b).max()) ** 2 * (1 + abs(c)) ** 4
    roots = _trimmed_roots(res, 1e-12 * scale)
    if roots is None:
        raise SharedComponentError("the nullcline conics share a component: infinitely many critical points")

    candidates = []
    for u in roots:
        a0, a1 = A0(u), A1(u)
        b0, b1 = B0(u), B1(u)
        denom = B2 * a1 - A2 * b1
        if abs(denom) > 1e-10 * max(1.0, abs(B2 * a1), abs(A2 * b1)):
            vs = [-(B2 * a0 - A2 * b0) / denom]
        else:
            lead, mid, const = (A2, a1, a0) if abs(A2) >= abs(B2) else (B2, b1, b0)
            vs = list(np.roots([lead, mid, const]))
        v = min(vs, key=lambda v: abs(A2 * v * v + a1 * v + a0) + abs(B2 * v * v + b1 * v + b0))
        candidates.append(np.array([u + c * v, v], dtype=complex))
    return candidates


def classify_jacobian(J, tol=1e-9):
    """Returns (PointClass, eigenvalues) for a 2x2 Jacobian."""
    J = np.asarray(J, dtype=float)
    eig = np.linalg.eigvals(J)
    scale = max(1.0, np.abs(J).max())
    atol = tol * scale
    if abs(eig[0].imag) > atol:
        re = eig[0].real
        if abs(re) <= atol:
            return PointClass.DEGENERATE, eig
        return (PointClass.STABLE_SPIRAL if re < 0 else PointClass.UNSTABLE_SPIRAL), eig
    lam = np.sort(eig.real)
    if np.any(np.abs(lam) <= atol):
        return PointClass.DEGENERATE, eig
    if abs(lam[1] - lam[0]) <= atol:
        # repeated eigenvalue: a star node when J is a multiple of I, otherwise defective
        if np.abs(J - lam.mean() * np.eye(2)).max() <= atol:
            return (PointClass.STABLE_NODE if lam[0] < 0 else PointClass.UNSTABLE_NODE), eig
        return PointClass.DEGENERATE, eig
    if lam[1] < 0:
        return PointClass.STABLE_NODE, eig
    if lam[0] > 0:
        return PointClass.UNSTABLE_NODE, eig
    return PointClass.SADDLE, eig


def classify_point(model, z):
    return classify_jacobian(evaluate_jacobian(model, np.real(np.asarray(z))))


def destandardize(z, norm_params):
    """Maps standardized coordinates to physical ones: mu + z * sigma."""
    mu = np.array([m for m, _ in norm_params], dtype=float)
    sigma = np.array([s for _, s in norm_params], dtype=float)
    if not (sigma > 0).all():
        raise ConfigError(f"standard deviations must be positive, got {sigma}")
    return mu + np.asarray(z) * sigma


def standardize_point(x, norm_params):
    mu = np.array([m for m, _ in norm_params], dtype=float)
    sigma = np.array([s for _, s in norm_params], dtype=float)
    return (np.asarray(x) - mu) / sigma


def physical_model(model):
    """
    Re-expresses a standardized model in physical units.

    With y_k = (x_k - mu_k) / sigma_k, each equation is expanded in x and
    multiplied by sigma_i so the result is dx_i/dt.
    """
    if model.norm_params is None:
        return model
    (mu1, s1), (mu2, s2) = model.norm_params
    p1, q1 = 1.0 / s1, -mu1 / s1
    p2, q2 = 1.0 / s2, -mu2 / s2
    rows = []
    for (b0, b1, b2, b3, b4, b5), sigma in zip(model.coeffs, (s1, s2)):
        row = [
            b0 + b1 * q1 + b2 * q2 + b3 * q1 * q1 + b4 * q1 * q2 + b5 * q2 * q2,
            b1 * p1 + 2 * b3 * p1 * q1 + b4 * p1 * q2,
            b2 * p2 + b4 * q1 * p2 + 2 * b5 * p2 * q2,
            b3 * p1 * p1,
            b4 * p1 * p2,
            b5 * p2 * p2,
        ]
        rows.append(np.array(row) * sigma)
    return QuadraticModel(np.vstack(rows), model.species, None, model.ranks, model.masks)


def critical_points(model: QuadraticModel):
    """
    Finds, polishes and classifies every critical point of ``model``.

    Raises:
        SharedComponentError: the nullclines intersect along a curve.
        IllConditionedResultantError: the companion eigenproblem is unreliable.
    """
    coeffs = np.asarray(model.coeffs, dtype=float)
    quad = np.abs(coeffs[:, 3:]).max(axis=1) > 0
    if not quad.any():
        candidates = _solve_linear(coeffs)
    elif not quad[0]:
        candidates = _solve_line_conic(coeffs[0], coeffs[1])
    elif not quad[1]:
        candidates = _solve_line_conic(coeffs[1], coeffs[0])
    else:
        candidates = _solve_conics(coeffs)

    merged = []
    for z in candidates:
        z = _polish(coeffs, z)
        if np.max(np.abs(z.imag)) <= IMAG_TOL:
            z = _polish(coeffs, z.real.astype(complex))
            z = np.array(z.real, dtype=complex)
        residual = float(np.max(np.abs(_residual(coeffs, z))))
        tol = RESIDUAL_TOL * max(1.0, np.abs(coeffs).max() * max(1.0, np.max(np.abs(z))) ** 2)
        if not np.isfinite(residual) or residual > tol:
            logging.warning(f"Discarding critical-point candidate {z} with residual {residual:.3e}")
            continue
        for entry in merged:
            if np.max(np.abs(entry[0] - z)) <= DEDUP_TOL * max(1.0, np.max(np.abs(z))):
                entry[1] += 1
                break
        else:
            merged.append([z, 1, residual])

    points = []
    for z, mult, residual in merged:
        is_real = bool(np.max(np.abs(z.imag)) <= IMAG_TOL)
        cls, eig = (classify_point(model, z) if is_real else (None, None))
        physical = None
        if is_real and model.norm_params is not None:
            physical = tuple(float(v) for v in destandardize(z.real, model.norm_params))
        points.append(CriticalPoint(z, is_real, mult, eig, cls, physical, residual))
    points.sort(key=lambda p: (not p.is_real, tuple(p.z.real), tuple(p.z.imag)))

    counts = Counter(p.point_class.value for p in points if p.point_class is not None)
    report = StabilityReport(tuple(points), sum(p.multiplicity for p in points), dict(counts))
    logging.info(
        f"Found {len(report.real_points)} real and {len(points) - len(report.real_points)} complex critical points: {dict(counts)}"
    )
    return report
