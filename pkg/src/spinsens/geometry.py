"""Geometric decomposition of the sensitivity into frame angles.

The rank-one input-output operator R = rf r0^T lives in the N^2 x N^2
matrix space with the Frobenius inner product. The span of the propagator
and the sensitivity operator (mutually orthogonal, see the engine module)
carries all of the action: the projection R_S of R onto that plane
determines both the fidelity, through the angle phi between R_S and the
propagator, and the sensitivity, through the complementary angle theta
against the K direction. The working identity is

    |zeta| = f_n * t_f * |K| * |R_S| * |sin phi|

which factors the sensitivity into scale terms and a pure alignment term.

Numerical note: sin phi computed as sqrt(1 - cos^2 phi) loses half the
digits when phi is tiny, exactly the regime of near-perfect transfer
that matters most. ``project`` therefore also reports the norm of the
component of R_S orthogonal to the propagator, from which sin phi
follows by division without cancellation; ``angles`` prefers that route
when offered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation
from .sensitivity import SensitivityOperator


def _frob(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.tensordot(a, b, axes=2))


def io_operator(rf: np.ndarray, r0: np.ndarray) -> np.ndarray:
    """Rank-one transfer operator R = rf r0^T for unit coherence vectors."""
    rf = np.asarray(rf, dtype=float)
    r0 = np.asarray(r0, dtype=float)
    for name, r in (("r0", r0), ("rf", rf)):
        nrm = np.linalg.norm(r)
        if abs(nrm - 1.0) > 1e-8:
            raise ValueError(f"{name} must be a unit vector, |r| = {nrm:.12e}")
    return np.outer(rf, r0)


def project(r_op: np.ndarray, phi: np.ndarray,
            op: SensitivityOperator) -> tuple[np.ndarray, float, float]:
    """Project R onto span{Phi, K}; returns (R_S, |R_S|, |R_S - P_Phi R_S|).

    Phi and K are orthogonal, so the projection is the sum of the two
    rescaled components. The third return value is the norm of the part
    of R_S outside the propagator direction, the cancellation-free
    ingredient for sin phi. An internal check confirms that |R_S|^2
    agrees with the sum of squared projection coefficients.
    """
    r_op = np.asarray(r_op, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if op.norm_K <= 0:
        raise ValueError("projection undefined for a vanishing sensitivity operator")
    n2 = phi.shape[0]
    n = math.isqrt(n2)
    f_coeff = _frob(r_op, phi)
    k_coeff = _frob(r_op, op.K)
    r_s = (f_coeff / n2) * phi + (k_coeff / op.norm_K ** 2) * op.K
    norm_rs = float(np.linalg.norm(r_s))
    frame_sq = (f_coeff / n) ** 2 + (k_coeff / op.norm_K) ** 2
    if abs(norm_rs ** 2 - frame_sq) > 1e-10 * max(1.0, frame_sq):
        raise InvariantViolation(
            f"projection norm {norm_rs**2:.17e} disagrees with frame "
            f"coefficients {frame_sq:.17e}")
    perp = r_s - (_frob(r_s, phi) / n2) * phi
    return r_s, norm_rs, float(np.linalg.norm(perp))


def angles(fidelity: float, zeta: float, n: int, norm_rs: float, norm_k: float,
           f_n: float, t_f: float, *,
           norm_rs_perp: float | None = None) -> tuple[float, float, float]:
    """Frame angles (cos phi, sin phi, cos theta) of one record.

    cos phi comes from the fidelity, sin phi from the orthogonal-component
    norm when given (else from cos phi, with the usual cancellation), and
    cos theta from the sensitivity. When f_n t_f != 0 the two independent
    routes must agree up to sign: |cos theta| = sin phi. That identity is
    asserted with a small conditioning allowance on top of the base
    tolerance; for f_n t_f = 0 the sensitivity is identically zero and
    cos theta is reported as 0 with no assertion.
    """
    if not norm_rs > 0:
        raise ValueError("angles undefined for a vanishing projection")
    if norm_k <= 0:
        raise ValueError("angles undefined for a vanishing sensitivity operator")
    eps = np.finfo(float).eps
    cos_phi = fidelity / (n * norm_rs)
    if norm_rs_perp is not None:
        sin_phi = min(1.0, norm_rs_perp / norm_rs)
        # both routes to the identity below are exact up to conditioning
        floor = 0.0
    else:
        sin_phi = math.sqrt(max(0.0, 1.0 - cos_phi ** 2))
        # the square root halves the working precision near cos phi = 1;
        # sqrt(8 eps) is the provable noise floor of this route
        floor = math.sqrt(8.0 * eps)
    if f_n * t_f != 0.0:
        cos_theta = -zeta / (t_f * f_n * norm_k * norm_rs)
        slack = floor + 8.0 * n * n * eps / norm_rs
        if abs(abs(cos_theta) - sin_phi) > 1e-8 + slack:
            raise InvariantViolation(
                f"|cos theta| = {abs(cos_theta):.17e} and sin phi = "
                f"{sin_phi:.17e} disagree beyond tolerance")
    else:
        cos_theta = 0.0
    return float(cos_phi), float(sin_phi), float(cos_theta)


def identity_residual(zeta: float, f_n: float, t_f: float, norm_k: float,
                      norm_rs: float, sin_phi: float) -> float:
    """Defect of |zeta| = f_n t_f |K| |R_S| sin phi for one record."""
    return float(abs(abs(zeta) - f_n * t_f * norm_k * norm_rs * abs(sin_phi)))


def pst_check(phi: np.ndarray, r0: np.ndarray, rf: np.ndarray,
              tol: float = 1e-12) -> bool:
    """Whether the flow maps the input exactly onto the target, |rf - Phi r0| <= tol."""
    if not tol > 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    phi = np.asarray(phi, dtype=float)
    return bool(np.linalg.norm(np.asarray(rf, float) - phi @ np.asarray(r0, float)) <= tol)


@dataclass(frozen=True)
class GeometryRecord:
    """One (controller, uncertainty) row of the geometric decomposition.

    Angles carry nan when the record is degenerate (fidelity at the
    zero-measure floor); such rows keep their scale quantities but are
    excluded from angle statistics downstream.
    """

    controller_index: int
    structure_index: int
    F: float
    e: float
    zeta: float
    f_n: float
    t_f: float
    norm_K: float
    norm_Rs: float
    cos_phi: float
    sin_phi: float
    cos_theta: float
    identity_residual: float
    pst: bool
    zero_fidelity: bool

    def __post_init__(self):
        if self.norm_K <= 0:
            raise ValueError("norm_K must be positive")
        if math.isfinite(self.cos_phi) and abs(self.cos_phi) > 1.0 + 1e-9:
            raise ValueError(f"cos phi {self.cos_phi} outside [-1, 1]")
        if math.isfinite(self.cos_theta) and abs(self.cos_theta) > 1.0 + 1e-9:
            raise ValueError(f"cos theta {self.cos_theta} outside [-1, 1]")

    @property
    def abs_zeta(self) -> float:
        return abs(self.zeta)

    @property
    def bound_product(self) -> float:
        """The factored form f_n t_f |K| |R_S| |sin phi|."""
        return self.f_n * self.t_f * self.norm_K * self.norm_Rs * abs(self.sin_phi)
