"""Mode sensitivity factors, tuning predictions and their error metric.

The core objects are the two per-mode sensitivity matrices (one for the mode
itself, one for the zero admittance-eigenvalue), the per-component admittance
sensitivity factor and the per-parameter sensitivity factor.  The Frobenius
inner product used throughout conjugates its first argument, so a first-order
mode shift is always ``<factor, delta>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modes import Mode
from .network import IncidencePattern

# |Re| below this fraction of the magnitude counts as "no damping leverage".
DAMPING_DEAD_ZONE = 1e-9


def frobenius_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Frobenius inner product with the first argument conjugated."""
    return complex(np.vdot(np.asarray(a), np.asarray(b)))


@dataclass(frozen=True)
class SensitivityMatrices:
    """Entry-wise mode sensitivity and its admittance-eigenvalue counterpart.

    ``eigen[i, k]`` is the derivative of the mode w.r.t. nodal entry (k, i);
    ``critical`` is the outer product of the null vectors; the two matrices
    differ by the complex ``scale``.
    """

    eigen: np.ndarray
    critical: np.ndarray
    scale: complex


def sensitivity_matrices(mode: Mode) -> SensitivityMatrices:
    if not mode.populated:
        raise ValueError("mode artifacts are not populated")
    return SensitivityMatrices(
        eigen=-mode.residue,
        critical=np.outer(mode.right_null, mode.left_null),
        scale=mode.sensitivity_scale,
    )


@dataclass(frozen=True)
class SensitivityFactor:
    """First-order map from one component's admittance change to a mode shift.

    ``layer1`` is the magnitude ranking value |factor||y|; ``layer2`` is the
    complex inner product <factor, y>, whose real part is the damping effect
    of scaling the admittance along its own direction.
    """

    component: str
    block: np.ndarray
    admittance: np.ndarray
    layer1: float
    layer2: complex

    @property
    def scalar(self) -> complex:
        if self.block.shape != (1, 1):
            raise ValueError("factor is a block, not a scalar")
        return complex(self.block[0, 0])

    def predicted_shift(self, delta_y: np.ndarray) -> complex:
        return frobenius_inner(self.block, np.atleast_2d(delta_y))


def admittance_sensitivity_factor(mode: Mode, pattern: IncidencePattern,
                                  admittance) -> SensitivityFactor:
    """Admittance sensitivity factor of the component behind ``pattern``.

    For a shunt at node k this reduces to conj(-Res_kk); for a branch k-i to
    the conjugated four-term residue combination over (kk, ii, ki, ik).
    """
    if not mode.populated:
        raise ValueError("mode artifacts are not populated")
    res = mode.residue
    m = pattern.width
    accum = np.zeros((m, m), dtype=complex)
    for row, col, sign in pattern.blocks:
        accum += sign * res[col : col + m, row : row + m].T
    block = np.conj(-accum)
    y = np.atleast_2d(np.asarray(admittance, dtype=complex))
    layer1 = float(np.linalg.norm(block) * np.linalg.norm(y))
    layer2 = frobenius_inner(block, y)
    return SensitivityFactor(pattern.component, block, y, layer1, layer2)


@dataclass(frozen=True)
class ParamSensitivity:
    """First-order map from one physical parameter to the mode shift."""

    component: str
    param: str
    value: complex
    rho: float

    @property
    def normalized(self) -> complex:
        return self.value * self.rho

    @property
    def has_damping_leverage(self) -> bool:
        mag = abs(self.normalized)
        return mag > 0 and abs(self.normalized.real) > DAMPING_DEAD_ZONE * mag


def parameter_sensitivity_factor(factor: SensitivityFactor, param: str,
                                 dy_drho, rho: float) -> ParamSensitivity:
    """Project an admittance factor through the parameter derivative."""
    value = frobenius_inner(factor.block, np.atleast_2d(np.asarray(dy_drho, dtype=complex)))
    return ParamSensitivity(factor.component, param, value, float(rho))


def predict_tuning(ps: ParamSensitivity, fraction: float) -> complex:
    """Predicted mode shift for a relative parameter change ``fraction``."""
    if abs(fraction) > 0.5:
        raise ValueError("tuning fraction beyond 50% is outside the linear range")
    return ps.value * ps.rho * fraction


def prediction_error(predicted: complex, actual: complex) -> float:
    """Relative mismatch |predicted - actual| / |predicted|."""
    if predicted == 0:
        raise ValueError("undefined relative error: zero prediction")
    return abs(predicted - actual) / abs(predicted)
