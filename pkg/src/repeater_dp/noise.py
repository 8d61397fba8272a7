"""Hardware parameters, elementary pair generation, and the local-operation error models."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .pauli import PAULIS
from .states import BellDiagonalState


class InfeasibleGenerationTime(ValueError):
    pass


class ErrorShape(str, enum.Enum):
    WERNER = "werner"
    DEPHASED = "dephased"


@dataclass(frozen=True)
class HardwareParams:
    """Physical constants.  Lengths in km, speeds in km/s.

    ``gen_error_shape`` of ``None`` means "use the scheme default"
    (Werner for BDCZ, dephased for CTSL).
    """

    c: float = 2e5
    L_att: float = 20.0
    epsilon: float = 0.2
    eta: float = 0.995
    p: float = 0.995
    L0: float = 10.0
    gen_error_shape: ErrorShape | None = None

    def __post_init__(self):
        for name in ("c", "L_att", "L0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("epsilon", "eta", "p"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.gen_error_shape is not None:
            object.__setattr__(self, "gen_error_shape", ErrorShape(self.gen_error_shape))

    def with_shape(self, shape: ErrorShape | str) -> "HardwareParams":
        return replace(self, gen_error_shape=ErrorShape(shape))

    def resolved(self, scheme: str) -> "HardwareParams":
        if self.gen_error_shape is not None:
            return self
        default = ErrorShape.WERNER if scheme == "bdcz" else ErrorShape.DEPHASED
        return self.with_shape(default)

    def as_dict(self) -> dict:
        shape = self.gen_error_shape.value if self.gen_error_shape is not None else None
        return {"c": self.c, "L_att": self.L_att, "epsilon": self.epsilon, "eta": self.eta,
                "p": self.p, "L0": self.L0, "gen_error_shape": shape}


def tau_min(span: float, hp: HardwareParams) -> float:
    """Shortest generation time at which the fidelity formula is defined (F0 = 1/2)."""
    return span / hp.c * math.exp(span / hp.L_att)


def generation_fidelity(tau_e: float, span: float, hp: HardwareParams) -> float:
    tmin = tau_min(span, hp)
    if tau_e < tmin:
        raise InfeasibleGenerationTime(f"tau_e={tau_e:.6g}s below tau_min={tmin:.6g}s for {span} km")
    if math.isinf(tau_e):
        return 1.0
    bracket = 1.0 - tmin / tau_e
    return 0.5 * (1.0 + bracket ** (2.0 * (1.0 - hp.epsilon) / hp.epsilon))


def generation_time(fidelity: float, span: float, hp: HardwareParams) -> float:
    """Smallest tau_e with generation_fidelity(tau_e) >= fidelity."""
    if not 0.5 <= fidelity < 1.0:
        raise ValueError(f"elementary fidelity must be in [0.5, 1), got {fidelity}")
    tmin = tau_min(span, hp)
    expo = 2.0 * (1.0 - hp.epsilon) / hp.epsilon
    bracket = (2.0 * fidelity - 1.0) ** (1.0 / expo)
    if bracket >= 1.0:
        raise ValueError(f"fidelity {fidelity} not reachable in finite time")
    hi = tmin / (1.0 - bracket)
    while generation_fidelity(hi, span, hp) < fidelity:
        hi *= 1.0 + 1e-12
    if generation_fidelity(tmin, span, hp) >= fidelity:
        return tmin
    # bisect down to adjacent floats; lo always fails, hi always passes
    lo = tmin
    while math.nextafter(lo, math.inf) < hi:
        mid = lo + (hi - lo) / 2
        if mid <= lo or mid >= hi:
            mid = math.nextafter(lo, math.inf)
        if generation_fidelity(mid, span, hp) >= fidelity:
            hi = mid
        else:
            lo = mid
    return hi


def error_shape_state(fidelity: float, shape: ErrorShape) -> BellDiagonalState:
    e = 1.0 - fidelity
    if shape is ErrorShape.DEPHASED:
        return BellDiagonalState(fidelity, e, 0.0, 0.0)
    return BellDiagonalState(fidelity, e / 3, e / 3, e / 3)


def generation_state(tau_e: float, span: float, hp: HardwareParams) -> BellDiagonalState:
    f0 = generation_fidelity(tau_e, span, hp)
    return error_shape_state(f0, hp.gen_error_shape or ErrorShape.WERNER)


def measurement_operators(eta: float) -> tuple[np.ndarray, np.ndarray]:
    """POVM elements for a Z measurement that reports the right outcome with probability eta."""
    p0 = np.diag([eta, 1.0 - eta]).astype(complex)
    p1 = np.diag([1.0 - eta, eta]).astype(complex)
    return p0, p1


CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
IDENTITY2 = np.eye(4, dtype=complex)


@dataclass(frozen=True, eq=False)
class PauliGateChannel:
    """Two-qubit gate ``unitary`` followed by a Pauli error.

    ``errors[i, j]`` is the probability of Pauli ``i`` on the first qubit and ``j`` on
    the second (labels as in :mod:`repeater_dp.pauli`).
    """

    unitary: np.ndarray
    errors: np.ndarray

    def kraus(self) -> list[np.ndarray]:
        ops = []
        for i in range(4):
            for j in range(4):
                w = self.errors[i, j]
                if w > 0:
                    ops.append(math.sqrt(w) * np.kron(PAULIS[i], PAULIS[j]) @ self.unitary)
        return ops


def depolarizing_errors(p: float) -> np.ndarray:
    # (1-p) Tr[rho] (x) I/4 is the uniform mixture of all 16 two-qubit Paulis
    errs = np.full((4, 4), (1.0 - p) / 16.0)
    errs[0, 0] += p
    return errs


def depolarized_gate_channel(unitary: np.ndarray, p: float) -> PauliGateChannel:
    return PauliGateChannel(np.asarray(unitary, dtype=complex), depolarizing_errors(p))
