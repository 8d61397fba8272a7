"""Bell-diagonal transfer maps for entanglement connection, pumping, and the teleported CNOT.

All three circuits are Clifford circuits with Pauli noise, so they act on Bell-diagonal
inputs as bilinear maps on the population vectors.  The coefficient tensors are obtained
by propagating Pauli errors through the circuit (``_Frames``); the dense-matrix oracle in
:mod:`repeater_dp.oracle` is an independent check on them.

The numba cores (``connect_core``, ``pump_core``) are shared with the planner's inner
loops so a state computed here is bit-identical to the one the planner stored.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

from .noise import CNOT, HardwareParams, PauliGateChannel, depolarizing_errors
from .pauli import PAULI_TO_SLOT, SLOT_TO_PAULI
from .states import BellDiagonalState, canonical_inplace


class _Frames:
    """Distribution over Pauli frames on ``n`` qubits plus one classical parity flag.

    Qubit ``q`` uses bit ``2q+1`` for X and ``2q`` for Z; the flag is bit ``2n``.
    """

    def __init__(self, n: int):
        self.n = n
        self.flag = 1 << (2 * n)
        self.dist: dict[int, float] = {0: 1.0}

    @staticmethod
    def _pauli_bits(q: int, k: int) -> int:
        return ((k >> 1) << (2 * q + 1)) | ((k & 1) << (2 * q))

    def _mix(self, branches):
        out: dict[int, float] = {}
        for frame, w in self.dist.items():
            for mask, bw in branches:
                key = frame ^ mask
                out[key] = out.get(key, 0.0) + w * bw
        self.dist = out

    def apply_pauli(self, q: int, k: int):
        self._mix([(self._pauli_bits(q, k), 1.0)])

    def inject(self, q: int, probs):
        self._mix([(self._pauli_bits(q, k), w) for k, w in enumerate(probs) if w > 0])

    def inject2(self, q1: int, q2: int, errors: np.ndarray):
        self._mix([(self._pauli_bits(q1, i) | self._pauli_bits(q2, j), errors[i, j])
                   for i in range(4) for j in range(4) if errors[i, j] > 0])

    def cnot(self, c: int, t: int):
        out: dict[int, float] = {}
        for frame, w in self.dist.items():
            xc = (frame >> (2 * c + 1)) & 1
            zt = (frame >> (2 * t)) & 1
            frame ^= (xc << (2 * t + 1)) | (zt << (2 * c))
            out[frame] = out.get(frame, 0.0) + w
        self.dist = out

    def measure(self, q: int, basis: str, eta: float, corrections=(), flag: bool = False):
        """Outcome flips on X (Z basis) or Z (X basis) error, or misreport w.p. 1-eta.

        A flipped outcome applies the ``corrections`` Paulis wrongly and toggles the flag.
        """
        bit = 2 * q + 1 if basis == "Z" else 2 * q
        fix = 0
        for cq, ck in corrections:
            fix |= self._pauli_bits(cq, ck)
        if flag:
            fix |= self.flag
        out: dict[int, float] = {}
        for frame, w in self.dist.items():
            wrong = (frame >> bit) & 1
            for misread, mw in ((0, eta), (1, 1.0 - eta)):
                if mw == 0:
                    continue
                key = frame ^ fix if wrong ^ misread else frame
                out[key] = out.get(key, 0.0) + w * mw
        self.dist = out

    def pair_error(self, q1: int, q2: int, keep_flag_clear: bool = False) -> np.ndarray:
        out = np.zeros(4)
        for frame, w in self.dist.items():
            if keep_flag_clear and frame & self.flag:
                continue
            b1 = (frame >> (2 * q1)) & 3
            b2 = (frame >> (2 * q2)) & 3
            out[_bits_to_label(b1 ^ b2)] += w
        return out

    def two_qubit_marginal(self, q1: int, q2: int) -> np.ndarray:
        out = np.zeros((4, 4))
        for frame, w in self.dist.items():
            out[_bits_to_label((frame >> (2 * q1)) & 3), _bits_to_label((frame >> (2 * q2)) & 3)] += w
        return out


def _bits_to_label(b: int) -> int:
    # frame packs (x, z) as bits (1, 0) which is already the label 2x+z
    return b


def _labels(state) -> np.ndarray:
    pops = np.asarray(list(state), dtype=np.float64)
    out = np.zeros(4)
    for slot, k in enumerate(SLOT_TO_PAULI):
        out[k] = pops[slot]
    return out


# -- teleported CNOT ---------------------------------------------------------

@lru_cache(maxsize=256)
def _teleported_errors(gate_pops: tuple, p: float, eta: float) -> np.ndarray:
    c, t, a, b = 0, 1, 2, 3
    dep = depolarizing_errors(p)
    fr = _Frames(4)
    fr.inject(a, _labels(gate_pops))
    fr.cnot(c, a)
    fr.inject2(c, a, dep)
    fr.measure(a, "Z", eta, corrections=[(b, 2)])
    fr.cnot(b, t)
    fr.inject2(b, t, dep)
    fr.measure(b, "X", eta, corrections=[(c, 1)])
    errs = fr.two_qubit_marginal(c, t)
    errs.flags.writeable = False
    return errs


def teleported_gate_channel(gate_pair: BellDiagonalState, hp: HardwareParams) -> PauliGateChannel:
    """CNOT between two storage qubits mediated by the communication pair ``gate_pair``.

    Local CNOTs are depolarized with reliability ``p`` and both feed-forward measurements
    misreport with probability ``1 - eta``.
    """
    errs = _teleported_errors(tuple(gate_pair), hp.p, hp.eta)
    return PauliGateChannel(CNOT, errs.copy())


def gate_errors(hp: HardwareParams, gate_pair: BellDiagonalState | None) -> np.ndarray:
    if gate_pair is None:
        return depolarizing_errors(hp.p)
    return _teleported_errors(tuple(gate_pair), hp.p, hp.eta)


# -- coefficient tensors -----------------------------------------------------

def _slot_tensor(by_label: np.ndarray) -> np.ndarray:
    out = np.empty_like(by_label)
    for si in range(4):
        for sj in range(4):
            out[si, sj] = by_label[SLOT_TO_PAULI[si], SLOT_TO_PAULI[sj]]
    out.flags.writeable = False
    return out


@lru_cache(maxsize=256)
def _connect_tensor(errors_key: bytes, eta: float) -> np.ndarray:
    errors = np.frombuffer(errors_key).reshape(4, 4)
    a1, a2, b1, b2 = 0, 1, 2, 3
    by_label = np.zeros((4, 4, 4))
    for i in range(4):
        for j in range(4):
            fr = _Frames(4)
            fr.apply_pauli(a2, i)
            fr.apply_pauli(b1, j)
            fr.cnot(a2, b1)
            fr.inject2(a2, b1, errors)
            fr.measure(a2, "X", eta, corrections=[(b2, 1)])
            fr.measure(b1, "Z", eta, corrections=[(b2, 2)])
            by_label[i, j] = fr.pair_error(a1, b2)
    return _slot_tensor(by_label)


@lru_cache(maxsize=256)
def _pump_tensor(errors_key: bytes, eta: float) -> np.ndarray:
    errors = np.frombuffer(errors_key).reshape(4, 4)
    t1, t2, s1, s2 = 0, 1, 2, 3
    by_label = np.zeros((4, 4, 4))
    for i in range(4):
        for j in range(4):
            fr = _Frames(4)
            fr.apply_pauli(t1, i)
            fr.apply_pauli(s1, j)
            fr.cnot(t1, s1)
            fr.inject2(t1, s1, errors)
            fr.cnot(t2, s2)
            fr.inject2(t2, s2, errors)
            fr.measure(s1, "Z", eta, flag=True)
            fr.measure(s2, "Z", eta, flag=True)
            by_label[i, j] = fr.pair_error(t1, t2, keep_flag_clear=True)
    return _slot_tensor(by_label)


def connect_tensor(hp: HardwareParams, gate_pair: BellDiagonalState | None = None) -> np.ndarray:
    """``C[i, j, k]``: weight of output error label ``k`` for canonical input slots ``i, j``."""
    errs = np.ascontiguousarray(gate_errors(hp, gate_pair), dtype=np.float64)
    return _connect_tensor(errs.tobytes(), hp.eta)


def pump_tensor(hp: HardwareParams, gate_pair: BellDiagonalState | None = None) -> np.ndarray:
    """``D[i, j, k]``: unnormalized kept weight; the success probability is the sum over k."""
    errs = np.ascontiguousarray(gate_errors(hp, gate_pair), dtype=np.float64)
    return _pump_tensor(errs.tobytes(), hp.eta)


# -- numba cores ---------------------------------------------------------------

@numba.njit(cache=True, inline="always")
def contract_first(a, T, part):
    """``part[j, k] = sum_i a[i] T[i, j, k]``; hoisted out of the inner pair loop."""
    for j in range(4):
        for k in range(4):
            acc = 0.0
            for i in range(4):
                acc += a[i] * T[i, j, k]
            part[j, k] = acc


@numba.njit(cache=True, inline="always")
def contract_second(b, part, out):
    for k in range(4):
        acc = 0.0
        for j in range(4):
            acc += b[j] * part[j, k]
        out[k] = acc
    return out[0] + out[1] + out[2] + out[3]


@numba.njit(cache=True)
def bilinear(a, b, T, out):
    part = np.empty((4, 4))
    contract_first(a, T, part)
    return contract_second(b, part, out)


@numba.njit(cache=True)
def connect_core(a, b, C, out):
    total = bilinear(a, b, C, out)
    canonical_inplace(out, total)


@numba.njit(cache=True)
def pump_core(t, s, D, out):
    prob = bilinear(t, s, D, out)
    if prob > 0.0:
        canonical_inplace(out, prob)
    return prob


@numba.njit(cache=True, inline="always")
def connect_time(t_left, t_right, t_gate, latency):
    return max(t_left, t_right) + t_gate + latency


@numba.njit(cache=True, inline="always")
def pump_time(t_target, t_source, t_gate, latency, prob):
    return (t_target + t_source + t_gate + latency) / prob


# -- public API ----------------------------------------------------------------

@dataclass(frozen=True)
class PumpOutcome:
    state: BellDiagonalState
    success_prob: float


def _pops(s: BellDiagonalState) -> np.ndarray:
    return np.array([s.f1, s.f2, s.f3, s.f4], dtype=np.float64)


def connect(a: BellDiagonalState, b: BellDiagonalState, hp: HardwareParams,
            gate_pair: BellDiagonalState | None = None) -> BellDiagonalState:
    out = np.empty(4)
    connect_core(_pops(a), _pops(b), connect_tensor(hp, gate_pair), out)
    return BellDiagonalState.from_array(out)


def pump(target: BellDiagonalState, source: BellDiagonalState, hp: HardwareParams,
         gate_pair: BellDiagonalState | None = None) -> PumpOutcome:
    out = np.empty(4)
    prob = pump_core(_pops(target), _pops(source), pump_tensor(hp, gate_pair), out)
    if prob <= 0.0:
        raise ValueError("pumping cannot succeed for these inputs")
    return PumpOutcome(BellDiagonalState.from_array(out), float(prob))


def labels_to_state(by_label) -> BellDiagonalState:
    """Canonical state from populations indexed by Pauli error label."""
    pops = np.array([by_label[SLOT_TO_PAULI[s]] for s in range(4)], dtype=np.float64)
    canonical_inplace(pops, pops.sum())
    return BellDiagonalState.from_array(pops)


__all__ = [
    "PumpOutcome", "connect", "pump", "teleported_gate_channel", "connect_tensor",
    "pump_tensor", "connect_core", "pump_core", "connect_time", "pump_time",
    "labels_to_state", "PAULI_TO_SLOT",
]
