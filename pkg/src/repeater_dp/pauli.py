"""Pauli labels shared by the kernels and the density-matrix oracle.

A single-qubit Pauli is indexed by its (x, z) bits as ``2*x + z``::

    0 -> I, 1 -> Z, 2 -> X, 3 -> Y

A Bell-diagonal pair with error label ``k`` is ``(P_k (x) I) |Phi+>``.  Canonical
population slots (sorted descending) are pinned to error labels by
``SLOT_TO_PAULI``: the largest error sits on X, the type the parity check
detects, and the smallest on Z, the type it cannot see.
"""
import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)

PAULIS = (I2, Z, X, Y)
PAULI_NAMES = ("I", "Z", "X", "Y")

# canonical slot -> pauli label
SLOT_TO_PAULI = (0, 2, 3, 1)
PAULI_TO_SLOT = tuple(SLOT_TO_PAULI.index(k) for k in range(4))


def xbit(k: int) -> int:
    return k >> 1


def zbit(k: int) -> int:
    return k & 1


def label(x: int, z: int) -> int:
    return 2 * x + z


def slots_to_labels(pops) -> np.ndarray:
    out = np.zeros(4)
    for slot, k in enumerate(SLOT_TO_PAULI):
        out[k] = pops[slot]
    return out


def bell_vector(k: int) -> np.ndarray:
    phi = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    return np.kron(PAULIS[k], I2) @ phi


BELL_BASIS = np.stack([bell_vector(k) for k in range(4)], axis=1)
