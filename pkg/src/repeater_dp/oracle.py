"""Dense density-matrix simulation of the repeater circuits on up to six qubits.

This is the reference the closed-form kernels are tested against.  Nothing here uses
the Pauli-frame shortcut: gate noise is applied with the partial-trace formula, the
measurements use the eta-weighted POVM, and every outcome branch is enumerated.
Qubit 0 is the most significant tensor factor.
"""
from __future__ import annotations

import numpy as np

from .kernels import PumpOutcome, labels_to_state
from .noise import CNOT, HardwareParams, PauliGateChannel, measurement_operators
from .pauli import BELL_BASIS, H, PAULIS, SLOT_TO_PAULI, X, Z
from .states import BellDiagonalState

MAX_QUBITS = 6
RESIDUAL_TOL = 1e-10


class DimensionMismatch(ValueError):
    pass


class NonBellDiagonalResidual(RuntimeError):
    pass


def _nqubits(rho: np.ndarray) -> int:
    n = int(round(np.log2(rho.shape[0])))
    if rho.shape != (2 ** n, 2 ** n) or n > MAX_QUBITS:
        raise DimensionMismatch(f"bad density matrix shape {rho.shape}")
    return n


def _check_targets(targets, n):
    if len(set(targets)) != len(targets) or any(not 0 <= t < n for t in targets):
        raise DimensionMismatch(f"targets {targets} invalid for {n} qubits")


def embed(op: np.ndarray, targets, n: int) -> np.ndarray:
    """Lift a k-qubit operator acting on ``targets`` to the full n-qubit space."""
    k = len(targets)
    if op.shape != (2 ** k, 2 ** k):
        raise DimensionMismatch(f"operator shape {op.shape} does not fit {k} targets")
    rest = [q for q in range(n) if q not in targets]
    full = np.kron(op, np.eye(2 ** (n - k)))
    order = list(targets) + rest
    inv = np.argsort(order)
    full = full.reshape([2] * (2 * n))
    full = full.transpose(list(inv) + [n + i for i in inv])
    return full.reshape(2 ** n, 2 ** n)


def apply_unitary(rho, unitary, targets):
    n = _nqubits(rho)
    _check_targets(targets, n)
    u = embed(unitary, targets, n)
    return u @ rho @ u.conj().T


def apply_kraus(rho, kraus, targets):
    n = _nqubits(rho)
    _check_targets(targets, n)
    out = np.zeros_like(rho)
    for k in kraus:
        kk = embed(k, targets, n)
        out += kk @ rho @ kk.conj().T
    return out


def apply_channel(rho, channel, targets):
    """Apply a :class:`PauliGateChannel` (or a list of Kraus operators) to ``targets``."""
    kraus = channel.kraus() if isinstance(channel, PauliGateChannel) else channel
    return apply_kraus(rho, kraus, targets)


def partial_trace(rho, traced):
    n = _nqubits(rho)
    keep = [q for q in range(n) if q not in traced]
    t = rho.reshape([2] * (2 * n))
    # move traced axes to the end, then contract row/column pairs
    perm = keep + list(traced) + [n + q for q in keep] + [n + q for q in traced]
    t = t.transpose(perm)
    dk, dt = 2 ** len(keep), 2 ** len(traced)
    t = t.reshape(dk, dt, dk, dt)
    return np.einsum("ajbj->ab", t)


def insert_identity(rho_rest, targets, n):
    """(rho_rest on the other qubits) tensor I/2^k on ``targets``."""
    k = len(targets)
    rest = [q for q in range(n) if q not in targets]
    # operators on disjoint qubits: the product is the tensor product
    return embed(np.eye(2 ** k) / 2 ** k, targets, n) @ embed(rho_rest, rest, n)


def depolarize(rho, targets, p):
    """With probability 1-p the targeted qubits are replaced by the maximally mixed state."""
    n = _nqubits(rho)
    _check_targets(targets, n)
    if p == 1.0:
        return rho
    reduced = partial_trace(rho, list(targets))
    mixed = insert_identity(reduced, list(targets), n)
    return p * rho + (1.0 - p) * mixed


def noisy_gate(rho, unitary, targets, p):
    return depolarize(apply_unitary(rho, unitary, targets), targets, p)


def measure(rho, qubit, povm, basis="Z"):
    """Return the unnormalized post-measurement states (qubit traced out), one per outcome."""
    n = _nqubits(rho)
    _check_targets([qubit], n)
    if basis == "X":
        rho = apply_unitary(rho, H, [qubit])
    out = []
    for e in povm:
        weighted = embed(e, [qubit], n) @ rho
        out.append(partial_trace(weighted, [qubit]))
    return out


def bell_density(state: BellDiagonalState) -> np.ndarray:
    rho = np.zeros((4, 4), dtype=complex)
    for slot, pop in enumerate(state):
        v = BELL_BASIS[:, SLOT_TO_PAULI[slot]]
        rho += pop * np.outer(v, v.conj())
    return rho


def bell_populations(rho2: np.ndarray) -> tuple[np.ndarray, float]:
    """Populations by Pauli label and the largest off-diagonal magnitude in the Bell basis."""
    m = BELL_BASIS.conj().T @ rho2 @ BELL_BASIS
    pops = np.real(np.diag(m)).copy()
    off = np.abs(m - np.diag(np.diag(m))).max()
    return pops, float(off)


def _project(rho2, tol=RESIDUAL_TOL) -> BellDiagonalState:
    pops, off = bell_populations(rho2)
    if off > tol:
        raise NonBellDiagonalResidual(f"off-diagonal Bell weight {off:.3e}")
    return labels_to_state(pops / pops.sum())


def check_physical(rho, tol=1e-10):
    herm = np.abs(rho - rho.conj().T).max()
    tr = np.real(np.trace(rho))
    ev = np.linalg.eigvalsh((rho + rho.conj().T) / 2).min()
    return herm < 1e-12 and abs(tr - 1) < 1e-12 and ev > -tol


# -- circuits --------------------------------------------------------------

def _remote_cnot(rho, targets, hp, mode, gate_pair):
    if mode == "ctsl":
        if gate_pair is None:
            raise ValueError("ctsl mode needs a gate pair")
        return apply_channel(rho, simulate_teleported_gate(gate_pair, hp), targets)
    return noisy_gate(rho, CNOT, targets, hp.p)


def simulate_teleported_gate(gate_pair: BellDiagonalState, hp: HardwareParams,
                             return_residual: bool = False):
    """Process (Pauli error after ideal CNOT) of the communication-pair mediated CNOT.

    Six qubits: references rc, rt, storage c, t, communication A, B.  The Choi state of
    the circuit is decomposed in the basis ``(P_i (x) P_j) CNOT |Omega>``.
    """
    rc, rt, c, t, a, b = range(6)
    phi = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    omega = np.outer(phi, phi.conj())
    # order: rc, rt, c, t, a, b  <- build (rc,c) (rt,t) then permute
    rho = np.kron(np.kron(omega, omega), bell_density(gate_pair))  # rc c rt t a b
    rho = _permute(rho, [0, 2, 1, 3, 4, 5])  # -> rc rt c t a b
    p0, p1 = measurement_operators(hp.eta)
    rho = noisy_gate(rho, CNOT, [c, a], hp.p)
    branches = measure(rho, a, (p0, p1))  # qubits now rc rt c t b
    b2 = 4
    rho = branches[0] + apply_unitary(branches[1], X, [b2])
    rho = noisy_gate(rho, CNOT, [b2, 3], hp.p)
    branches = measure(rho, b2, (p0, p1), basis="X")  # rc rt c t
    rho = branches[0] + apply_unitary(branches[1], Z, [2])
    ideal = np.kron(np.eye(4), CNOT)
    omega2 = _permute(np.kron(omega, omega), [0, 2, 1, 3])
    psi0 = ideal @ _top_eigvec(omega2)
    errors = np.zeros((4, 4))
    vecs = []
    for i in range(4):
        for j in range(4):
            v = np.kron(np.eye(4), np.kron(PAULIS[i], PAULIS[j])) @ psi0
            vecs.append(v)
            errors[i, j] = np.real(v.conj() @ rho @ v)
    basis = np.stack(vecs, axis=1)
    m = basis.conj().T @ rho @ basis
    residual = float(np.abs(m - np.diag(np.diag(m))).max())
    if residual > RESIDUAL_TOL:
        raise NonBellDiagonalResidual(f"teleported gate is not a Pauli channel: {residual:.3e}")
    ch = PauliGateChannel(CNOT, errors)
    return (ch, residual) if return_residual else ch


def _top_eigvec(rho):
    w, v = np.linalg.eigh(rho)
    return v[:, -1]


def _permute(rho, order):
    """Reorder tensor factors so that new qubit i is old qubit order[i]."""
    n = _nqubits(rho)
    t = rho.reshape([2] * (2 * n)).transpose(list(order) + [n + q for q in order])
    return t.reshape(2 ** n, 2 ** n)


def simulate_connect(a: BellDiagonalState, b: BellDiagonalState, hp: HardwareParams,
                     mode: str = "bdcz", gate_pair: BellDiagonalState | None = None,
                     return_matrix: bool = False):
    """Bell measurement on the inner qubits (a2, b1): CNOT, X readout of a2, Z readout of b1."""
    rho = np.kron(bell_density(a), bell_density(b))  # a1 a2 b1 b2
    rho = _remote_cnot(rho, [1, 2], hp, mode, gate_pair)
    p0, p1 = measurement_operators(hp.eta)
    after_a2 = measure(rho, 1, (p0, p1), basis="X")  # a1 b1 b2
    out = np.zeros((4, 4), dtype=complex)
    for mx, r in enumerate(after_a2):
        for mz, r2 in enumerate(measure(r, 1, (p0, p1))):  # a1 b2
            if mz:
                r2 = apply_unitary(r2, X, [1])
            if mx:
                r2 = apply_unitary(r2, Z, [1])
            out += r2
    if return_matrix:
        return out
    return _project(out)


def simulate_pump(target: BellDiagonalState, source: BellDiagonalState, hp: HardwareParams,
                  mode: str = "bdcz", gate_pair: BellDiagonalState | None = None,
                  return_matrix: bool = False):
    """Bilateral CNOT (target controls source), Z readout of both source qubits, keep on agreement."""
    rho = np.kron(bell_density(target), bell_density(source))  # t1 t2 s1 s2
    rho = _permute(rho, [0, 2, 1, 3])  # t1 s1 t2 s2
    rho = _remote_cnot(rho, [0, 1], hp, mode, gate_pair)
    rho = _remote_cnot(rho, [2, 3], hp, mode, gate_pair)
    p0, p1 = measurement_operators(hp.eta)
    kept = np.zeros((4, 4), dtype=complex)
    for m1, r in enumerate(measure(rho, 1, (p0, p1))):  # t1 t2 s2
        for m2, r2 in enumerate(measure(r, 2, (p0, p1))):  # t1 t2
            if m1 == m2:
                kept += r2
    prob = float(np.real(np.trace(kept)))
    if return_matrix:
        return kept, prob
    return PumpOutcome(_project(kept / prob), prob)
