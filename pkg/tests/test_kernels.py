import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repeater_dp import kernels, oracle
from repeater_dp.noise import HardwareParams
from repeater_dp.states import BellDiagonalState, canonicalize

IDEAL = HardwareParams(p=1.0, eta=1.0)
HP = HardwareParams()


@st.composite
def states(draw, min_f1=0.0):
    f1 = draw(st.floats(min_f1, 1.0))
    rest = np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3)))
    rest = rest / rest.sum() if rest.sum() > 1e-9 else np.full(3, 1 / 3)
    return canonicalize(np.concatenate([[f1], (1 - f1) * rest]))


hardware = st.sampled_from([HardwareParams(p=p, eta=e) for p in (1.0, 0.995, 0.99) for e in (1.0, 0.995, 0.99)])


def test_connect_werner_ideal():
    w = BellDiagonalState.werner(0.9)
    assert kernels.connect(w, w, IDEAL).f1 == pytest.approx(0.9 ** 2 + 0.1 ** 2 / 3, abs=1e-15)


def test_connect_werner_noisy_frozen():
    w = BellDiagonalState.werner(0.96)
    out = kernels.connect(w, w, HP)
    assert tuple(out) == pytest.approx(
        (0.9098779902, 0.0315119698, 0.0315119698, 0.0270980702), abs=1e-12)


def test_pump_werner_ideal_frozen():
    w = BellDiagonalState.werner(0.9)
    out = kernels.pump(w, w, IDEAL)
    assert tuple(out.state) == pytest.approx(
        (0.9263959390862945, 0.06852791878172591, 0.0025380710659898467, 0.0025380710659898467),
        abs=1e-14)
    assert out.success_prob == pytest.approx(0.8755555555555552, abs=1e-14)


def test_pump_werner_matches_two_way_recurrence():
    # the same bilateral-CNOT step on Werner inputs has a textbook closed form
    F = 0.9
    e = (1 - F) / 3
    norm = F ** 2 + 2 * F * e + 5 * e ** 2
    out = kernels.pump(BellDiagonalState.werner(F), BellDiagonalState.werner(F), IDEAL)
    assert out.state.f1 == pytest.approx((F ** 2 + e ** 2) / norm, abs=1e-14)
    assert out.success_prob == pytest.approx(norm, abs=1e-14)


def test_pump_with_useless_source_does_not_help():
    out = kernels.pump(BellDiagonalState.werner(0.9), BellDiagonalState.werner(0.25), IDEAL)
    assert out.state.f1 <= 0.9
    assert out.success_prob == pytest.approx(0.5)


@settings(max_examples=60, deadline=None)
@given(states(), states(), hardware)
def test_connect_matches_oracle(a, b, hp):
    assert np.allclose(list(kernels.connect(a, b, hp)), list(oracle.simulate_connect(a, b, hp)),
                       atol=1e-10, rtol=0)


@settings(max_examples=60, deadline=None)
@given(states(), states(), hardware)
def test_pump_matches_oracle(t, s, hp):
    got = kernels.pump(t, s, hp)
    ref = oracle.simulate_pump(t, s, hp)
    assert np.allclose(list(got.state), list(ref.state), atol=1e-10, rtol=0)
    assert got.success_prob == pytest.approx(ref.success_prob, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(states(0.5), hardware)
def test_teleported_gate_matches_oracle(g, hp):
    got = kernels.teleported_gate_channel(g, hp).errors
    assert np.allclose(got, oracle.simulate_teleported_gate(g, hp).errors, atol=1e-10, rtol=0)


@settings(max_examples=25, deadline=None)
@given(states(), states(), states(0.5), hardware)
def test_gated_kernels_match_oracle(a, b, g, hp):
    c = kernels.connect(a, b, hp, g)
    assert np.allclose(list(c), list(oracle.simulate_connect(a, b, hp, "ctsl", g)), atol=1e-10)
    p = kernels.pump(a, b, hp, g)
    ref = oracle.simulate_pump(a, b, hp, "ctsl", g)
    assert np.allclose(list(p.state), list(ref.state), atol=1e-10)
    assert p.success_prob == pytest.approx(ref.success_prob, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(states(), states(), hardware)
def test_connect_is_symmetric(a, b, hp):
    assert np.allclose(list(kernels.connect(a, b, hp)), list(kernels.connect(b, a, hp)), atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(states(), states(), hardware)
def test_outputs_are_canonical_states(a, b, hp):
    c = kernels.connect(a, b, hp)
    p = kernels.pump(a, b, hp)
    for s in (c, p.state):
        assert s.is_canonical()
        assert sum(s) == pytest.approx(1.0, abs=1e-12)
    assert 0.0 < p.success_prob <= 1.0


def test_connect_with_perfect_pair_is_gate_noise_only():
    perfect = BellDiagonalState.perfect()
    w = BellDiagonalState.werner(0.93)
    assert np.allclose(list(kernels.connect(perfect, w, IDEAL)), list(w), atol=1e-15)


def test_tensors_are_normalized():
    C = kernels.connect_tensor(HP)
    assert np.allclose(C.sum(axis=2), 1.0)
    D = kernels.pump_tensor(HP)
    assert np.all(D.sum(axis=2) <= 1.0 + 1e-15)


def pump_fixed_point(source, hp):
    """Dominant eigenvector of the linear map t -> sum_j s_j D[:, j, :] (pumping is linear in t)."""
    D = kernels.pump_tensor(hp)
    M = np.einsum("j,ijk->ki", np.array(list(source)), D)
    w, v = np.linalg.eig(M)
    top = np.real(v[:, np.argmax(np.real(w))])
    return top / top.sum()


@pytest.mark.parametrize("F", [0.8, 0.9, 0.96])
def test_repeated_pumping_converges_to_fixed_point(F):
    src = BellDiagonalState.werner(F)
    t = src
    gains = []
    for _ in range(60):
        nxt = kernels.pump(t, src, HP).state
        gains.append(nxt.f1 - t.f1)
        t = nxt
    fixed = pump_fixed_point(src, HP)
    assert t.f1 == pytest.approx(fixed.max(), abs=1e-9)
    assert all(g > 0 for g in gains[:4])
    # the first step leaves the Werner family, so shrinking starts at the second step
    settled = [g for g in gains[1:] if g > 1e-12]
    assert all(b < a for a, b in zip(settled, settled[1:]))
    assert abs(gains[-1]) < 1e-9


def test_fixed_point_rises_with_source_fidelity():
    tops = [pump_fixed_point(BellDiagonalState.werner(F), HP).max() for F in (0.8, 0.9, 0.96)]
    assert tops == pytest.approx([0.893415956, 0.953440592, 0.980010444], abs=1e-9)


def test_time_recursions():
    assert kernels.connect_time(1.0, 2.0, 0.5, 0.1) == pytest.approx(2.6)
    assert kernels.pump_time(1.0, 2.0, 0.5, 0.5, 0.8) == pytest.approx(5.0)

