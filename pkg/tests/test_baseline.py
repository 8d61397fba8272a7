import numpy as np
import pytest

from repeater_dp import baseline, protocol
from repeater_dp.noise import HardwareParams
from repeater_dp.planner import ConfigError, Infeasible

HP = HardwareParams()


def bdcz_time(n, F, m=None, hp=HP):
    res = baseline.unoptimized_bdcz(10 * n, F, hp, m)
    return res.avg_time if res else np.inf


@pytest.mark.parametrize("F", [0.90, 0.93])
def test_bdcz_jumps_right_after_powers_of_two(F):
    t = np.array([bdcz_time(n, F) for n in range(2, 129)])
    ratios = t[1:] / t[:-1]
    jumps = [n for n, r in zip(range(3, 129), ratios) if r > 1.5]
    assert jumps == [3, 5, 9, 17, 33, 65]


def test_bdcz_split_structure():
    res = baseline.unoptimized_bdcz(110, 0.9, HP, m=1)
    root = res.protocol
    assert root.kind == "pump"
    unpurified = root.children[1]
    assert unpurified.kind == "connect"
    left, right = unpurified.children
    assert left.span == (0, 8) and right.span == (8, 11)


def test_bdcz_pumping_jump_in_fidelity():
    # raising the target past what one pumping step gives forces m from 1 to 2
    lo = baseline.unoptimized_bdcz(640, 0.95, HP)
    hi = baseline.unoptimized_bdcz(640, 0.96, HP)
    assert (lo.m, hi.m) == (1, 2)
    assert hi.avg_time > 5 * lo.avg_time


def test_bdcz_minimal_m_reaches_target():
    res = baseline.unoptimized_bdcz(330, 0.95, HP)
    assert res.fidelity >= 0.95
    worse = baseline.unoptimized_bdcz(330, 0.95, HP, m=res.m - 1)
    assert isinstance(worse, Infeasible)


@pytest.mark.parametrize("scheme", ["bdcz", "ctsl"])
def test_baseline_protocols_recompute(scheme):
    res = baseline.unoptimized(scheme, 170, 0.9, HP, m=2)
    protocol.recompute(res.protocol, HP.resolved(scheme))
    assert res.protocol.scheme() == scheme


def test_bdcz_baseline_respects_memory_budget():
    for n in (8, 11, 16, 33):
        res = baseline.unoptimized_bdcz(10 * n, 0.9, HP, m=2)
        assert protocol.occupancy_check(res.protocol, "bdcz")


def test_ctsl_baseline_uses_one_storage_qubit():
    res = baseline.unoptimized_ctsl(110, 0.9, HP, m=3)
    assert protocol.occupancy_check(res.protocol, "ctsl")


def test_ctsl_structure():
    res = baseline.unoptimized_ctsl(110, 0.95, HP, m=3)
    root = res.protocol
    assert root.kind == "pump"
    target, source = root.children
    assert source.span == (1, 10)
    assert [g.span for g in root.gates] == [(0, 1), (10, 11)]


def test_ctsl_eleven_segments_high_target():
    res = baseline.unoptimized_ctsl(110, 0.976, HP, m=3)
    assert res
    assert 11 / 3 <= res.avg_time <= 33


def test_ctsl_long_distance_ceiling():
    best = max(baseline.unoptimized_ctsl(1000, 0.9999, HP, m).best_fidelity for m in range(6))
    assert best == pytest.approx(0.975, abs=0.005)


def test_ctsl_low_reliability_is_infeasible():
    hp = HardwareParams(p=0.99, eta=0.99)
    assert not baseline.unoptimized_ctsl(300, 0.95, hp)


def test_unknown_scheme():
    with pytest.raises(ConfigError):
        baseline.unoptimized("dlcz", 100, 0.9, HP)


def test_target_range():
    with pytest.raises(ConfigError):
        baseline.unoptimized_bdcz(100, 1.0, HP)
