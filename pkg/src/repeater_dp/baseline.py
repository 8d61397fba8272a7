"""Fixed-pattern reference protocols used as the denominator of improvement factors.

Both baselines use one elementary fidelity, the minimal generation time reaching it,
fixed connection patterns and a constant number ``m`` of pumping steps per level.

``bdcz``: a distance of ``N`` segments is split as ``(2^p, N - 2^p)`` with ``2^p`` the
largest power of two below ``N``, so the nesting depth and the time step up right after
each power of two.  After every connection the pair is pumped ``m`` times; each source
is an unpurified pair built by the same pattern.

``ctsl``: distance ``n`` is made by connecting pumped pairs of distances
``ceil((n-1)/2)`` and ``floor((n-1)/2)`` through a gate pair on the segment between
them, then pumping ``m`` times with an unpurified pair over ``[a+1, b-1]``.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import kernels
from .noise import HardwareParams, generation_state, generation_time
from .planner import ConfigError, Infeasible, to_units
from .protocol import ProtocolNode
from .states import BellDiagonalState

BDCZ_F0 = 0.96
CTSL_F0 = 0.99
M_LIMIT = 8


@dataclass(frozen=True)
class BaselineResult:
    protocol: ProtocolNode
    avg_time: float
    m: int

    @property
    def fidelity(self) -> float:
        return self.protocol.state.f1


class _Builder:
    def __init__(self, hp: HardwareParams, f0: float, m: int, unit: float):
        self.hp = hp
        self.m = m
        self.unit = unit
        self.tau = generation_time(f0, unit, hp)
        self.leaf_state = generation_state(self.tau, unit, hp)
        self.memo: dict = {}

    def latency(self, n: int) -> float:
        return n * self.unit / self.hp.c

    def leaf(self, start: int) -> ProtocolNode:
        key = ("leaf", start)
        if key not in self.memo:
            self.memo[key] = ProtocolNode("generate", (start, start + 1), self.leaf_state,
                                          self.tau, tau_e=self.tau)
        return self.memo[key]

    def connect(self, left, right, gate=None) -> ProtocolNode:
        state = kernels.connect(left.state, right.state, self.hp, gate.state if gate else None)
        lat = self.latency(right.span[1] - left.span[0])
        t = float(kernels.connect_time(left.avg_time, right.avg_time,
                                       gate.avg_time if gate else 0.0, lat))
        return ProtocolNode("connect", (left.span[0], right.span[1]), state, t,
                            children=(left, right), gates=(gate,) if gate else ())

    def pump(self, target, source, gates=()) -> ProtocolNode:
        gate_state = gates[0].state if gates else None
        out = kernels.pump(target.state, source.state, self.hp, gate_state)
        t_gate = gates[0].avg_time if gates else 0.0
        t = float(kernels.pump_time(target.avg_time, source.avg_time, t_gate,
                                    self.latency(target.length), out.success_prob))
        return ProtocolNode("pump", target.span, out.state, t, children=(target, source),
                            gates=tuple(gates))


class _Bdcz(_Builder):
    def unpurified(self, n: int, start: int) -> ProtocolNode:
        key = ("u", n, start)
        if key not in self.memo:
            if n == 1:
                node = self.leaf(start)
            else:
                half = 1 << ((n - 1).bit_length() - 1)
                node = self.connect(self.purified(half, start), self.purified(n - half, start + half))
            self.memo[key] = node
        return self.memo[key]

    def purified(self, n: int, start: int) -> ProtocolNode:
        key = ("p", n, start)
        if key not in self.memo:
            node = self.unpurified(n, start)
            if n > 1:
                source = node
                for _ in range(self.m):
                    node = self.pump(node, source)
            self.memo[key] = node
        return self.memo[key]


class _Ctsl(_Builder):
    def __init__(self, hp, f0, m, unit):
        super().__init__(hp, f0, m, unit)
        self.empty_state = BellDiagonalState.perfect()

    def gate(self, start: int) -> ProtocolNode:
        return self.leaf(start)

    def unpurified(self, n: int, start: int) -> ProtocolNode:
        key = ("u", n, start)
        if key not in self.memo:
            if n == 0:
                node = ProtocolNode("empty", (start, start), self.empty_state, 0.0)
            elif n == 1:
                node = self.leaf(start)
            else:
                left = (n - 1 + 1) // 2
                right = n - 1 - left
                node = self.connect(self.purified(left, start),
                                    self.purified(right, start + left + 1),
                                    self.gate(start + left))
            self.memo[key] = node
        return self.memo[key]

    def purified(self, n: int, start: int) -> ProtocolNode:
        key = ("p", n, start)
        if key not in self.memo:
            node = self.unpurified(n, start)
            if n >= 3:
                source = self.unpurified(n - 2, start + 1)
                gates = (self.gate(start), self.gate(start + n - 1))
                for _ in range(self.m):
                    node = self.pump(node, source, gates)
            self.memo[key] = node
        return self.memo[key]


def _run(builder_cls, L, F_final, hp, m, f0, unit_km, scheme):
    hp = hp.resolved(scheme)
    unit = hp.L0 if unit_km is None else unit_km
    n = to_units(L, unit)
    if not 0.5 < F_final < 1.0:
        raise ConfigError(f"F_final must lie in (0.5, 1), got {F_final}")
    tries = [m] if m is not None else range(M_LIMIT + 1)
    best_f = float("nan")
    for mm in tries:
        root = builder_cls(hp, f0, mm, unit).purified(n, 0)
        if root.state.f1 >= F_final:
            return BaselineResult(root, root.avg_time, mm)
        best_f = root.state.f1 if best_f != best_f else max(best_f, root.state.f1)
    which = f"m={m}" if m is not None else f"any m <= {M_LIMIT}"
    return Infeasible(f"{scheme} baseline with {which} does not reach F={F_final} over {L} km",
                      best_fidelity=best_f)


def unoptimized_bdcz(L: float, F_final: float, hp: HardwareParams, m: int | None = None,
                     f0: float = BDCZ_F0, unit_km: float | None = None):
    """Doubling BDCZ protocol; with ``m=None`` the smallest constant m reaching ``F_final``."""
    return _run(_Bdcz, L, F_final, hp, m, f0, unit_km, "bdcz")


def unoptimized_ctsl(L: float, F_final: float, hp: HardwareParams, m: int | None = None,
                     f0: float = CTSL_F0, unit_km: float | None = None):
    """Nested CTSL protocol with single-level pumping from unpurified n-2 pairs."""
    return _run(_Ctsl, L, F_final, hp, m, f0, unit_km, "ctsl")


def unoptimized(scheme: str, L, F_final, hp, m=None, **kw):
    if scheme == "bdcz":
        return unoptimized_bdcz(L, F_final, hp, m, **kw)
    if scheme == "ctsl":
        return unoptimized_ctsl(L, F_final, hp, m, **kw)
    raise ConfigError(f"unknown scheme {scheme!r}")
