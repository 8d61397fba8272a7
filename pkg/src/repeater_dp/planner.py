"""Inductive dynamic-programming search for fast repeater protocols.

For every distance ``n`` (in units of ``unit_km``) the table keeps, per state class,
the fastest sub-protocol found so far together with one representative exact state.
Distance ``n`` is filled from shorter distances in three stages:

1. ``seed_level_one``: elementary pairs made directly over ``n`` units.
2. ``sweep_connect``: join two shorter table entries at a middle node.
3. ``sweep_pump``: pump the unpurified candidates up to ``m_max`` times.

Two architectures are supported.  ``bdcz`` keeps a logarithmic number of memory qubits
per node, connects abutting pairs, and pumps with a fresh unpurified pair over the same
distance.  ``ctsl`` keeps one storage qubit per node; every remote CNOT is teleported
through a communication pair over one segment.  Its connection joins ``[a, k]`` and
``[k+1, b]`` with a gate pair on ``[k, k+1]``, and it pumps ``[a, b]`` with a pair on
``[a+1, b-1]`` using two gate pairs at the ends.

Inner loops are compiled with numba and reuse the kernel cores, so every stored state
is bit-identical to ``kernels.connect`` / ``kernels.pump`` on the same inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from . import kernels
from .kernels import contract_first, contract_second, connect_time, pump_time
from .noise import HardwareParams, generation_state, generation_time
from .protocol import ProtocolNode, occupancy_check, qubit_budget
from .states import BellDiagonalState, ClassGrid, canonical_inplace, class_of

SCHEMES = ("bdcz", "ctsl")

GENERATE, CONNECT, PUMP, EMPTY = 0, 1, 2, 3
_KIND_NAMES = {GENERATE: "generate", CONNECT: "connect", PUMP: "pump", EMPTY: "empty"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Infeasible:
    """No stored protocol reaches the requested fidelity."""

    reason: str
    best_fidelity: float = float("nan")

    def __bool__(self):
        return False


@dataclass(frozen=True)
class PlanResult:
    protocol: ProtocolNode
    avg_time: float
    distance: int
    unit_km: float

    @property
    def state(self) -> BellDiagonalState:
        return self.protocol.state

    @property
    def fidelity(self) -> float:
        return self.protocol.state.f1


@dataclass(frozen=True)
class PlannerOptions:
    """Search dimensions.

    ``window`` of ``None`` means ``ceil(log2 n) + 1`` units around the even split.
    ``unit_km`` of ``None`` means one segment ``hp.L0``.  ``skip_cap`` bounds direct
    generation spans, in segments, when node skipping is on.
    """

    scheme: str = "bdcz"
    m_max: int = 5
    window: int | None = None
    allow_node_skipping: bool = True
    allow_multilevel: bool = True
    unit_km: float | None = None
    skip_cap: int = 4
    gate_fidelities: tuple[float, ...] = (0.97, 0.98, 0.99, 0.995)
    enforce_occupancy: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.m_max < 0:
            raise ConfigError("m_max must be >= 0")
        if self.window is not None and self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.skip_cap < 1:
            raise ConfigError("skip_cap must be >= 1")
        if self.unit_km is not None and not self.unit_km > 0:
            raise ConfigError("unit_km must be positive")
        if self.scheme == "ctsl" and not self.gate_fidelities:
            raise ConfigError("ctsl needs at least one gate-pair fidelity")
        for f in self.gate_fidelities:
            if not 0.5 <= f < 1.0:
                raise ConfigError(f"gate-pair fidelity {f} outside [0.5, 1)")

    @property
    def gate_pair_grid_size(self) -> int:
        return len(self.gate_fidelities)


# -- compiled inner loops ------------------------------------------------------

@numba.njit(cache=True, inline="always")
def _offer(bt, bs, bn, bocc, borg, baux, cls, t, state, nodes, end, mid,
           kind, o1, o2, o3, o4, aux):
    cur = bt[cls]
    if t > cur:
        return False
    if t == cur:
        if state[0] < bs[cls, 0]:
            return False
        if state[0] == bs[cls, 0] and nodes >= bn[cls]:
            return False
    bt[cls] = t
    for k in range(4):
        bs[cls, k] = state[k]
    bn[cls] = nodes
    bocc[cls, 0] = end
    bocc[cls, 1] = mid
    borg[cls, 0] = kind
    borg[cls, 1] = o1
    borg[cls, 2] = o2
    borg[cls, 3] = o3
    borg[cls, 4] = o4
    baux[cls] = aux
    return True


@numba.njit(cache=True)
def _connect_block(ls, lt, ln, locc, rs, rt, rn, rocc, same, tensors, tgate, gate_nodes,
                   lat, fe, se, budget, shared, k,
                   bt, bs, bn, bocc, borg, baux):
    out = np.empty(4)
    part = np.empty((4, 4))
    evals = 0
    for g in range(tensors.shape[0]):
        for i in range(ls.shape[0]):
            contract_first(ls[i], tensors[g], part)
            j0 = i if same else 0
            for j in range(j0, rs.shape[0]):
                end = max(locc[i, 0], rocc[j, 0])
                if shared:
                    mid = max(max(locc[i, 1], rocc[j, 1]), locc[i, 0] + rocc[j, 0])
                else:
                    mid = max(max(locc[i, 1], rocc[j, 1]), end)
                if max(end, mid) > budget:
                    continue
                evals += 1
                total = contract_second(rs[j], part, out)
                canonical_inplace(out, total)
                cls = class_of(out, fe, se)
                if cls < 0:
                    continue
                t = connect_time(lt[i], rt[j], tgate[g], lat)
                _offer(bt, bs, bn, bocc, borg, baux, cls, t, out, ln[i] + rn[j] + 1 + gate_nodes,
                       end, mid, 1, k, i, j, g, 0.0)
    return evals


@numba.njit(cache=True)
def _pump_block(ts, tt, tn, tocc, ss, st, sn, socc, tensors, tgate, gate_nodes,
                lat, fe, se, budget, shared, level,
                bt, bs, bn, bocc, borg, baux):
    out = np.empty(4)
    part = np.empty((4, 4))
    evals = 0
    for g in range(tensors.shape[0]):
        for i in range(ts.shape[0]):
            contract_first(ts[i], tensors[g], part)
            for j in range(ss.shape[0]):
                if shared:
                    end = max(tocc[i, 0], 1 + socc[j, 0])
                    mid = max(tocc[i, 1], socc[j, 1])
                else:
                    end = tocc[i, 0]
                    mid = max(tocc[i, 1], max(socc[j, 0], socc[j, 1]))
                if max(end, mid) > budget:
                    continue
                evals += 1
                prob = contract_second(ss[j], part, out)
                if prob <= 0.0:
                    continue
                canonical_inplace(out, prob)
                cls = class_of(out, fe, se)
                if cls < 0:
                    continue
                t = pump_time(tt[i], st[j], tgate[g], lat, prob)
                _offer(bt, bs, bn, bocc, borg, baux, cls, t, out, tn[i] + sn[j] + 1 + 2 * gate_nodes,
                       end, mid, 2, level, i, j, g, 0.0)
    return evals


# -- per-distance storage ------------------------------------------------------

class _Best:
    """Per-class running minima while one pool is being built."""

    def __init__(self, n_classes: int):
        self.t = np.full(n_classes, np.inf)
        self.s = np.zeros((n_classes, 4))
        self.n = np.full(n_classes, np.iinfo(np.int64).max, dtype=np.int64)
        self.occ = np.zeros((n_classes, 2), dtype=np.int64)
        self.org = np.full((n_classes, 5), -1, dtype=np.int64)
        self.aux = np.zeros(n_classes)

    def arrays(self):
        return self.t, self.s, self.n, self.occ, self.org, self.aux

    def offer(self, cls, t, state, nodes, end, mid, kind, o1=-1, o2=-1, o3=-1, o4=-1, aux=0.0):
        return _offer(*self.arrays(), cls, t, state, nodes, end, mid, kind, o1, o2, o3, o4, aux)

    def merge(self, pool: "Pool"):
        for r in range(len(pool)):
            self.offer(int(pool.classes[r]), pool.times[r], pool.states[r], int(pool.nodes[r]),
                       int(pool.occ[r, 0]), int(pool.occ[r, 1]), *(int(x) for x in pool.origin[r]),
                       aux=pool.aux[r])

    def freeze(self) -> "Pool":
        idx = np.flatnonzero(np.isfinite(self.t))
        return Pool(classes=idx, times=self.t[idx].copy(), states=np.ascontiguousarray(self.s[idx]),
                    nodes=self.n[idx].copy(), occ=np.ascontiguousarray(self.occ[idx]),
                    origin=np.ascontiguousarray(self.org[idx]), aux=self.aux[idx].copy())


@dataclass(frozen=True, eq=False)
class Pool:
    """Frozen per-class entries of one table stage, sorted by class index.

    ``origin`` rows are ``(kind, o1, o2, o3, o4)``.  Generate: ``o1`` is the span in
    units and ``aux`` holds tau_e.  Connect: ``o1`` is the left child's distance, ``o2``
    and ``o3`` index the child pools, ``o4`` the gate option.  Pump: ``o1`` is the pump
    level, ``o2`` indexes the previous-level pool, ``o3`` the source pool, ``o4`` the gate.
    """

    classes: np.ndarray
    times: np.ndarray
    states: np.ndarray
    nodes: np.ndarray
    occ: np.ndarray
    origin: np.ndarray
    aux: np.ndarray

    def __len__(self):
        return int(self.classes.size)

    @classmethod
    def empty(cls) -> "Pool":
        return _Best(0).freeze()

    def lookup(self, cls_idx: int) -> int:
        pos = int(np.searchsorted(self.classes, cls_idx))
        if pos < len(self) and self.classes[pos] == cls_idx:
            return pos
        return -1


# -- context -------------------------------------------------------------------

@dataclass
class _Context:
    hp: HardwareParams
    grid: ClassGrid
    opts: PlannerOptions
    unit: float
    budget_of: callable
    connect_tensors: np.ndarray
    pump_tensors: np.ndarray
    gate_times: np.ndarray
    gate_states: list
    gate_nodes: int

    @property
    def ctsl(self) -> bool:
        return self.opts.scheme == "ctsl"


def _context(hp: HardwareParams, grid: ClassGrid, opts: PlannerOptions) -> _Context:
    hp = hp.resolved(opts.scheme)
    unit = hp.L0 if opts.unit_km is None else float(opts.unit_km)
    if opts.scheme == "ctsl":
        states, times = [], []
        for f in opts.gate_fidelities:
            tau = generation_time(f, unit, hp)
            states.append(generation_state(tau, unit, hp))
            times.append(tau)
        ct = np.stack([kernels.connect_tensor(hp, s) for s in states])
        pt = np.stack([kernels.pump_tensor(hp, s) for s in states])
        gate_nodes = 1
    else:
        states, times = [], [0.0]
        ct = kernels.connect_tensor(hp)[None]
        pt = kernels.pump_tensor(hp)[None]
        gate_nodes = 0

    def budget_of(n: int) -> int:
        if opts.scheme == "ctsl" or not opts.enforce_occupancy:
            return np.iinfo(np.int32).max
        return qubit_budget("bdcz", max(1, math.ceil(n * unit / hp.L0 - 1e-9)))

    return _Context(hp=hp, grid=grid, opts=opts, unit=unit, budget_of=budget_of,
                    connect_tensors=np.ascontiguousarray(ct), pump_tensors=np.ascontiguousarray(pt),
                    gate_times=np.asarray(times, dtype=np.float64), gate_states=states,
                    gate_nodes=gate_nodes)


def window_size(n: int, opts: PlannerOptions) -> int:
    if opts.window is not None:
        return opts.window
    return math.ceil(math.log2(max(n, 2))) + 1


def candidate_splits(n: int, ctx: _Context) -> list[int]:
    """Left-child distances tried at distance ``n``, mirror splits removed."""
    opts = ctx.opts
    total = n - 1 if ctx.ctsl else n
    lo = 0 if ctx.ctsl else 1
    ks = set()
    w = window_size(n, opts)
    for k in range(lo, total - lo + 1):
        if abs(2 * k - total) <= 2 * w:
            ks.add(k)
    step = round(ctx.hp.L0 / ctx.unit)
    if step > 1 and abs(step * ctx.unit - ctx.hp.L0) < 1e-9:
        # fine grid: also try splits on the coarse segment lattice
        wc = window_size(max(1, n // step), opts) * step
        for k in range(step, total, step):
            if abs(2 * k - total) <= 2 * wc:
                ks.add(k)
    return sorted(k for k in ks if k <= total - k)


def generation_spans(n: int, ctx: _Context) -> bool:
    cap = ctx.opts.skip_cap if ctx.opts.allow_node_skipping else 1
    return n * ctx.unit <= cap * ctx.hp.L0 + 1e-9


# -- the table -----------------------------------------------------------------

class DPTable:
    """Per-distance, per-class best sub-protocols.

    ``unpurified[n]`` holds stage-two results, ``levels[n][m]`` the results after
    exactly ``m`` pumping steps, and ``table[n]`` the merge over all levels.
    """

    def __init__(self, hp: HardwareParams, grid: ClassGrid | None = None,
                 opts: PlannerOptions | None = None):
        self.grid = grid or ClassGrid.uniform()
        self.opts = opts or PlannerOptions()
        self.ctx = _context(hp, self.grid, self.opts)
        self.hp = self.ctx.hp
        self.levels: dict[int, list[Pool]] = {}
        self.table: dict[int, Pool] = {}
        self.evaluations: dict[int, int] = {}
        self.n_built = 0
        self._seeds = seed_level_one(self.hp, self.grid, self.opts)
        self._nodes: dict = {}
        if self.ctx.ctsl:
            perfect = _Best(self.grid.n_classes)
            top = class_of(np.array([1.0, 0, 0, 0]), self.grid.fidelity_edges, self.grid.shape_edges)
            perfect.offer(int(top), 0.0, np.array([1.0, 0, 0, 0]), 0, 1, 0, EMPTY)
            pool = perfect.freeze()
            self.levels[0] = [pool]
            self.table[0] = pool

    @property
    def unit_km(self) -> float:
        return self.ctx.unit

    @property
    def scheme(self) -> str:
        return self.opts.scheme

    def unpurified(self, n: int) -> Pool:
        return self.levels[n][0]

    def source_pool(self, n: int) -> Pool | None:
        """Pool the pumping source at distance ``n`` is drawn from."""
        if not self.ctx.ctsl:
            return self.levels[n][0]
        if n < 3:
            return None
        return self.table[n - 2] if self.opts.allow_multilevel else self.levels[n - 2][0]

    def build(self, n_max: int) -> "DPTable":
        for n in range(self.n_built + 1, n_max + 1):
            evals = 0
            unpur, e = sweep_connect(n, self)
            evals += e
            self.levels[n] = [unpur]
            final, e = sweep_pump(n, unpur, self)
            evals += e
            self.table[n] = final
            self.evaluations[n] = evals
            self.n_built = n
        return self

    def total_evaluations(self, n_max: int | None = None) -> int:
        top = self.n_built if n_max is None else n_max
        return sum(v for k, v in self.evaluations.items() if k <= top)

    # -- queries --

    def best(self, n_min: int, fidelity: float, n_max: int | None = None):
        """``(n, row)`` of the fastest entry with fidelity >= ``fidelity`` at distance >= n_min."""
        top = self.n_built if n_max is None else min(n_max, self.n_built)
        found = None
        for n in range(n_min, top + 1):
            pool = self.table[n]
            ok = np.flatnonzero(pool.states[:, 0] >= fidelity)
            for r in ok:
                key = (pool.times[r], -pool.states[r, 0], pool.nodes[r], n)
                if found is None or key < found[0]:
                    found = (key, n, int(r))
        return None if found is None else (found[1], found[2])

    def max_fidelity(self, n: int) -> float:
        pool = self.table[n]
        return float(pool.states[:, 0].max()) if len(pool) else float("nan")

    def query(self, L_km: float, F_final: float):
        if not 0.5 < F_final < 1.0:
            raise ConfigError(f"F_final must lie in (0.5, 1), got {F_final}")
        n = to_units(L_km, self.unit_km)
        if n > self.n_built:
            self.build(n)
        hit = self.best(n, F_final)
        if hit is None:
            return Infeasible(f"no protocol reaches F={F_final} over {L_km} km",
                              best_fidelity=self.max_fidelity(n))
        dist, row = hit
        node = self.node(dist, -1, row)
        return PlanResult(protocol=node, avg_time=node.avg_time, distance=dist, unit_km=self.unit_km)

    def entry(self, n: int, cls_idx: int) -> ProtocolNode | None:
        row = self.table[n].lookup(cls_idx)
        return None if row < 0 else self.node(n, -1, row)

    # -- materialization --

    def _pool(self, n: int, level: int) -> Pool:
        return self.table[n] if level < 0 else self.levels[n][level]

    def node(self, n: int, level: int, row: int, offset: int = 0) -> ProtocolNode:
        """Protocol tree for ``row`` of pool ``(n, level)`` placed at node ``offset``.

        ``level`` -1 is the merged table.  Shared sub-protocols become shared objects.
        """
        key = (n, level, row, offset)
        hit = self._nodes.get(key)
        if hit is not None:
            return hit
        pool = self._pool(n, level)
        kind, o1, o2, o3, o4 = (int(x) for x in pool.origin[row])
        state = BellDiagonalState.from_array(pool.states[row])
        t = float(pool.times[row])
        span = (offset, offset + n)
        if kind == GENERATE:
            node = ProtocolNode("generate", span, state, t, tau_e=float(pool.aux[row]))
        elif kind == EMPTY:
            node = ProtocolNode("empty", span, state, t)
        elif kind == CONNECT:
            k = o1
            left = self.node(k, -1, o2, offset)
            if self.ctx.ctsl:
                right = self.node(n - 1 - k, -1, o3, offset + k + 1)
                gates = (self.gate_node(o4, offset + k),)
            else:
                right = self.node(n - k, -1, o3, offset + k)
                gates = ()
            node = ProtocolNode("connect", span, state, t, children=(left, right), gates=gates)
        else:
            target = self.node(n, o1 - 1, o2, offset)
            if self.ctx.ctsl:
                src_level = -1 if self.opts.allow_multilevel else 0
                source = self.node(n - 2, src_level, o3, offset + 1)
                gates = (self.gate_node(o4, offset), self.gate_node(o4, offset + n - 1))
            else:
                source = self.node(n, 0, o3, offset)
                gates = ()
            node = ProtocolNode("pump", span, state, t, children=(target, source), gates=gates)
        self._nodes[key] = node
        return node

    def gate_node(self, g: int, start: int) -> ProtocolNode:
        key = ("gate", g, start)
        hit = self._nodes.get(key)
        if hit is None:
            hit = ProtocolNode("generate", (start, start + 1), self.ctx.gate_states[g],
                               float(self.ctx.gate_times[g]), tau_e=float(self.ctx.gate_times[g]))
            self._nodes[key] = hit
        return hit


def to_units(L_km: float, unit_km: float) -> int:
    n = round(L_km / unit_km)
    if n < 1 or abs(n * unit_km - L_km) > 1e-6 * max(1.0, L_km):
        raise ConfigError(f"distance {L_km} km is not a positive multiple of the {unit_km} km unit")
    return n


# -- stages ----------------------------------------------------------------------

def seed_level_one(hp: HardwareParams, grid: ClassGrid, opts: PlannerOptions) -> dict[int, Pool]:
    """Direct-generation entries per span (in units), one per reachable class.

    Each fidelity bin is seeded with the smallest tau_e whose F0 reaches the bin's
    lower edge.  Without node skipping only spans up to one segment are generated.
    """
    ctx = _context(hp, grid, opts)
    hp = ctx.hp
    out = {}
    n = 1
    while generation_spans(n, ctx):
        span_km = n * ctx.unit
        best = _Best(grid.n_classes)
        for lo in grid.fidelity_edges[:-1]:
            tau = generation_time(float(lo), span_km, hp)
            state = generation_state(tau, span_km, hp).populations
            cls = class_of(state, grid.fidelity_edges, grid.shape_edges)
            if cls >= 0:
                best.offer(int(cls), tau, state, 1, 1, 0, GENERATE, n, aux=tau)
        out[n] = best.freeze()
        n += 1
    return out


def sweep_connect(n: int, table: DPTable) -> tuple[Pool, int]:
    """Unpurified candidates at distance ``n``: direct generation and all windowed splits."""
    ctx = table.ctx
    grid = ctx.grid
    best = _Best(grid.n_classes)
    seeds = table._seeds.get(n)
    if seeds is not None:
        best.merge(seeds)
    lat = n * ctx.unit / ctx.hp.c
    budget = ctx.budget_of(n)
    evals = 0
    for k in candidate_splits(n, table.ctx):
        r = n - 1 - k if ctx.ctsl else n - k
        left, right = table.table[k], table.table[r]
        if not len(left) or not len(right):
            continue
        evals += _connect_block(
            left.states, left.times, left.nodes, left.occ,
            right.states, right.times, right.nodes, right.occ,
            k == r, ctx.connect_tensors, ctx.gate_times, ctx.gate_nodes, lat,
            grid.fidelity_edges, grid.shape_edges, budget, not ctx.ctsl, k,
            *best.arrays())
    return best.freeze(), evals


def sweep_pump(n: int, unpurified: Pool, table: DPTable) -> tuple[Pool, int]:
    """Pump levels ``1..m_max`` at distance ``n``; returns the merge over levels and the work done."""
    ctx = table.ctx
    grid = ctx.grid
    merged = _Best(grid.n_classes)
    merged.merge(unpurified)
    evals = 0
    source = table.source_pool(n)
    levels = table.levels[n]
    if source is not None and len(source):
        lat = n * ctx.unit / ctx.hp.c
        budget = ctx.budget_of(n)
        prev = unpurified
        for m in range(1, ctx.opts.m_max + 1):
            if not len(prev):
                break
            best = _Best(grid.n_classes)
            evals += _pump_block(
                prev.states, prev.times, prev.nodes, prev.occ,
                source.states, source.times, source.nodes, source.occ,
                ctx.pump_tensors, ctx.gate_times, ctx.gate_nodes, lat,
                grid.fidelity_edges, grid.shape_edges, budget, not ctx.ctsl, m,
                *best.arrays())
            prev = best.freeze()
            levels.append(prev)
            merged.merge(prev)
    return merged.freeze(), evals


def optimize(L_final: float, F_final: float, hp: HardwareParams, grid: ClassGrid | None = None,
             opts: PlannerOptions | None = None):
    """Fastest protocol delivering fidelity >= ``F_final`` over at least ``L_final`` km.

    Returns :class:`PlanResult` or :class:`Infeasible`.
    """
    opts = opts or PlannerOptions()
    table = DPTable(hp, grid, opts)
    n = to_units(L_final, table.unit_km)
    table.build(n)
    return table.query(L_final, F_final)


