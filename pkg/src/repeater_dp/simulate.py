"""Seeded Monte Carlo execution of protocol trees.

Trials are simulated in fixed-size blocks, vectorized with numpy.  Block ``b`` draws
from its own stream ``SeedSequence(seed, spawn_key=(b,))``, so results depend only on
``(protocol, hp, trials, seed)``.

Execution model per node:

* generate: attempts of length ``t_att = min(2 span / c, tau_e)`` succeed with
  probability ``t_att / tau_e`` (mean time ``tau_e``).
* connect: wait for both children (and then the gate pair), plus ``span / c``.
* pump: build the target, then the source and gate pairs, add ``span / c``, and succeed
  with the kernel's success probability.  On failure everything is rebuilt from scratch.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .noise import HardwareParams
from .protocol import ProtocolNode

BLOCK = 1024


@dataclass(frozen=True)
class PumpStats:
    span: tuple[int, int]
    success_prob: float
    attempts: int
    successes: int

    @property
    def frequency(self) -> float:
        return self.successes / self.attempts if self.attempts else float("nan")


@dataclass(frozen=True, eq=False)
class TimeDistribution:
    samples: np.ndarray
    seed: int
    pump_stats: tuple[PumpStats, ...] = field(default=())

    @property
    def trials(self) -> int:
        return int(self.samples.size)

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    @property
    def median(self) -> float:
        return float(np.median(self.samples))

    @property
    def q05(self) -> float:
        return float(np.quantile(self.samples, 0.05))

    @property
    def q95(self) -> float:
        return float(np.quantile(self.samples, 0.95))

    @property
    def std_error(self) -> float:
        return float(self.samples.std(ddof=1) / np.sqrt(self.samples.size)) if self.trials > 1 else 0.0

    def summary(self) -> dict:
        return {"trials": self.trials, "seed": self.seed, "mean_s": self.mean,
                "median_s": self.median, "q05_s": self.q05, "q95_s": self.q95,
                "min_s": float(self.samples.min()), "max_s": float(self.samples.max()),
                "std_error_s": self.std_error}

    def to_json(self, extra: dict | None = None) -> str:
        doc = self.summary()
        if extra:
            doc.update(extra)
        return json.dumps(doc, indent=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "time_s"])
        for i, t in enumerate(self.samples):
            w.writerow([i, repr(float(t))])
        return buf.getvalue()


class _Sampler:
    def __init__(self, hp: HardwareParams, unit_km: float, rng: np.random.Generator):
        self.hp = hp
        self.unit = unit_km
        self.rng = rng
        self.probs: dict[int, float] = {}
        self.counts: dict[int, list] = {}

    def success_prob(self, node: ProtocolNode) -> float:
        key = id(node)
        if key not in self.probs:
            target, source = node.children
            gate = node.gates[0].state if node.gates else None
            self.probs[key] = kernels.pump(target.state, source.state, self.hp, gate).success_prob
        return self.probs[key]

    def sample(self, node: ProtocolNode, k: int) -> np.ndarray:
        if k == 0:
            return np.zeros(0)
        lat = node.length * self.unit / self.hp.c
        if node.kind == "empty":
            return np.zeros(k)
        if node.kind == "generate":
            tau = node.tau_e
            t_att = min(2.0 * node.length * self.unit / self.hp.c, tau)
            prob = t_att / tau
            if prob >= 1.0:
                return np.full(k, tau)
            return self.rng.geometric(prob, size=k) * t_att
        if node.kind == "connect":
            left, right = node.children
            t = np.maximum(self.sample(left, k), self.sample(right, k))
            if node.gates:
                t += self.sample(node.gates[0], k)
            t += lat
            return t
        prob = self.success_prob(node)
        attempts = np.ones(k, dtype=np.int64) if prob >= 1.0 else self.rng.geometric(prob, size=k)
        total = int(attempts.sum())
        target, source = node.children
        per = self.sample(target, total) + self.sample(source, total)
        if node.gates:
            per += np.maximum(self.sample(node.gates[0], total), self.sample(node.gates[1], total))
        per += lat
        c = self.counts.setdefault(id(node), [node, 0, 0])
        c[1] += total
        c[2] += k
        return np.bincount(np.repeat(np.arange(k), attempts), weights=per, minlength=k)


def run(proto: ProtocolNode, hp: HardwareParams, trials: int, seed: int,
        unit_km: float | None = None) -> TimeDistribution:
    """Completion-time distribution of ``proto`` over ``trials`` independent executions."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    unit = hp.L0 if unit_km is None else unit_km
    parts = []
    counts: dict[int, list] = {}
    for b, start in enumerate(range(0, trials, BLOCK)):
        k = min(BLOCK, trials - start)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(b,))))
        sampler = _Sampler(hp, unit, rng)
        parts.append(sampler.sample(proto, k))
        for key, (node, att, succ) in sampler.counts.items():
            c = counts.setdefault(key, [node, 0, 0, sampler.probs[key]])
            c[1] += att
            c[2] += succ
    stats = tuple(PumpStats(node.span, prob, att, succ) for node, att, succ, prob in counts.values())
    return TimeDistribution(np.concatenate(parts), int(seed), stats)


def critical_path_bound(proto: ProtocolNode, hp: HardwareParams, unit_km: float | None = None) -> float:
    """Fastest possible completion: every attempt and every pump succeeds first time."""
    unit = hp.L0 if unit_km is None else unit_km
    memo: dict[int, float] = {}

    def lb(node):
        if id(node) in memo:
            return memo[id(node)]
        lat = node.length * unit / hp.c
        if node.kind == "empty":
            v = 0.0
        elif node.kind == "generate":
            v = min(2.0 * node.length * unit / hp.c, node.tau_e)
        elif node.kind == "connect":
            v = max(lb(node.children[0]), lb(node.children[1])) + lat
            if node.gates:
                v += lb(node.gates[0])
        else:
            v = lb(node.children[0]) + lb(node.children[1]) + lat
            if node.gates:
                v += max(lb(g) for g in node.gates)
        memo[id(node)] = v
        return v

    return lb(proto)


def compare(proto: ProtocolNode, hp: HardwareParams, trials: int, seed: int,
            unit_km: float | None = None) -> dict:
    """Monte Carlo mean against the cached average-time estimate."""
    dist = run(proto, hp, trials, seed, unit_km)
    return {"mc_mean": dist.mean, "analytic_time": proto.avg_time,
            "ratio": dist.mean / proto.avg_time, "std_error": dist.std_error}
