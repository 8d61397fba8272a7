"""Protocol trees, their JSON form, recomputation, and the per-node memory occupancy check.

A protocol is a tree of four node kinds:

* ``generate``: elementary pair made directly over ``span`` with generation time ``tau_e``.
* ``connect``: children ``(left, right)`` joined by a Bell measurement.  In BDCZ the
  child spans abut; in CTSL they are separated by one segment bridged by ``gates[0]``.
* ``pump``: children ``(target, source)``; one purification step on the target.  CTSL
  pumping uses a source on ``[start+1, end-1]`` and two gate pairs at the ends.
* ``empty``: a zero-length placeholder (CTSL only), the trivially perfect pair on one node.

Identical sub-protocols are shared objects, so a tree is stored as a DAG.  JSON output
keeps that sharing: nodes are listed once and referenced by id.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import kernels
from .noise import HardwareParams, generation_state
from .states import BellDiagonalState

FORMAT = "repeater-dp/protocol-v1"
KINDS = ("generate", "connect", "pump", "empty")


class ProtocolError(ValueError):
    """A protocol file or tree violates a structural invariant; ``path`` locates it."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True, eq=False)
class ProtocolNode:
    kind: str
    span: tuple[int, int]
    state: BellDiagonalState
    avg_time: float
    tau_e: float | None = None
    children: tuple["ProtocolNode", ...] = ()
    gates: tuple["ProtocolNode", ...] = ()

    @property
    def length(self) -> int:
        return self.span[1] - self.span[0]

    @property
    def fidelity(self) -> float:
        return self.state.f1

    def walk(self) -> Iterator["ProtocolNode"]:
        """Distinct nodes of the DAG, children before parents."""
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in seen:
                continue
            if expanded:
                seen.add(id(node))
                yield node
                continue
            stack.append((node, True))
            for ch in reversed(node.children + node.gates):
                if id(ch) not in seen:
                    stack.append((ch, False))

    def tree_size(self) -> int:
        """Number of nodes in the fully expanded tree."""
        sizes: dict[int, int] = {}
        for node in self.walk():
            sizes[id(node)] = 1 + sum(sizes[id(c)] for c in node.children + node.gates)
        return sizes[id(self)]

    def scheme(self) -> str:
        for node in self.walk():
            if node.gates or node.kind == "empty":
                return "ctsl"
        return "bdcz"


def latency(node_span_units: int, unit_km: float, hp: HardwareParams) -> float:
    return node_span_units * unit_km / hp.c


def recompute(node: ProtocolNode, hp: HardwareParams, unit_km: float | None = None,
              rtol: float = 1e-9) -> None:
    """Check structure and that every cached state/time follows from the leaves.

    Raises :class:`ProtocolError` with the offending node path.
    """
    unit = hp.L0 if unit_km is None else unit_km
    done: dict[int, tuple[np.ndarray, float]] = {}

    def close(a, b):
        return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))

    def visit(n: ProtocolNode, path: str):
        if id(n) in done:
            return
        s, e = n.span
        if n.kind not in KINDS:
            raise ProtocolError(f"unknown kind {n.kind!r}", path)
        if e < s or (n.kind != "empty" and e == s):
            raise ProtocolError(f"bad span {n.span}", path)
        for i, ch in enumerate(n.children):
            visit(ch, f"{path}.children[{i}]")
        for i, g in enumerate(n.gates):
            visit(g, f"{path}.gates[{i}]")
        lat = latency(n.length, unit, hp)
        gate_state = n.gates[0].state if n.gates else None
        t_gate = n.gates[0].avg_time if n.gates else 0.0
        if n.kind == "generate":
            if n.children or n.gates or n.tau_e is None:
                raise ProtocolError("generate takes tau_e and no children", path)
            state = generation_state(n.tau_e, n.length * unit, hp)
            t = n.tau_e
        elif n.kind == "empty":
            if n.length != 0 or n.children:
                raise ProtocolError("empty node must have zero length", path)
            state, t = BellDiagonalState.perfect(), 0.0
        elif n.kind == "connect":
            if len(n.children) != 2 or len(n.gates) > 1:
                raise ProtocolError("connect needs two children and at most one gate", path)
            left, right = n.children
            gap = 1 if n.gates else 0
            if left.span[0] != s or right.span[1] != e or right.span[0] != left.span[1] + gap:
                raise ProtocolError(f"children spans {left.span} {right.span} do not tile {n.span}", path)
            if n.gates and n.gates[0].span != (left.span[1], right.span[0]):
                raise ProtocolError("gate pair must bridge the gap between children", path)
            state = kernels.connect(left.state, right.state, hp, gate_state)
            t = float(kernels.connect_time(left.avg_time, right.avg_time, t_gate, lat))
        else:
            if len(n.children) != 2 or len(n.gates) not in (0, 2):
                raise ProtocolError("pump needs (target, source) and zero or two gates", path)
            target, source = n.children
            if target.span != n.span:
                raise ProtocolError("pump target must span the node", path)
            want = (s + 1, e - 1) if n.gates else (s, e)
            if source.span != want:
                raise ProtocolError(f"pump source span {source.span}, expected {want}", path)
            if n.gates and (n.gates[0].span != (s, s + 1) or n.gates[1].span != (e - 1, e)):
                raise ProtocolError("pump gate pairs must sit on the end segments", path)
            out = kernels.pump(target.state, source.state, hp, gate_state)
            state = out.state
            t = float(kernels.pump_time(target.avg_time, source.avg_time, t_gate, lat, out.success_prob))
        got = n.state.populations
        if not np.allclose(got, state.populations, rtol=0, atol=1e-9):
            raise ProtocolError(f"cached state {tuple(got)} != recomputed {tuple(state)}", path)
        if not close(n.avg_time, t):
            raise ProtocolError(f"cached avg_time {n.avg_time!r} != recomputed {t!r}", path)
        done[id(n)] = (state.populations, t)

    visit(node, "$")


# -- occupancy -----------------------------------------------------------------

def qubit_budget(scheme: str, segments: int) -> int:
    """Memory qubits available per node: 2 log2(2N) for BDCZ, one storage qubit for CTSL."""
    if scheme == "ctsl":
        return 1
    return int(math.floor(2 * math.log2(2 * max(segments, 1)) + 1e-9))


def _usage(node: ProtocolNode, memo) -> tuple[dict[int, int], dict[int, int]]:
    """(peak, resting) qubits per node index while building ``node``."""
    key = id(node)
    if key in memo:
        return memo[key]
    s, e = node.span
    if node.kind in ("generate", "empty"):
        rest = {s: 1} if node.kind == "empty" else {s: 1, e: 1}
        res = (dict(rest), rest)
    elif node.kind == "connect":
        (pl, _), (pr, _) = _usage(node.children[0], memo), _usage(node.children[1], memo)
        peak = dict(pl)
        for k, v in pr.items():
            peak[k] = peak.get(k, 0) + v
        res = (peak, {s: 1, e: 1})
    else:
        (pt, rt), (ps, _) = _usage(node.children[0], memo), _usage(node.children[1], memo)
        peak = dict(pt)
        for k, v in ps.items():
            peak[k] = max(peak.get(k, 0), rt.get(k, 0) + v)
        res = (peak, {s: 1, e: 1})
    memo[key] = res
    return res


def peak_usage(node: ProtocolNode) -> dict[int, int]:
    return _usage(node, {})[0]


def occupancy_check(node: ProtocolNode, scheme: str, segments: int | None = None) -> bool:
    """True when no node ever holds more memory qubits than the scheme allows.

    Sub-pairs of a connection are built concurrently; a pump source is built while its
    target waits in memory.  Gate pairs live in communication qubits and are not counted.
    """
    budget = qubit_budget(scheme, node.length if segments is None else segments)
    return max(peak_usage(node).values()) <= budget


# -- JSON ----------------------------------------------------------------------

def to_dict(root: ProtocolNode, *, scheme: str, hp: HardwareParams, unit_km: float,
            extra: dict | None = None) -> dict:
    ids: dict[int, int] = {}
    nodes = []
    for node in root.walk():
        ids[id(node)] = len(nodes)
        rec = {"id": len(nodes), "kind": node.kind, "span": list(node.span)}
        if node.tau_e is not None:
            rec["tau_e"] = node.tau_e
        if node.children:
            rec["children"] = [ids[id(c)] for c in node.children]
        if node.gates:
            rec["gates"] = [ids[id(g)] for g in node.gates]
        rec["state"] = list(node.state)
        rec["avg_time"] = node.avg_time
        nodes.append(rec)
    doc = {"format": FORMAT, "scheme": scheme, "unit_km": unit_km, "hardware": hp.as_dict(),
           "root": ids[id(root)], "avg_time": root.avg_time, "fidelity": root.fidelity,
           "nodes": nodes}
    if extra:
        doc.update(extra)
    return doc


def dumps(root: ProtocolNode, **kw) -> str:
    return json.dumps(to_dict(root, **kw), indent=1)


def from_dict(doc: dict) -> tuple[ProtocolNode, dict]:
    """Rebuild the DAG; returns the root and the document header."""
    if doc.get("format") != FORMAT:
        raise ProtocolError(f"unsupported format {doc.get('format')!r}", "$.format")
    raw = doc.get("nodes")
    if not isinstance(raw, list) or not raw:
        raise ProtocolError("missing node list", "$.nodes")
    built: dict[int, ProtocolNode] = {}
    for i, rec in enumerate(raw):
        path = f"$.nodes[{i}]"
        try:
            if rec["id"] != i:
                raise ProtocolError("ids must be consecutive and ordered", path)
            kind = rec["kind"]
            if kind not in KINDS:
                raise ProtocolError(f"unknown kind {kind!r}", path + ".kind")
            refs = {}
            for fld in ("children", "gates"):
                ref = rec.get(fld, [])
                if any(not isinstance(r, int) or r not in built for r in ref):
                    raise ProtocolError("references must point to earlier nodes", f"{path}.{fld}")
                refs[fld] = tuple(built[r] for r in ref)
            span = rec["span"]
            if not (isinstance(span, list) and len(span) == 2):
                raise ProtocolError("span must be [start, end]", path + ".span")
            state = BellDiagonalState.from_array(rec["state"])
            node = ProtocolNode(kind=kind, span=(int(span[0]), int(span[1])), state=state,
                                avg_time=float(rec["avg_time"]), tau_e=rec.get("tau_e"),
                                children=refs["children"], gates=refs["gates"])
        except KeyError as exc:
            raise ProtocolError(f"missing field {exc.args[0]!r}", path) from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ProtocolError):
                raise
            raise ProtocolError(str(exc), path) from None
        built[i] = node
    root = doc.get("root")
    if root not in built:
        raise ProtocolError("root id not found", "$.root")
    header = {k: v for k, v in doc.items() if k != "nodes"}
    return built[root], header


def loads(text: str) -> tuple[ProtocolNode, dict]:
    return from_dict(json.loads(text))
