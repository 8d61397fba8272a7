import json
from dataclasses import replace

import pytest

from repeater_dp import baseline, protocol
from repeater_dp.noise import HardwareParams
from repeater_dp.planner import DPTable, PlannerOptions
from repeater_dp.states import ClassGrid

HP = HardwareParams()


@pytest.fixture(scope="module")
def ctsl_plan():
    table = DPTable(HP, ClassGrid.uniform(q=20, shape_bins=4), PlannerOptions(scheme="ctsl")).build(9)
    return table.query(90, 0.9).protocol, table.hp


def dump(root, hp, scheme):
    return protocol.dumps(root, scheme=scheme, hp=hp, unit_km=10.0)


def test_json_roundtrip_preserves_tree(ctsl_plan):
    root, hp = ctsl_plan
    back, header = protocol.loads(dump(root, hp, "ctsl"))
    assert header["scheme"] == "ctsl"
    assert back.tree_size() == root.tree_size()
    assert len(list(back.walk())) == len(list(root.walk()))
    protocol.recompute(back, hp, header["unit_km"])
    assert back.avg_time == root.avg_time
    assert tuple(back.state) == tuple(root.state)


def test_shared_subtrees_written_once():
    res = baseline.unoptimized_bdcz(160, 0.9, HP, m=2)
    doc = protocol.to_dict(res.protocol, scheme="bdcz", hp=HP.resolved("bdcz"), unit_km=10.0)
    assert len(doc["nodes"]) < res.protocol.tree_size()


def test_tampered_time_is_located(ctsl_plan):
    root, hp = ctsl_plan
    doc = json.loads(dump(root, hp, "ctsl"))
    victim = next(n for n in doc["nodes"] if n["kind"] == "connect")
    victim["avg_time"] *= 1.01
    back, _ = protocol.from_dict(doc)
    with pytest.raises(protocol.ProtocolError) as err:
        protocol.recompute(back, hp)
    assert "avg_time" in str(err.value)
    assert err.value.path.startswith("$")


def test_tampered_state_is_rejected(ctsl_plan):
    root, hp = ctsl_plan
    bad = replace(root, state=replace(root.state, f1=root.state.f1 - 1e-3, f2=root.state.f2 + 1e-3))
    with pytest.raises(protocol.ProtocolError, match="cached state"):
        protocol.recompute(bad, hp)


def test_wrong_hardware_is_detected():
    res = baseline.unoptimized_bdcz(40, 0.9, HP, m=1)
    with pytest.raises(protocol.ProtocolError):
        protocol.recompute(res.protocol, HardwareParams(p=0.99, gen_error_shape="werner"))


def test_children_must_tile():
    res = baseline.unoptimized_bdcz(40, 0.6, HP, m=0)
    left, right = res.protocol.children
    broken = replace(res.protocol, children=(left, replace(right, span=(3, 5))))
    with pytest.raises(protocol.ProtocolError, match="tile"):
        protocol.recompute(broken, HP.resolved("bdcz"))


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d.update(format="other"), "$.format"),
    (lambda d: d.update(nodes=[]), "$.nodes"),
    (lambda d: d.update(root=10 ** 6), "$.root"),
    (lambda d: d["nodes"][0].pop("state"), "$.nodes[0]"),
    (lambda d: d["nodes"][-1].update(children=[10 ** 6, 0]), "$.nodes["),
    (lambda d: d["nodes"][0].update(kind="teleport"), "$.nodes[0].kind"),
])
def test_malformed_documents(mutate, where):
    res = baseline.unoptimized_bdcz(40, 0.9, HP, m=1)
    doc = protocol.to_dict(res.protocol, scheme="bdcz", hp=HP.resolved("bdcz"), unit_km=10.0)
    mutate(doc)
    with pytest.raises(protocol.ProtocolError) as err:
        protocol.from_dict(doc)
    assert err.value.path.startswith(where)


def test_budget_formula():
    assert [protocol.qubit_budget("bdcz", n) for n in (1, 2, 4, 8, 128)] == [2, 4, 6, 8, 16]
    assert protocol.qubit_budget("ctsl", 128) == 1
