#!/usr/bin/env python3
"""Smoke test for the shapestore_py extension module.

Builds nothing itself: expects `cargo build -p shapestore-py` (or --release)
to have produced target/<profile>/libshapestore_py.so. Run:

    python3 python/smoke_test.py
"""

import json
import math
import shutil
import sys
import tempfile
from fractions import Fraction
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_module():
    candidates = [
        REPO / "target" / profile / "libshapestore_py.so"
        for profile in ("release", "debug")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit(
            "libshapestore_py.so not found; run `cargo build -p shapestore-py` first"
        )
    stage = Path(tempfile.mkdtemp(prefix="shapestore_py_"))
    shutil.copy2(built, stage / "shapestore_py.so")
    sys.path.insert(0, str(stage))
    import shapestore_py

    return shapestore_py


def frac(s):
    return Fraction(s)


def main():
    ss = import_module()
    checks = 0

    def ok(label):
        nonlocal checks
        checks += 1
        print(f"ok {checks} - {label}")

    # Network construction, validation, connectivity.
    pairs = ss.Network(3, [[0, 1], [0, 2], [1, 2]], ["1/3", "1/3", "1/3"])
    assert pairs.validate() == []
    assert pairs.is_connected()
    bad = ss.Network(2, [[0]], ["1"])
    assert any("cover node 1" in v for v in bad.validate())
    split = ss.Network(4, [[0, 1], [2, 3]], ["1/2", "1/2"])
    assert not split.is_connected()
    ok("network validation and connectivity")

    # Shapes and magnitudes are exact.
    assert pairs.shape_of([2, 1, 0]) == [3, 0, -3]
    assert pairs.shape_magnitude([2, 1, 0]) == "2"
    assert pairs.shape_magnitude([7, 7, 7]) == "0"
    two = ss.Network(2, [[0, 1]], ["1"])
    assert two.shape_magnitude([3, 0]) == "9/2"
    ok("shape transform and magnitude")

    # Feasibility: positive, boundary, infeasible.
    report = json.loads(pairs.analyze_json())
    assert report["status"] == "POSITIVE"
    assert frac(report["slack"]) == Fraction(1, 3)
    assert pairs.origin_in_ri_d()

    boundary = ss.Network(3, [[0, 1], [0, 2], [1, 2]], ["2/3", "1/6", "1/6"])
    assert json.loads(boundary.analyze_json())["status"] == "NONNEG_ONLY"
    assert not boundary.origin_in_ri_d()

    nested = ss.Network(3, [[0], [0, 1, 2]], ["1/2", "1/2"])
    nested_report = json.loads(nested.analyze_json())
    assert nested_report["status"] == "INFEASIBLE"
    assert nested.separating_functional() == ["2/3", "-1/3", "-1/3"]
    slack, witness = nested.subset_slack()
    assert frac(slack) == Fraction(-1, 6) and witness == [0]
    ok("feasibility statuses and certificate")

    # Tie-break rules and policy decisions.
    assert ss.argmin_node([1, 0, 0], [0, 1, 2]) == 1
    assert ss.argmax_node([0, 0, 0], [0, 1, 2]) == 2
    jsq = ss.Policy.jsq()
    assert jsq.decide(pairs, [2, 1, 0]) == [["0", "1"], ["0", "1"], ["0", "1"]]
    pserp = ss.Policy.from_spec(pairs, '{"policy":"pserp","epsilon":"1/12"}')
    assert pserp.decide(pairs, [2, 1, 0])[0] == ["1/4", "3/4"]
    serp = ss.Policy.from_spec(pairs, '{"policy":"serp"}')
    assert serp.decide(pairs, [9, 9, 9]) == [["1/2", "1/2"]] * 3
    degraded = ss.Policy.from_spec(nested, '{"policy":"pserp"}')
    assert degraded.degraded() and degraded.kind() == "jsq"
    ok("policy decisions, tie-breaks, degradation")

    # Drift: oracle, closed forms, g-drift bound.
    record = json.loads(ss.drift_report_json(pairs, jsq, [2, 1, 0]))
    assert frac(record["delta_f"]) == Fraction(-2, 3)
    assert record["jump_bound_ok"] is True
    record = json.loads(ss.drift_report_json(pairs, pserp, [2, 1, 0]))
    assert frac(record["delta_f"]) == 0 and record["match"] is True
    record = json.loads(ss.drift_report_json(pairs, serp, [5, 1, 2]))
    assert frac(record["delta_f"]) == Fraction(2, 3)
    g = json.loads(ss.drift_g_json(pairs, jsq, [2, 1, 0]))
    assert g["drift_g"] <= g["bound"] + 1e-9
    assert abs(g["bound"] - (-2 / 3) / (2 * math.sqrt(2))) < 1e-9
    ok("drift oracle, closed forms, g-bound")

    # Certificate drift stays non-negative on the infeasible instance.
    b = nested.separating_functional()
    value = ss.certificate_drift(nested, jsq, [0, 0, 0], b)
    assert frac(value) == Fraction(2, 3)
    for seed in range(5):
        rnd = ss.Policy.random(nested, seed)
        v = frac(ss.certificate_drift(nested, rnd, [4, 1, 0], b))
        assert v >= 0
    ok("certificate drift non-negative")

    # Simulation: recurrence on the symmetric net, transience on the nested.
    stats = json.loads(ss.simulate_json(pairs, jsq, 20_000, 8, 1, tau_cutoff=2_000))
    assert stats["diagnostic"]["verdict"] == "POSITIVE_RECURRENT_CONSISTENT"
    assert all(int(t) % 3 == 0 for t in stats["tau_histogram"])
    assert stats["largest_stable_c"] >= 0.01
    stats = json.loads(ss.simulate_json(nested, jsq, 20_000, 8, 1, tau_cutoff=2_000))
    assert stats["diagnostic"]["verdict"] == "TRANSIENT_CONSISTENT"
    ok("simulation diagnostics")

    # Deterministic alternation on two nodes.
    stats = json.loads(ss.simulate_json(two, jsq, 10, 1, 0, record_every=1))
    assert stats["tau_histogram"] == {"2": 5}
    assert stats["replicas"][0]["final_loads"] == [5, 5]
    ok("deterministic two-node alternation")

    print(f"{checks} checks passed")


if __name__ == "__main__":
    main()
