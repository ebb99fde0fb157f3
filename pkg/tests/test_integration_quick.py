"""
Quick integration test: the two shipped experiments at reduced trial counts,
plus the full invariant suite.
"""

import os
import sys
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.agents.supervisor import SCHEME_ORDER, run_sweep, summarize
from src.agents.validator_agent import CHECKS, build_graph, check_node, run_validation, verdict_node
from src.utils.errors import QuadratureError
from src.utils.config import REPO_ROOT, load_experiment_spec

TRIALS = 2000


def _run(name):
    spec = load_experiment_spec(REPO_ROOT / "config" / name)
    spec = type(spec).model_validate({**spec.model_dump(), "trials": TRIALS})
    result = run_sweep(spec, verbose=False)
    print(summarize(result, spec.schemes))
    return spec, result


def _check_ordering(spec, result):
    for value in spec.sweep.values:
        rows = {r["scheme"]: r for r in result.rows if r["sweep_value"] == value}
        for hi, lo in zip(SCHEME_ORDER, SCHEME_ORDER[1:]):
            a, b = rows[hi.value], rows[lo.value]
            slack = 3 * (a["ci95_half"] + b["ci95_half"])
            assert a["mean_rate_bps_hz"] >= b["mean_rate_bps_hz"] - slack, \
                f"{spec.sweep.variable}={value}: {hi.value} below {lo.value}"
        cps, proposed = rows["CPS"]["mean_rate_bps_hz"], rows["PROPOSED"]["mean_rate_bps_hz"]
        assert (cps - proposed) / cps < 0.02, f"{spec.sweep.variable}={value}: CPS gap too large"


def test_rate_versus_elements():
    """Rates grow with N and keep the scheme ordering"""
    print("=" * 60)
    print("INTEGRATION TEST: Rate vs number of elements")
    print("=" * 60)

    spec, result = _run("fig3.json")
    _check_ordering(spec, result)
    for kind in SCHEME_ORDER:
        series = result.series(kind)
        assert all(b > a for a, b in zip(series, series[1:])), f"{kind.value} not increasing in N"
    print("\n✅ Rate vs N: ordering holds, every scheme increasing in N")


def test_rate_versus_distance():
    """Rates fall with the IRS-destination distance"""
    print("\n" + "=" * 60)
    print("INTEGRATION TEST: Rate vs IRS-destination distance")
    print("=" * 60)

    spec, result = _run("fig4.json")
    _check_ordering(spec, result)
    for kind in SCHEME_ORDER:
        series = result.series(kind)
        assert all(b < a for a, b in zip(series, series[1:])), f"{kind.value} not decreasing in d_rd"
    print("\n✅ Rate vs d_rd: ordering holds, every scheme decreasing in distance")


def test_validation_suite():
    print("\n" + "=" * 60)
    print("INTEGRATION TEST: Invariant suite")
    print("=" * 60)

    results = run_validation(trials=4000)
    failed = [r["name"] for r in results if not r["passed"]]
    assert not failed, f"failed checks: {failed}"
    print(f"\n✅ {len(results)} checks passed")
    assert [r["name"] for r in results] == [name for name, _ in CHECKS]


def test_validation_graph():
    """Check nodes feed a verdict node; a raising check is recorded as failed"""
    nodes = set(build_graph().get_graph().nodes)
    assert {name for name, _ in CHECKS} | {"verdict"} <= nodes

    def broken(state):
        raise QuadratureError("cells hold probability 0.9")

    update = check_node("broken", broken)({"verbose": False, "results": []})
    [result] = update["results"]
    assert result["name"] == "broken" and not result["passed"]
    assert result["detail"].startswith("QuadratureError")

    ok = check_node("fine", lambda state: (True, "ok"))({"verbose": False, "results": [result]})
    assert [r["name"] for r in ok["results"]] == ["broken", "fine"]
    assert verdict_node({"verbose": False, "results": ok["results"]}) == {"passed": False}
    assert verdict_node({"verbose": False, "results": ok["results"][1:]}) == {"passed": True}
    print("\n✓ validation graph: check nodes, error capture and verdict")


if __name__ == "__main__":
    try:
        test_rate_versus_elements()
        test_rate_versus_distance()
        test_validation_graph()
        test_validation_suite()
        print("\n" + "=" * 60)
        print("✅ ALL INTEGRATION TESTS PASSED")
        print("=" * 60)
    except Exception as e:
        print(f"\n❌ TEST FAILED: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
