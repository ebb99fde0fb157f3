from dotenv import load_dotenv
load_dotenv()

import time
from typing import Callable, List, Optional, Tuple

import numpy as np
from langgraph.graph import END, StateGraph

from src.agents.supervisor import cudps_rate
from src.chains.codebook import cached_design
from src.chains.rate import average_rate_mc, make_scheme, rate_upper_bound
from src.tools.placement import measure_offsets, optimal_positions, phase_offset_experiment
from src.utils.circular import wrap_diff
from src.utils.config import config, default_geometry, design_config
from src.utils.errors import IRSSimError
from src.utils.progress import report, rule
from src.utils.state import CheckResult, RicianSpec, SchemeKind, ValidationState

# Offset experiment setting: K = 10, half-wavelength array, cos sum 0.2
OFFSET_K = 10.0
OFFSET_N = 5
OFFSET_COS_SUM = 0.2
OFFSET_TOL_RAD = 0.01
KS_LIMIT = 0.01
JENSEN_GAP_LIMIT = 0.15


def check_reference_codebooks() -> Tuple[bool, str]:
    """Designed codebooks against the reference table"""
    tol = float(config["validation"]["table_tolerance_rad"])
    worst = 0.0
    failures = []
    for ref in config["validation"]["reference_codebooks"]:
        cb = cached_design(design_config(float(ref["K"]), int(ref["M"])))
        expected = np.sort(np.asarray(ref["shifts"], dtype=float))
        if cb.M != expected.size:
            failures.append(f"K={ref['K']} M={ref['M']}: got {cb.M} shifts")
            continue
        err = float(np.max(np.abs(wrap_diff(cb.shifts, expected))))
        worst = max(worst, err)
        if err > tol:
            failures.append(f"K={ref['K']} M={ref['M']}: max error {err:.4f} rad")
    if failures:
        return False, "; ".join(failures)
    return True, f"{len(config['validation']['reference_codebooks'])} codebooks, max error {worst:.4f} rad"


def check_offset_phenomenon(seed: int) -> Tuple[bool, str]:
    """Half-wavelength array shows a -0.2pi step between adjacent elements"""
    samples = int(config["validation"]["offset_samples"])
    rep = phase_offset_experiment(
        K=OFFSET_K, N=OFFSET_N, spacing_wavelengths=0.5, cos_sum=OFFSET_COS_SUM,
        samples=samples, seed=seed, ks_samples=min(samples, 10_000),
    )
    err = rep.max_step_error
    return err < OFFSET_TOL_RAD, f"mean step {np.mean(rep.steps):+.4f} rad (expected {-0.2 * np.pi:+.4f}), max error {err:.4f}"


def check_offset_elimination(seed: int) -> Tuple[bool, str]:
    """Offset-free layout: identical per-element distributions"""
    geometry = default_geometry().to_link_geometry().with_cos_sum(OFFSET_COS_SUM)
    layout = optimal_positions(OFFSET_N, geometry)
    ks_samples = int(config["validation"]["ks_samples"])
    rep = measure_offsets(OFFSET_K, layout, geometry, ks_samples, seed, ks_samples)
    step = float(np.max(np.abs(rep.steps)))
    ok = rep.max_pairwise_ks < KS_LIMIT and step < OFFSET_TOL_RAD
    return ok, f"max pairwise KS {rep.max_pairwise_ks:.4f}, max mean step {step:.4f} rad"


def check_scheme_ordering(trials: int, seed: int) -> Tuple[bool, str]:
    """CPS >= PROPOSED >= ME_UDPS >= C_UDPS up to CI noise, small CPS gap"""
    h = config["harness"]
    K, M, N = float(h["K"]), int(h["M"]), int(h["N"])
    geometry = default_geometry().to_link_geometry()
    rician = RicianSpec(K=K, N=N)

    est = {}
    for kind in (SchemeKind.CPS, SchemeKind.PROPOSED, SchemeKind.ME_UDPS):
        est[kind] = average_rate_mc(make_scheme(kind, K, M), rician, geometry, trials, seed)
    est[SchemeKind.C_UDPS] = cudps_rate(
        make_scheme(SchemeKind.C_UDPS, K, M), rician, geometry, h["cudps_angle_sweep"], trials, seed
    )

    order = [SchemeKind.CPS, SchemeKind.PROPOSED, SchemeKind.ME_UDPS, SchemeKind.C_UDPS]
    ok = True
    for hi, lo in zip(order, order[1:]):
        if est[hi].mean < est[lo].mean - 3.0 * (est[hi].half_ci95 + est[lo].half_ci95):
            ok = False
    gap = (est[SchemeKind.CPS].mean - est[SchemeKind.PROPOSED].mean) / est[SchemeKind.CPS].mean
    ok = ok and gap < float(config["validation"]["max_relative_gap"])
    means = ", ".join(f"{k.value} {est[k].mean:.4f}" for k in order)
    return ok, f"{means}; CPS-PROPOSED gap {100 * gap:.2f}%"


def check_jensen_bound(trials: int, seed: int) -> Tuple[bool, str]:
    """Closed-form bound dominates the Monte Carlo rate and stays close at N=50"""
    h = config["harness"]
    K, M, N = float(h["K"]), int(h["M"]), int(h["N"])
    geometry = default_geometry().to_link_geometry()
    rician = RicianSpec(K=K, N=N)
    scheme = make_scheme(SchemeKind.PROPOSED, K, M)
    est = average_rate_mc(scheme, rician, geometry, trials, seed)
    bound = rate_upper_bound(rician, scheme.codebook, geometry)
    gap = bound - est.mean
    ok = gap >= -3.0 * est.half_ci95 and gap < JENSEN_GAP_LIMIT
    return ok, f"bound {bound:.4f}, Monte Carlo {est.mean:.4f} +/- {est.half_ci95:.4f}, gap {gap:.4f}"


# ========== GRAPH ==========

CHECKS: List[Tuple[str, Callable[[ValidationState], Tuple[bool, str]]]] = [
    ("reference_codebooks", lambda state: check_reference_codebooks()),
    ("offset_phenomenon", lambda state: check_offset_phenomenon(state["seed"])),
    ("offset_elimination", lambda state: check_offset_elimination(state["seed"])),
    ("scheme_ordering", lambda state: check_scheme_ordering(state["trials"], state["seed"])),
    ("jensen_bound", lambda state: check_jensen_bound(state["trials"], state["seed"])),
]


def check_node(name: str, check: Callable[[ValidationState], Tuple[bool, str]]):
    """
    Wrap a check as a graph node.

    A check that raises is recorded as failed with the error as detail.
    """

    def node(state: ValidationState) -> dict:
        start = time.perf_counter()
        try:
            passed, detail = check(state)
        except (IRSSimError, ValueError, AssertionError) as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        elapsed = time.perf_counter() - start
        tag = "[✓]" if passed else "[ERROR]"
        report(f"{tag} {name}: {detail} ({elapsed:.1f}s)", state.get("verbose", True))
        result = CheckResult(name=name, passed=bool(passed), detail=detail, elapsed_s=elapsed)
        return {"results": [*state.get("results", []), result]}

    return node


def verdict_node(state: ValidationState) -> dict:
    """Overall pass only when every check passed"""
    results = state.get("results", [])
    n_passed = sum(r["passed"] for r in results)
    report(f"\n{n_passed}/{len(results)} checks passed", state.get("verbose", True))
    return {"passed": n_passed == len(results)}


def build_graph():
    """
    Build the validation pipeline.

    Graph structure:
        reference_codebooks -> offset_phenomenon -> offset_elimination
          -> scheme_ordering -> jensen_bound -> verdict -> END

    Returns:
        Compiled LangGraph application
    """
    graph = StateGraph(ValidationState)
    for name, check in CHECKS:
        graph.add_node(name, check_node(name, check))
    graph.add_node("verdict", verdict_node)

    graph.set_entry_point(CHECKS[0][0])
    for (name, _), (following, _) in zip(CHECKS, CHECKS[1:]):
        graph.add_edge(name, following)
    graph.add_edge(CHECKS[-1][0], "verdict")
    graph.add_edge("verdict", END)

    return graph.compile()


def run_validation(trials: Optional[int] = None, seed: Optional[int] = None, verbose: bool = True) -> List[CheckResult]:
    """
    Run the invariant suite through the validation graph.

    Returns:
        One CheckResult per check, in run order
    """
    trials = trials or int(config["validation"]["trials"])
    seed = int(config["validation"]["seed"]) if seed is None else seed

    rule(f"VALIDATION ({trials} trials, seed {seed})", verbose)
    app = build_graph()
    final_state = app.invoke({"trials": trials, "seed": seed, "verbose": verbose, "results": []})
    return final_state["results"]
