from dotenv import load_dotenv
load_dotenv()

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from langgraph.graph import END, StateGraph

from src import __version__
from src.chains.rate import Scheme, average_rate_mc, estimate_from_rates, make_scheme, trial_rates
from src.tools.placement import check_aperture, optimal_positions
from src.utils.config import ExperimentSpec
from src.utils.errors import IRSSimError
from src.utils.progress import report, rule
from src.utils.state import LinkGeometry, RateEstimate, ResultRow, RicianSpec, SchemeKind, SweepState

SCHEME_ORDER = [SchemeKind.CPS, SchemeKind.PROPOSED, SchemeKind.ME_UDPS, SchemeKind.C_UDPS]


@dataclass(frozen=True)
class ExperimentResult:
    """Rows of a sweep (one per sweep value and scheme) plus run metadata"""

    rows: Tuple[ResultRow, ...]
    metadata: Dict = field(default_factory=dict)

    def rate(self, value: float, scheme: SchemeKind) -> float:
        for row in self.rows:
            if row["sweep_value"] == value and row["scheme"] == SchemeKind(scheme).value:
                return row["mean_rate_bps_hz"]
        raise KeyError(f"no row for sweep value {value} and scheme {scheme}")

    def series(self, scheme: SchemeKind) -> List[float]:
        """Mean rates of one scheme in sweep-value order"""
        return [r["mean_rate_bps_hz"] for r in self.rows if r["scheme"] == SchemeKind(scheme).value]


def resolve_workers(requested: int) -> int:
    """IRS_SIM_WORKERS overrides the experiment's worker count"""
    env = os.environ.get("IRS_SIM_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            report(f"[WARNING] ignoring IRS_SIM_WORKERS={env!r} (not an integer)")
    return max(1, requested)


def point_for(spec: ExperimentSpec, geometry: LinkGeometry, value: float) -> Tuple[RicianSpec, LinkGeometry]:
    """RicianSpec and geometry of one sweep value"""
    variable = spec.sweep.variable
    if variable == "N":
        return RicianSpec(K=spec.K, N=int(value)), geometry
    if variable == "d_rd":
        return RicianSpec(K=spec.K, N=spec.N), geometry.with_updates(d_rd=value)
    return RicianSpec(K=spec.K, N=spec.N), geometry.with_cos_sum(value)


def cudps_rate(
    scheme: Scheme,
    rician: RicianSpec,
    geometry: LinkGeometry,
    angles: Sequence[float],
    trials: int,
    seed: int,
) -> RateEstimate:
    """
    C_UDPS averaged with equal weight over a set of cos sums.

    Every angle reuses the same seeded draws, so trial t's rates are averaged
    across angles first and the half width comes from those per-trial means.
    """
    if not len(angles):
        raise ValueError("cudps_angle_sweep must hold at least one cos sum")
    per_angle = np.stack([
        trial_rates(scheme, rician, geometry.with_cos_sum(c), trials, seed)
        for c in angles
    ])
    return estimate_from_rates(per_angle.mean(axis=0), seed)


# ========== NODES ==========

def design_node(state: SweepState) -> dict:
    """Build every scheme once; PROPOSED designs its codebook here"""
    spec, verbose = state["spec"], state.get("verbose", True)
    workers = resolve_workers(spec.workers)

    rule(f"SWEEP {spec.sweep.variable} over {len(spec.sweep.values)} values "
         f"({len(spec.schemes)} schemes, {spec.trials} trials)", verbose)

    schemes = {
        kind.value: make_scheme(kind, spec.K, spec.M, spec.design_config())
        for kind in spec.schemes
    }
    codebooks = {
        name: [float(s) for s in scheme.codebook.shifts]
        for name, scheme in schemes.items()
        if scheme.codebook is not None
    }
    if SchemeKind.PROPOSED.value in schemes:
        cb = schemes[SchemeKind.PROPOSED.value].codebook
        report(f"[OK] Designed codebook K={spec.K:g}, M={spec.M}: "
               f"{np.array2string(cb.shifts, precision=4)}", verbose)

    return {
        "geometry": spec.geometry.to_link_geometry(),
        "workers": workers,
        "schemes": schemes,
        "codebooks": codebooks,
        "pending": [kind.value for kind in SCHEME_ORDER if kind in spec.schemes],
        "estimates": {},
    }


def layout_check_node(state: SweepState) -> dict:
    """Fail early on degenerate geometry and warn once per long layout"""
    spec, geometry = state["spec"], state["geometry"]
    long_layouts = []
    if any(s.layout_policy == "optimal" for s in state["schemes"].values()):
        for value in spec.sweep.values:
            try:
                rician, point_geometry = point_for(spec, geometry, value)
                layout = optimal_positions(rician.N, point_geometry)
            except IRSSimError as e:
                raise type(e)(f"{spec.sweep.variable}={value:g}: {e}") from e
            if not check_aperture(layout, spec.max_aperture_m):
                long_layouts.append(float(value))
    return {"long_layouts": long_layouts}


def next_scheme_node(state: SweepState) -> dict:
    """Pop the next scheme to evaluate"""
    pending = state.get("pending", [])
    if not pending:
        return {"current": None}
    return {"current": pending[0], "pending": pending[1:]}


def _evaluate(state: SweepState, rate_fn) -> dict:
    """Run rate_fn(scheme, rician, geometry) at every sweep value of the current scheme"""
    spec, verbose = state["spec"], state.get("verbose", True)
    name = state["current"]
    scheme = state["schemes"][name]

    def run_value(value):
        rician, point_geometry = point_for(spec, state["geometry"], value)
        try:
            estimate = rate_fn(scheme, rician, point_geometry)
        except IRSSimError as e:
            raise type(e)(f"{spec.sweep.variable}={value:g}, {name}: {e}") from e
        report(f"[OK] {spec.sweep.variable}={value:g} {name}: "
               f"{estimate.mean:.4f} +/- {estimate.half_ci95:.4f} bits/s/Hz", verbose)
        return estimate

    values = list(spec.sweep.values)
    if state["workers"] > 1 and len(values) > 1:
        with ThreadPoolExecutor(max_workers=state["workers"]) as pool:
            estimates = list(pool.map(run_value, values))
    else:
        estimates = [run_value(v) for v in values]

    merged = dict(state["estimates"])
    merged.update({(float(v), name): est for v, est in zip(values, estimates)})
    return {"estimates": merged}


def monte_carlo_node(state: SweepState) -> dict:
    """CPS, PROPOSED and ME_UDPS: one Monte Carlo run per sweep value"""
    spec = state["spec"]
    return _evaluate(
        state,
        lambda scheme, rician, geometry: average_rate_mc(scheme, rician, geometry, spec.trials, spec.seed),
    )


def angle_average_node(state: SweepState) -> dict:
    """C_UDPS: rate averaged over the conventional array's angle sweep"""
    spec = state["spec"]
    return _evaluate(
        state,
        lambda scheme, rician, geometry: cudps_rate(
            scheme, rician, geometry, spec.cudps_angle_sweep, spec.trials, spec.seed
        ),
    )


def collect_node(state: SweepState) -> dict:
    """Rows in (sweep value, scheme order) and run metadata"""
    spec = state["spec"]
    order = {kind.value: i for i, kind in enumerate(SCHEME_ORDER)}
    cells = sorted(state["estimates"].items(), key=lambda item: (item[0][0], order[item[0][1]]))
    rows = tuple(
        ResultRow(
            sweep_var=spec.sweep.variable,
            sweep_value=value,
            scheme=name,
            mean_rate_bps_hz=estimate.mean,
            ci95_half=estimate.half_ci95,
            trials=estimate.trials,
            seed=estimate.seed,
        )
        for (value, name), estimate in cells
    )
    metadata = {
        "spec_hash": spec.spec_hash(),
        "codebooks": state["codebooks"],
        "design": spec.design_config().model_dump(),
        "long_layouts": state.get("long_layouts", []),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "version": __version__,
        "workers": state["workers"],
    }
    report(f"\n[OK] Sweep complete: {len(rows)} rows", state.get("verbose", True))
    return {"rows": rows, "metadata": metadata}


# ========== ROUTING ==========

def route_scheme(state: SweepState) -> str:
    """
    Route the current scheme to its evaluation node.

    Routes:
    - C_UDPS -> angle_average (conventional array, averaged over angles)
    - other schemes -> monte_carlo (single run on the scheme's layout)
    - nothing left -> collect

    Args:
        state: Current sweep state

    Returns:
        Next node name
    """
    current = state.get("current")
    verbose = state.get("verbose", True)
    if current is None:
        report("-> Router: every scheme evaluated, collecting rows", verbose)
        return "collect"
    if current == SchemeKind.C_UDPS.value:
        report(f"-> Router: {current} averaged over the angle sweep", verbose)
        return "angle_average"
    report(f"-> Router: {current} single Monte Carlo run", verbose)
    return "monte_carlo"


def build_graph():
    """
    Build the sweep state machine.

    Graph structure:
        design (build schemes, design codebooks)
          ↓
        layout_check (degenerate geometry fails, long layouts warn)
          ↓
        next_scheme <───────────────┐
          ↓                         │
        [CONDITIONAL ROUTING]       │
          C_UDPS? -> angle_average ─┤
          other?  -> monte_carlo ───┘
          done?   -> collect
          ↓
        END

    Returns:
        Compiled LangGraph application
    """
    graph = StateGraph(SweepState)

    graph.add_node("design", design_node)
    graph.add_node("layout_check", layout_check_node)
    graph.add_node("next_scheme", next_scheme_node)
    graph.add_node("monte_carlo", monte_carlo_node)
    graph.add_node("angle_average", angle_average_node)
    graph.add_node("collect", collect_node)

    graph.set_entry_point("design")
    graph.add_edge("design", "layout_check")
    graph.add_edge("layout_check", "next_scheme")
    graph.add_conditional_edges(
        "next_scheme",
        route_scheme,
        {
            "monte_carlo": "monte_carlo",
            "angle_average": "angle_average",
            "collect": "collect",
        },
    )
    graph.add_edge("monte_carlo", "next_scheme")
    graph.add_edge("angle_average", "next_scheme")
    graph.add_edge("collect", END)

    return graph.compile()


def run_sweep(spec: ExperimentSpec, verbose: bool = True) -> ExperimentResult:
    """
    Evaluate every (sweep value, scheme) cell of an experiment.

    Runs the sweep graph: codebooks are designed once up front, each scheme
    is routed to its evaluation node, and rows come back sorted by sweep
    value and scheme order, so results depend only on the experiment spec.

    Args:
        spec: Validated experiment spec
        verbose: Print progress to stderr

    Returns:
        ExperimentResult
    """
    app = build_graph()
    # design, layout_check, collect, plus next_scheme and one evaluation per scheme
    limit = 2 * len(spec.schemes) + 10
    final_state = app.invoke({"spec": spec, "verbose": verbose}, {"recursion_limit": limit})
    return ExperimentResult(rows=final_state["rows"], metadata=final_state["metadata"])


def summarize(result: ExperimentResult, schemes: Optional[Sequence[SchemeKind]] = None) -> str:
    """Plain-text table of a result, one line per sweep value"""
    kinds = [SchemeKind(s) for s in (schemes or dict.fromkeys(r["scheme"] for r in result.rows))]
    values = list(dict.fromkeys(r["sweep_value"] for r in result.rows))
    var = result.rows[0]["sweep_var"] if result.rows else "value"
    lines = [f"{var:>10} " + " ".join(f"{k.value:>10}" for k in kinds)]
    for value in values:
        lines.append(f"{value:>10g} " + " ".join(f"{result.rate(value, k):>10.4f}" for k in kinds))
    return "\n".join(lines)
