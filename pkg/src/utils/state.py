"""
Domain types shared by every layer of the simulator.

Validated inputs (geometry, Rician spec, design settings) are frozen
pydantic models. Array-bearing results are frozen dataclasses. Records that
the orchestration layer passes around and writes out are TypedDicts.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple, TypedDict

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

TWO_PI = 2.0 * np.pi


# ========== LINK MODEL ==========

class LinkGeometry(BaseModel):
    """
    Large-scale description of the S -> IRS -> D link.

    All powers are linear watts. `lam` is the carrier wavelength (the JSON
    configs call it `lambda_m`).
    """

    model_config = ConfigDict(frozen=True)

    d_sr: float = Field(gt=0, allow_inf_nan=False)
    d_rd: float = Field(gt=0, allow_inf_nan=False)
    alpha: float = Field(gt=0, allow_inf_nan=False)
    lam: float = Field(gt=0, allow_inf_nan=False)
    phi_sr: float = Field(allow_inf_nan=False)
    phi_rd: float = Field(allow_inf_nan=False)
    P_s: float = Field(gt=0, allow_inf_nan=False)
    sigma2: float = Field(gt=0, allow_inf_nan=False)
    beta0: float = Field(gt=0, allow_inf_nan=False)

    @property
    def cos_sum(self) -> float:
        """cos(phi_sr) + cos(phi_rd)"""
        return float(np.cos(self.phi_sr) + np.cos(self.phi_rd))

    def with_updates(self, **fields) -> "LinkGeometry":
        """Validated copy with some fields replaced"""
        return LinkGeometry(**{**self.model_dump(), **fields})

    def with_cos_sum(self, cos_sum: float) -> "LinkGeometry":
        """
        Copy whose AoA and AoD are equal and give the requested cos sum.

        Only the sum enters the model, so the split between the two angles
        is arbitrary; equal angles keep |cos_sum| <= 2 reachable.
        """
        if not np.isfinite(cos_sum) or abs(cos_sum) > 2.0:
            raise ValueError(f"cos_sum must lie in [-2, 2], got {cos_sum}")
        phi = float(np.arccos(cos_sum / 2.0))
        return self.with_updates(phi_sr=phi, phi_rd=phi)


class RicianSpec(BaseModel):
    """Rician factor and element count of one simulated IRS"""

    model_config = ConfigDict(frozen=True)

    K: float = Field(ge=0, allow_inf_nan=False)
    N: int = Field(ge=2)


@dataclass(frozen=True, eq=False)
class ChannelDraw:
    """One realization of the N cascaded gains h_i and their phases"""

    gains: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        gains = np.array(self.gains, dtype=complex).ravel()
        phases = np.array(self.phases, dtype=float).ravel()
        if gains.shape != phases.shape:
            raise ValueError(
                f"gains and phases differ in length ({gains.size} vs {phases.size})"
            )
        gains.flags.writeable = False
        phases.flags.writeable = False
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "phases", phases)

    @property
    def N(self) -> int:
        return int(self.gains.size)


@dataclass(frozen=True, eq=False)
class ElementLayout:
    """Positions x_1..x_N (meters) of the reflecting elements, x_1 = 0"""

    positions: np.ndarray

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float).ravel()
        if positions.size < 2:
            raise ValueError(f"a layout needs at least 2 elements, got {positions.size}")
        if positions[0] != 0.0:
            raise ValueError(f"first element must sit at the reference point 0, got {positions[0]}")
        if not np.all(np.diff(positions) > 0):
            raise ValueError("element positions must be strictly increasing")
        positions.flags.writeable = False
        object.__setattr__(self, "positions", positions)

    @property
    def N(self) -> int:
        return int(self.positions.size)

    @property
    def aperture(self) -> float:
        """Distance from the first to the last element"""
        return float(self.positions[-1])


# ========== CODEBOOKS ==========

Weighting = Literal["amplitude", "unweighted"]
Objective = Literal["absolute_error", "resultant"]
PhaseModel = Literal["gaussian", "rician"]


class DesignConfig(BaseModel):
    """
    Settings of one codebook design run.

    The defaults are the variant that reproduces the published codebook
    table; config/config.yaml carries the same values.
    """

    model_config = ConfigDict(frozen=True)

    M: int = Field(ge=2)
    K: float = Field(ge=0, allow_inf_nan=False)
    weighting: Weighting = "unweighted"
    objective: Objective = "absolute_error"
    phase_model: PhaseModel = "gaussian"
    tol: float = Field(default=1e-10, gt=0)
    max_iter: int = Field(default=10_000, ge=1)
    quadrature_points: int = Field(default=4096, ge=64)
    restarts: int = Field(default=1, ge=1)
    """extra Lloyd runs from rotated grids; 1 = uniform grid only"""


@dataclass(frozen=True, eq=False)
class PhaseCodebook:
    """
    M discrete phase shifts shared by every element, sorted in [-pi, pi).

    objective_value is |E[w e^{j(phi + Q(phi))}]|^2 under the distribution
    the codebook was designed for; history holds the design loss after
    every iteration (lower is better).
    """

    shifts: np.ndarray
    K: float
    objective_value: float = float("nan")
    weighting: str = "unweighted"
    objective: str = "absolute_error"
    phase_model: str = "gaussian"
    converged: bool = True
    iterations: int = 0
    mean_abs_error: float = float("nan")
    history: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        shifts = np.array(self.shifts, dtype=float).ravel()
        if shifts.size < 2:
            raise ValueError(f"a codebook needs M >= 2 shifts, got {shifts.size}")
        if np.any(shifts < -np.pi) or np.any(shifts >= np.pi):
            raise ValueError("codebook shifts must lie in [-pi, pi)")
        if not np.all(np.diff(shifts) > 0):
            raise ValueError("codebook shifts must be distinct and sorted ascending")
        shifts.flags.writeable = False
        object.__setattr__(self, "shifts", shifts)
        object.__setattr__(self, "history", tuple(float(h) for h in self.history))

    @property
    def M(self) -> int:
        return int(self.shifts.size)


def uniform_codebook(M: int, K: float = 0.0) -> PhaseCodebook:
    """The conventional uniform DPS set {-pi, -pi + 2pi/M, ..., pi - 2pi/M}"""
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    shifts = -np.pi + TWO_PI * np.arange(M) / M
    return PhaseCodebook(shifts=shifts, K=K, objective="uniform", phase_model="none")


# ========== RATE EVALUATION ==========

class SchemeKind(str, Enum):
    """The four beamforming schemes compared by the harness"""

    CPS = "CPS"
    PROPOSED = "PROPOSED"
    ME_UDPS = "ME_UDPS"
    C_UDPS = "C_UDPS"


@dataclass(frozen=True)
class RateEstimate:
    """Monte Carlo average rate with its 95% normal-approximation half width"""

    mean: float
    half_ci95: float
    trials: int
    seed: int
    std: float = 0.0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not self.half_ci95 >= 0:
            raise ValueError(f"half_ci95 must be >= 0, got {self.half_ci95}")


# ========== HARNESS RECORDS ==========

class ResultRow(TypedDict):
    """One (sweep value, scheme) cell of a sweep, as written to CSV"""

    sweep_var: str
    """Swept quantity: 'N', 'd_rd' or 'cos_sum'"""

    sweep_value: float
    """Value of the swept quantity for this row"""

    scheme: str
    """SchemeKind value"""

    mean_rate_bps_hz: float
    """Average rate in bits/s/Hz"""

    ci95_half: float
    """Half width of the 95% confidence interval"""

    trials: int
    """Monte Carlo trials behind the estimate (per angle for C_UDPS)"""

    seed: int
    """Base seed of the random streams"""


class CheckResult(TypedDict):
    """Outcome of one invariant check run by the validator agent"""

    name: str
    passed: bool
    detail: str
    elapsed_s: float


# ========== GRAPH STATE ==========

class SweepState(TypedDict, total=False):
    """
    State passed between the nodes of the sweep graph.

    Each node reads what earlier nodes wrote and returns only the fields
    it changes.
    """

    # ========== INPUT FIELDS ==========

    spec: Any
    """Validated ExperimentSpec (never changes)"""

    verbose: bool
    """Print progress lines to stderr"""

    # ========== DESIGN OUTPUTS ==========

    geometry: Any
    """LinkGeometry built from the spec"""

    workers: int
    """Thread pool size after the IRS_SIM_WORKERS override"""

    schemes: Dict[str, Any]
    """SchemeKind value -> Scheme, codebooks already designed"""

    codebooks: Dict[str, List[float]]
    """Shifts of every scheme that uses a codebook"""

    pending: List[str]
    """SchemeKind values still to evaluate, in scheme order"""

    # ========== LAYOUT CHECK OUTPUTS ==========

    long_layouts: List[float]
    """Sweep values whose offset-free layout exceeds max_aperture_m"""

    # ========== EVALUATION OUTPUTS ==========

    current: Optional[str]
    """Scheme being evaluated; None once every scheme is done"""

    estimates: Dict[Tuple[float, str], Any]
    """(sweep value, scheme) -> RateEstimate"""

    # ========== COLLECT OUTPUTS ==========

    rows: Tuple[ResultRow, ...]
    """Result rows sorted by sweep value, then scheme order"""

    metadata: Dict[str, Any]
    """spec hash, codebooks, design settings, timestamp, version, workers"""


class ValidationState(TypedDict, total=False):
    """State passed between the check nodes of the validation graph"""

    trials: int
    seed: int
    verbose: bool

    results: List[CheckResult]
    """One entry per check already run, in run order"""

    passed: Optional[bool]
    """Set by the verdict node: every check passed"""
