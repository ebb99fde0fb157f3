"""
Received SNR and average rate of the beamforming schemes.

gamma = prefactor * |sum_i |h_i| e^{j(phi_i - offset_i + theta_i)}|^2 and the
rate is log2(1 + gamma). Monte Carlo trials are drawn in seeded blocks (see
src.tools.rng) so every scheme and sweep value sees the same channel draws.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from src.chains.codebook import cached_design, quantize
from src.tools.channel import cascaded_gain, draw_nlos_block, snr_prefactor
from src.tools.phase_density import arc_mass, joint_amplitude_phase_moment, mean_amplitude
from src.tools.placement import conventional_positions, optimal_positions, phase_offset
from src.tools.rng import block_bounds, block_rng
from src.utils.circular import wrap_phase
from src.utils.config import config, design_config
from src.utils.errors import LayoutMismatchError, QuadratureError
from src.utils.state import (
    ChannelDraw,
    DesignConfig,
    ElementLayout,
    LinkGeometry,
    PhaseCodebook,
    RateEstimate,
    RicianSpec,
    SchemeKind,
    uniform_codebook,
)

CI95_Z = 1.96
MASS_TOL = 1e-6


# ========== SCHEMES ==========

@dataclass(frozen=True, eq=False)
class Scheme:
    """A beamforming scheme: which shifts it may use and where its elements sit"""

    kind: SchemeKind
    codebook: Optional[PhaseCodebook]
    layout_policy: str
    """'optimal' (offset-free spacing), 'conventional' (lam/4) or 'none'"""

    def layout_for(self, N: int, geometry: LinkGeometry) -> Optional[ElementLayout]:
        if self.layout_policy == "optimal":
            return optimal_positions(N, geometry)
        if self.layout_policy == "conventional":
            return conventional_positions(N, geometry.lam)
        return None


def make_scheme(kind: Union[SchemeKind, str], K: float, M: int, design: Optional[DesignConfig] = None) -> Scheme:
    """
    Build a scheme.

    PROPOSED designs (or reuses) the codebook for (K, M); design overrides
    the default design settings.
    """
    kind = SchemeKind(kind)
    if kind is SchemeKind.CPS:
        return Scheme(kind, None, "none")
    if kind is SchemeKind.PROPOSED:
        design = design or design_config(K, M)
        if design.K != K or design.M != M:
            raise ValueError(f"design settings are for K={design.K}, M={design.M}, not K={K}, M={M}")
        return Scheme(kind, cached_design(design), "optimal")
    if kind is SchemeKind.ME_UDPS:
        return Scheme(kind, uniform_codebook(M, K), "optimal")
    return Scheme(kind, uniform_codebook(M, K), "conventional")


# ========== SNR ==========

def _positions(layout) -> np.ndarray:
    if isinstance(layout, ElementLayout):
        return layout.positions
    return np.asarray(layout, dtype=float).ravel()


def snr_general(draw: ChannelDraw, layout, shifts, geometry: LinkGeometry) -> float:
    """
    SNR for arbitrary element positions and per-element shifts.

    Args:
        layout: ElementLayout or raw position vector (meters)
        shifts: per-element theta_i

    Raises:
        LayoutMismatchError: lengths differ from draw.N
    """
    x = _positions(layout)
    shifts = np.asarray(shifts, dtype=float).ravel()
    if x.size != draw.N or shifts.size != draw.N:
        raise LayoutMismatchError(
            f"draw has {draw.N} elements, layout {x.size}, shifts {shifts.size}"
        )
    total_phase = draw.phases - phase_offset(x, geometry) + shifts
    combined = np.sum(np.abs(draw.gains) * np.exp(1j * total_phase))
    return float(snr_prefactor(geometry) * abs(combined) ** 2)


def snr_aligned_dps(draw: ChannelDraw, codebook: PhaseCodebook, geometry: LinkGeometry) -> float:
    """SNR on an offset-free layout with theta_i = quantize(phi_i)"""
    shifts = quantize(draw.phases, codebook)
    combined = np.sum(np.abs(draw.gains) * np.exp(1j * (draw.phases + shifts)))
    return float(snr_prefactor(geometry) * abs(combined) ** 2)


def snr_cps(draw: ChannelDraw, geometry: LinkGeometry) -> float:
    """Continuous shifts: every element co-phased"""
    return float(snr_prefactor(geometry) * np.sum(np.abs(draw.gains)) ** 2)


def select_shifts(phases, layout, geometry: LinkGeometry, codebook: PhaseCodebook):
    """
    Per-element DPS choice for the total phase phi_i - offset_i.

    Broadcasts over leading trial dimensions of phases. On an offset-free
    layout this is quantize(phases).
    """
    offsets = phase_offset(_positions(layout), geometry)
    return quantize(wrap_phase(np.asarray(phases, dtype=float) - offsets), codebook)


def block_snr(scheme: Scheme, gains: np.ndarray, positions: np.ndarray, geometry: LinkGeometry, prefactor: float) -> np.ndarray:
    """Per-trial SNR of a (trials, N) block of gains"""
    amplitude = np.abs(gains)
    if scheme.codebook is None:
        return prefactor * np.sum(amplitude, axis=-1) ** 2
    phases = np.angle(gains)
    offsets = phase_offset(positions, geometry)
    total = wrap_phase(phases - offsets)
    shifts = quantize(total, scheme.codebook)
    combined = np.sum(amplitude * np.exp(1j * (total + shifts)), axis=-1)
    return prefactor * np.abs(combined) ** 2


# ========== MONTE CARLO ==========

def average_rate_mc(
    scheme: Union[Scheme, SchemeKind, str],
    spec: RicianSpec,
    geometry: LinkGeometry,
    trials: int,
    seed: int,
    layout: Optional[ElementLayout] = None,
    M: Optional[int] = None,
    block_size: Optional[int] = None,
    workers: int = 1,
) -> RateEstimate:
    """
    Average rate E[log2(1 + gamma)] by Monte Carlo.

    Block b of trials draws from Philox(SeedSequence(seed, spawn_key=(b,)));
    per-trial rates are reduced in trial order, so the estimate depends only
    on (seed, trials, block_size), never on workers.

    Args:
        scheme: Scheme, or a SchemeKind built with make_scheme(kind, spec.K, M)
        layout: element positions; defaults to the scheme's own layout
        M: codebook size when scheme is a SchemeKind (default harness.M)

    Returns:
        RateEstimate with 1.96 s / sqrt(trials) half width
    """
    rates = trial_rates(scheme, spec, geometry, trials, seed, layout, M, block_size, workers)
    return estimate_from_rates(rates, seed)


def trial_rates(
    scheme: Union[Scheme, SchemeKind, str],
    spec: RicianSpec,
    geometry: LinkGeometry,
    trials: int,
    seed: int,
    layout: Optional[ElementLayout] = None,
    M: Optional[int] = None,
    block_size: Optional[int] = None,
    workers: int = 1,
) -> np.ndarray:
    """Per-trial log2(1 + gamma) in trial order; arguments as average_rate_mc"""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not isinstance(scheme, Scheme):
        scheme = make_scheme(scheme, spec.K, M or int(config["harness"]["M"]))
    if layout is None:
        layout = scheme.layout_for(spec.N, geometry)
    if layout is not None and layout.N != spec.N:
        raise LayoutMismatchError(f"layout has {layout.N} elements but spec.N = {spec.N}")
    positions = np.zeros(spec.N) if layout is None else layout.positions
    block_size = block_size or int(config["monte_carlo"]["block_size"])
    prefactor = snr_prefactor(geometry)

    def run_block(bounds):
        b, start, stop = bounds
        nlos = draw_nlos_block(block_rng(seed, b), stop - start, spec.N)
        gains = cascaded_gain(spec.K, nlos, positions, geometry)
        return np.log2(1.0 + block_snr(scheme, gains, positions, geometry, prefactor))

    blocks = block_bounds(trials, block_size)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return np.concatenate(list(pool.map(run_block, blocks)))
    return np.concatenate([run_block(bounds) for bounds in blocks])


def estimate_from_rates(rates: np.ndarray, seed: int) -> RateEstimate:
    """Mean and 1.96 s / sqrt(n) half width of per-trial rates"""
    rates = np.asarray(rates, dtype=float)
    trials = rates.size
    std = float(np.std(rates, ddof=1)) if trials > 1 else 0.0
    return RateEstimate(
        mean=float(np.mean(rates)),
        half_ci95=CI95_Z * std / np.sqrt(trials),
        trials=trials,
        seed=seed,
        std=std,
    )


# ========== UPPER BOUNDS ==========

def quantizer_cells(codebook: PhaseCodebook):
    """
    Decision arcs of the quantizer.

    Returns:
        list of (theta, (a, b)): phases in [a, b] are mapped to theta; arcs
        may start below -pi
    """
    centers = np.sort(wrap_phase(-codebook.shifts))
    M = centers.size
    cells = []
    for k in range(M):
        prev_c = centers[k - 1] if k > 0 else centers[-1] - 2.0 * np.pi
        next_c = centers[k + 1] if k < M - 1 else centers[0] + 2.0 * np.pi
        arc = (0.5 * (prev_c + centers[k]), 0.5 * (centers[k] + next_c))
        cells.append((wrap_phase(-centers[k]), arc))
    return cells


def expected_residual_phasor(K: float, codebook: PhaseCodebook, quadrature_points: Optional[int] = None) -> complex:
    """
    E[|h| e^{j residual(phi_h)}] under the Rician channel.

    Raises:
        QuadratureError: the cells' masses do not add up to 1 and E|h|
    """
    quadrature_points = quadrature_points or int(config["design"]["quadrature_points"])
    cells = quantizer_cells(codebook)
    mass = sum(arc_mass(K, arc, "unweighted", quadrature_points) for _, arc in cells)
    amplitude_mass = sum(arc_mass(K, arc, "amplitude", quadrature_points) for _, arc in cells)
    if not np.isfinite(mass) or abs(mass - 1.0) > MASS_TOL:
        raise QuadratureError(f"quantizer cells hold probability {mass!r} (K={K:g}, {quadrature_points} points)")
    expected_amplitude = mean_amplitude(K)
    if not np.isfinite(amplitude_mass) or abs(amplitude_mass - expected_amplitude) > MASS_TOL * max(1.0, expected_amplitude):
        raise QuadratureError(
            f"quantizer cells hold amplitude mass {amplitude_mass!r}, expected E|h| = {expected_amplitude!r} (K={K:g})"
        )
    return complex(sum(
        np.exp(1j * theta) * joint_amplitude_phase_moment(K, arc, "amplitude", quadrature_points)
        for theta, arc in cells
    ))


def rate_upper_bound(
    spec: RicianSpec,
    codebook: PhaseCodebook,
    geometry: LinkGeometry,
    quadrature_points: Optional[int] = None,
) -> float:
    """
    Jensen bound log2(1 + prefactor (N + N(N-1) |E z|^2)) on the aligned-DPS rate.

    E|z|^2 = E|h|^2 = 1, so the N term is exact; E z comes from quadrature.
    """
    Ez = expected_residual_phasor(spec.K, codebook, quadrature_points)
    N = spec.N
    return float(np.log2(1.0 + snr_prefactor(geometry) * (N + N * (N - 1) * abs(Ez) ** 2)))


def cps_upper_bound(spec: RicianSpec, geometry: LinkGeometry) -> float:
    """Jensen bound for CPS: |E z| = E|h|"""
    N = spec.N
    Eh = mean_amplitude(spec.K)
    return float(np.log2(1.0 + snr_prefactor(geometry) * (N + N * (N - 1) * Eh ** 2)))
