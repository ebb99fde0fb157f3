"""
Element placement and the cross-element phase-distribution offset.

Element i sees the total phase phi_{h_i} - offset_i with
offset_i = 2pi x_i (cos phi_sr + cos phi_rd) / lam. Spacing elements by
lam / |cos phi_sr + cos phi_rd| makes every offset a multiple of 2pi, so all
elements share one phase distribution and one codebook fits them all.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from src.tools.channel import cascaded_gain, sample_nlos
from src.tools.rng import SeededStream
from src.utils.circular import circular_mean, wrap_diff, wrap_phase
from src.utils.config import config, default_geometry
from src.utils.errors import DegenerateGeometryError
from src.utils.progress import warn
from src.utils.state import ElementLayout, LinkGeometry


def optimal_positions(N: int, geometry: LinkGeometry, eps_angle: Optional[float] = None) -> ElementLayout:
    """
    Offset-free layout x_i = (i-1) lam / |cos phi_sr + cos phi_rd|.

    Raises:
        ValueError: N < 2
        DegenerateGeometryError: |cos sum| <= eps_angle
    """
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    if eps_angle is None:
        eps_angle = float(config["placement"]["eps_angle"])
    cos_sum = geometry.cos_sum
    if abs(cos_sum) <= eps_angle:
        raise DegenerateGeometryError(
            f"|cos(phi_sr) + cos(phi_rd)| = {abs(cos_sum):.3g} <= {eps_angle:g}; "
            "no finite spacing aligns the elements"
        )
    spacing = geometry.lam / abs(cos_sum)
    return ElementLayout(positions=np.arange(N) * spacing)


def conventional_positions(N: int, lam: float) -> ElementLayout:
    """Fixed quarter-wavelength array"""
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    if not lam > 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    return ElementLayout(positions=np.arange(N) * lam / 4.0)


def phase_offset(x, geometry: LinkGeometry):
    """wrap(2pi x (cos phi_sr + cos phi_rd) / lam), vectorized over x"""
    return wrap_phase(2.0 * np.pi * np.asarray(x, dtype=float) / geometry.lam * geometry.cos_sum)


def verify_alignment(layout: ElementLayout, geometry: LinkGeometry, tol: float = 1e-9) -> bool:
    """True iff every element's wrapped offset lies in (-tol, tol)"""
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    offsets = phase_offset(layout.positions, geometry)
    return bool(np.all(np.abs(offsets) < tol))


def check_aperture(layout: ElementLayout, max_aperture_m: Optional[float] = None) -> bool:
    """
    Warn (never raise) when the layout is physically implausibly long.

    Returns:
        False if the aperture exceeds max_aperture_m
    """
    if max_aperture_m is None:
        max_aperture_m = config["harness"].get("max_aperture_m")
    if max_aperture_m is None or layout.aperture <= max_aperture_m:
        return True
    warn(f"layout aperture {layout.aperture:.3f} m exceeds {max_aperture_m:g} m ({layout.N} elements)")
    return False


# ========== OFFSET PHENOMENON ==========

@dataclass(frozen=True, eq=False)
class OffsetReport:
    """Measured per-element phase offsets of one layout"""

    K: float
    cos_sum: float
    positions: np.ndarray
    circular_means: np.ndarray
    """circular mean of each element's total phase"""
    steps: np.ndarray
    """wrapped difference of adjacent circular means"""
    predicted_steps: np.ndarray
    """steps implied by phase_offset"""
    max_pairwise_ks: float
    """largest two-sample KS statistic between any two elements"""
    samples: int

    @property
    def max_step_error(self) -> float:
        return float(np.max(np.abs(wrap_diff(self.steps, self.predicted_steps))))


def measure_offsets(
    K: float,
    layout: ElementLayout,
    geometry: LinkGeometry,
    samples: int,
    seed: int,
    ks_samples: Optional[int] = None,
) -> OffsetReport:
    """
    Monte Carlo estimate of each element's total-phase distribution.

    Each element draws from its own fork of the seeded stream; the first
    ks_samples total phases of every element feed the pairwise KS test.
    """
    if samples < 2:
        raise ValueError(f"samples must be >= 2, got {samples}")
    ks_samples = min(samples, ks_samples or samples)
    stream = SeededStream(seed)
    offsets = phase_offset(layout.positions, geometry)

    means = np.empty(layout.N)
    kept = []
    for i, (x, offset) in enumerate(zip(layout.positions, offsets)):
        h = cascaded_gain(K, sample_nlos(stream.fork(), samples), x, geometry)
        total = wrap_phase(np.angle(h) - offset)
        means[i] = circular_mean(total)
        kept.append(total[:ks_samples])

    max_ks = 0.0
    for i in range(layout.N):
        for j in range(i + 1, layout.N):
            max_ks = max(max_ks, float(stats.ks_2samp(kept[i], kept[j]).statistic))

    return OffsetReport(
        K=K,
        cos_sum=geometry.cos_sum,
        positions=layout.positions,
        circular_means=means,
        steps=wrap_diff(means[1:], means[:-1]),
        predicted_steps=wrap_diff(-offsets[1:], -offsets[:-1]),
        max_pairwise_ks=max_ks,
        samples=samples,
    )


def phase_offset_experiment(
    K: float = 10.0,
    N: int = 5,
    spacing_wavelengths: float = 0.5,
    cos_sum: float = 0.2,
    samples: int = 1_000_000,
    seed: int = 0,
    ks_samples: Optional[int] = 100_000,
    geometry: Optional[LinkGeometry] = None,
) -> OffsetReport:
    """
    Offset phenomenon on a uniform array with the given spacing.

    With half-wavelength spacing and cos sum 0.2, adjacent elements'
    total-phase distributions are rotated by -0.2pi.
    """
    geometry = (geometry or default_geometry().to_link_geometry()).with_cos_sum(cos_sum)
    if not spacing_wavelengths > 0:
        raise ValueError(f"spacing_wavelengths must be > 0, got {spacing_wavelengths}")
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    layout = ElementLayout(positions=np.arange(N) * spacing_wavelengths * geometry.lam)
    return measure_offsets(K, layout, geometry, samples, seed, ks_samples)
