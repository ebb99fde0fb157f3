"""
Cascaded S -> element -> D channel model.

Each element sees h = sqrt(K/(K+1)) + sqrt(1/(K+1)) * g * e^{j 2pi x cos(phi_rd)/lam}
with g ~ CN(0, 1), independently across elements. E|h|^2 = 1 for every K.
"""

from typing import Optional

import numpy as np

from src.utils.circular import wrap_phase
from src.utils.errors import LayoutMismatchError
from src.utils.state import ChannelDraw, ElementLayout, LinkGeometry, RicianSpec

INV_SQRT2 = 1.0 / np.sqrt(2.0)


def sample_nlos(rng, size=None):
    """
    CN(0, 1) draws: independent real and imaginary parts, each N(0, 1/2).

    Args:
        rng: numpy Generator (or anything with standard_normal)
        size: None for one complex scalar, else an array shape

    Returns:
        complex or complex ndarray
    """
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    z = (np.asarray(re) + 1j * np.asarray(im)) * INV_SQRT2
    if size is None:
        return complex(z)
    return z


def los_nlos_weights(K: float):
    """(sqrt(K/(K+1)), sqrt(1/(K+1)))"""
    if not K >= 0:
        raise ValueError(f"Rician factor K must be >= 0, got {K}")
    return np.sqrt(K / (K + 1.0)), np.sqrt(1.0 / (K + 1.0))


def cascaded_gain(K: float, nlos, x, geometry: LinkGeometry):
    """
    Cascaded gain h of elements at positions x for given NLoS draws.

    Broadcasts over nlos and x, so a (trials, N) block of draws with an
    (N,) position vector gives a (trials, N) block of gains.
    """
    los, scatter = los_nlos_weights(K)
    rotation = np.exp(1j * 2.0 * np.pi * np.asarray(x, dtype=float) / geometry.lam * np.cos(geometry.phi_rd))
    h = los + scatter * np.asarray(nlos) * rotation
    if np.ndim(h) == 0:
        return complex(h)
    return h


def snr_prefactor(geometry: LinkGeometry) -> float:
    """P_s * beta0^2 / (d_sr^alpha * d_rd^alpha * sigma2)"""
    g = geometry
    return g.P_s * g.beta0 ** 2 / (g.d_sr ** g.alpha * g.d_rd ** g.alpha * g.sigma2)


def _positions(spec: RicianSpec, layout: Optional[ElementLayout]) -> np.ndarray:
    if layout is None:
        return np.zeros(spec.N)
    if layout.N != spec.N:
        raise LayoutMismatchError(f"layout has {layout.N} elements but spec.N = {spec.N}")
    return layout.positions


def draw_channel(spec: RicianSpec, layout: ElementLayout, geometry: LinkGeometry, rng) -> ChannelDraw:
    """One realization of all N cascaded gains"""
    x = _positions(spec, layout)
    gains = cascaded_gain(spec.K, sample_nlos(rng, spec.N), x, geometry)
    return ChannelDraw(gains=gains, phases=wrap_phase(np.angle(gains)))


def draw_nlos_block(rng, trials: int, N: int) -> np.ndarray:
    """(trials, N) CN(0, 1) draws; shared across schemes for common random numbers"""
    return sample_nlos(rng, (trials, N))


def draw_channel_batch(
    spec: RicianSpec,
    layout: Optional[ElementLayout],
    geometry: LinkGeometry,
    rng,
    trials: int,
) -> np.ndarray:
    """
    (trials, N) cascaded gains.

    layout=None places every element at the reference point; the gain
    distribution does not depend on positions, so CPS can skip placement.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    x = _positions(spec, layout)
    return cascaded_gain(spec.K, draw_nlos_block(rng, trials, spec.N), x, geometry)
