"""
Phase densities of the cascaded gain and quadrature over arcs of the circle.

With b = sqrt(K) cos(phi) and s = 1/sqrt(K+1):

    f(phi) = (1/pi) e^{-K sin^2 phi} [e^{-b^2}/2 + b (sqrt(pi)/2) erfc(-b)]
    g(phi) = (s/pi) e^{-K sin^2 phi} [b e^{-b^2}/2 + (sqrt(pi)/2) erfc(-b) (b^2 + 1/2)]

f is the density of arg(h); g(phi) dphi = E[|h| 1{arg h in dphi}], so
g/f is the mean amplitude given the phase. The Gaussian model replaces f
by a wrapped normal with variance 1/(2K), its large-K limit.
"""

from typing import Callable, Tuple

import numpy as np
from scipy import special, stats

from src.utils.circular import wrap_phase
from src.utils.config import config
from src.utils.errors import QuadratureError

TWO_PI = 2.0 * np.pi
SQRT_PI_2 = np.sqrt(np.pi) / 2.0

# Outside the core, e^{-K sin^2 phi} < e^{-80}; the back half circle is O(e^{-K})
CORE_EXPONENT = 80.0


def _check_K(K: float) -> float:
    if not K >= 0 or not np.isfinite(K):
        raise ValueError(f"Rician factor K must be finite and >= 0, got {K}")
    return float(K)


def rician_phase_pdf(K: float, phi):
    """Density of arg(h) on [-pi, pi); phi outside the range is wrapped"""
    K = _check_K(K)
    phi = wrap_phase(phi)
    b = np.sqrt(K) * np.cos(phi)
    envelope = np.exp(-K * np.sin(phi) ** 2)
    return envelope * (0.5 * np.exp(-b * b) + b * SQRT_PI_2 * special.erfc(-b)) / np.pi


def amplitude_weighted_phase_density(K: float, phi):
    """E[|h| delta(arg h - phi)]; integrates to E|h|"""
    K = _check_K(K)
    phi = wrap_phase(phi)
    b = np.sqrt(K) * np.cos(phi)
    s = 1.0 / np.sqrt(K + 1.0)
    envelope = np.exp(-K * np.sin(phi) ** 2)
    bracket = 0.5 * b * np.exp(-b * b) + SQRT_PI_2 * special.erfc(-b) * (b * b + 0.5)
    return s * envelope * bracket / np.pi


def gaussian_phase_pdf(K: float, phi):
    """
    Wrapped normal N(0, 1/(2K)).

    Summed over images when the spread is small, as a Fourier series when it
    is wide; K = 0 is the uniform density.
    """
    K = _check_K(K)
    phi = wrap_phase(phi)
    phi_arr = np.asarray(phi, dtype=float)
    sigma = 1.0 / np.sqrt(2.0 * K) if K > 0 else np.inf
    if K == 0.0:
        density = np.full(phi_arr.shape, 1.0 / TWO_PI)
    elif sigma <= np.pi:
        n_max = int(np.ceil(8.0 * sigma / TWO_PI)) + 1
        images = np.arange(-n_max, n_max + 1) * TWO_PI
        density = stats.norm.pdf(phi_arr[..., None] + images, scale=sigma).sum(axis=-1)
    else:
        k_max = int(np.ceil(np.sqrt(80.0) / sigma)) + 1
        k = np.arange(1, k_max + 1)
        terms = np.exp(-0.5 * (k * sigma) ** 2) * np.cos(phi_arr[..., None] * k)
        density = (1.0 + 2.0 * terms.sum(axis=-1)) / TWO_PI
    if np.ndim(density) == 0:
        return float(density)
    return density


def mean_amplitude(K: float) -> float:
    """E|h| in closed form (Rice mean with unit second moment)"""
    K = _check_K(K)
    s = 1.0 / np.sqrt(K + 1.0)
    half = K / 2.0
    return float(s * SQRT_PI_2 * ((1.0 + K) * special.ive(0, half) + K * special.ive(1, half)))


def conditional_mean_amplitude(K: float, phi):
    """E[|h| | arg h = phi] = g / f"""
    f = rician_phase_pdf(K, phi)
    g = amplitude_weighted_phase_density(K, phi)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(f > 0, g / np.where(f > 0, f, 1.0), 0.0)
    return ratio


def phase_density(K: float, phi, phase_model: str = "rician", weighting: str = "unweighted"):
    """
    Design density: the phase pdf of the chosen model, times the mean
    amplitude given the phase when amplitude-weighted.
    """
    if phase_model == "rician":
        if weighting == "amplitude":
            return amplitude_weighted_phase_density(K, phi)
        density = rician_phase_pdf(K, phi)
    elif phase_model == "gaussian":
        density = gaussian_phase_pdf(K, phi)
        if weighting == "amplitude":
            density = density * conditional_mean_amplitude(K, phi)
    else:
        raise ValueError(f"unknown phase_model '{phase_model}'")
    if weighting not in ("amplitude", "unweighted"):
        raise ValueError(f"unknown weighting '{weighting}'")
    return density


# ========== QUADRATURE ==========

def core_halfwidth(K: float) -> float:
    """Half width of the arc around 0 holding all but a negligible share of the mass"""
    if K <= CORE_EXPONENT:
        return np.pi
    return float(np.arcsin(np.sqrt(CORE_EXPONENT / K)))


def _core_pieces(a: float, b: float, w: float):
    """Intersections of [a, b] with the 2pi-periodic copies of [-w, w]"""
    if w >= np.pi:
        return [(a, b)]
    pieces = []
    k_lo = int(np.floor((a + w) / TWO_PI))
    k_hi = int(np.ceil((b - w) / TWO_PI))
    for k in range(k_lo, k_hi + 1):
        lo = max(a, -w + k * TWO_PI)
        hi = min(b, w + k * TWO_PI)
        if hi > lo:
            pieces.append((lo, hi))
    return pieces


def integrate_arc(func: Callable, a: float, b: float, K: float, points: int):
    """
    Composite midpoint rule for the integral of func over the arc [a, b].

    Only the parts of the arc inside the density's core are sampled, with
    `points` nodes each, so a sharp peak at large K is still resolved.
    """
    if points < 1:
        raise ValueError(f"points must be >= 1, got {points}")
    if not b > a:
        return 0.0
    b = min(b, a + TWO_PI)
    total = 0.0
    for lo, hi in _core_pieces(a, b, core_halfwidth(K)):
        h = (hi - lo) / points
        nodes = lo + (np.arange(points) + 0.5) * h
        total = total + np.sum(func(nodes)) * h
    if not np.all(np.isfinite(total)):
        raise QuadratureError(f"non-finite quadrature over [{a:.6g}, {b:.6g}] at K={K:g}")
    return total


def joint_amplitude_phase_moment(
    K: float,
    region: Tuple[float, float],
    weighting: str = "amplitude",
    quadrature_points: int = None,
    phase_model: str = "rician",
) -> complex:
    """
    E[w(h) e^{j arg h} 1{arg h in region}] with w = |h| or 1.

    Args:
        region: arc (a, b) running counterclockwise from a to b; b <= a is
            empty, b - a >= 2pi is the whole circle

    Returns:
        Complex moment
    """
    if quadrature_points is None:
        quadrature_points = int(config["design"]["quadrature_points"])
    a, b = float(region[0]), float(region[1])
    if not b > a:
        return 0j
    value = integrate_arc(
        lambda phi: phase_density(K, phi, phase_model, weighting) * np.exp(1j * phi),
        a, b, K, quadrature_points,
    )
    return complex(value)


def arc_mass(K: float, region: Tuple[float, float], weighting: str = "unweighted",
             quadrature_points: int = None, phase_model: str = "rician") -> float:
    """Integral of the (weighted) phase density over an arc"""
    if quadrature_points is None:
        quadrature_points = int(config["design"]["quadrature_points"])
    a, b = float(region[0]), float(region[1])
    return float(integrate_arc(lambda phi: phase_density(K, phi, phase_model, weighting), a, b, K, quadrature_points))
