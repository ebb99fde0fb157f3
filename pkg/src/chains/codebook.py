"""
Non-uniform discrete phase-shift codebook design and the runtime quantizer.

The design is a circular Lloyd iteration on a discretized phase density:
PARTITION assigns every phase node to its nearest shift, CENTROID moves each
shift to the best point of its cell. With objective="absolute_error" the
best point is the weighted median of the cell; with "resultant" it is the
direction of the cell's resultant vector.
"""

from functools import lru_cache
from typing import List, Tuple

import numpy as np

from src.tools.phase_density import mean_amplitude, phase_density
from src.utils.circular import wrap_phase
from src.utils.errors import QuadratureError
from src.utils.progress import warn
from src.utils.state import DesignConfig, PhaseCodebook

TWO_PI = 2.0 * np.pi
TIE_TOL = 1e-12
MONOTONE_SLACK = 1e-12


# ========== QUANTIZER ==========

def quantize_index(phi, codebook: PhaseCodebook):
    """Index into codebook.shifts of the shift minimizing |wrap(phi + theta)|"""
    shifts = codebook.shifts
    M = shifts.size
    phi = np.asarray(phi, dtype=float)
    target = wrap_phase(-phi)
    hi = np.searchsorted(shifts, target) % M
    lo = (hi - 1) % M
    d_lo = np.abs(wrap_phase(phi + shifts[lo]))
    d_hi = np.abs(wrap_phase(phi + shifts[hi]))
    # exact ties go to the numerically smaller shift
    pick_hi = (d_hi < d_lo) | ((d_hi == d_lo) & (shifts[hi] < shifts[lo]))
    return np.where(pick_hi, hi, lo)


def quantize(phi, codebook: PhaseCodebook):
    """
    Nearest codebook shift theta* = argmin |wrap(phi + theta)|.

    Ties go to the smaller theta. Vectorized over phi.
    """
    chosen = codebook.shifts[quantize_index(phi, codebook)]
    if np.ndim(chosen) == 0:
        return float(chosen)
    return chosen


def residual(phi, codebook: PhaseCodebook):
    """Phase error wrap(phi + quantize(phi)) left after DPS alignment"""
    return wrap_phase(np.asarray(phi, dtype=float) + quantize(phi, codebook))


# ========== DESIGN ==========

def design_grid(config: DesignConfig) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Discretized design distribution.

    Returns:
        nodes -pi + 2pi k / Q, normalized node weights, and the total mass
        (E|h| when amplitude-weighted, 1 otherwise)
    """
    Q = config.quadrature_points
    nodes = -np.pi + TWO_PI * np.arange(Q) / Q
    weights = phase_density(config.K, nodes, config.phase_model, config.weighting) * (TWO_PI / Q)
    total = float(np.sum(weights))
    if not np.isfinite(total) or total <= 0:
        raise QuadratureError(
            f"design density for K={config.K:g} ({config.phase_model}, {config.weighting}) "
            f"has total mass {total!r} on {Q} nodes"
        )
    mass = mean_amplitude(config.K) if config.weighting == "amplitude" else 1.0
    return nodes, weights / total, mass


def _distances(shifts: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    return np.abs(wrap_phase(nodes[:, None] + shifts[None, :]))


def partition(shifts: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """
    (Q, M) assignment matrix.

    Each row sums to 1; a node equidistant from several shifts is shared
    equally between them so a symmetric codebook stays symmetric.
    """
    d = _distances(shifts, nodes)
    nearest = d <= d.min(axis=1, keepdims=True) + TIE_TOL
    return nearest / nearest.sum(axis=1, keepdims=True)


def _weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    k = int(np.searchsorted(cum, 0.5 * cum[-1]))
    return float(values[order][min(k, order.size - 1)])


def lloyd_step(shifts, nodes: np.ndarray, weights: np.ndarray, objective: str = "absolute_error") -> np.ndarray:
    """
    One PARTITION + CENTROID pass.

    Shifts keep their order; a shift whose cell carries no weight stays put.
    """
    shifts = np.asarray(shifts, dtype=float)
    cell_weights = weights[:, None] * partition(shifts, nodes)
    updated = shifts.copy()

    for m in range(shifts.size):
        w = cell_weights[:, m]
        members = w > 0
        if not np.any(members):
            continue
        if objective == "absolute_error":
            # position of each node along the arc centred on the cell's codepoint
            offsets = wrap_phase(nodes[members] + shifts[m])
            updated[m] = wrap_phase(shifts[m] - _weighted_median(offsets, w[members]))
        elif objective == "resultant":
            moment = np.sum(w[members] * np.exp(1j * nodes[members]))
            if abs(moment) > 0:
                updated[m] = wrap_phase(-np.angle(moment))
        else:
            raise ValueError(f"unknown objective '{objective}'")
    return updated


def codebook_loss(shifts, nodes: np.ndarray, weights: np.ndarray, objective: str = "absolute_error") -> float:
    """
    Design loss (lower is better).

    absolute_error: E[w |residual|]; resultant: -E[w cos(residual)], the
    real part of the rotated resultant, which Lloyd steps never decrease.
    """
    nearest = _distances(np.asarray(shifts, dtype=float), nodes).min(axis=1)
    if objective == "absolute_error":
        return float(np.sum(weights * nearest))
    if objective == "resultant":
        return float(-np.sum(weights * np.cos(nearest)))
    raise ValueError(f"unknown objective '{objective}'")


def _summary(shifts: np.ndarray, nodes: np.ndarray, weights: np.ndarray, mass: float) -> Tuple[float, float]:
    """(|E[w e^{j residual}]|^2, E[|residual|]) under the design weights"""
    nearest = _distances(shifts, nodes)
    assign = partition(shifts, nodes)
    signed = wrap_phase(nodes[:, None] + shifts[None, :])
    resultant = mass * np.sum(weights[:, None] * assign * np.exp(1j * signed))
    mean_abs = float(np.sum(weights * nearest.min(axis=1)))
    return float(abs(resultant) ** 2), mean_abs


def start_grids(M: int, restarts: int) -> List[np.ndarray]:
    """
    Initial codebooks: the uniform grid {-pi + 2pi k / M} first, then copies
    rotated by fractions of the grid step. The half-step rotation is also
    symmetric under negation.
    """
    base = -np.pi + TWO_PI * np.arange(M) / M
    step = TWO_PI / M
    order = [0.5] + [j / restarts for j in range(1, restarts) if j / restarts != 0.5]
    return [base] + [wrap_phase(base + f * step) for f in order[: restarts - 1]]


def _lloyd(shifts: np.ndarray, nodes: np.ndarray, weights: np.ndarray, config: DesignConfig):
    """Iterate from one start; returns (best shifts, best loss, history, converged, iterations)"""
    loss = codebook_loss(shifts, nodes, weights, config.objective)
    best_shifts, best_loss = shifts, loss
    history = []
    converged = False
    iterations = 0

    for iterations in range(1, config.max_iter + 1):
        shifts = lloyd_step(shifts, nodes, weights, config.objective)
        new_loss = codebook_loss(shifts, nodes, weights, config.objective)
        assert new_loss <= loss + MONOTONE_SLACK * max(1.0, abs(loss)), (
            f"design loss increased from {loss!r} to {new_loss!r} at iteration {iterations}"
        )
        history.append(new_loss)
        if new_loss < best_loss:
            best_shifts, best_loss = shifts, new_loss

        change = abs(loss - new_loss)
        loss = new_loss
        if change <= config.tol * max(abs(loss), np.finfo(float).tiny):
            converged = True
            break
    return best_shifts, best_loss, history, converged, iterations


def design_codebook(config: DesignConfig) -> PhaseCodebook:
    """
    Design the M-shift codebook for a Rician factor K.

    Starts from the uniform grid {-pi + 2pi k / M}, iterates Lloyd steps until
    the relative loss change drops below config.tol and returns the sorted
    shifts. Hitting max_iter returns the best iterate with converged=False.
    With config.restarts > 1 the iteration is repeated from rotated grids and
    the lowest-loss result wins (ties keep the uniform-grid start).

    With the default restarts=1 the result is the symmetric fixed point
    reached from the uniform grid, not a global optimum of the loss; for
    K=4, M=4 a rotated start reaches a strictly lower loss. The reference
    codebooks are these fixed points.
    """
    nodes, weights, mass = design_grid(config)

    best = None
    for start in start_grids(config.M, config.restarts):
        run = _lloyd(start, nodes, weights, config)
        if not run[3]:
            warn(
                f"codebook design (K={config.K:g}, M={config.M}) did not converge in "
                f"{config.max_iter} iterations; returning best iterate"
            )
        if best is None or run[1] < best[1] - MONOTONE_SLACK:
            best = run
    best_shifts, _, history, converged, iterations = best

    final = np.sort(wrap_phase(best_shifts))
    objective_value, mean_abs = _summary(final, nodes, weights, mass)
    return PhaseCodebook(
        shifts=final,
        K=config.K,
        objective_value=objective_value,
        weighting=config.weighting,
        objective=config.objective,
        phase_model=config.phase_model,
        converged=converged,
        iterations=iterations,
        mean_abs_error=mean_abs,
        history=tuple(history),
    )


@lru_cache(maxsize=64)
def cached_design(config: DesignConfig) -> PhaseCodebook:
    """design_codebook memoized per settings (codebooks are immutable)"""
    return design_codebook(config)
