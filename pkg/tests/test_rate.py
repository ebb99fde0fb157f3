"""
Test SNR evaluation, Monte Carlo rates and the closed-form bounds

Run: python tests/test_rate.py
"""

import os
import sys
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pytest

from src.chains.rate import (
    average_rate_mc,
    cps_upper_bound,
    expected_residual_phasor,
    make_scheme,
    quantizer_cells,
    rate_upper_bound,
    select_shifts,
    snr_aligned_dps,
    snr_cps,
    snr_general,
    trial_rates,
)
from src.agents.supervisor import cudps_rate
from src.tools.channel import draw_channel, snr_prefactor
from src.tools.phase_density import mean_amplitude
from src.tools.placement import conventional_positions, optimal_positions
from src.utils.config import config, default_geometry
from src.utils.errors import LayoutMismatchError
from src.utils.state import ChannelDraw, RicianSpec, SchemeKind, uniform_codebook

GEOMETRY = default_geometry().to_link_geometry()
PREFACTOR = snr_prefactor(GEOMETRY)


def test_snr_general_examples():
    """Hand-computed SNRs on an all-zero layout"""
    print("=" * 60)
    print("TEST 1: snr_general")
    print("=" * 60)

    draw = ChannelDraw(gains=np.ones(5), phases=np.zeros(5))
    assert snr_general(draw, np.zeros(5), np.zeros(5), GEOMETRY) == pytest.approx(PREFACTOR * 25)
    print("✓ coherent sum: prefactor * N^2")

    draw = ChannelDraw(gains=np.ones(2), phases=np.zeros(2))
    assert snr_general(draw, np.zeros(2), [0.0, np.pi], GEOMETRY) == pytest.approx(0.0, abs=1e-20)
    print("✓ opposite shifts cancel")

    gains = np.array([0.5, 1.2, 0.8])
    phases = np.array([0.3, -1.1, 2.5])
    shifts = np.array([-0.25, 1.0, -2.0])
    expected = PREFACTOR * abs(np.sum(gains * np.exp(1j * (phases + shifts)))) ** 2
    draw = ChannelDraw(gains=gains, phases=phases)
    assert snr_general(draw, np.zeros(3), shifts, GEOMETRY) == pytest.approx(expected, rel=1e-12)

    single = ChannelDraw(gains=[2.0], phases=[0.7])
    assert snr_general(single, [0.0], [-0.7], GEOMETRY) == pytest.approx(4 * PREFACTOR)
    print("✓ N=3 explicit sum, N=1 raw positions")

    with pytest.raises(LayoutMismatchError):
        snr_general(draw, np.zeros(4), shifts, GEOMETRY)
    with pytest.raises(LayoutMismatchError):
        snr_general(draw, np.zeros(3), shifts[:2], GEOMETRY)
    print("✓ length mismatches rejected")


def test_aligned_dps_matches_general():
    """On the offset-free layout quantizing phi_i is the same as the general form"""
    spec = RicianSpec(K=4.0, N=12)
    layout = optimal_positions(spec.N, GEOMETRY)
    scheme = make_scheme(SchemeKind.PROPOSED, spec.K, 4)
    rng = np.random.default_rng(31)
    for _ in range(1000):
        draw = draw_channel(spec, layout, GEOMETRY, rng)
        shifts = select_shifts(draw.phases, layout, GEOMETRY, scheme.codebook)
        general = snr_general(draw, layout, shifts, GEOMETRY)
        aligned = snr_aligned_dps(draw, scheme.codebook, GEOMETRY)
        assert general == pytest.approx(aligned, rel=1e-9)
    print("\n✓ 1000 draws: snr_aligned_dps == snr_general on the optimal layout")


def test_cps_dominates_dps():
    """Continuous shifts beat any discrete choice; a 2^16-level grid is as good"""
    spec = RicianSpec(K=2.0, N=8)
    layout = optimal_positions(spec.N, GEOMETRY)
    coarse = uniform_codebook(4, spec.K)
    fine = uniform_codebook(2 ** 16, spec.K)
    rng = np.random.default_rng(8)
    for _ in range(500):
        draw = draw_channel(spec, layout, GEOMETRY, rng)
        cps = snr_cps(draw, GEOMETRY)
        assert cps >= snr_aligned_dps(draw, coarse, GEOMETRY) * (1 - 1e-12)
        assert abs(snr_aligned_dps(draw, fine, GEOMETRY) - cps) <= 1e-4 * cps
    print("\n✓ CPS >= DPS per draw; M=2^16 within 1e-4 of CPS")


def test_monte_carlo_determinism():
    """Same seed -> identical estimate, whatever the worker count"""
    print("\n" + "=" * 60)
    print("TEST 2: Monte Carlo estimates")
    print("=" * 60)

    spec = RicianSpec(K=4.0, N=20)
    a = average_rate_mc(SchemeKind.PROPOSED, spec, GEOMETRY, 5000, seed=7, M=4)
    b = average_rate_mc(SchemeKind.PROPOSED, spec, GEOMETRY, 5000, seed=7, M=4)
    c = average_rate_mc(SchemeKind.PROPOSED, spec, GEOMETRY, 5000, seed=7, M=4, workers=4)
    assert a.mean == b.mean == c.mean
    assert a.half_ci95 == b.half_ci95 == c.half_ci95
    assert a.half_ci95 == pytest.approx(1.96 * a.std / np.sqrt(5000))
    print(f"✓ {a.mean:.6f} +/- {a.half_ci95:.6f} with 1 and 4 workers")

    other = average_rate_mc(SchemeKind.PROPOSED, spec, GEOMETRY, 5000, seed=8, M=4)
    assert other.mean != a.mean
    assert abs(other.mean - a.mean) < 4 * np.hypot(a.half_ci95, other.half_ci95)
    print(f"✓ seed 8 gives {other.mean:.6f}, consistent with seed 7")

    by_name = average_rate_mc("CPS", spec, GEOMETRY, 1000, seed=7)
    assert by_name.trials == 1000 and by_name.seed == 7

    with pytest.raises(ValueError):
        average_rate_mc(SchemeKind.CPS, spec, GEOMETRY, 0, seed=7)
    with pytest.raises(LayoutMismatchError):
        average_rate_mc(SchemeKind.ME_UDPS, spec, GEOMETRY, 10, seed=7,
                        layout=optimal_positions(5, GEOMETRY), M=4)


def test_deterministic_channel_limit():
    """K -> inf: h ~ 1 on every element, the rate is log2(1 + prefactor N^2)"""
    spec = RicianSpec(K=1e9, N=10)
    exact = np.log2(1 + PREFACTOR * spec.N ** 2)
    for kind in (SchemeKind.CPS, SchemeKind.ME_UDPS):
        est = average_rate_mc(kind, spec, GEOMETRY, 200, seed=1, M=4)
        assert est.mean == pytest.approx(exact, rel=1e-3)
    bound = rate_upper_bound(spec, uniform_codebook(4, spec.K), GEOMETRY)
    assert bound == pytest.approx(exact, rel=1e-6)
    assert cps_upper_bound(spec, GEOMETRY) == pytest.approx(exact, rel=1e-6)
    print(f"\n✓ K=1e9: rates and bounds at {exact:.4f} bits/s/Hz")


def test_residual_phasor_uniform_density():
    """K=0, uniform M=4: residual uniform on [-pi/4, pi/4] and independent of |h|"""
    cells = quantizer_cells(uniform_codebook(4))
    widths = [b - a for _, (a, b) in cells]
    assert sum(widths) == pytest.approx(2 * np.pi)

    Ez = expected_residual_phasor(0.0, uniform_codebook(4), 4096)
    expected = mean_amplitude(0.0) * np.sin(np.pi / 4) / (np.pi / 4)
    assert Ez.real == pytest.approx(expected, abs=1e-8)
    assert abs(Ez.imag) < 1e-10
    print(f"\n✓ E[|h| e^(j res)] = {Ez.real:.8f} (closed form {expected:.8f})")


def test_jensen_bound_dominates():
    """Bound >= Monte Carlo rate for K in {2, 4}, M in {4, 8}, N in {10, 50}"""
    print("\n" + "=" * 60)
    print("TEST 3: Jensen bound")
    print("=" * 60)

    for K in (2.0, 4.0):
        for M in (4, 8):
            scheme = make_scheme(SchemeKind.PROPOSED, K, M)
            for N in (10, 50):
                spec = RicianSpec(K=K, N=N)
                est = average_rate_mc(scheme, spec, GEOMETRY, 4000, seed=11)
                bound = rate_upper_bound(spec, scheme.codebook, GEOMETRY)
                gap = bound - est.mean
                print(f"  K={K:g} M={M} N={N}: bound {bound:.4f}, MC {est.mean:.4f} +/- {est.half_ci95:.4f}")
                assert gap >= -3 * est.half_ci95
                assert bound <= cps_upper_bound(spec, GEOMETRY) + 1e-12
                if N == 50:
                    assert gap < 0.15
    print("✓ bound dominates everywhere, within 0.15 bits/s/Hz at N=50")


def test_scheme_ordering():
    """CPS >= PROPOSED >= ME_UDPS >= C_UDPS at the reference point, small CPS gap"""
    h = config["harness"]
    K, M, N = float(h["K"]), int(h["M"]), int(h["N"])
    spec = RicianSpec(K=K, N=N)
    trials = 5000

    est = {kind: average_rate_mc(make_scheme(kind, K, M), spec, GEOMETRY, trials, seed=3)
           for kind in (SchemeKind.CPS, SchemeKind.PROPOSED, SchemeKind.ME_UDPS)}
    est[SchemeKind.C_UDPS] = cudps_rate(
        make_scheme(SchemeKind.C_UDPS, K, M), spec, GEOMETRY, h["cudps_angle_sweep"], trials, seed=3
    )

    order = [SchemeKind.CPS, SchemeKind.PROPOSED, SchemeKind.ME_UDPS, SchemeKind.C_UDPS]
    print("\n" + ", ".join(f"{k.value} {est[k].mean:.4f}" for k in order))
    for hi, lo in zip(order, order[1:]):
        assert est[hi].mean >= est[lo].mean - 3 * (est[hi].half_ci95 + est[lo].half_ci95), f"{hi} < {lo}"
    gap = (est[SchemeKind.CPS].mean - est[SchemeKind.PROPOSED].mean) / est[SchemeKind.CPS].mean
    assert 0 <= gap < 0.02
    print(f"✓ ordering holds, CPS-PROPOSED gap {100 * gap:.2f}%")


def test_cudps_interval_uses_per_trial_means():
    """Angles share their draws, so the interval comes from angle-averaged trials"""
    K, M, N, trials = 4.0, 4, 10, 3000
    scheme = make_scheme(SchemeKind.C_UDPS, K, M)
    spec = RicianSpec(K=K, N=N)
    angles = [0.2, 0.5, 1.0]

    est = cudps_rate(scheme, spec, GEOMETRY, angles, trials, seed=4)
    per_angle = np.stack([trial_rates(scheme, spec, GEOMETRY.with_cos_sum(c), trials, 4) for c in angles])
    averaged = per_angle.mean(axis=0)
    assert est.mean == pytest.approx(float(np.mean(averaged)), rel=1e-12)
    assert est.half_ci95 == pytest.approx(1.96 * np.std(averaged, ddof=1) / np.sqrt(trials), rel=1e-12)
    assert est.trials == trials

    independent = np.sqrt(sum(
        average_rate_mc(scheme, spec, GEOMETRY.with_cos_sum(c), trials, 4).half_ci95 ** 2 for c in angles
    )) / len(angles)
    print(f"\n✓ C_UDPS half width {est.half_ci95:.4f} (independence formula would give {independent:.4f})")
    assert est.half_ci95 > independent

    single = cudps_rate(scheme, spec, GEOMETRY, [0.5], trials, seed=4)
    direct = average_rate_mc(scheme, spec, GEOMETRY.with_cos_sum(0.5), trials, 4)
    assert (single.mean, single.half_ci95) == pytest.approx((direct.mean, direct.half_ci95), rel=1e-12)
    with pytest.raises(ValueError):
        cudps_rate(scheme, spec, GEOMETRY, [], trials, seed=4)


def test_conventional_layout_scheme():
    scheme = make_scheme(SchemeKind.C_UDPS, 4.0, 4)
    layout = scheme.layout_for(6, GEOMETRY)
    assert np.allclose(layout.positions, conventional_positions(6, GEOMETRY.lam).positions)
    assert make_scheme(SchemeKind.CPS, 4.0, 4).layout_for(6, GEOMETRY) is None
    with pytest.raises(ValueError):
        make_scheme("NOT_A_SCHEME", 4.0, 4)
    print("✓ scheme layouts")


if __name__ == "__main__":
    print("IRS Simulator - Rate Tests")
    print("=" * 60)

    try:
        test_snr_general_examples()
        test_aligned_dps_matches_general()
        test_cps_dominates_dps()
        test_monte_carlo_determinism()
        test_deterministic_channel_limit()
        test_residual_phasor_uniform_density()
        test_jensen_bound_dominates()
        test_scheme_ordering()
        test_cudps_interval_uses_per_trial_means()
        test_conventional_layout_scheme()
        print("\n✅ ALL RATE TESTS PASSED!")
    except Exception as e:
        print(f"\n❌ TEST FAILED: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)
